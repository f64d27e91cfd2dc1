use std::sync::Arc;

use super::assembly::{assemble_rhs_constraint, assemble_stokes, rhs_divergence_form_local};
use super::solve::{solve_saddle, SolverOptions, StokesSolution};
use crate::error::Result;
use crate::fem::{sym, Mat3, TaylorHoodSpace};
use crate::mesh::Point;

/// A continuous velocity/pressure pair given by closures.
pub struct ExactSolution<'a> {
    pub velocity: &'a dyn Fn(Point) -> [f64; 3],
    /// `g[i][j] = d u_i / d x_j`
    pub gradient: &'a dyn Fn(Point) -> Mat3,
    pub pressure: &'a dyn Fn(Point) -> f64,
}

/// Discrete pair `(u_h, p_h)` with
/// `a(u - u_h, v_h) - int (p - p_h) div v_h = 0` and
/// `int r_h div (u - u_h) = 0` for all discrete test functions.
pub fn stokes_projection(
    space: &Arc<TaylorHoodSpace>,
    exact: &ExactSolution<'_>,
    mu: f64,
    opts: &SolverOptions,
) -> Result<StokesSolution> {
    let system = assemble_stokes(space, mu)?;
    let f = rhs_divergence_form_local(space, 6, &mut |_, _, x| {
        let e = sym(&(exact.gradient)(x));
        let p = (exact.pressure)(x);
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = 2.0 * mu * e[i][j] - if i == j { p } else { 0.0 };
            }
        }
        s
    })?;
    let g = assemble_rhs_constraint(
        space,
        &|x| {
            let gr = (exact.gradient)(x);
            gr[0][0] + gr[1][1] + gr[2][2]
        },
        6,
    )?;
    solve_saddle(&system.with_rhs(f, g)?, opts)
}
