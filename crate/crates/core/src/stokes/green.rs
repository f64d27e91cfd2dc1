use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::assembly::assemble_stokes;
use super::solve::{solve_saddle, Backend, SolverOptions, StokesSolution};
use crate::error::{invalid, Result};
use crate::fem::{build_regularized_delta, frobenius, p2_gradients, sym, RegularizedDelta, TaylorHoodSpace};
use crate::mesh::{quadrature, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreenOptions {
    /// Scale of the regularized distance `(|x - z|^2 + kappa^2 h^2)^(1/2)`.
    pub kappa: f64,
    /// Mesh size `h` for bands and the regularized distance; defaults to the
    /// cell width `h_max / sqrt(3)` of Kuhn cube meshes.
    pub h: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self { kappa: 2.0, h: None, solver: SolverOptions { rel_tol: 1e-13, ..SolverOptions::default() } }
    }
}

/// Per-element sample of the strain magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenSample {
    pub distance: f64,
    pub sigma: f64,
    pub strain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandAverage {
    pub r_min: f64,
    pub r_max: f64,
    /// Volume-weighted mean of element-averaged `|eps(G_h)|`.
    pub mean_strain: f64,
    pub n_elements: usize,
}

#[derive(Debug, Clone)]
pub struct GreenReport {
    pub solution: StokesSolution,
    pub delta: RegularizedDelta,
    pub h: f64,
    /// `max_i |int r_i div G_h|` over pressure basis functions.
    pub divergence_residual: f64,
    pub profile: Vec<GreenSample>,
    /// Bands `[2h, 4h], [4h, 8h], [8h, 16h]` around the anchor.
    pub bands: Vec<BandAverage>,
}

impl GreenReport {
    pub fn bands_decay(&self) -> bool {
        self.bands.windows(2).all(|w| w[1].n_elements > 0 && w[1].mean_strain < w[0].mean_strain)
    }
}

/// Load `int delta eps(phi_J e_c)_{ij}` of the approximate Green system,
/// with `i, j` zero-based.
pub fn green_rhs(space: &TaylorHoodSpace, delta: &RegularizedDelta, i: usize, j: usize) -> Result<Vec<f64>> {
    if i > 2 || j > 2 {
        return Err(invalid(format!("component indices must lie in 0..3, got ({i}, {j})")));
    }
    let rule = quadrature(4)?;
    let geo = space.geometry(delta.tet);
    let scale = 6.0 * geo.volume;
    let mut f = vec![0.0; space.n_velocity_dofs()];
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let d = delta.eval_local(l);
        let g = p2_gradients(l, &geo.grad_lambda);
        for (k, &node) in space.tet_nodes(delta.tet).iter().enumerate() {
            for c in 0..3 {
                let mut e = 0.0;
                if c == i {
                    e += 0.5 * g[k][j];
                }
                if c == j {
                    e += 0.5 * g[k][i];
                }
                f[3 * node + c] += scale * w * d * e;
            }
        }
    }
    Ok(f)
}

/// Solves `a(G_h, v) + b(v, q_h) = int delta_z eps(v)_{ij}`, `b(G_h, r) = 0`
/// and reports the strain decay away from `z`.
pub fn approximate_green(
    space: &Arc<TaylorHoodSpace>,
    z: Point,
    i: usize,
    j: usize,
    mu: f64,
    opts: &GreenOptions,
) -> Result<GreenReport> {
    let delta = build_regularized_delta(space, z)?;
    let f = green_rhs(space, &delta, i, j)?;
    let system = assemble_stokes(space, mu)?;
    let np = space.n_pressure_dofs();
    let system = system.with_rhs(f, vec![0.0; np])?;
    let mut solution = solve_saddle(&system, &opts.solver)?;
    let mut div = vec![0.0; np];
    system.b.matvec(solution.velocity.coeffs(), &mut div);
    let mut divergence_residual = div.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if divergence_residual > 1e-10 && opts.solver.backend != Backend::Direct && space.n_velocity_dofs() < 200_000 {
        solution = solve_saddle(&system, &SolverOptions { backend: Backend::Direct, ..opts.solver.clone() })?;
        system.b.matvec(solution.velocity.coeffs(), &mut div);
        divergence_residual = div.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let h = opts.h.unwrap_or(space.mesh().h_max() / 3f64.sqrt());
    let rule = quadrature(2)?;
    let mut profile = Vec::with_capacity(space.mesh().n_tets());
    let mut volumes = Vec::with_capacity(space.mesh().n_tets());
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let c = geo.point(&[0.25; 4]);
        let r = ((c[0] - z[0]).powi(2) + (c[1] - z[1]).powi(2) + (c[2] - z[2]).powi(2)).sqrt();
        let mut strain = 0.0;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            strain += 6.0 * w * frobenius(&sym(&solution.velocity.gradient_local(t, l)));
        }
        profile.push(GreenSample { distance: r, sigma: (r * r + opts.kappa * opts.kappa * h * h).sqrt(), strain });
        volumes.push(geo.volume);
    }
    let bands = [(2.0, 4.0), (4.0, 8.0), (8.0, 16.0)]
        .iter()
        .map(|&(a, b)| {
            let (r_min, r_max) = (a * h, b * h);
            let (mut s, mut v, mut n) = (0.0, 0.0, 0);
            for (p, vol) in profile.iter().zip(&volumes) {
                if p.distance >= r_min && p.distance < r_max {
                    s += p.strain * vol;
                    v += vol;
                    n += 1;
                }
            }
            BandAverage { r_min, r_max, mean_strain: if v > 0.0 { s / v } else { 0.0 }, n_elements: n }
        })
        .collect();
    Ok(GreenReport { solution, delta, h, divergence_residual, profile, bands })
}
