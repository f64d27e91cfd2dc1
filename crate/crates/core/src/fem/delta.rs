use nalgebra::{SMatrix, SVector};

use super::{p2_values, TaylorHoodSpace};
use crate::error::{invalid, Result};
use crate::mesh::{locate_point, quadrature, Point};

/// Quadratic on the host tet `T_z` that reproduces point evaluation at `z`
/// against every quadratic: `int delta * v = v(z)`.
#[derive(Debug, Clone)]
pub struct RegularizedDelta {
    pub anchor: Point,
    pub tet: usize,
    /// Barycentric coordinates of the anchor in the host tet.
    pub anchor_bary: [f64; 4],
    /// Nodal coefficients in the local quadratic basis.
    pub coeffs: [f64; 10],
    pub norm_l1: f64,
    pub norm_l2: f64,
    pub norm_linf: f64,
}

impl RegularizedDelta {
    pub fn eval_local(&self, l: &[f64; 4]) -> f64 {
        p2_values(l).iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }

    /// Load vector entries `int delta * phi_i` for the ten local nodes, which
    /// equal the basis values at the anchor.
    pub fn local_load(&self) -> [f64; 10] {
        p2_values(&self.anchor_bary)
    }
}

/// Relative distance to the faces below which an anchor counts as on a face.
const INTERIOR_TOL: f64 = 1e-8;

pub fn build_regularized_delta(space: &TaylorHoodSpace, z: Point) -> Result<RegularizedDelta> {
    let (tet, bary) = locate_point(space.mesh(), z)?;
    // barycentric coordinate = distance to the opposite face / height
    if bary.iter().any(|&b| b <= INTERIOR_TOL) {
        return Err(invalid(format!("delta anchor {z:?} lies on a face or edge of tet {tet}")));
    }
    let geo = space.geometry(tet);
    let rule = quadrature(4)?;
    let scale = 6.0 * geo.volume;
    let mut mass = SMatrix::<f64, 10, 10>::zeros();
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let phi = p2_values(l);
        for i in 0..10 {
            for j in 0..10 {
                mass[(i, j)] += scale * w * phi[i] * phi[j];
            }
        }
    }
    let rhs = SVector::<f64, 10>::from(p2_values(&bary));
    let c = mass
        .cholesky()
        .ok_or_else(|| invalid("degenerate host tet for delta anchor"))?
        .solve(&rhs);
    let mut delta = RegularizedDelta {
        anchor: z,
        tet,
        anchor_bary: bary,
        coeffs: c.into(),
        norm_l1: 0.0,
        norm_l2: 0.0,
        norm_linf: 0.0,
    };
    let fine = quadrature(6)?;
    for (l, w) in fine.points.iter().zip(&fine.weights) {
        let v = delta.eval_local(l);
        delta.norm_l1 += scale * w * v.abs();
        delta.norm_l2 += scale * w * v * v;
    }
    delta.norm_l2 = delta.norm_l2.sqrt();
    // The maximum of |quadratic| is sampled on a barycentric lattice.
    const M: usize = 24;
    for a in 0..=M {
        for b in 0..=M - a {
            for c in 0..=M - a - b {
                let l = [a as f64 / M as f64, b as f64 / M as f64, c as f64 / M as f64, (M - a - b - c) as f64 / M as f64];
                delta.norm_linf = delta.norm_linf.max(delta.eval_local(&l).abs());
            }
        }
    }
    Ok(delta)
}
