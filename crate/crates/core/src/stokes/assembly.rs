use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fem::{p2_gradients, p2_values, FEFunction, Mat3, Role, TaylorHoodSpace};
use crate::linalg::sparse::{BlockCsr, Coupling};
use crate::mesh::{locate_point, quadrature, Point};

/// Which first-order form the velocity block discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViscousForm {
    /// `int kappa eps(u) : eps(v)`
    SymmetricGradient,
    /// `int kappa grad u : grad v`
    Gradient,
}

/// Discrete saddle-point system `[A B^T; B 0] (u, p) = (F, G)`.
///
/// Boundary velocity nodes are eliminated: their rows of `A` are the
/// identity, their columns of `A` and `B` are zero.
#[derive(Debug, Clone)]
pub struct StokesSystem {
    pub space: Arc<TaylorHoodSpace>,
    pub a: BlockCsr,
    pub b: Coupling,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub mu: f64,
    /// `int psi_i / kappa`, the lumped pressure Schur complement guess.
    pub schur_diag: Vec<f64>,
    /// `int psi_i`, for the zero-mean pressure constraint.
    pub pressure_moments: Vec<f64>,
    /// False once a non-symmetric term such as convection is added.
    pub symmetric: bool,
}

impl StokesSystem {
    /// Replaces the right-hand sides; boundary rows of `f` are zeroed on solve.
    pub fn with_rhs(mut self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if f.len() != self.space.n_velocity_dofs() || g.len() != self.space.n_pressure_dofs() {
            return Err(invalid("right-hand side length does not match the space"));
        }
        self.f = f;
        self.g = g;
        Ok(self)
    }

    /// Adds the skew-symmetric convection operator with advecting field `w`.
    pub fn add_convection(&mut self, w: &FEFunction) -> Result<()> {
        let n = assemble_convection(&self.space, w)?;
        for (v, d) in self.a.vals.iter_mut().zip(&n.vals) {
            for e in 0..9 {
                v[e] += d[e];
            }
        }
        self.symmetric = false;
        Ok(())
    }

    /// `(A u, B u)` residual pieces: returns `F - A u - B^T p` and `G - B u`.
    pub fn residual(&self, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ru = vec![0.0; u.len()];
        self.a.matvec(u, &mut ru);
        self.b.add_transpose_matvec(p, &mut ru);
        let mask = self.space.boundary_node_mask();
        for (i, r) in ru.iter_mut().enumerate() {
            let f = if mask[i / 3] { 0.0 } else { self.f[i] };
            *r = f - *r;
        }
        let mut rp = vec![0.0; p.len()];
        self.b.matvec(u, &mut rp);
        for (r, g) in rp.iter_mut().zip(&self.g) {
            *r = g - *r;
        }
        (ru, rp)
    }

    /// Writes `A` in coordinate text format, one `row col value` per line.
    pub fn write_a_coo<W: Write>(&self, out: W) -> Result<()> {
        write_coo(self.a.triplets(), out)
    }

    /// Writes `B` (pressure rows, velocity columns) in coordinate format.
    pub fn write_b_coo<W: Write>(&self, out: W) -> Result<()> {
        write_coo(self.b.triplets(), out)
    }
}

pub fn write_coo<W: Write>(entries: impl Iterator<Item = (usize, usize, f64)>, mut out: W) -> Result<()> {
    for (i, j, v) in entries {
        writeln!(out, "{i} {j} {v:.17e}")?;
    }
    Ok(())
}

/// Linear Stokes with `a(u, v) = 2 mu int eps(u) : eps(v)`.
pub fn assemble_stokes(space: &Arc<TaylorHoodSpace>, mu: f64) -> Result<StokesSystem> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid(format!("viscosity must be positive, got {mu}")));
    }
    assemble_stokes_with(space, ViscousForm::SymmetricGradient, 2, mu, &|_, _, _| 2.0 * mu)
}

/// Saddle system with a pointwise coefficient `kappa(t, l, x)` in front of
/// the chosen form, integrated with a rule of the given order.
pub fn assemble_stokes_with(
    space: &Arc<TaylorHoodSpace>,
    form: ViscousForm,
    order: u32,
    mu: f64,
    kappa: &dyn Fn(usize, &[f64; 4], Point) -> f64,
) -> Result<StokesSystem> {
    let (a, schur_diag) = assemble_velocity_block(space, form, order, kappa)?;
    let b = assemble_divergence(space)?;
    let pressure_moments = pressure_moments(space);
    Ok(StokesSystem {
        space: space.clone(),
        a,
        b,
        f: vec![0.0; space.n_velocity_dofs()],
        g: vec![0.0; space.n_pressure_dofs()],
        mu,
        schur_diag,
        pressure_moments,
        symmetric: true,
    })
}

/// Velocity block with boundary elimination, plus `int psi_i / kappa`.
pub fn assemble_velocity_block(
    space: &TaylorHoodSpace,
    form: ViscousForm,
    order: u32,
    kappa: &dyn Fn(usize, &[f64; 4], Point) -> f64,
) -> Result<(BlockCsr, Vec<f64>)> {
    let (mut a, schur) = assemble_velocity_block_full(space, form, order, kappa)?;
    a.apply_dirichlet(space.boundary_node_mask());
    Ok((a, schur))
}

/// Velocity block over all nodes, boundary included.
pub fn assemble_velocity_block_full(
    space: &TaylorHoodSpace,
    form: ViscousForm,
    order: u32,
    kappa: &dyn Fn(usize, &[f64; 4], Point) -> f64,
) -> Result<(BlockCsr, Vec<f64>)> {
    let rule = quadrature(order)?;
    let pat = space.node_pattern();
    let mut a = BlockCsr::from_structure(pat.row_ptr.clone(), pat.cols.clone());
    let mut schur = vec![0.0; space.n_pressure_dofs()];
    let mut slots = [0usize; 100];
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let nodes = space.tet_nodes(t);
        let verts = space.mesh().tets()[t];
        let scale = 6.0 * geo.volume;
        let mut local = [[0.0; 9]; 100];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let k = kappa(t, l, x);
            if !k.is_finite() || k <= 0.0 {
                return Err(invalid(format!("viscosity coefficient {k} at {x:?} is not positive")));
            }
            let s = scale * w * k;
            for (i, &vi) in verts.iter().enumerate() {
                schur[vi] += scale * w * l[i] / k;
            }
            let g = p2_gradients(l, &geo.grad_lambda);
            for i in 0..10 {
                for j in 0..10 {
                    let gg = g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                    let blk = &mut local[10 * i + j];
                    match form {
                        ViscousForm::SymmetricGradient => {
                            for c in 0..3 {
                                for d in 0..3 {
                                    let diag = if c == d { gg } else { 0.0 };
                                    blk[3 * c + d] += 0.5 * s * (diag + g[i][d] * g[j][c]);
                                }
                            }
                        }
                        ViscousForm::Gradient => {
                            blk[0] += s * gg;
                            blk[4] += s * gg;
                            blk[8] += s * gg;
                        }
                    }
                }
            }
        }
        for i in 0..10 {
            for j in 0..10 {
                slots[10 * i + j] = a.find(nodes[i], nodes[j]).expect("pattern covers element couplings");
            }
        }
        for (k, blk) in local.iter().enumerate() {
            let dst = &mut a.vals[slots[k]];
            for e in 0..9 {
                dst[e] += blk[e];
            }
        }
    }
    Ok((a, schur))
}

/// `B_{i,(J,c)} = -int psi_i d_c phi_J` with boundary columns removed.
pub fn assemble_divergence(space: &TaylorHoodSpace) -> Result<Coupling> {
    let mut b = assemble_divergence_full(space)?;
    b.apply_dirichlet(space.boundary_node_mask());
    Ok(b)
}

/// `B_{i,(J,c)} = -int psi_i d_c phi_J` over all velocity nodes.
pub fn assemble_divergence_full(space: &TaylorHoodSpace) -> Result<Coupling> {
    let rule = quadrature(2)?;
    let pat = space.node_pattern();
    let nv = space.n_pressure_dofs();
    let mut b = Coupling::from_structure(space.n_nodes(), pat.row_ptr[..=nv].to_vec(), pat.cols[..pat.row_ptr[nv]].to_vec());
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let nodes = space.tet_nodes(t);
        let verts = space.mesh().tets()[t];
        let scale = 6.0 * geo.volume;
        let mut local = [[[0.0; 3]; 10]; 4];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let g = p2_gradients(l, &geo.grad_lambda);
            for i in 0..4 {
                for j in 0..10 {
                    for c in 0..3 {
                        local[i][j][c] -= scale * w * l[i] * g[j][c];
                    }
                }
            }
        }
        for i in 0..4 {
            for j in 0..10 {
                b.add(verts[i], nodes[j], &local[i][j]);
            }
        }
    }
    Ok(b)
}

/// `int psi_i` for every pressure basis function.
pub fn pressure_moments(space: &TaylorHoodSpace) -> Vec<f64> {
    let mut m = vec![0.0; space.n_pressure_dofs()];
    for (t, v) in space.mesh().tets().iter().enumerate() {
        let q = 0.25 * space.geometry(t).volume;
        for &i in v {
            m[i] += q;
        }
    }
    m
}

/// Consistent P1 pressure mass matrix as per-row `(col, value)` lists.
pub fn pressure_mass(space: &TaylorHoodSpace) -> crate::linalg::sparse::Csr {
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); space.n_pressure_dofs()];
    for (t, v) in space.mesh().tets().iter().enumerate() {
        let vol = space.geometry(t).volume;
        for i in 0..4 {
            for j in 0..4 {
                let m = if i == j { vol / 10.0 } else { vol / 20.0 };
                rows[v[i]].push((v[j] as u32, m));
            }
        }
    }
    crate::linalg::sparse::Csr::from_rows(space.n_pressure_dofs(), rows)
}

/// `F_(J,c) = int sum_d f_cd d_d phi_J` for a tensor field given per tet and
/// barycentric point. Boundary entries are kept; solvers ignore them.
pub fn rhs_divergence_form_local(
    space: &TaylorHoodSpace,
    order: u32,
    f: &mut dyn FnMut(usize, &[f64; 4], Point) -> Mat3,
) -> Result<Vec<f64>> {
    let rule = quadrature(order)?;
    let mut out = vec![0.0; space.n_velocity_dofs()];
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let nodes = space.tet_nodes(t);
        let scale = 6.0 * geo.volume;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let ft = f(t, l, x);
            let g = p2_gradients(l, &geo.grad_lambda);
            for (k, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    out[3 * node + c] += scale * w * (ft[c][0] * g[k][0] + ft[c][1] * g[k][1] + ft[c][2] * g[k][2]);
                }
            }
        }
    }
    Ok(out)
}

/// `F_i = int f : grad phi_i` for a tensor field of position.
pub fn assemble_rhs_divergence_form(space: &TaylorHoodSpace, f: &dyn Fn(Point) -> Mat3) -> Result<Vec<f64>> {
    rhs_divergence_form_local(space, 6, &mut |_, _, x| f(x))
}

/// `F_i = amplitude . phi_i(z)`, the action of a point load at `z`.
pub fn assemble_rhs_measure(space: &TaylorHoodSpace, z: Point, amplitude: [f64; 3]) -> Result<Vec<f64>> {
    let (t, l) = locate_point(space.mesh(), z)?;
    let phi = p2_values(&l);
    let mut out = vec![0.0; space.n_velocity_dofs()];
    for (k, &node) in space.tet_nodes(t).iter().enumerate() {
        for c in 0..3 {
            out[3 * node + c] = amplitude[c] * phi[k];
        }
    }
    Ok(out)
}

/// `F_i = int f . phi_i` for a vector body force.
pub fn assemble_rhs_volume(space: &TaylorHoodSpace, f: &dyn Fn(Point) -> [f64; 3], order: u32) -> Result<Vec<f64>> {
    let rule = quadrature(order)?;
    let mut out = vec![0.0; space.n_velocity_dofs()];
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let nodes = space.tet_nodes(t);
        let scale = 6.0 * geo.volume;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let v = f(geo.point(l));
            let phi = p2_values(l);
            for (k, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    out[3 * node + c] += scale * w * v[c] * phi[k];
                }
            }
        }
    }
    Ok(out)
}

/// `G_i = -int psi_i d(x)`, the constraint load for a prescribed divergence.
pub fn assemble_rhs_constraint(space: &TaylorHoodSpace, d: &dyn Fn(Point) -> f64, order: u32) -> Result<Vec<f64>> {
    let rule = quadrature(order)?;
    let mut out = vec![0.0; space.n_pressure_dofs()];
    for (t, v) in space.mesh().tets().iter().enumerate() {
        let geo = space.geometry(t);
        let scale = 6.0 * geo.volume;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let dv = d(geo.point(l));
            for i in 0..4 {
                out[v[i]] -= scale * w * l[i] * dv;
            }
        }
    }
    Ok(out)
}

/// Skew-symmetric convection `N(w)` with
/// `v^T N u = 1/2 int [(w . grad) u . v - (w . grad) v . u]`;
/// entries touching boundary nodes are zero.
pub fn assemble_convection(space: &TaylorHoodSpace, w: &FEFunction) -> Result<BlockCsr> {
    if w.role() != Role::Velocity || w.coeffs().len() != space.n_velocity_dofs() {
        return Err(invalid("advecting field must be a velocity on the same space"));
    }
    let rule = quadrature(5)?;
    let pat = space.node_pattern();
    let mut n = BlockCsr::from_structure(pat.row_ptr.clone(), pat.cols.clone());
    let mask = space.boundary_node_mask();
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let nodes = space.tet_nodes(t);
        let scale = 6.0 * geo.volume;
        let mut local = [0.0; 100];
        for (l, wq) in rule.points.iter().zip(&rule.weights) {
            let wv = w.velocity_local(t, l);
            let phi = p2_values(l);
            let g = p2_gradients(l, &geo.grad_lambda);
            let adv: Vec<f64> = g.iter().map(|gj| wv[0] * gj[0] + wv[1] * gj[1] + wv[2] * gj[2]).collect();
            for i in 0..10 {
                for j in 0..10 {
                    local[10 * i + j] += 0.5 * scale * wq * (adv[j] * phi[i] - adv[i] * phi[j]);
                }
            }
        }
        for i in 0..10 {
            if mask[nodes[i]] {
                continue;
            }
            for j in 0..10 {
                if mask[nodes[j]] {
                    continue;
                }
                let v = local[10 * i + j];
                n.add(nodes[i], nodes[j], &[v, 0.0, 0.0, 0.0, v, 0.0, 0.0, 0.0, v]);
            }
        }
    }
    Ok(n)
}

/// The skew trilinear form evaluated by quadrature.
pub fn skew_trilinear(w: &FEFunction, u: &FEFunction, v: &FEFunction) -> Result<f64> {
    let space = w.space();
    let rule = quadrature(5)?;
    let mut total = 0.0;
    for t in 0..space.mesh().n_tets() {
        let scale = 6.0 * space.geometry(t).volume;
        for (l, q) in rule.points.iter().zip(&rule.weights) {
            let wv = w.velocity_local(t, l);
            let (uv, vv) = (u.velocity_local(t, l), v.velocity_local(t, l));
            let (gu, gv) = (u.gradient_local(t, l), v.gradient_local(t, l));
            let mut s = 0.0;
            for i in 0..3 {
                let wgu: f64 = (0..3).map(|k| wv[k] * gu[i][k]).sum();
                let wgv: f64 = (0..3).map(|k| wv[k] * gv[i][k]).sum();
                s += wgu * vv[i] - wgv * uv[i];
            }
            total += 0.5 * scale * q * s;
        }
    }
    Ok(total)
}
