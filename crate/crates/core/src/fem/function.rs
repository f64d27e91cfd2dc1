use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{frobenius, p2_gradients, p2_values, sym, Mat3, TaylorHoodSpace};
use crate::error::{invalid, Error, Result};
use crate::mesh::{locate_point, mesh_hash, quadrature, Point};
use crate::weights::WeightField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Velocity,
    Pressure,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Velocity => "velocity",
            Role::Pressure => "pressure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    None,
    Gradient,
    SymmetricGradient,
}

/// Coefficient vector in a Taylor-Hood space.
#[derive(Debug, Clone)]
pub struct FEFunction {
    space: Arc<TaylorHoodSpace>,
    role: Role,
    coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn new(space: Arc<TaylorHoodSpace>, role: Role, coeffs: Vec<f64>) -> Result<Self> {
        let n = match role {
            Role::Velocity => space.n_velocity_dofs(),
            Role::Pressure => space.n_pressure_dofs(),
        };
        if coeffs.len() != n {
            return Err(invalid(format!("{role} function needs {n} coefficients, got {}", coeffs.len())));
        }
        Ok(Self { space, role, coeffs })
    }

    pub fn zeros(space: Arc<TaylorHoodSpace>, role: Role) -> Self {
        let n = match role {
            Role::Velocity => space.n_velocity_dofs(),
            Role::Pressure => space.n_pressure_dofs(),
        };
        Self { space, role, coeffs: vec![0.0; n] }
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `self - other` on the same space.
    pub fn sub(&self, other: &FEFunction) -> Result<FEFunction> {
        if !Arc::ptr_eq(&self.space, &other.space) || self.role != other.role {
            return Err(invalid("difference of functions from different spaces"));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(FEFunction { space: self.space.clone(), role: self.role, coeffs })
    }

    pub fn velocity_local(&self, t: usize, l: &[f64; 4]) -> [f64; 3] {
        let phi = p2_values(l);
        let mut u = [0.0; 3];
        for (k, &node) in self.space.tet_nodes(t).iter().enumerate() {
            for c in 0..3 {
                u[c] += phi[k] * self.coeffs[3 * node + c];
            }
        }
        u
    }

    /// Velocity Jacobian, `g[i][j] = d u_i / d x_j`.
    pub fn gradient_local(&self, t: usize, l: &[f64; 4]) -> Mat3 {
        let gr = p2_gradients(l, &self.space.geometry(t).grad_lambda);
        let mut g = [[0.0; 3]; 3];
        for (k, &node) in self.space.tet_nodes(t).iter().enumerate() {
            for i in 0..3 {
                let c = self.coeffs[3 * node + i];
                for j in 0..3 {
                    g[i][j] += c * gr[k][j];
                }
            }
        }
        g
    }

    pub fn pressure_local(&self, t: usize, l: &[f64; 4]) -> f64 {
        let v = self.space.mesh().tets()[t];
        (0..4).map(|i| l[i] * self.coeffs[v[i]]).sum()
    }

    pub fn pressure_gradient(&self, t: usize) -> [f64; 3] {
        let v = self.space.mesh().tets()[t];
        let gl = &self.space.geometry(t).grad_lambda;
        let mut g = [0.0; 3];
        for i in 0..4 {
            for d in 0..3 {
                g[d] += self.coeffs[v[i]] * gl[i][d];
            }
        }
        g
    }

    /// Point evaluation: three components for velocity, one for pressure.
    pub fn eval(&self, x: Point) -> Result<Vec<f64>> {
        let (t, l) = locate_point(self.space.mesh(), x)?;
        Ok(match self.role {
            Role::Velocity => self.velocity_local(t, &l).to_vec(),
            Role::Pressure => vec![self.pressure_local(t, &l)],
        })
    }

    /// Pointwise magnitude of the requested quantity (Frobenius for matrices).
    pub fn magnitude_local(&self, t: usize, l: &[f64; 4], d: Derivative) -> f64 {
        match (self.role, d) {
            (Role::Velocity, Derivative::None) => {
                let u = self.velocity_local(t, l);
                (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
            }
            (Role::Velocity, Derivative::Gradient) => frobenius(&self.gradient_local(t, l)),
            (Role::Velocity, Derivative::SymmetricGradient) => frobenius(&sym(&self.gradient_local(t, l))),
            (Role::Pressure, Derivative::None) => self.pressure_local(t, l).abs(),
            (Role::Pressure, _) => {
                let g = self.pressure_gradient(t);
                (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
            }
        }
    }
}

pub fn interpolate_velocity(space: &Arc<TaylorHoodSpace>, f: impl Fn(Point) -> [f64; 3]) -> FEFunction {
    let mut coeffs = vec![0.0; space.n_velocity_dofs()];
    for node in 0..space.n_nodes() {
        let v = f(space.node_position(node));
        coeffs[3 * node..3 * node + 3].copy_from_slice(&v);
    }
    FEFunction { space: space.clone(), role: Role::Velocity, coeffs }
}

pub fn interpolate_pressure(space: &Arc<TaylorHoodSpace>, f: impl Fn(Point) -> f64) -> FEFunction {
    let coeffs = space.mesh().vertices().iter().map(|&x| f(x)).collect();
    FEFunction { space: space.clone(), role: Role::Pressure, coeffs }
}

/// `(sum_T sum_k w_k omega(x_k) |f(x_k)|^q)^(1/q)` for a pointwise integrand
/// given per tet and barycentric point.
pub fn weighted_norm_of(
    space: &TaylorHoodSpace,
    w: &WeightField,
    q: f64,
    quad_order: u32,
    mut f: impl FnMut(usize, &[f64; 4], Point) -> f64,
) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(invalid(format!("norm index must lie in [1, inf), got {q}")));
    }
    let rule = quadrature(quad_order)?;
    let constant = w.is_constant();
    let mut total = 0.0;
    for t in 0..space.mesh().n_tets() {
        let g = space.geometry(t);
        let scale = 6.0 * g.volume;
        let mut local = 0.0;
        for (l, wk) in rule.points.iter().zip(&rule.weights) {
            let x = g.point(l);
            let om = if constant { 1.0 } else { w.eval(x)? };
            let v = f(t, l, x).abs();
            local += wk * om * if q == 2.0 { v * v } else { v.powf(q) };
        }
        total += scale * local;
    }
    Ok(total.powf(1.0 / q))
}

pub fn weighted_norm(u: &FEFunction, w: &WeightField, q: f64, derivative: Derivative, quad_order: u32) -> Result<f64> {
    weighted_norm_of(&u.space, w, q, quad_order, |t, l, _| u.magnitude_local(t, l, derivative))
}

/// Shifts a pressure by a constant so that it integrates to zero.
pub fn zero_mean_project(p: &FEFunction) -> FEFunction {
    let mesh = p.space.mesh();
    let mut integral = 0.0;
    let mut volume = 0.0;
    for (t, v) in mesh.tets().iter().enumerate() {
        let vol = p.space.geometry(t).volume;
        integral += vol * 0.25 * v.iter().map(|&i| p.coeffs[i]).sum::<f64>();
        volume += vol;
    }
    let mean = integral / volume;
    let mut out = p.clone();
    match p.role {
        Role::Pressure => out.coeffs.iter_mut().for_each(|c| *c -= mean),
        Role::Velocity => {}
    }
    out
}

pub fn write_fe_function<W: Write>(f: &FEFunction, mut out: W) -> Result<()> {
    let mut s = String::with_capacity(24 * f.coeffs.len() + 100);
    s.push_str(&format!("fef {} {} sha256:{}\n", f.role, f.coeffs.len(), mesh_hash(f.space.mesh())));
    for c in &f.coeffs {
        s.push_str(&format!("{c:?}\n"));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a function and checks that it was written for the mesh of `space`.
pub fn read_fe_function<R: BufRead>(input: R, space: &Arc<TaylorHoodSpace>) -> Result<FEFunction> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty function file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "fef" {
        return Err(Error::Parse(format!("bad function header `{header}`")));
    }
    let role = match fields[1] {
        "velocity" => Role::Velocity,
        "pressure" => Role::Pressure,
        r => return Err(Error::Parse(format!("unknown role `{r}`"))),
    };
    let n: usize = fields[2].parse().map_err(|_| Error::Parse(format!("bad dof count `{}`", fields[2])))?;
    let expected = format!("sha256:{}", mesh_hash(space.mesh()));
    if fields[3] != expected {
        return Err(Error::Parse("function file was written for a different mesh".into()));
    }
    let mut coeffs = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        coeffs.push(line.trim().parse::<f64>().map_err(|e| Error::Parse(format!("coefficient: {e}")))?);
    }
    if coeffs.len() != n {
        return Err(Error::Parse(format!("expected {n} coefficients, found {}", coeffs.len())));
    }
    FEFunction::new(space.clone(), role, coeffs)
}
