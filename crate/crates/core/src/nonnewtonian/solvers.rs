use std::cell::Cell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{StressKind, StressModel};
use crate::error::{invalid, Error, Result};
use crate::fem::{ddot, frobenius, sym, FEFunction, Mat3, Role, TaylorHoodSpace};
use crate::linalg::sparse::norm;
use crate::mesh::{quadrature, Point, QuadratureRule};
use crate::stokes::{
    assemble_divergence, assemble_stokes_with, rhs_divergence_form_local, skew_trilinear, solve_saddle_from,
    SolverOptions, StokesSolution, ViscousForm,
};

/// Quadrature order of every nonlinear integral (stiffness, load, energy).
pub const NONLINEAR_ORDER: u32 = 5;

/// Steps tried by the energy backtracking before giving up.
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearOptions {
    /// Bound on `|eps(u^{k+1} - u^k)|_{L^2}`.
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: bool,
    pub solver: SolverOptions,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, line_search: true, solver: SolverOptions::default() }
    }
}

impl NonlinearOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSolveTrace {
    /// `|eps(u^{k+1} - u^k)|_{L^2}` per iteration (after damping).
    pub increments: Vec<f64>,
    /// `J(u^k)` starting with the initial guess, updated by the change of
    /// the Lagrangian `J + p^T B u`; empty without an energy.
    pub energies: Vec<f64>,
    /// Relative nonlinear residual after each iteration.
    pub residuals: Vec<f64>,
    /// Accepted damping factor per iteration.
    pub step_lengths: Vec<f64>,
    /// Krylov iterations of each inner linear solve (0 for direct).
    pub linear_iterations: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `|int r_h div u_h|` over the pressure basis.
    pub divergence_residual: f64,
    /// Largest entry of the final nonlinear residual vector.
    pub final_residual: f64,
}

/// Energy-type quantities reported by the convection solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvectionStability {
    /// `mu |eps(u)|^2_{L^2} + |eps(u)|^q_{L^q(omega)}`
    pub lhs: f64,
    /// Skew trilinear form `n(u; u, u)`.
    pub self_term: f64,
    /// `|f|_{L^2}` of the tensor forcing.
    pub forcing_l2: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub velocity: FEFunction,
    pub pressure: FEFunction,
    pub trace: NonlinearSolveTrace,
    pub convection: Option<ConvectionStability>,
}

/// Quadrature points of a space with the model coefficients and the forcing
/// tabulated once, in element-major order.
struct QuadData {
    rule: QuadratureRule,
    weights: Vec<f64>,
    xs: Vec<Point>,
    omega: Vec<f64>,
    forcing: Vec<Mat3>,
}

impl QuadData {
    fn new(space: &TaylorHoodSpace, model: &StressModel, f: &dyn Fn(Point) -> Mat3) -> Result<Self> {
        let rule = quadrature(NONLINEAR_ORDER)?;
        let n = space.mesh().n_tets() * rule.len();
        let (mut weights, mut xs, mut omega, mut forcing) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for t in 0..space.mesh().n_tets() {
            let geo = space.geometry(t);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = geo.point(l);
                weights.push(6.0 * geo.volume * w);
                xs.push(x);
                omega.push(model.omega(x)?);
                forcing.push(f(x));
            }
        }
        Ok(Self { rule, weights, xs, omega, forcing })
    }

    fn nq(&self) -> usize {
        self.rule.len()
    }

    /// `eps(u)` at every point.
    fn strains(&self, u: &FEFunction) -> Vec<Mat3> {
        let nt = u.space().mesh().n_tets();
        let mut out = Vec::with_capacity(self.xs.len());
        for t in 0..nt {
            for l in &self.rule.points {
                out.push(sym(&u.gradient_local(t, l)));
            }
        }
        out
    }

    fn forcing_work(&self, u: &FEFunction) -> f64 {
        let nt = u.space().mesh().n_tets();
        let mut s = 0.0;
        for t in 0..nt {
            for (q, l) in self.rule.points.iter().enumerate() {
                let k = t * self.nq() + q;
                s += self.weights[k] * ddot(&self.forcing[k], &u.gradient_local(t, l));
            }
        }
        s
    }

    fn load(&self, space: &TaylorHoodSpace, extra: Option<(&[Mat3], f64)>) -> Result<Vec<f64>> {
        let nq = self.nq();
        let counter = Cell::new(0usize);
        rhs_divergence_form_local(space, NONLINEAR_ORDER, &mut |t, _, _| {
            let k = counter.get();
            counter.set(k + 1);
            debug_assert_eq!(k / nq, t);
            let mut m = self.forcing[k];
            if let Some((tensors, scale)) = extra {
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] += scale * tensors[k][i][j];
                    }
                }
            }
            m
        })
    }
}

fn uses_regularization(model: &StressModel) -> bool {
    model.power() < 2.0
}

fn secant_field(model: &StressModel, data: &QuadData, strains: &[Mat3]) -> Vec<f64> {
    let reg = uses_regularization(model);
    strains
        .iter()
        .enumerate()
        .map(|(k, e)| model.secant_viscosity(data.xs[k], data.omega[k], frobenius(e), reg))
        .collect()
}

fn stress_field(model: &StressModel, data: &QuadData, strains: &[Mat3]) -> Vec<Mat3> {
    let nu = secant_field(model, data, strains);
    strains.iter().zip(&nu).map(|(e, n)| e.map(|r| r.map(|v| n * v))).collect()
}

/// Saddle solve with the pointwise coefficient `kappa[k]` of `eps : eps`.
fn solve_linearized(
    space: &Arc<TaylorHoodSpace>,
    mu: f64,
    kappa: &[f64],
    nq: usize,
    rhs: Vec<f64>,
    convection: Option<&FEFunction>,
    opts: &SolverOptions,
    guess: Option<(&FEFunction, &FEFunction)>,
) -> Result<StokesSolution> {
    let counter = Cell::new(0usize);
    let coeff = |t: usize, _: &[f64; 4], _: Point| {
        let k = counter.get();
        counter.set(k + 1);
        debug_assert_eq!(k / nq, t);
        kappa[k]
    };
    let mut system = assemble_stokes_with(space, ViscousForm::SymmetricGradient, NONLINEAR_ORDER, mu, &coeff)?
        .with_rhs(rhs, vec![0.0; space.n_pressure_dofs()])?;
    if let Some(w) = convection {
        system.add_convection(w)?;
    }
    solve_saddle_from(&system, opts, guess.map(|(u, p)| (u.coeffs(), p.coeffs())))
}

fn strain_l2(space: &TaylorHoodSpace, data: &QuadData, d: &FEFunction) -> f64 {
    let mut s = 0.0;
    for t in 0..space.mesh().n_tets() {
        for (q, l) in data.rule.points.iter().enumerate() {
            let e = sym(&d.gradient_local(t, l));
            s += data.weights[t * data.nq() + q] * ddot(&e, &e);
        }
    }
    s.sqrt()
}

fn combine(u: &FEFunction, d: &FEFunction, s: f64) -> Result<FEFunction> {
    let c = u.coeffs().iter().zip(d.coeffs()).map(|(a, b)| a + s * b).collect();
    FEFunction::new(u.space().clone(), Role::Velocity, c)
}

fn check_space(space: &TaylorHoodSpace, u: &FEFunction) -> Result<()> {
    if u.role() != Role::Velocity || u.coeffs().len() != space.n_velocity_dofs() {
        return Err(invalid("velocity does not belong to the space"));
    }
    Ok(())
}

/// `R_i = int S(x, eps(u)) : eps(phi_i) - int p div phi_i - int f : grad phi_i`
/// at every velocity dof (zero on boundary nodes).
pub fn nonlinear_residual(
    model: &StressModel,
    u: &FEFunction,
    p: &FEFunction,
    f: &dyn Fn(Point) -> Mat3,
) -> Result<Vec<f64>> {
    let space = u.space().clone();
    let data = QuadData::new(&space, model, f)?;
    residual_with(&space, model, &data, u, p)
}

fn residual_with(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    data: &QuadData,
    u: &FEFunction,
    p: &FEFunction,
) -> Result<Vec<f64>> {
    let stress = stress_field(model, data, &data.strains(u));
    let neg: Vec<Mat3> = stress.iter().map(|s| s.map(|r| r.map(|v| -v))).collect();
    // load() gives int (f - S) : grad phi; negate to get S - f
    let mut r: Vec<f64> = data.load(space, Some((&neg, 1.0)))?.into_iter().map(|v| -v).collect();
    let b = assemble_divergence(space)?;
    b.add_transpose_matvec(p.coeffs(), &mut r);
    let mask = space.boundary_node_mask();
    for (i, v) in r.iter_mut().enumerate() {
        if mask[i / 3] {
            *v = 0.0;
        }
    }
    Ok(r)
}

fn divergence_residual(space: &TaylorHoodSpace, u: &FEFunction) -> Result<f64> {
    let b = assemble_divergence(space)?;
    let mut r = vec![0.0; space.n_pressure_dofs()];
    b.matvec(u.coeffs(), &mut r);
    Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
}

fn finish(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    data: &QuadData,
    u: &FEFunction,
    p: &FEFunction,
    trace: &mut NonlinearSolveTrace,
) -> Result<()> {
    let r = residual_with(space, model, data, u, p)?;
    trace.final_residual = r.iter().fold(0.0, |m, v| m.max(v.abs()));
    trace.divergence_residual = divergence_residual(space, u)?;
    Ok(())
}

fn relative_residual(r: &[f64], load_norm: f64) -> f64 {
    if load_norm > 0.0 {
        norm(r) / load_norm
    } else {
        norm(r)
    }
}

fn interior_norm(space: &TaylorHoodSpace, v: &[f64]) -> f64 {
    let mask = space.boundary_node_mask();
    v.iter().enumerate().filter(|(i, _)| !mask[i / 3]).map(|(_, x)| x * x).sum::<f64>().sqrt()
}

fn non_convergence(trace: NonlinearSolveTrace, hint: &str) -> Error {
    Error::NonConvergence {
        iterations: trace.iterations,
        last_increment: trace.increments.last().copied().unwrap_or(f64::NAN),
        hint: hint.into(),
        trace: Box::new(trace),
    }
}

/// Picard iteration for a monotone stress close to `mu Q^s`: each step
/// solves `mu (eps u^{k+1}, eps v) - (p, div v) = (f + mu eps(u^k) - S(eps u^k), grad v)`.
pub fn solve_bulicek(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    f: &dyn Fn(Point) -> Mat3,
    opts: &NonlinearOptions,
) -> Result<NonlinearSolution> {
    model.validate()?;
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let data = QuadData::new(space, model, f)?;
    let kappa = vec![model.mu; data.xs.len()];
    let load_norm = interior_norm(space, &data.load(space, None)?);
    let mut u = FEFunction::zeros(space.clone(), Role::Velocity);
    let mut p = FEFunction::zeros(space.clone(), Role::Pressure);
    let mut trace = NonlinearSolveTrace::default();
    for k in 0..opts.max_iter {
        let strains = data.strains(&u);
        let stress = stress_field(model, &data, &strains);
        // mu eps(u^k) - S(eps u^k)
        let defect: Vec<Mat3> = strains
            .iter()
            .zip(&stress)
            .map(|(e, s)| {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = model.mu * e[i][j] - s[i][j];
                    }
                }
                m
            })
            .collect();
        let rhs = data.load(space, Some((&defect, 1.0)))?;
        let guess = if k > 0 { Some((&u, &p)) } else { None };
        let sol = solve_linearized(space, model.mu, &kappa, data.nq(), rhs, None, &opts.solver, guess)?;
        let d = sol.velocity.sub(&u)?;
        let inc = strain_l2(space, &data, &d);
        u = sol.velocity;
        p = sol.pressure;
        let res = relative_residual(&residual_with(space, model, &data, &u, &p)?, load_norm);
        trace.increments.push(inc);
        trace.residuals.push(res);
        trace.step_lengths.push(1.0);
        trace.linear_iterations.push(sol.stats.iterations);
        trace.iterations = k + 1;
        if inc <= opts.tol || res <= opts.tol {
            trace.converged = true;
            finish(space, model, &data, &u, &p, &mut trace)?;
            return Ok(NonlinearSolution { velocity: u, pressure: p, trace, convection: None });
        }
    }
    Err(non_convergence(trace, "Picard iteration did not contract; check the monotonicity of the stress model"))
}

/// `J(u) = int A(x, eps(u)) - int f : grad u`.
pub fn smagorinski_energy(model: &StressModel, u: &FEFunction, f: &dyn Fn(Point) -> Mat3) -> Result<f64> {
    let space = u.space().clone();
    let data = QuadData::new(&space, model, f)?;
    Ok(energy_with(model, &data, u))
}

fn energy_with(model: &StressModel, data: &QuadData, u: &FEFunction) -> f64 {
    let strains = data.strains(u);
    let a: f64 = strains
        .iter()
        .enumerate()
        .map(|(k, e)| data.weights[k] * model.potential(data.xs[k], data.omega[k], frobenius(e)))
        .sum();
    a - data.forcing_work(u)
}

/// `J(u + s d) - J(u)` summed pointwise without cancellation.
pub fn energy_difference(
    model: &StressModel,
    u: &FEFunction,
    d: &FEFunction,
    s: f64,
    f: &dyn Fn(Point) -> Mat3,
) -> Result<f64> {
    let space = u.space().clone();
    check_space(&space, d)?;
    let data = QuadData::new(&space, model, f)?;
    Ok(energy_difference_with(model, &data, &data.strains(u), &data.strains(d), d, s))
}

fn energy_difference_with(
    model: &StressModel,
    data: &QuadData,
    eu: &[Mat3],
    ed: &[Mat3],
    d: &FEFunction,
    s: f64,
) -> f64 {
    let mut total = 0.0;
    for k in 0..eu.len() {
        let b2 = ddot(&eu[k], &eu[k]);
        let diff = 2.0 * s * ddot(&eu[k], &ed[k]) + s * s * ddot(&ed[k], &ed[k]);
        total += data.weights[k] * model.potential_difference(data.xs[k], data.omega[k], b2, diff);
    }
    total - s * data.forcing_work(d)
}

/// Gateaux derivative `int S(x, eps(u)) : eps(v) - int f : grad v`.
pub fn energy_derivative(
    model: &StressModel,
    u: &FEFunction,
    v: &FEFunction,
    f: &dyn Fn(Point) -> Mat3,
) -> Result<f64> {
    let space = u.space().clone();
    check_space(&space, v)?;
    let data = QuadData::new(&space, model, f)?;
    let stress = stress_field(model, &data, &data.strains(u));
    let ev = data.strains(v);
    let a: f64 = stress.iter().zip(&ev).enumerate().map(|(k, (s, e))| data.weights[k] * ddot(s, e)).sum();
    Ok(a - data.forcing_work(v))
}

fn check_smagorinski(model: &StressModel, opts: &NonlinearOptions) -> Result<()> {
    model.validate()?;
    if !matches!(model.kind, StressKind::SmagorinskiGeneralized | StressKind::SmagorinskiDistance) {
        return Err(invalid("the Smagorinski solver needs a smagorinski-generalized or smagorinski-distance model"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    Ok(())
}

/// Kacanov (frozen secant viscosity) iteration minimizing `J` over discretely
/// solenoidal velocities, with backtracking on `J` when `line_search` is set.
pub fn solve_smagorinski(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    f: &dyn Fn(Point) -> Mat3,
    opts: &NonlinearOptions,
) -> Result<NonlinearSolution> {
    check_smagorinski(model, opts)?;
    let data = QuadData::new(space, model, f)?;
    let load = data.load(space, None)?;
    kacanov(space, model, &data, load, None, opts, None)
}

#[allow(clippy::too_many_arguments)]
fn kacanov(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    data: &QuadData,
    load: Vec<f64>,
    convection: Option<&FEFunction>,
    opts: &NonlinearOptions,
    start: Option<(FEFunction, FEFunction)>,
) -> Result<NonlinearSolution> {
    let load_norm = interior_norm(space, &load);
    let with_energy = convection.is_none();
    let line_search = opts.line_search && with_energy;
    let mut trace = NonlinearSolveTrace::default();
    let (mut u, mut p) = match start {
        Some(pair) => pair,
        None => {
            // nu = mu + omega, the secant viscosity at unit strain
            let kappa: Vec<f64> = data.omega.iter().map(|w| model.mu + w).collect();
            let sol = solve_linearized(space, model.mu, &kappa, data.nq(), load.clone(), convection, &opts.solver, None)?;
            trace.linear_iterations.push(sol.stats.iterations);
            (sol.velocity, sol.pressure)
        }
    };
    let conv_op = match convection {
        Some(w) => Some(crate::stokes::assemble_convection(space, w)?),
        None => None,
    };
    let div = assemble_divergence(space)?;
    let mut energy = if with_energy { energy_with(model, data, &u) } else { f64::NAN };
    if with_energy {
        trace.energies.push(energy);
    }
    for k in 0..opts.max_iter {
        let eu = data.strains(&u);
        let kappa = secant_field(model, data, &eu);
        let sol =
            solve_linearized(space, model.mu, &kappa, data.nq(), load.clone(), convection, &opts.solver, Some((&u, &p)))?;
        trace.linear_iterations.push(sol.stats.iterations);
        let d = sol.velocity.sub(&u)?;
        let full = strain_l2(space, data, &d);
        let converged = full <= opts.tol;
        let ed = data.strains(&d);
        let mut s = 1.0;
        // Changes of J are measured through the Lagrangian J(v) + p*^T B v.
        // It equals J on the discretely solenoidal manifold and is
        // insensitive to the round-off left in B d when pressures are large.
        let slope = if with_energy {
            let mut bd = vec![0.0; space.n_pressure_dofs()];
            div.matvec(d.coeffs(), &mut bd);
            bd.iter().zip(sol.pressure.coeffs()).map(|(a, b)| a * b).sum()
        } else {
            0.0
        };
        let mut delta = if with_energy { energy_difference_with(model, data, &eu, &ed, &d, s) + slope } else { 0.0 };
        if line_search && !converged {
            let mut tries = 0;
            while delta > 0.0 {
                tries += 1;
                if tries > MAX_BACKTRACKS {
                    trace.iterations = k + 1;
                    return Err(Error::EnergyIncrease { iteration: k + 1 });
                }
                s *= 0.5;
                delta = energy_difference_with(model, data, &eu, &ed, &d, s) + s * slope;
            }
        }
        if converged && with_energy && delta > 0.0 {
            // the last correction is below the tolerance; keep u^k so that
            // the recorded energies stay nonincreasing
            s = 0.0;
            delta = 0.0;
        }
        u = combine(&u, &d, s)?;
        p = sol.pressure;
        if with_energy {
            energy += delta;
            trace.energies.push(energy);
        }
        let mut r = residual_with(space, model, data, &u, &p)?;
        if let Some(n) = &conv_op {
            let mut nu = vec![0.0; r.len()];
            n.matvec(u.coeffs(), &mut nu);
            r.iter_mut().zip(&nu).for_each(|(a, b)| *a += b);
        }
        let res = relative_residual(&r, load_norm);
        trace.increments.push(s * full);
        trace.residuals.push(res);
        trace.step_lengths.push(s);
        trace.iterations = k + 1;
        if converged {
            trace.converged = true;
            if convection.is_none() {
                finish(space, model, data, &u, &p, &mut trace)?;
            }
            return Ok(NonlinearSolution { velocity: u, pressure: p, trace, convection: None });
        }
    }
    Err(non_convergence(trace, "Kacanov iteration stalled; try a tighter linear tolerance or a smaller forcing"))
}

/// Outer Picard on the advecting field `w = u^k` around the Smagorinski
/// solve with the skew-symmetric convection term frozen.
pub fn solve_smagorinski_convection(
    space: &Arc<TaylorHoodSpace>,
    model: &StressModel,
    f: &dyn Fn(Point) -> Mat3,
    opts: &NonlinearOptions,
) -> Result<NonlinearSolution> {
    check_smagorinski(model, opts)?;
    let data = QuadData::new(space, model, f)?;
    let load = data.load(space, None)?;
    let hint = "outer convection iteration diverged; use a larger mu or a smaller forcing f";
    let mut trace = NonlinearSolveTrace::default();
    let mut w = FEFunction::zeros(space.clone(), Role::Velocity);
    let mut start: Option<(FEFunction, FEFunction)> = None;
    let mut first = None;
    for k in 0..opts.max_iter {
        let inner = match kacanov(space, model, &data, load.clone(), Some(&w), opts, start.take()) {
            Ok(s) => s,
            Err(Error::NonConvergence { .. }) | Err(Error::Solver(_)) => {
                trace.iterations = k;
                return Err(non_convergence(trace, hint));
            }
            Err(e) => return Err(e),
        };
        let d = inner.velocity.sub(&w)?;
        let inc = strain_l2(space, &data, &d);
        trace.increments.push(inc);
        trace.linear_iterations.extend(&inner.trace.linear_iterations);
        trace.residuals.push(inner.trace.residuals.last().copied().unwrap_or(0.0));
        trace.step_lengths.push(1.0);
        trace.iterations = k + 1;
        let first_inc = *first.get_or_insert(inc);
        if !inc.is_finite() || inc > 1e6 * first_inc.max(opts.tol) {
            return Err(non_convergence(trace, hint));
        }
        if inc <= opts.tol {
            trace.converged = true;
            let u = inner.velocity;
            let p = inner.pressure;
            let mut r = residual_with(space, model, &data, &u, &p)?;
            let mut sys_conv = vec![0.0; r.len()];
            crate::stokes::assemble_convection(space, &u)?.matvec(u.coeffs(), &mut sys_conv);
            for (a, b) in r.iter_mut().zip(&sys_conv) {
                *a += b;
            }
            trace.final_residual = r.iter().fold(0.0, |m, v| m.max(v.abs()));
            trace.divergence_residual = divergence_residual(space, &u)?;
            let strains = data.strains(&u);
            let q = model.power();
            let (mut l2, mut lq, mut f2) = (0.0, 0.0, 0.0);
            for (k, e) in strains.iter().enumerate() {
                let n = frobenius(e);
                l2 += data.weights[k] * n * n;
                lq += data.weights[k] * data.omega[k] * n.powf(q);
                f2 += data.weights[k] * ddot(&data.forcing[k], &data.forcing[k]);
            }
            let convection = ConvectionStability {
                lhs: model.mu * l2 + lq,
                self_term: skew_trilinear(&u, &u, &u)?,
                forcing_l2: f2.sqrt(),
                outer_iterations: k + 1,
            };
            return Ok(NonlinearSolution { velocity: u, pressure: p, trace, convection: Some(convection) });
        }
        start = Some((inner.velocity.clone(), inner.pressure));
        w = inner.velocity;
    }
    Err(non_convergence(trace, hint))
}
