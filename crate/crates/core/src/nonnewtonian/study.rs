use std::sync::Arc;
use std::time::Instant;

use super::model::{eval_stress, StressModel, StressModelSpec};
use super::solvers::{solve_smagorinski, NonlinearOptions};
use crate::error::{invalid, Error, Result};
use crate::fem::{frobenius, interpolate_velocity, sym, FEFunction, Mat3, TaylorHoodSpace};
use crate::harness::{LevelRow, ManufacturedCase, StudyReport, TensorField};
use crate::mesh::{quadrature, Point};

/// Quadrature order of the error integrals.
const ERROR_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainErrors {
    /// `|eps(u - u_h)|_{L^2}`
    pub l2: f64,
    /// `|eps(u - u_h)|_{L^q(omega)}` with the model's `q` and `omega`.
    pub lq_weighted: f64,
}

/// Strain errors of `uh` against the exact gradient `grad`.
pub fn strain_errors(model: &StressModel, grad: &dyn Fn(Point) -> Mat3, uh: &FEFunction) -> Result<StrainErrors> {
    let space = uh.space();
    let rule = quadrature(ERROR_ORDER)?;
    let q = model.power();
    let (mut l2, mut lq) = (0.0, 0.0);
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        let scale = 6.0 * geo.volume;
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let ge = grad(x);
            let gh = uh.gradient_local(t, l);
            let mut d = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    d[i][j] = ge[i][j] - gh[i][j];
                }
            }
            let n = frobenius(&sym(&d));
            l2 += scale * w * n * n;
            lq += scale * w * model.omega(x)? * n.powf(q);
        }
    }
    Ok(StrainErrors { l2: l2.sqrt(), lq_weighted: lq.powf(1.0 / q) })
}

/// `f = S(x, eps(u)) - p I`, so that the exact pair solves the weak problem
/// with load `int f : grad v`.
pub fn manufactured_forcing(model: &StressModel, case: &ManufacturedCase) -> Result<TensorField> {
    model.validate()?;
    let grad = case.gradient.clone().ok_or_else(|| invalid(format!("case `{}` has no exact solution", case.name)))?;
    let pressure = case.pressure.clone();
    let model = model.clone();
    Ok(Arc::new(move |x: Point| {
        let mut s = eval_stress(&model, x, &grad(x)).unwrap_or([[f64::NAN; 3]; 3]);
        let p = pressure.as_ref().map_or(0.0, |p| p(x));
        for (i, row) in s.iter_mut().enumerate() {
            row[i] -= p;
        }
        s
    }))
}

/// Solves the Smagorinski problem with manufactured data on each space and
/// tabulates the two sides of the quasi-optimality bound with the nodal
/// interpolant as best-approximation proxy.
///
/// For `q >= 2`: `lhs = |e|^2 + |e|^q_{L^q(omega)}` and
/// `rhs = |e_I|^2 + |e_I|^{q'}_{L^q(omega)}`, with `e = eps(u - u_h)`.
/// For `q < 2`: `lhs = |e|^2` and `rhs = |e_I|^2 + |e_I|_{L^q(omega)}`.
///
/// `opts.tol` is read relative to `|eps(I_h u)|_{L^2}` (when that exceeds 1)
/// so that scaled data keep the nonlinear error far below the
/// discretization error.
pub fn smagorinski_error_study(
    spaces: &[Arc<TaylorHoodSpace>],
    spec: &StressModelSpec,
    case: &ManufacturedCase,
    opts: &NonlinearOptions,
) -> Result<StudyReport> {
    let model = spec.build()?;
    let grad = case.gradient.clone().ok_or_else(|| invalid(format!("case `{}` has no exact solution", case.name)))?;
    let velocity = case.velocity.clone().ok_or_else(|| invalid("case has no exact velocity"))?;
    let f = manufactured_forcing(&model, case)?;
    let q = model.power();
    let mut report = StudyReport::new(
        &case.name,
        Some(spec.clone()),
        &["strain_l2", "strain_lq_weighted", "interp_strain_l2", "interp_strain_lq_weighted"],
        &["lhs", "rhs", "ratio"],
    );
    for (level, space) in spaces.iter().enumerate() {
        let start = Instant::now();
        let interp = interpolate_velocity(space, |x| velocity(x));
        let ei = strain_errors(&model, &*grad, &interp)?;
        let scale = strain_errors(&model, &|_| [[0.0; 3]; 3], &interp)?.l2.max(1.0);
        let level_opts = NonlinearOptions { tol: opts.tol * scale, ..opts.clone() };
        let sol = match solve_smagorinski(space, &model, &*f, &level_opts) {
            Ok(s) => s,
            Err(e) => return Err(Error::Study { level, source: Box::new(e), partial: Box::new(report) }),
        };
        let e = strain_errors(&model, &*grad, &sol.velocity)?;
        let (lhs, rhs) = if q >= 2.0 {
            (e.l2.powi(2) + e.lq_weighted.powf(q), ei.l2.powi(2) + ei.lq_weighted.powf(q / (q - 1.0)))
        } else {
            (e.l2.powi(2), ei.l2.powi(2) + ei.lq_weighted)
        };
        let n = n_subdivisions(space).ok_or_else(|| invalid("study spaces must be structured unit-cube meshes"))?;
        report.traces.push(sol.trace.clone());
        report.push_level(LevelRow {
            n,
            h: 1.0 / n as f64,
            velocity_dofs: space.n_velocity_dofs(),
            pressure_dofs: space.n_pressure_dofs(),
            errors: vec![e.l2, e.lq_weighted, ei.l2, ei.lq_weighted],
            ratios: vec![lhs, rhs, lhs / rhs],
            iterations: sol.trace.iterations,
            seconds: start.elapsed().as_secs_f64(),
        })?;
    }
    Ok(report)
}

/// Edge subdivisions of a structured unit-cube mesh, from its vertex count.
pub(crate) fn n_subdivisions(space: &TaylorHoodSpace) -> Option<usize> {
    let nv = space.mesh().n_vertices();
    let m = (nv as f64).cbrt().round() as usize;
    (m >= 2 && m * m * m == nv).then(|| m - 1)
}
