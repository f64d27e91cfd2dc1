use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cases::{builtin_case, ManufacturedCase};
use super::report::{LevelRow, StudyReport};
use crate::error::{invalid, Error, Result};
use crate::fem::{frobenius, interpolate_velocity, sym, weighted_norm_of, FEFunction, Mat3, TaylorHoodSpace};
use crate::mesh::Point;
use crate::nonnewtonian::{
    manufactured_forcing, solve_bulicek, solve_smagorinski, strain_errors, NonlinearOptions, StressKind,
    StressModel, StressModelSpec,
};
use crate::stokes::{assemble_rhs_measure, assemble_stokes, solve_saddle, stokes_projection, ExactSolution};
use crate::weights::{WeightField, WeightSpec};

/// Quadrature order of error integrals.
const ERROR_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormQuantity {
    Velocity,
    Gradient,
    SymmetricGradient,
    Pressure,
}

/// One error column: `|quantity(u) - quantity(u_h)|_{L^q(weight)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    #[serde(default = "WeightSpec::constant")]
    pub weight: WeightSpec,
    #[serde(default = "two")]
    pub q: f64,
    pub derivative: NormQuantity,
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn unit_cube() -> String {
    "unit_cube".into()
}

impl NormSpec {
    pub fn new(derivative: NormQuantity) -> Self {
        Self { weight: WeightSpec::constant(), q: 2.0, derivative }
    }

    /// Column name such as `gradient_l2` or `pressure_l2_power_point_a1`.
    pub fn column_name(&self) -> String {
        let base = match self.derivative {
            NormQuantity::Velocity => "velocity",
            NormQuantity::Gradient => "gradient",
            NormQuantity::SymmetricGradient => "strain",
            NormQuantity::Pressure => "pressure",
        };
        let mut name = if self.q == 2.0 { format!("{base}_l2") } else { format!("{base}_l{}", self.q) };
        if self.weight.kind != "constant" {
            name.push_str(&format!("_{}_a{}", self.weight.kind, self.weight.alpha));
        }
        name
    }
}

/// Study configuration; see the README for the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(default = "unit_cube")]
    pub domain: String,
    pub case: String,
    /// Stress model; absent means linear Stokes `-div(2 mu eps(u)) + grad p`.
    #[serde(default)]
    pub model: Option<StressModelSpec>,
    #[serde(default = "one")]
    pub mu: f64,
    /// Cells per cube edge, each level doubling the previous one.
    pub levels: Vec<usize>,
    #[serde(default)]
    pub norms: Vec<NormSpec>,
    #[serde(default)]
    pub solver: NonlinearOptions,
    #[serde(default = "one")]
    pub velocity_scale: f64,
    #[serde(default = "one")]
    pub pressure_scale: f64,
    /// Cells per edge of the reference solve for cases without a closed
    /// form; defaults to twice the finest level.
    #[serde(default)]
    pub reference_level: Option<usize>,
    /// Weights of the projection stability ratios (linear Stokes only).
    #[serde(default)]
    pub stability_weights: Vec<WeightSpec>,
}

impl StudyConfig {
    pub fn new(case: &str, levels: Vec<usize>) -> Self {
        Self {
            domain: unit_cube(),
            case: case.into(),
            model: None,
            mu: 1.0,
            levels,
            norms: Vec::new(),
            solver: NonlinearOptions::default(),
            velocity_scale: 1.0,
            pressure_scale: 1.0,
            reference_level: None,
            stability_weights: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.domain != "unit_cube" {
            return Err(invalid(format!("unsupported domain `{}` (only unit_cube)", self.domain)));
        }
        if self.levels.len() < 3 {
            return Err(invalid("a study needs at least three levels"));
        }
        if self.levels[0] == 0 || self.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(invalid(format!("levels must double from one to the next, got {:?}", self.levels)));
        }
        if !(self.mu > 0.0) {
            return Err(invalid("mu must be positive"));
        }
        Ok(())
    }

    fn norms_or_default(&self) -> Vec<NormSpec> {
        if self.norms.is_empty() {
            vec![
                NormSpec::new(NormQuantity::Velocity),
                NormSpec::new(NormQuantity::Gradient),
                NormSpec::new(NormQuantity::Pressure),
            ]
        } else {
            self.norms.clone()
        }
    }
}

/// Error of a reference-based study measured against two references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub n: usize,
    /// Error against the finest reported level.
    pub against_finest_level: f64,
    /// Error against the reference level.
    pub against_reference: f64,
    /// Distance between the finest reported level and the reference.
    pub finest_to_reference: f64,
}

impl ReferenceCheck {
    /// Triangle inequality between the two error estimates and the distance
    /// of the two references, with round-off slack.
    pub fn is_consistent(&self) -> bool {
        (self.against_reference - self.against_finest_level).abs() <= self.finest_to_reference * (1.0 + 1e-10) + 1e-14
    }
}

/// Nested spaces for the given edge counts, sharing one refinement chain.
pub fn nested_spaces(levels: &[usize]) -> Result<Vec<Arc<TaylorHoodSpace>>> {
    let mut out: Vec<Arc<TaylorHoodSpace>> = Vec::with_capacity(levels.len());
    for &n in levels {
        let space = match out.last() {
            Some(prev) if n == 2 * n_of(prev) => prev.refine()?,
            _ => TaylorHoodSpace::unit_cube(n)?,
        };
        out.push(space);
    }
    Ok(out)
}

fn n_of(space: &TaylorHoodSpace) -> usize {
    let nv = space.mesh().n_vertices();
    (nv as f64).cbrt().round() as usize - 1
}

fn row(space: &TaylorHoodSpace, errors: Vec<f64>, ratios: Vec<f64>, iterations: usize, start: Instant) -> LevelRow {
    let n = n_of(space);
    LevelRow {
        n,
        h: 1.0 / n as f64,
        velocity_dofs: space.n_velocity_dofs(),
        pressure_dofs: space.n_pressure_dofs(),
        errors,
        ratios,
        iterations,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn fail(level: usize, e: Error, report: StudyReport) -> Error {
    match e {
        Error::Study { .. } => e,
        e => Error::Study { level, source: Box::new(e), partial: Box::new(report) },
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let case = builtin_case(&config.case)?.scaled(config.velocity_scale, config.pressure_scale);
    let norms = config.norms_or_default();
    if !case.has_exact_solution() {
        if config.model.is_some() {
            return Err(invalid(format!("case `{}` is only available for linear Stokes", case.name)));
        }
        return reference_study(config, &case, &norms);
    }
    match &config.model {
        None => linear_study(config, &case, &norms),
        Some(spec) => nonlinear_study(config, spec, &case, &norms),
    }
}

fn exact_error(space: &TaylorHoodSpace, case: &ManufacturedCase, norm: &NormSpec, u: &FEFunction, p: &FEFunction) -> Result<f64> {
    let w = norm.weight.build()?;
    let velocity = case.velocity.as_ref().ok_or_else(|| invalid("case has no exact velocity"))?;
    let gradient = case.gradient.as_ref().ok_or_else(|| invalid("case has no exact gradient"))?;
    weighted_norm_of(space, &w, norm.q, ERROR_ORDER, |t, l, x| match norm.derivative {
        NormQuantity::Velocity => {
            let (a, b) = (velocity(x), u.velocity_local(t, l));
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        }
        NormQuantity::Gradient | NormQuantity::SymmetricGradient => {
            let d = mat_sub(&gradient(x), &u.gradient_local(t, l));
            if norm.derivative == NormQuantity::Gradient {
                frobenius(&d)
            } else {
                frobenius(&sym(&d))
            }
        }
        NormQuantity::Pressure => {
            let exact = case.pressure.as_ref().map_or(0.0, |f| f(x));
            exact - p.pressure_local(t, l)
        }
    })
}

fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] -= b[i][j];
        }
    }
    c
}

/// `(|eps(u_h)|_w + |p_h|_w) / (|eps(u)|_w + |p|_w)` in `L^2(w)`.
pub fn projection_stability_ratio(
    case: &ManufacturedCase,
    weight: &WeightField,
    u: &FEFunction,
    p: &FEFunction,
) -> Result<f64> {
    let space = u.space();
    let gradient = case.gradient.as_ref().ok_or_else(|| invalid("case has no exact gradient"))?;
    let pressure = case.pressure.as_ref();
    let num = weighted_norm_of(space, weight, 2.0, ERROR_ORDER, |t, l, _| frobenius(&sym(&u.gradient_local(t, l))))?
        + weighted_norm_of(space, weight, 2.0, ERROR_ORDER, |t, l, _| p.pressure_local(t, l))?;
    let den = weighted_norm_of(space, weight, 2.0, ERROR_ORDER, |_, _, x| frobenius(&sym(&gradient(x))))?
        + weighted_norm_of(space, weight, 2.0, ERROR_ORDER, |_, _, x| pressure.map_or(0.0, |f| f(x)))?;
    Ok(num / den)
}

fn linear_study(config: &StudyConfig, case: &ManufacturedCase, norms: &[NormSpec]) -> Result<StudyReport> {
    let names: Vec<String> = norms.iter().map(|n| n.column_name()).collect();
    let ratio_names: Vec<String> = config
        .stability_weights
        .iter()
        .map(|w| if w.kind == "constant" { "stability_constant".to_string() } else { format!("stability_{}_a{}", w.kind, w.alpha) })
        .collect();
    let weights: Vec<WeightField> = config.stability_weights.iter().map(|w| w.build()).collect::<Result<_>>()?;
    let mut report = StudyReport::new(
        &case.name,
        None,
        &names.iter().map(String::as_str).collect::<Vec<_>>(),
        &ratio_names.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    let velocity = case.velocity.clone().ok_or_else(|| invalid("case has no exact velocity"))?;
    let gradient = case.gradient.clone().ok_or_else(|| invalid("case has no exact gradient"))?;
    let pressure = case.pressure.clone();
    let pfun = move |x: Point| pressure.as_ref().map_or(0.0, |f| f(x));
    let exact = ExactSolution { velocity: &*velocity, gradient: &*gradient, pressure: &pfun };
    let spaces = nested_spaces(&config.levels)?;
    for (level, space) in spaces.iter().enumerate() {
        let start = Instant::now();
        let result = (|| {
            let sol = stokes_projection(space, &exact, config.mu, &config.solver.solver)?;
            let errors =
                norms.iter().map(|n| exact_error(space, case, n, &sol.velocity, &sol.pressure)).collect::<Result<Vec<_>>>()?;
            let ratios = weights
                .iter()
                .map(|w| projection_stability_ratio(case, w, &sol.velocity, &sol.pressure))
                .collect::<Result<Vec<_>>>()?;
            Ok(row(space, errors, ratios, sol.stats.iterations, start))
        })();
        match result {
            Ok(r) => report.push_level(r)?,
            Err(e) => return Err(fail(level, e, report)),
        }
    }
    Ok(report)
}

fn nonlinear_study(
    config: &StudyConfig,
    spec: &StressModelSpec,
    case: &ManufacturedCase,
    norms: &[NormSpec],
) -> Result<StudyReport> {
    let model: StressModel = spec.build()?;
    let smagorinski = matches!(model.kind, StressKind::SmagorinskiGeneralized | StressKind::SmagorinskiDistance);
    let names: Vec<String> = norms.iter().map(|n| n.column_name()).collect();
    let ratio_names: &[&str] = if smagorinski { &["lhs", "rhs", "ratio"] } else { &[] };
    let mut report =
        StudyReport::new(&case.name, Some(spec.clone()), &names.iter().map(String::as_str).collect::<Vec<_>>(), ratio_names);
    let f = manufactured_forcing(&model, case)?;
    let velocity = case.velocity.clone().ok_or_else(|| invalid("case has no exact velocity"))?;
    let gradient = case.gradient.clone().ok_or_else(|| invalid("case has no exact gradient"))?;
    let spaces = nested_spaces(&config.levels)?;
    let q = model.power();
    for (level, space) in spaces.iter().enumerate() {
        let start = Instant::now();
        let result = (|| {
            let sol = if smagorinski {
                solve_smagorinski(space, &model, &*f, &config.solver)?
            } else {
                solve_bulicek(space, &model, &*f, &config.solver)?
            };
            let errors =
                norms.iter().map(|n| exact_error(space, case, n, &sol.velocity, &sol.pressure)).collect::<Result<Vec<_>>>()?;
            let ratios = if smagorinski {
                let e = strain_errors(&model, &*gradient, &sol.velocity)?;
                let ei = strain_errors(&model, &*gradient, &interpolate_velocity(space, |x| velocity(x)))?;
                let (lhs, rhs) = if q >= 2.0 {
                    (e.l2.powi(2) + e.lq_weighted.powf(q), ei.l2.powi(2) + ei.lq_weighted.powf(q / (q - 1.0)))
                } else {
                    (e.l2.powi(2), ei.l2.powi(2) + ei.lq_weighted)
                };
                vec![lhs, rhs, lhs / rhs]
            } else {
                Vec::new()
            };
            Ok((row(space, errors, ratios, sol.trace.iterations, start), sol.trace))
        })();
        match result {
            Ok((r, trace)) => {
                report.traces.push(trace);
                report.push_level(r)?;
            }
            Err(e) => return Err(fail(level, e, report)),
        }
    }
    Ok(report)
}

/// Linear Stokes with a point load at each level; errors are measured
/// against the solution on a finer nested reference mesh.
fn reference_study(config: &StudyConfig, case: &ManufacturedCase, norms: &[NormSpec]) -> Result<StudyReport> {
    let (z, amplitude) = case.point_load.ok_or_else(|| invalid("case has neither a closed form nor a point load"))?;
    if norms.iter().any(|n| n.derivative == NormQuantity::Pressure) {
        return Err(invalid("pressure errors are not available against a reference solution"));
    }
    let finest = *config.levels.last().expect("validated");
    let reference_n = config.reference_level.unwrap_or(2 * finest);
    if reference_n <= finest || reference_n % finest != 0 || !(reference_n / finest).is_power_of_two() {
        return Err(invalid("reference level must be the finest level refined at least once"));
    }
    let names: Vec<String> = norms.iter().map(|n| n.column_name()).collect();
    let mut report =
        StudyReport::new(&case.name, None, &names.iter().map(String::as_str).collect::<Vec<_>>(), &[]);
    let mut chain = config.levels.clone();
    let mut n = finest;
    while n < reference_n {
        n *= 2;
        chain.push(n);
    }
    let spaces = nested_spaces(&chain)?;
    let n_levels = config.levels.len();
    let solve = |space: &Arc<TaylorHoodSpace>| -> Result<(FEFunction, usize)> {
        let f = assemble_rhs_measure(space, z, amplitude)?;
        let system = assemble_stokes(space, config.mu)?.with_rhs(f, vec![0.0; space.n_pressure_dofs()])?;
        let sol = solve_saddle(&system, &config.solver.solver)?;
        Ok((sol.velocity, sol.stats.iterations))
    };
    let reference = match solve(&spaces[spaces.len() - 1]) {
        Ok((u, _)) => u,
        Err(e) => return Err(fail(n_levels, e, report)),
    };
    let mut solutions = Vec::with_capacity(n_levels);
    for (level, space) in spaces[..n_levels].iter().enumerate() {
        let start = Instant::now();
        let result = (|| {
            let (u, its) = solve(space)?;
            let errors = norms.iter().map(|nm| nested_difference(&u, &reference, nm)).collect::<Result<Vec<_>>>()?;
            Ok((row(space, errors, Vec::new(), its, start), u))
        })();
        match result {
            Ok((r, u)) => {
                report.push_level(r)?;
                solutions.push(u);
            }
            Err(e) => return Err(fail(level, e, report)),
        }
    }
    report.notes.push(format!("reference solution on n = {reference_n}"));
    // the same errors against the finest reported level instead
    let finest_u = &solutions[n_levels - 1];
    let first = &norms[0];
    let gap = report.levels[n_levels - 1].errors[0];
    for (u, r) in solutions[..n_levels - 1].iter().zip(&report.levels) {
        let check = ReferenceCheck {
            n: r.n,
            against_finest_level: nested_difference(u, finest_u, first)?,
            against_reference: r.errors[0],
            finest_to_reference: gap,
        };
        report.notes.push(format!(
            "{} at n = {}: {:.6e} against n = {finest}, {:.6e} against n = {reference_n}",
            first.column_name(),
            check.n,
            check.against_finest_level,
            check.against_reference
        ));
        report.reference_checks.push(check);
    }
    Ok(report)
}

/// Fine-to-coarse tet map when `coarse` is an ancestor of `fine`.
pub fn ancestor_map(fine: &Arc<TaylorHoodSpace>, coarse: &Arc<TaylorHoodSpace>) -> Result<Vec<usize>> {
    let mut map: Vec<usize> = (0..fine.mesh().n_tets()).collect();
    let mut cur = fine.clone();
    while !Arc::ptr_eq(&cur, coarse) {
        let parents = cur.mesh().parents().ok_or_else(|| invalid("spaces are not nested"))?;
        for t in map.iter_mut() {
            *t = parents[*t];
        }
        cur = cur.coarse().cloned().ok_or_else(|| invalid("spaces are not nested"))?;
    }
    Ok(map)
}

/// `|u_coarse - u_fine|` in the requested norm, integrated on the fine mesh.
pub fn nested_difference(coarse: &FEFunction, fine: &FEFunction, norm: &NormSpec) -> Result<f64> {
    let fs = fine.space();
    let cs = coarse.space();
    let map = ancestor_map(fs, cs)?;
    let w = norm.weight.build()?;
    weighted_norm_of(fs, &w, norm.q, ERROR_ORDER, |t, l, x| {
        let tc = map[t];
        let lc = cs.geometry(tc).barycentric(x);
        match norm.derivative {
            NormQuantity::Velocity => {
                let (a, b) = (coarse.velocity_local(tc, &lc), fine.velocity_local(t, l));
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
            NormQuantity::Gradient => frobenius(&mat_sub(&coarse.gradient_local(tc, &lc), &fine.gradient_local(t, l))),
            NormQuantity::SymmetricGradient => {
                frobenius(&sym(&mat_sub(&coarse.gradient_local(tc, &lc), &fine.gradient_local(t, l))))
            }
            NormQuantity::Pressure => coarse.pressure_local(tc, &lc) - fine.pressure_local(t, l),
        }
    })
}
