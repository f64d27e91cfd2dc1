//! Muckenhoupt weights on the unit cube.
//!
//! A [`WeightField`] is evaluable pointwise; power kinds are regularized as
//! `(rho^2 + eps^2)^(alpha/2)` with `rho` the distance to a point or to the
//! boundary. The submodules estimate the A_q characteristic on dyadic cubes,
//! evaluate discrete maximal operators, and split zero-mean functions.

mod aq;
mod decompose;
mod maximal;

pub use aq::{estimate_aq, AqEstimate};
pub use decompose::{decompose_zero_mean, Cube, DecompositionReport, ZeroMeanSplit};
pub use maximal::{maximal_fields, maximal_hl, maximal_sharp, ScalarGrid};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{dist_to_cube_boundary, Point};

type WeightFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WeightKind {
    Constant,
    /// `|x - center|^alpha`.
    PowerPoint { center: Point },
    /// `dist(x, boundary of the unit cube)^alpha`.
    PowerBoundary,
    Product(Box<WeightField>, Box<WeightField>),
    Custom(WeightFn),
}

#[derive(Clone)]
pub struct WeightField {
    pub kind: WeightKind,
    pub alpha: f64,
    pub epsilon: f64,
}

impl fmt::Debug for WeightField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            WeightKind::Constant => write!(f, "constant"),
            WeightKind::PowerPoint { center } => {
                write!(f, "|x-{center:?}|^{} (eps {})", self.alpha, self.epsilon)
            }
            WeightKind::PowerBoundary => write!(f, "dist(x,bd)^{} (eps {})", self.alpha, self.epsilon),
            WeightKind::Product(a, b) => write!(f, "({a:?})*({b:?})"),
            WeightKind::Custom(_) => write!(f, "custom"),
        }
    }
}

impl WeightField {
    pub fn constant() -> Self {
        Self { kind: WeightKind::Constant, alpha: 0.0, epsilon: 0.0 }
    }

    pub fn power_point(center: Point, alpha: f64, epsilon: f64) -> Self {
        Self { kind: WeightKind::PowerPoint { center }, alpha, epsilon }
    }

    pub fn power_boundary(alpha: f64, epsilon: f64) -> Self {
        Self { kind: WeightKind::PowerBoundary, alpha, epsilon }
    }

    pub fn product(a: WeightField, b: WeightField) -> Self {
        Self { kind: WeightKind::Product(Box::new(a), Box::new(b)), alpha: 0.0, epsilon: 0.0 }
    }

    pub fn custom(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: WeightKind::Custom(Arc::new(f)), alpha: 0.0, epsilon: 0.0 }
    }

    /// A positive multiple of the constant weight.
    pub fn scaled_constant(c: f64) -> Self {
        Self::custom(move |_| c)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, WeightKind::Constant)
    }

    /// Returns the same weight with the given regularization.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Evaluates the weight.
    pub fn eval(&self, x: Point) -> Result<f64> {
        match &self.kind {
            WeightKind::Constant => Ok(1.0),
            WeightKind::PowerPoint { center } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                self.power(d[0] * d[0] + d[1] * d[1] + d[2] * d[2], x)
            }
            WeightKind::PowerBoundary => {
                let d = dist_to_cube_boundary(x);
                self.power(d * d, x)
            }
            WeightKind::Product(a, b) => Ok(a.eval(x)? * b.eval(x)?),
            WeightKind::Custom(f) => {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SingularEvaluation(x))
                }
            }
        }
    }

    fn power(&self, rho2: f64, x: Point) -> Result<f64> {
        if self.alpha == 0.0 {
            return Ok(1.0);
        }
        let r2 = rho2 + self.epsilon * self.epsilon;
        if r2 == 0.0 && self.alpha < 0.0 {
            return Err(Error::SingularEvaluation(x));
        }
        Ok(r2.powf(0.5 * self.alpha))
    }

    /// True when an unregularized power weight blows up at `x`.
    pub fn is_singular_at(&self, x: Point) -> bool {
        self.eval(x).is_err()
    }

    /// Point singularities of the weight (for quadrature that must avoid them).
    pub fn singular_points(&self) -> Vec<Point> {
        match &self.kind {
            WeightKind::PowerPoint { center } if self.epsilon == 0.0 && self.alpha < 0.0 => vec![*center],
            WeightKind::Product(a, b) => {
                let mut v = a.singular_points();
                v.extend(b.singular_points());
                v
            }
            _ => Vec::new(),
        }
    }
}

/// The dual weight `w^(1/(1-q))`.
pub fn dual_weight(w: &WeightField, q: f64) -> Result<WeightField> {
    if q.is_nan() || q <= 1.0 {
        return Err(invalid(format!("dual weight needs q > 1, got {q}")));
    }
    let e = 1.0 / (1.0 - q);
    Ok(match &w.kind {
        WeightKind::Constant => WeightField::constant(),
        WeightKind::PowerPoint { .. } | WeightKind::PowerBoundary => {
            WeightField { kind: w.kind.clone(), alpha: w.alpha * e, epsilon: w.epsilon }
        }
        WeightKind::Product(a, b) => WeightField::product(dual_weight(a, q)?, dual_weight(b, q)?),
        WeightKind::Custom(f) => {
            let f = f.clone();
            WeightField::custom(move |x| f(x).powf(e))
        }
    })
}

/// Hoelder conjugate `q/(q-1)`.
pub fn conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

/// Config-file form of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub center: Option<Point>,
    #[serde(default)]
    pub epsilon: f64,
}

impl WeightSpec {
    pub fn constant() -> Self {
        Self { kind: "constant".into(), alpha: 0.0, center: None, epsilon: 0.0 }
    }

    pub fn build(&self) -> Result<WeightField> {
        if self.epsilon < 0.0 {
            return Err(invalid("weight epsilon must be >= 0"));
        }
        match self.kind.as_str() {
            "constant" => Ok(WeightField::constant()),
            "power_point" => {
                let center = self.center.ok_or_else(|| invalid("power_point weight needs a center"))?;
                Ok(WeightField::power_point(center, self.alpha, self.epsilon))
            }
            "power_boundary" => Ok(WeightField::power_boundary(self.alpha, self.epsilon)),
            other => Err(invalid(format!(
                "unknown weight kind `{other}` (expected power_point, power_boundary or constant)"
            ))),
        }
    }
}

/// Outcome of [`is_in_restricted_class`].
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedClassReport {
    pub member: bool,
    /// Smallest sampled value in the boundary collar.
    pub lower_bound: f64,
    /// Sample where the lower bound (or a failed evaluation) occurred.
    pub witness: Point,
}

/// Samples per axis used for the boundary collar.
const COLLAR_SAMPLES: usize = 41;

/// Sampled check that the weight is continuous and bounded below in the
/// collar `{dist(x, boundary) <= margin}` of the unit cube.
pub fn is_in_restricted_class(w: &WeightField, margin: f64) -> Result<RestrictedClassReport> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(invalid(format!("collar margin must lie in (0, 0.5), got {margin}")));
    }
    let n = COLLAR_SAMPLES - 1;
    let mut lower = f64::INFINITY;
    let mut witness = [0.0; 3];
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let x = [i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64];
                if dist_to_cube_boundary(x) > margin {
                    continue;
                }
                match w.eval(x) {
                    Ok(v) if v.is_finite() => {
                        if v < lower {
                            lower = v;
                            witness = x;
                        }
                    }
                    _ => {
                        return Ok(RestrictedClassReport { member: false, lower_bound: f64::NAN, witness: x })
                    }
                }
            }
        }
    }
    Ok(RestrictedClassReport { member: lower > 1e-12, lower_bound: lower, witness })
}
