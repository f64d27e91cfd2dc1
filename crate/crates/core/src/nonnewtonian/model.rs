use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fem::{frobenius, sym, Mat3};
use crate::mesh::{dist_to_cube_boundary, Point};
use crate::weights::{WeightField, WeightSpec};

/// Regularization of `|Q^s|` in the viscosity when `q < 2`.
pub const EPS_REG: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressKind {
    /// `mu Q^s`
    Linear,
    /// `mu Q^s + chi(x) Q^s / (1 + |Q^s|)`
    BoundedPerturbation,
    /// `(mu + omega(x) |Q^s|^(q-2)) Q^s`
    SmagorinskiGeneralized,
    /// `(mu + mu_nl dist(x)^alpha |Q^s|) Q^s`
    SmagorinskiDistance,
}

/// Constitutive law `S(x, Q)`, depending on `Q` only through its symmetric
/// part.
#[derive(Debug, Clone)]
pub struct StressModel {
    pub kind: StressKind,
    pub mu: f64,
    pub mu_nl: f64,
    pub q: f64,
    pub alpha: f64,
    pub weight: WeightField,
    /// Amplitude bound of `chi` for the bounded perturbation.
    pub chi_max: f64,
}

impl StressModel {
    pub fn linear(mu: f64) -> Self {
        Self { kind: StressKind::Linear, mu, mu_nl: 0.0, q: 2.0, alpha: 0.0, weight: WeightField::constant(), chi_max: 0.0 }
    }

    /// Bounded perturbation with `chi = chi_max (1 + sin 2pi x sin 2pi y sin 2pi z) / 2`.
    pub fn bounded_perturbation(mu: f64, chi_max: f64) -> Self {
        Self { kind: StressKind::BoundedPerturbation, chi_max, ..Self::linear(mu) }
    }

    pub fn smagorinski_generalized(mu: f64, q: f64, weight: WeightField) -> Self {
        Self { kind: StressKind::SmagorinskiGeneralized, q, weight, ..Self::linear(mu) }
    }

    pub fn smagorinski_distance(mu: f64, mu_nl: f64, alpha: f64) -> Self {
        Self { kind: StressKind::SmagorinskiDistance, mu_nl, alpha, q: 3.0, ..Self::linear(mu) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(invalid(format!("viscosity mu must be positive, got {}", self.mu)));
        }
        match self.kind {
            StressKind::SmagorinskiGeneralized if !(self.q > 1.0) || !self.q.is_finite() => {
                Err(invalid(format!("power-law index must lie in (1, inf), got {}", self.q)))
            }
            StressKind::SmagorinskiDistance if self.mu_nl < 0.0 => Err(invalid("mu_nl must be >= 0")),
            StressKind::BoundedPerturbation if self.chi_max < 0.0 => Err(invalid("chi_max must be >= 0")),
            _ => Ok(()),
        }
    }

    /// Index of the power-law part (2 for the linear kinds).
    pub fn power(&self) -> f64 {
        match self.kind {
            StressKind::SmagorinskiGeneralized => self.q,
            StressKind::SmagorinskiDistance => 3.0,
            _ => 2.0,
        }
    }

    /// The coefficient `omega(x)` in front of the power-law part.
    pub fn omega(&self, x: Point) -> Result<f64> {
        match self.kind {
            StressKind::SmagorinskiGeneralized => self.weight.eval(x),
            StressKind::SmagorinskiDistance => {
                if self.mu_nl == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(self.mu_nl * dist_to_cube_boundary(x).powf(self.alpha))
                }
            }
            _ => Ok(0.0),
        }
    }

    pub fn chi(&self, x: Point) -> f64 {
        self.chi_max * 0.5 * (1.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin() * (2.0 * PI * x[2]).sin())
    }

    /// Secant viscosity `nu` with `S = nu Q^s`, given `omega(x)` and
    /// `|Q^s|`; `reg` switches on the regularized form for `q < 2`.
    pub fn secant_viscosity(&self, x: Point, omega: f64, norm: f64, reg: bool) -> f64 {
        match self.kind {
            StressKind::Linear => self.mu,
            StressKind::BoundedPerturbation => self.mu + self.chi(x) / (1.0 + norm),
            StressKind::SmagorinskiGeneralized | StressKind::SmagorinskiDistance => {
                let q = self.power();
                if omega == 0.0 || q == 2.0 {
                    return self.mu + if q == 2.0 { omega } else { 0.0 };
                }
                if q < 2.0 {
                    if reg {
                        self.mu + omega * (norm * norm + EPS_REG * EPS_REG).powf(0.5 * (q - 2.0))
                    } else if norm == 0.0 {
                        self.mu
                    } else {
                        self.mu + omega * norm.powf(q - 2.0)
                    }
                } else {
                    self.mu + omega * norm.powf(q - 2.0)
                }
            }
        }
    }

    /// Potential `A(x, Q^s)` with `S = dA/dQ^s` (regularized for `q < 2`).
    pub fn potential(&self, x: Point, omega: f64, norm: f64) -> f64 {
        let quad = 0.5 * self.mu * norm * norm;
        match self.kind {
            StressKind::Linear => quad,
            StressKind::BoundedPerturbation => quad + self.chi(x) * (norm - norm.ln_1p()),
            _ => {
                let q = self.power();
                if omega == 0.0 {
                    quad
                } else if q < 2.0 {
                    quad + omega / q * (norm * norm + EPS_REG * EPS_REG).powf(0.5 * q)
                } else {
                    quad + omega / q * norm.powf(q)
                }
            }
        }
    }

    /// `A(x, |Q + D|) - A(x, |Q|)` without cancellation, given
    /// `a2 = |Q + D|^2` and `b2 = |Q|^2` and `diff = a2 - b2` computed
    /// from `2 Q:D + |D|^2`.
    pub fn potential_difference(&self, x: Point, omega: f64, b2: f64, diff: f64) -> f64 {
        let a2 = b2 + diff;
        let quad = 0.5 * self.mu * diff;
        // |a|^p - |b|^p from a^2 - b^2
        let power_diff = |p: f64, shift: f64| -> f64 {
            let (aa, bb) = (a2 + shift, b2 + shift);
            if bb <= 0.0 {
                return aa.max(0.0).powf(0.5 * p);
            }
            let r = diff / bb;
            bb.powf(0.5 * p) * (0.5 * p * r.ln_1p()).exp_m1()
        };
        match self.kind {
            StressKind::Linear => quad,
            StressKind::BoundedPerturbation => {
                let (a, b) = (a2.max(0.0).sqrt(), b2.max(0.0).sqrt());
                let da = if a + b > 0.0 { diff / (a + b) } else { 0.0 };
                // (a - ln(1+a)) - (b - ln(1+b))
                quad + self.chi(x) * (da - (da / (1.0 + b)).ln_1p())
            }
            _ => {
                let q = self.power();
                if omega == 0.0 {
                    quad
                } else if q < 2.0 {
                    quad + omega / q * power_diff(q, EPS_REG * EPS_REG)
                } else {
                    quad + omega / q * power_diff(q, 0.0)
                }
            }
        }
    }
}

/// `S(x, Q)` from the model's formula; `Q` may be non-symmetric.
pub fn eval_stress(model: &StressModel, x: Point, q: &Mat3) -> Result<Mat3> {
    let qs = sym(q);
    let norm = frobenius(&qs);
    let omega = model.omega(x)?;
    let nu = model.secant_viscosity(x, omega, norm, false);
    Ok(qs.map(|r| r.map(|v| nu * v)))
}

/// JSON form `{"kind", "mu", "mu_nl", "q", "alpha", "weight", "chi_max"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressModelSpec {
    pub kind: StressKind,
    pub mu: f64,
    #[serde(default)]
    pub mu_nl: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "WeightSpec::constant")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub chi_max: Option<f64>,
}

fn two() -> f64 {
    2.0
}

impl StressModelSpec {
    pub fn linear(mu: f64) -> Self {
        Self { kind: StressKind::Linear, mu, mu_nl: 0.0, q: 2.0, alpha: 0.0, weight: WeightSpec::constant(), chi_max: None }
    }

    pub fn build(&self) -> Result<StressModel> {
        let m = match self.kind {
            StressKind::Linear => StressModel::linear(self.mu),
            StressKind::BoundedPerturbation => {
                StressModel::bounded_perturbation(self.mu, self.chi_max.unwrap_or(0.5 * self.mu))
            }
            StressKind::SmagorinskiGeneralized => {
                StressModel::smagorinski_generalized(self.mu, self.q, self.weight.build()?)
            }
            StressKind::SmagorinskiDistance => StressModel::smagorinski_distance(self.mu, self.mu_nl, self.alpha),
        };
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_difference_matches_direct() {
        let models = [
            StressModel::linear(1.5),
            StressModel::bounded_perturbation(1.0, 0.5),
            StressModel::smagorinski_generalized(1.0, 3.0, WeightField::constant()),
            StressModel::smagorinski_generalized(1.0, 1.5, WeightField::constant()),
            StressModel::smagorinski_distance(1.0, 0.3, 0.25),
        ];
        let x = [0.3, 0.4, 0.7];
        for m in &models {
            let om = m.omega(x).unwrap();
            for (a, b) in [(2.0_f64, 1.5_f64), (0.1, 0.7), (10.0, 10.001)] {
                let direct = m.potential(x, om, a) - m.potential(x, om, b);
                let d = m.potential_difference(x, om, b * b, a * a - b * b);
                assert!((direct - d).abs() <= 1e-10 * direct.abs().max(1e-12), "{:?} {a} {b}: {direct} {d}", m.kind);
            }
        }
    }

    #[test]
    fn potential_derivative_is_secant_viscosity_times_norm() {
        let m = StressModel::bounded_perturbation(1.0, 0.5);
        let x = [0.2, 0.3, 0.1];
        for n in [0.1, 1.0, 5.0] {
            let h = 1e-6;
            let fd = (m.potential(x, 0.0, n + h) - m.potential(x, 0.0, n - h)) / (2.0 * h);
            assert!((fd - m.secant_viscosity(x, 0.0, n, false) * n).abs() < 1e-8);
        }
    }
}
