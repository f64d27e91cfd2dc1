use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{eval_stress, StressModel};
use crate::error::Result;
use crate::fem::{ddot, frobenius, Mat3};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Sample at which a check was decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Point,
    pub q: Mat3,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Largest quotient per rung of the norm ladder, where applicable.
    pub trend: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub coercivity: AssumptionCheck,
    pub growth: AssumptionCheck,
    pub linearity_at_infinity: AssumptionCheck,
    pub monotonicity: AssumptionCheck,
    pub uhlenbeck: AssumptionCheck,
}

impl AssumptionReport {
    pub fn checks(&self) -> [(&'static str, &AssumptionCheck); 5] {
        [
            ("coercivity", &self.coercivity),
            ("growth", &self.growth),
            ("linearity_at_infinity", &self.linearity_at_infinity),
            ("monotonicity", &self.monotonicity),
            ("uhlenbeck", &self.uhlenbeck),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.verdict == Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub points: Vec<Point>,
    /// Norms `|Q^s|` of the ladder, increasing.
    pub norms: Vec<f64>,
    pub matrices_per_norm: usize,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        let mut points = Vec::new();
        for &a in &[0.2, 0.5, 0.8] {
            for &b in &[0.15, 0.5, 0.85] {
                for &c in &[0.3, 0.6] {
                    points.push([a, b, c]);
                }
            }
        }
        Self { points, norms: vec![1e-2, 1.0, 1e2, 1e4], matrices_per_norm: 6, seed: 11 }
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, norm: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = rng.random_range(-1.0..1.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let n = frobenius(&m);
    m.map(|r| r.map(|v| v * norm / n))
}

fn sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] -= b[i][j];
        }
    }
    c
}

fn scaled(a: &Mat3, s: f64) -> Mat3 {
    a.map(|r| r.map(|v| v * s))
}

/// Classifies per-rung maxima: zero, decaying, growing, or neither.
fn trend_verdict(trend: &[f64], zero: f64) -> Verdict {
    if trend.iter().all(|&v| v <= zero) {
        return Verdict::Pass;
    }
    let decreasing = trend.windows(2).all(|w| w[1] < w[0]);
    let increasing = trend.windows(2).all(|w| w[1] > w[0]);
    let (first, last) = (trend[0], trend[trend.len() - 1]);
    if decreasing && last <= 0.1 * first {
        Verdict::Pass
    } else if increasing && last > first {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Sampling-based verdicts for coercivity, growth, linearity at infinity,
/// strict monotonicity and the asymptotic Uhlenbeck condition.
pub fn check_assumptions(model: &StressModel, plan: &SamplePlan) -> Result<AssumptionReport> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let samples: Vec<Vec<Mat3>> = plan
        .norms
        .iter()
        .map(|&n| (0..plan.matrices_per_norm).map(|_| random_symmetric(&mut rng, n)).collect())
        .collect();
    let mu = model.mu;

    // coercivity: search c > 0 with c (|Q|^2 - 1) <= S:Q on every sample
    let mut c_best = f64::INFINITY;
    let mut worst: Option<Witness> = None;
    let mut negative: Option<Witness> = None;
    for &x in &plan.points {
        for rung in &samples {
            for q in rung {
                let s = eval_stress(model, x, q)?;
                let sq = ddot(&s, q);
                let n2 = ddot(q, q);
                if n2 > 1.0 {
                    let quot = sq / (n2 - 1.0);
                    if quot < c_best {
                        c_best = quot;
                        worst = Some(Witness { x, q: *q, quotient: quot });
                    }
                } else if sq < 0.0 && negative.is_none() {
                    negative = Some(Witness { x, q: *q, quotient: sq });
                }
            }
        }
    }
    let coercivity = if c_best > 0.0 && negative.is_none() {
        AssumptionCheck { verdict: Verdict::Pass, witness: worst, trend: vec![], detail: format!("constant {c_best:.4e}") }
    } else {
        AssumptionCheck {
            verdict: Verdict::Fail,
            witness: negative.or(worst),
            trend: vec![],
            detail: "no positive coercivity constant fits the samples".into(),
        }
    };

    // growth |S| / (1 + |Q|), linearity |S - mu Q| / |Q| and Uhlenbeck
    // |dS/dQ - mu I| along the ladder
    let mut growth_trend = Vec::new();
    let mut lin_trend = Vec::new();
    let mut uhl_trend = Vec::new();
    let mut growth_w = None;
    let mut lin_w = None;
    let mut uhl_w = None;
    for (rung, &norm) in samples.iter().zip(&plan.norms) {
        let (mut g, mut l, mut u) = (0.0_f64, 0.0_f64, 0.0_f64);
        for &x in &plan.points {
            for q in rung {
                let s = eval_stress(model, x, q)?;
                let gq = frobenius(&s) / (1.0 + norm);
                if gq >= g {
                    g = gq;
                    growth_w = Some(Witness { x, q: *q, quotient: gq });
                }
                let lq = frobenius(&sub(&s, &scaled(q, mu))) / norm;
                if lq >= l {
                    l = lq;
                    lin_w = Some(Witness { x, q: *q, quotient: lq });
                }
                let e = random_symmetric(&mut rng, 1.0);
                let h = 1e-5 * norm;
                let plus = eval_stress(model, x, &{
                    let mut m = *q;
                    for i in 0..3 {
                        for j in 0..3 {
                            m[i][j] += h * e[i][j];
                        }
                    }
                    m
                })?;
                let minus = eval_stress(model, x, &sub(q, &scaled(&e, h)))?;
                let d = sub(&scaled(&sub(&plus, &minus), 0.5 / h), &scaled(&e, mu));
                let uq = frobenius(&d);
                if uq >= u {
                    u = uq;
                    uhl_w = Some(Witness { x, q: *q, quotient: uq });
                }
            }
        }
        growth_trend.push(g);
        lin_trend.push(l);
        uhl_trend.push(u);
    }
    let growth_verdict = {
        let n = growth_trend.len();
        if n >= 2 && growth_trend[n - 1] > 2.0 * growth_trend[n - 2] {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    };
    let growth = AssumptionCheck {
        verdict: growth_verdict,
        detail: format!("max |S|/(1+|Q|) over samples {:.4e}", growth_trend.iter().cloned().fold(0.0, f64::max)),
        witness: growth_w,
        trend: growth_trend,
    };
    let lin_verdict = trend_verdict(&lin_trend, 1e-12 * mu);
    let linearity_at_infinity = AssumptionCheck {
        verdict: lin_verdict,
        detail: "max |S - mu Q^s| / |Q^s| per ladder rung".into(),
        witness: lin_w,
        trend: lin_trend,
    };
    // finite differences carry relative noise of about 1e-16 / 1e-5
    let uhl_verdict = trend_verdict(&uhl_trend, 1e-8 * mu);
    let uhlenbeck = AssumptionCheck {
        verdict: uhl_verdict,
        detail: "max |dS/dQ^s - mu I| per ladder rung (central differences)".into(),
        witness: uhl_w,
        trend: uhl_trend,
    };

    // strict monotonicity on pairs at a common point
    let all: Vec<&Mat3> = samples.iter().flatten().collect();
    let mut mono_fail = None;
    let mut mono_min = f64::INFINITY;
    let mut mono_w = None;
    'outer: for &x in &plan.points {
        for (i, q) in all.iter().enumerate() {
            let sq = eval_stress(model, x, q)?;
            for p in &all[i + 1..] {
                let sp = eval_stress(model, x, p)?;
                let d = sub(q, p);
                let dn2 = ddot(&d, &d);
                let val = ddot(&sub(&sq, &sp), &d);
                let quot = val / dn2;
                if quot < mono_min {
                    mono_min = quot;
                    mono_w = Some(Witness { x, q: d, quotient: quot });
                }
                if !(val > 0.0) {
                    mono_fail = Some(Witness { x, q: d, quotient: val });
                    break 'outer;
                }
            }
        }
    }
    let monotonicity = match mono_fail {
        Some(w) => AssumptionCheck {
            verdict: Verdict::Fail,
            witness: Some(w),
            trend: vec![],
            detail: "(S(Q) - S(P)) : (Q - P) <= 0 on a sampled pair".into(),
        },
        None => AssumptionCheck {
            verdict: Verdict::Pass,
            witness: mono_w,
            trend: vec![],
            detail: format!("min (S(Q)-S(P)):(Q-P)/|Q-P|^2 = {mono_min:.4e}"),
        },
    };
    Ok(AssumptionReport { coercivity, growth, linearity_at_infinity, monotonicity, uhlenbeck })
}
