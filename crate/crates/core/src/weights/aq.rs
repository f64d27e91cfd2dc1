use super::{dual_weight, WeightField};
use crate::error::{invalid, Error, Result};

/// Lower bound on the A_q characteristic over dyadic cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct AqEstimate {
    pub q: f64,
    pub value: f64,
    /// Center and side of the maximizing cube.
    pub argmax_cube: ([f64; 3], f64),
    pub depth: u32,
}

// 4-point Gauss-Legendre on [0, 1].
const GAUSS4_X: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_87,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GAUSS4_W: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Per-cell sums at one resolution: quadrature mass, weight and dual weight.
struct Sums {
    n: usize,
    v: Vec<f64>,
    w: Vec<f64>,
    d: Vec<f64>,
}

impl Sums {
    fn finest(w: &WeightField, dual: &WeightField, level: u32) -> Result<Self> {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let cells = n * n * n;
        let mut s = Sums { n, v: vec![0.0; cells], w: vec![0.0; cells], d: vec![0.0; cells] };
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let c = i + n * (j + n * k);
                    let (mut sv, mut sw, mut sd) = (0.0, 0.0, 0.0);
                    for (a, wa) in GAUSS4_X.iter().zip(GAUSS4_W) {
                        for (b, wb) in GAUSS4_X.iter().zip(GAUSS4_W) {
                            for (e, we) in GAUSS4_X.iter().zip(GAUSS4_W) {
                                let x = [(i as f64 + a) * h, (j as f64 + b) * h, (k as f64 + e) * h];
                                let wt = wa * wb * we;
                                let fail = || Error::NonIntegrable {
                                    center: [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h],
                                    side: h,
                                };
                                let ww = w.eval(x).map_err(|_| fail())?;
                                let dd = dual.eval(x).map_err(|_| fail())?;
                                if !ww.is_finite() || !dd.is_finite() {
                                    return Err(fail());
                                }
                                sv += wt;
                                sw += wt * ww;
                                sd += wt * dd;
                            }
                        }
                    }
                    s.v[c] = sv;
                    s.w[c] = sw;
                    s.d[c] = sd;
                }
            }
        }
        Ok(s)
    }

    fn coarsen(&self) -> Self {
        let m = self.n / 2;
        let mut s = Sums { n: m, v: vec![0.0; m * m * m], w: vec![0.0; m * m * m], d: vec![0.0; m * m * m] };
        let n = self.n;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let f = i + n * (j + n * k);
                    let c = i / 2 + m * (j / 2 + m * (k / 2));
                    s.v[c] += self.v[f];
                    s.w[c] += self.w[f];
                    s.d[c] += self.d[f];
                }
            }
        }
        s
    }
}

/// Largest quotient over dyadic cubes of levels 1..=resolution, with all
/// integrals computed on cells of level `resolution`.
fn quotient_at(w: &WeightField, dual: &WeightField, q: f64, resolution: u32) -> Result<(f64, [f64; 3], f64)> {
    let mut sums = Sums::finest(w, dual, resolution)?;
    let mut best = (f64::NEG_INFINITY, [0.5; 3], 1.0);
    loop {
        let n = sums.n;
        let side = 1.0 / n as f64;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let c = i + n * (j + n * k);
                    let value = (sums.w[c] / sums.v[c]) * (sums.d[c] / sums.v[c]).powf(q - 1.0);
                    let center = [(i as f64 + 0.5) * side, (j as f64 + 0.5) * side, (k as f64 + 0.5) * side];
                    if !value.is_finite() {
                        return Err(Error::NonIntegrable { center, side });
                    }
                    if value > best.0 {
                        best = (value, center, side);
                    }
                }
            }
        }
        if n == 2 {
            return Ok(best);
        }
        sums = sums.coarsen();
    }
}

/// Estimates `sup_Q (avg_Q w) (avg_Q w^(1/(1-q)))^(q-1)` over dyadic cubes.
///
/// At resolution `r` every dyadic cube of level `1..=r` is integrated with a
/// composite 4x4x4 Gauss rule on its level-`r` subcells. The returned value is
/// the maximum over resolutions `1..=depth`, so it never decreases with depth.
/// Averages are ratios of quadrature sums, which makes the constant weight
/// give exactly 1.
pub fn estimate_aq(w: &WeightField, q: f64, depth: u32) -> Result<AqEstimate> {
    if depth == 0 {
        return Err(invalid("A_q sampling depth must be >= 1"));
    }
    if depth > 7 {
        return Err(invalid("A_q sampling depth above 7 is not supported"));
    }
    let dual = dual_weight(w, q)?;
    let mut best = (f64::NEG_INFINITY, [0.5; 3], 1.0);
    for r in 1..=depth {
        let cand = quotient_at(w, &dual, q, r)?;
        if cand.0 > best.0 {
            best = cand;
        }
    }
    Ok(AqEstimate { q, value: best.0, argmax_cube: (best.1, best.2), depth })
}
