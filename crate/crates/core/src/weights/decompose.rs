use super::WeightField;
use crate::error::{invalid, Result};
use crate::mesh::Point;

/// Axis-aligned cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
}

impl Cube {
    /// Scaled sup-norm distance: 1 on the boundary of the cube.
    pub fn radius(&self, x: Point) -> f64 {
        let h = 0.5 * self.side;
        (0..3).map(|i| (x[i] - self.center[i]).abs() / h).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Cube {
        Cube { center: self.center, side: self.side * factor }
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }

    fn inside_unit_cube(&self) -> bool {
        let h = 0.5 * self.side;
        self.center.iter().all(|&c| c - h >= 0.0 && c + h <= 1.0)
    }
}

/// Cutoff equal to 1 on `Q`, 0 outside `3/2 Q`, quintic smoothstep in between.
pub fn bump(cube: &Cube, x: Point) -> f64 {
    let r = cube.radius(x);
    if r <= 1.0 {
        1.0
    } else if r >= 1.5 {
        0.0
    } else {
        let s = (r - 1.0) / 0.5;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub integral_g: f64,
    pub integral_g1: f64,
    pub integral_g2: f64,
    pub l1_norm_g: f64,
    pub weighted_norm_g: f64,
    /// `||g_i||_{L^q(w)} / ||g||_{L^q(w)}`.
    pub ratio_g1: f64,
    pub ratio_g2: f64,
    /// Largest `|g1 + g2 - g|` over the quadrature points.
    pub max_split_defect: f64,
}

/// Result of [`decompose_zero_mean`]; `g1` and `g2` are evaluable anywhere.
pub struct ZeroMeanSplit<'a> {
    g: &'a dyn Fn(Point) -> f64,
    pub cube: Cube,
    /// Constant value `(1/|A|) * integral over D of phi g` subtracted on the annulus.
    pub correction: f64,
    pub report: DecompositionReport,
}

impl ZeroMeanSplit<'_> {
    pub fn g1(&self, x: Point) -> f64 {
        let r = self.cube.radius(x);
        let annulus = if r > 1.0 && r <= 1.5 { self.correction } else { 0.0 };
        bump(&self.cube, x) * (self.g)(x) - annulus
    }

    pub fn g2(&self, x: Point) -> f64 {
        (self.g)(x) - self.g1(x)
    }
}

// 3-point Gauss-Legendre on [0, 1].
const G3_X: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const G3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Composite Gauss points on [0, 1] whose cells never straddle a breakpoint.
fn axis_rule(breaks: &[f64], cell: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let m = (len / cell).ceil().max(1.0) as usize;
        let h = len / m as f64;
        for c in 0..m {
            for (x, wt) in G3_X.iter().zip(G3_W) {
                pts.push((w[0] + (c as f64 + x) * h, wt * h));
            }
        }
    }
    pts
}

/// Splits a mean-zero `g` into `g1` supported in `3/2 Q` and `g2` supported
/// off `Q`, both with zero mean, and measures their weighted norms.
///
/// Integrals use a tensor composite Gauss rule whose cells are aligned with
/// the faces of `Q` and `3/2 Q`, so region membership is exact at every point.
pub fn decompose_zero_mean<'a>(
    g: &'a dyn Fn(Point) -> f64,
    cube: Cube,
    w: &WeightField,
    q: f64,
) -> Result<ZeroMeanSplit<'a>> {
    if !(cube.side > 0.0) || !cube.scaled(1.5).inside_unit_cube() {
        return Err(invalid("3/2 Q must lie inside the unit cube"));
    }
    if !(q >= 1.0) {
        return Err(invalid(format!("integrability index must be >= 1, got {q}")));
    }
    let axes: Vec<Vec<(f64, f64)>> = (0..3)
        .map(|i| {
            let (c, h) = (cube.center[i], 0.5 * cube.side);
            let mut b = vec![0.0, c - 1.5 * h, c - h, c + h, c + 1.5 * h, 1.0];
            b.dedup();
            axis_rule(&b, (h / 4.0).min(1.0 / 24.0))
        })
        .collect();

    // First pass: mean, L1 norm, bump integral and annulus measure.
    let (mut int_g, mut l1, mut int_phi_g, mut annulus) = (0.0, 0.0, 0.0, 0.0);
    for &(z, wz) in &axes[2] {
        for &(y, wy) in &axes[1] {
            for &(x, wx) in &axes[0] {
                let p = [x, y, z];
                let wt = wx * wy * wz;
                let gv = g(p);
                int_g += wt * gv;
                l1 += wt * gv.abs();
                let r = cube.radius(p);
                if r < 1.5 {
                    int_phi_g += wt * bump(&cube, p) * gv;
                    if r > 1.0 {
                        annulus += wt;
                    }
                }
            }
        }
    }
    if int_g.abs() > 1e-10 * l1.max(f64::MIN_POSITIVE) {
        return Err(invalid(format!("g must have zero mean (integral {int_g:.3e}, L1 norm {l1:.3e})")));
    }
    let correction = int_phi_g / annulus;
    let mut split = ZeroMeanSplit {
        g,
        cube,
        correction,
        report: DecompositionReport {
            integral_g: int_g,
            integral_g1: 0.0,
            integral_g2: 0.0,
            l1_norm_g: l1,
            weighted_norm_g: 0.0,
            ratio_g1: 0.0,
            ratio_g2: 0.0,
            max_split_defect: 0.0,
        },
    };

    let (mut i1, mut i2, mut n, mut n1, mut n2, mut defect) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
    for &(z, wz) in &axes[2] {
        for &(y, wy) in &axes[1] {
            for &(x, wx) in &axes[0] {
                let p = [x, y, z];
                let wt = wx * wy * wz;
                let gv = g(p);
                let (a, b) = (split.g1(p), split.g2(p));
                let om = w.eval(p)?;
                i1 += wt * a;
                i2 += wt * b;
                n += wt * om * gv.abs().powf(q);
                n1 += wt * om * a.abs().powf(q);
                n2 += wt * om * b.abs().powf(q);
                defect = defect.max((a + b - gv).abs());
            }
        }
    }
    let r = &mut split.report;
    r.integral_g1 = i1;
    r.integral_g2 = i2;
    r.weighted_norm_g = n.powf(1.0 / q);
    r.ratio_g1 = (n1 / n).powf(1.0 / q);
    r.ratio_g2 = (n2 / n).powf(1.0 / q);
    r.max_split_defect = defect;
    Ok(split)
}
