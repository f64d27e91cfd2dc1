use crate::error::{Error, Result};

pub const SUPPORTED_ORDERS: [u32; 6] = [1, 2, 3, 4, 5, 6];

/// Symmetric quadrature on the reference tetrahedron.
///
/// Points are barycentric coordinates; weights are measured in reference
/// volume and sum to 1/6. `order` is the highest total degree integrated
/// exactly, which can exceed the requested one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: u32,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push_s4(&mut self, w: f64) {
        self.points.push([0.25; 4]);
        self.weights.push(w);
    }

    // (a, a, a, 1 - 3a) and permutations: 4 points.
    fn push_s31(&mut self, a: f64, w: f64) {
        let b = 1.0 - 3.0 * a;
        for k in 0..4 {
            let mut p = [a; 4];
            p[k] = b;
            self.points.push(p);
            self.weights.push(w);
        }
    }

    // (a, a, b, b) with b = 1/2 - a: 6 points.
    fn push_s22(&mut self, a: f64, w: f64) {
        let b = 0.5 - a;
        for [i, j] in [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]] {
            let mut p = [b; 4];
            p[i] = a;
            p[j] = a;
            self.points.push(p);
            self.weights.push(w);
        }
    }

    // (a, a, b, c) and permutations: 12 points.
    fn push_s211(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - 2.0 * a - b;
        for i in 0..4 {
            for j in 0..4 {
                if j == i {
                    continue;
                }
                let mut p = [a; 4];
                p[i] = b;
                p[j] = c;
                self.points.push(p);
                self.weights.push(w);
            }
        }
    }
}

/// Returns a positive-weight symmetric rule exact to at least `order`.
pub fn quadrature(order: u32) -> Result<QuadratureRule> {
    let mut r = QuadratureRule { order, points: Vec::new(), weights: Vec::new() };
    match order {
        1 => r.push_s4(1.0 / 6.0),
        2 => {
            let a = (5.0 - 5f64.sqrt()) / 20.0;
            r.push_s31(a, 1.0 / 24.0);
        }
        3..=5 => {
            r.order = 5;
            r.push_s31(0.092_735_250_310_891_226_4, 0.012_248_840_519_393_658_26);
            r.push_s31(0.310_885_919_263_300_609_8, 0.018_781_320_953_002_641_80);
            r.push_s22(0.045_503_704_125_649_616_7, 0.007_091_003_462_846_911_4);
        }
        6 => {
            r.push_s31(0.214_602_871_259_151_684, 0.006_653_791_709_694_645_06);
            r.push_s31(0.040_673_958_534_611_339_7, 0.001_679_535_175_886_776_20);
            r.push_s31(0.322_337_890_142_275_646, 0.009_226_196_923_942_398_43);
            r.push_s211(0.063_661_001_875_017_529_9, 0.269_672_331_458_315_867, 0.008_035_714_285_714_282_48);
        }
        _ => {
            return Err(Error::UnsupportedOrder { requested: order, supported: SUPPORTED_ORDERS.to_vec() })
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // Closed form over the reference tet: a! b! c! / (a + b + c + 3)!.
    fn exact_monomial(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    fn rule_monomial(r: &QuadratureRule, a: u32, b: u32, c: u32) -> f64 {
        r.points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32))
            .sum()
    }

    #[test]
    fn order_one_is_barycenter() {
        let r = quadrature(1).unwrap();
        assert_eq!(r.points, vec![[0.25; 4]]);
        assert_eq!(r.weights, vec![1.0 / 6.0]);
    }

    #[test]
    fn all_rules_exact_on_monomials() {
        for order in SUPPORTED_ORDERS {
            let r = quadrature(order).unwrap();
            assert!(r.order >= order);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
            for p in &r.points {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            for a in 0..=r.order {
                for b in 0..=r.order - a {
                    for c in 0..=r.order - a - b {
                        let exact = exact_monomial(a, b, c);
                        let got = rule_monomial(&r, a, b, c);
                        assert!(
                            ((got - exact) / exact).abs() < 1e-13,
                            "order {order}: x^{a} y^{b} z^{c}: {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn named_integrals() {
        let r1 = quadrature(1).unwrap();
        assert!((rule_monomial(&r1, 1, 0, 0) - 1.0 / 24.0).abs() < 1e-16);
        let r3 = quadrature(3).unwrap();
        // x^2 y: 2! 1! / 6! = 1/360
        assert!((rule_monomial(&r3, 2, 1, 0) - 1.0 / 360.0).abs() < 1e-16);
    }

    #[test]
    fn unsupported_orders() {
        for order in [0, 7, 12] {
            match quadrature(order) {
                Err(Error::UnsupportedOrder { supported, .. }) => assert_eq!(supported, SUPPORTED_ORDERS.to_vec()),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
