use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::Mat3;
use crate::mesh::Point;

pub type VectorField = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Point) -> Mat3 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub const CASE_NAMES: [&str; 3] = ["smooth_curl", "polynomial_bubble", "dirac_point"];

/// Default anchor of the point load, off the vertex lattice of every level.
pub const DIRAC_ANCHOR: Point = [0.52, 0.5, 0.5];

/// Test problem with either a closed-form solution or a point load.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub velocity: Option<VectorField>,
    /// `g[i][j] = d u_i / d x_j`
    pub gradient: Option<TensorField>,
    /// Mean-zero pressure.
    pub pressure: Option<ScalarField>,
    /// Point load `(z, amplitude)` for cases without a closed form.
    pub point_load: Option<(Point, [f64; 3])>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("exact", &self.velocity.is_some())
            .field("point_load", &self.point_load)
            .finish()
    }
}

impl ManufacturedCase {
    pub fn has_exact_solution(&self) -> bool {
        self.velocity.is_some()
    }

    /// Multiplies the velocity by `a` and the pressure by `b`.
    pub fn scaled(self, a: f64, b: f64) -> Self {
        let velocity = self.velocity.map(|u| Arc::new(move |x: Point| u(x).map(|v| a * v)) as VectorField);
        let gradient = self.gradient.map(|g| Arc::new(move |x: Point| g(x).map(|r| r.map(|v| a * v))) as TensorField);
        let pressure = self.pressure.map(|p| Arc::new(move |x: Point| b * p(x)) as ScalarField);
        let point_load = self.point_load.map(|(z, amp)| (z, amp.map(|v| a * v)));
        Self { name: self.name, velocity, gradient, pressure, point_load }
    }
}

pub fn builtin_case(name: &str) -> Result<ManufacturedCase> {
    match name {
        "smooth_curl" => Ok(smooth_curl()),
        "polynomial_bubble" => Ok(polynomial_bubble()),
        "dirac_point" => Ok(ManufacturedCase {
            name: name.into(),
            velocity: None,
            gradient: None,
            pressure: None,
            point_load: Some((DIRAC_ANCHOR, [1.0, 0.0, 0.0])),
        }),
        _ => Err(Error::UnknownCase { name: name.into(), valid: CASE_NAMES.to_vec() }),
    }
}

// s(t) = t^2 (1 - t)^2 and its first two derivatives
fn s0(t: f64) -> f64 {
    (t * (1.0 - t)).powi(2)
}

fn s1(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

fn s2(t: f64) -> f64 {
    2.0 * ((1.0 - 2.0 * t).powi(2) - 2.0 * t * (1.0 - t))
}

/// `u = curl(psi, psi, psi)` with `psi = s(x) s(y) s(z)`.
fn smooth_curl() -> ManufacturedCase {
    let grad_psi = |x: Point| {
        let (a, b, c) = (s0(x[0]), s0(x[1]), s0(x[2]));
        [s1(x[0]) * b * c, a * s1(x[1]) * c, a * b * s1(x[2])]
    };
    let hess_psi = |x: Point| {
        let v = [s0(x[0]), s0(x[1]), s0(x[2])];
        let d = [s1(x[0]), s1(x[1]), s1(x[2])];
        let dd = [s2(x[0]), s2(x[1]), s2(x[2])];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = (0..3)
                    .map(|k| match (k == i, k == j) {
                        (true, true) => dd[k],
                        (true, false) | (false, true) => d[k],
                        _ => v[k],
                    })
                    .product();
            }
        }
        h
    };
    let velocity = move |x: Point| {
        let g = grad_psi(x);
        [g[1] - g[2], g[2] - g[0], g[0] - g[1]]
    };
    let gradient = move |x: Point| {
        let h = hess_psi(x);
        let mut out = [[0.0; 3]; 3];
        for j in 0..3 {
            out[0][j] = h[1][j] - h[2][j];
            out[1][j] = h[2][j] - h[0][j];
            out[2][j] = h[0][j] - h[1][j];
        }
        out
    };
    ManufacturedCase {
        name: "smooth_curl".into(),
        velocity: Some(Arc::new(velocity)),
        gradient: Some(Arc::new(gradient)),
        pressure: Some(Arc::new(|x: Point| x[0].powi(3) + x[1].powi(3) + x[2].powi(3) - 0.75)),
        point_load: None,
    }
}

/// `u = (d_y phi, -d_x phi, 0)` with `phi = s(x) s(y) z (1 - z)`, the
/// stream-function bubble of lowest degree vanishing on the cube boundary.
fn polynomial_bubble() -> ManufacturedCase {
    let b = |t: f64| t * (1.0 - t);
    let db = |t: f64| 1.0 - 2.0 * t;
    let velocity = move |x: Point| {
        [s0(x[0]) * s1(x[1]) * b(x[2]), -s1(x[0]) * s0(x[1]) * b(x[2]), 0.0]
    };
    let gradient = move |x: Point| {
        [
            [s1(x[0]) * s1(x[1]) * b(x[2]), s0(x[0]) * s2(x[1]) * b(x[2]), s0(x[0]) * s1(x[1]) * db(x[2])],
            [-s2(x[0]) * s0(x[1]) * b(x[2]), -s1(x[0]) * s1(x[1]) * b(x[2]), -s1(x[0]) * s0(x[1]) * db(x[2])],
            [0.0; 3],
        ]
    };
    ManufacturedCase {
        name: "polynomial_bubble".into(),
        velocity: Some(Arc::new(velocity)),
        gradient: Some(Arc::new(gradient)),
        pressure: Some(Arc::new(|x: Point| x[0] - 0.5)),
        point_load: None,
    }
}
