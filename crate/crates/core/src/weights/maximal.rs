use crate::error::{invalid, Result};

/// Cell samples on a uniform `n x n x n` grid over the unit cube, `n = 2^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    n: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!("grid size must be a power of two, got {n}")));
        }
        if values.len() != n * n * n {
            return Err(invalid(format!("grid of size {n} needs {} values, got {}", n * n * n, values.len())));
        }
        Ok(Self { n, values })
    }

    /// Samples `f` at cell centers.
    pub fn sample(n: usize, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    values.push(f([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h]));
                }
            }
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    fn coords(&self, idx: usize) -> [usize; 3] {
        [idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n)]
    }

    /// Values in the dyadic cube of side `s` cells containing cell `idx`.
    fn cube_values(&self, idx: usize, s: usize) -> impl Iterator<Item = f64> + '_ {
        let c = self.coords(idx);
        let o = [c[0] / s * s, c[1] / s * s, c[2] / s * s];
        (0..s).flat_map(move |k| {
            (0..s).flat_map(move |j| (0..s).map(move |i| self.values[self.index(o[0] + i, o[1] + j, o[2] + k)]))
        })
    }

    fn sides(&self) -> impl Iterator<Item = usize> {
        let n = self.n;
        (0..=n.trailing_zeros()).map(move |l| n >> l)
    }
}

/// Dyadic Hardy-Littlewood maximal function of the grid at cell `idx`:
/// the largest average of `|w|` over dyadic cubes containing the cell,
/// from the whole grid down to the cell itself.
pub fn maximal_hl(grid: &ScalarGrid, idx: usize) -> f64 {
    grid.sides()
        .map(|s| grid.cube_values(idx, s).map(f64::abs).sum::<f64>() / (s * s * s) as f64)
        .fold(0.0, f64::max)
}

/// Dyadic sharp maximal function: largest mean oscillation `avg |w - avg w|`.
pub fn maximal_sharp(grid: &ScalarGrid, idx: usize) -> f64 {
    grid.sides()
        .map(|s| {
            let vol = (s * s * s) as f64;
            let mean = grid.cube_values(idx, s).sum::<f64>() / vol;
            grid.cube_values(idx, s).map(|v| (v - mean).abs()).sum::<f64>() / vol
        })
        .fold(0.0, f64::max)
}

/// Both maximal functions at every cell.
pub fn maximal_fields(grid: &ScalarGrid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n;
    let mut hl = vec![0.0f64; n * n * n];
    let mut sharp = vec![0.0f64; n * n * n];
    for s in grid.sides() {
        let m = n / s;
        let vol = (s * s * s) as f64;
        for cube in 0..m * m * m {
            let first = grid.index(cube % m * s, (cube / m) % m * s, cube / (m * m) * s);
            let mean = grid.cube_values(first, s).sum::<f64>() / vol;
            let avg_abs = grid.cube_values(first, s).map(f64::abs).sum::<f64>() / vol;
            let osc = grid.cube_values(first, s).map(|v| (v - mean).abs()).sum::<f64>() / vol;
            let o = grid.coords(first);
            for k in 0..s {
                for j in 0..s {
                    for i in 0..s {
                        let c = grid.index(o[0] + i, o[1] + j, o[2] + k);
                        hl[c] = hl[c].max(avg_abs);
                        sharp[c] = sharp[c].max(osc);
                    }
                }
            }
        }
    }
    (hl, sharp)
}
