//! Sparse storage: scalar CSR, node-level 3x3 block CSR, and the
//! pressure-velocity coupling with 1x3 blocks.

pub type Block = [f64; 9];

pub const IDENTITY: Block = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Sorts and deduplicates per-row column lists into CSR offsets.
fn compress(mut rows: Vec<Vec<u32>>) -> (Vec<usize>, Vec<u32>) {
    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    row_ptr.push(0);
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut cols = Vec::with_capacity(total);
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
        cols.extend_from_slice(r);
        row_ptr.push(cols.len());
        *r = Vec::new();
    }
    cols.shrink_to_fit();
    (row_ptr, cols)
}

#[inline]
fn position(cols: &[u32], start: usize, end: usize, j: usize) -> Option<usize> {
    cols[start..end].binary_search(&(j as u32)).ok().map(|k| start + k)
}

#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn transpose(&self) -> Csr {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                rows[j].push((i as u32, v));
            }
        }
        Csr::from_rows(self.nrows, rows)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Applies the matrix to each of the three interleaved components.
    pub fn matvec3(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let mut acc = [0.0; 3];
            for (j, v) in self.row(i) {
                for c in 0..3 {
                    acc[c] += v * x[3 * j + c];
                }
            }
            y[3 * i..3 * i + 3].copy_from_slice(&acc);
        }
    }
}

/// Square matrix of 3x3 blocks (row-major within the block).
#[derive(Debug, Clone)]
pub struct BlockCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<Block>,
}

impl BlockCsr {
    pub fn from_pattern(rows: Vec<Vec<u32>>) -> Self {
        let n = rows.len();
        let (row_ptr, cols) = compress(rows);
        let vals = vec![[0.0; 9]; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    /// Zero matrix on a precomputed sorted CSR structure.
    pub fn from_structure(row_ptr: Vec<usize>, cols: Vec<u32>) -> Self {
        let n = row_ptr.len() - 1;
        let vals = vec![[0.0; 9]; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        3 * self.n
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        position(&self.cols, self.row_ptr[i], self.row_ptr[i + 1], j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, b: &Block) {
        let k = self.find(i, j).expect("block outside sparsity pattern");
        for (v, x) in self.vals[k].iter_mut().zip(b) {
            *v += x;
        }
    }

    pub fn block(&self, i: usize, j: usize) -> Block {
        self.find(i, j).map_or([0.0; 9], |k| self.vals[k])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = [0.0; 3];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                let b = &self.vals[k];
                let (x0, x1, x2) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
                acc[0] += b[0] * x0 + b[1] * x1 + b[2] * x2;
                acc[1] += b[3] * x0 + b[4] * x1 + b[5] * x2;
                acc[2] += b[6] * x0 + b[7] * x1 + b[8] * x2;
            }
            y[3 * i..3 * i + 3].copy_from_slice(&acc);
        }
    }

    /// Replaces rows and columns of masked nodes by the identity.
    pub fn apply_dirichlet(&mut self, mask: &[bool]) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                if mask[i] || mask[j] {
                    self.vals[k] = if i == j { IDENTITY } else { [0.0; 9] };
                }
            }
        }
    }

    pub fn diagonal_inverses(&self) -> Vec<Block> {
        (0..self.n).map(|i| invert3(&self.block(i, i))).collect()
    }

    /// One Gauss-Seidel sweep with 3x3 node blocks, forward or backward.
    pub fn gauss_seidel(&self, dinv: &[Block], b: &[f64], x: &mut [f64], forward: bool) {
        let mut sweep = |i: usize| {
            let mut r = [b[3 * i], b[3 * i + 1], b[3 * i + 2]];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                let a = &self.vals[k];
                let (x0, x1, x2) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
                r[0] -= a[0] * x0 + a[1] * x1 + a[2] * x2;
                r[1] -= a[3] * x0 + a[4] * x1 + a[5] * x2;
                r[2] -= a[6] * x0 + a[7] * x1 + a[8] * x2;
            }
            let d = &dinv[i];
            for c in 0..3 {
                x[3 * i + c] += d[3 * c] * r[0] + d[3 * c + 1] * r[1] + d[3 * c + 2] * r[2];
            }
        };
        if forward {
            (0..self.n).for_each(&mut sweep);
        } else {
            (0..self.n).rev().for_each(&mut sweep);
        }
    }

    /// Galerkin product `P^T A P` for a scalar node prolongation `p`
    /// (fine x coarse) with transpose `pt`. Coarse nodes without any fine
    /// connection get an identity diagonal block.
    pub fn galerkin(&self, p: &Csr, pt: &Csr) -> BlockCsr {
        let nc = p.ncols;
        let mut marker = vec![usize::MAX; nc];
        let mut acc: Vec<Block> = Vec::new();
        let mut touched: Vec<u32> = Vec::new();
        let mut row_ptr = Vec::with_capacity(nc + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for ci in 0..nc {
            touched.clear();
            acc.clear();
            for (fi, wi) in pt.row(ci) {
                for k in self.row_ptr[fi]..self.row_ptr[fi + 1] {
                    let fj = self.cols[k] as usize;
                    let a = &self.vals[k];
                    for (cj, wj) in p.row(fj) {
                        let s = wi * wj;
                        let slot = if marker[cj] == usize::MAX {
                            marker[cj] = acc.len();
                            acc.push([0.0; 9]);
                            touched.push(cj as u32);
                            acc.len() - 1
                        } else {
                            marker[cj]
                        };
                        let dst = &mut acc[slot];
                        for e in 0..9 {
                            dst[e] += s * a[e];
                        }
                    }
                }
            }
            if touched.is_empty() {
                cols.push(ci as u32);
                vals.push(IDENTITY);
            } else {
                let mut order: Vec<usize> = (0..touched.len()).collect();
                order.sort_unstable_by_key(|&k| touched[k]);
                for k in order {
                    cols.push(touched[k]);
                    vals.push(acc[k]);
                    marker[touched[k] as usize] = usize::MAX;
                }
            }
            row_ptr.push(cols.len());
        }
        BlockCsr { n: nc, row_ptr, cols, vals }
    }

    /// Scalar triplets `(row, col, value)` of the expanded matrix.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).flat_map(move |k| {
                let j = self.cols[k] as usize;
                let b = self.vals[k];
                (0..9).filter(move |&e| b[e] != 0.0).map(move |e| (3 * i + e / 3, 3 * j + e % 3, b[e]))
            })
        })
    }
}

/// Pressure rows by velocity-node columns; each entry couples the three
/// velocity components.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub nrows: usize,
    pub n_nodes: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<[f64; 3]>,
}

impl Coupling {
    pub fn from_pattern(n_nodes: usize, rows: Vec<Vec<u32>>) -> Self {
        let nrows = rows.len();
        let (row_ptr, cols) = compress(rows);
        let vals = vec![[0.0; 3]; cols.len()];
        Self { nrows, n_nodes, row_ptr, cols, vals }
    }

    pub fn from_structure(n_nodes: usize, row_ptr: Vec<usize>, cols: Vec<u32>) -> Self {
        let nrows = row_ptr.len() - 1;
        let vals = vec![[0.0; 3]; cols.len()];
        Self { nrows, n_nodes, row_ptr, cols, vals }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: &[f64; 3]) {
        let k = position(&self.cols, self.row_ptr[i], self.row_ptr[i + 1], j).expect("entry outside pattern");
        for c in 0..3 {
            self.vals[k][c] += v[c];
        }
    }

    /// Zeroes the columns of masked velocity nodes.
    pub fn apply_dirichlet(&mut self, mask: &[bool]) {
        for (k, &j) in self.cols.iter().enumerate() {
            if mask[j as usize] {
                self.vals[k] = [0.0; 3];
            }
        }
    }

    /// `y = B x` with `x` a velocity vector.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                let b = &self.vals[k];
                s += b[0] * x[3 * j] + b[1] * x[3 * j + 1] + b[2] * x[3 * j + 2];
            }
            *yi = s;
        }
    }

    /// `y += B^T x` with `x` a pressure vector.
    pub fn add_transpose_matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                let b = &self.vals[k];
                y[3 * j] += b[0] * xi;
                y[3 * j + 1] += b[1] * xi;
                y[3 * j + 2] += b[2] * xi;
            }
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).flat_map(move |k| {
                let j = self.cols[k] as usize;
                let b = self.vals[k];
                (0..3).filter(move |&c| b[c] != 0.0).map(move |c| (i, 3 * j + c, b[c]))
            })
        })
    }
}

pub fn invert3(m: &Block) -> Block {
    let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6]);
    let d = 1.0 / det;
    [
        (m[4] * m[8] - m[5] * m[7]) * d,
        (m[2] * m[7] - m[1] * m[8]) * d,
        (m[1] * m[5] - m[2] * m[4]) * d,
        (m[5] * m[6] - m[3] * m[8]) * d,
        (m[0] * m[8] - m[2] * m[6]) * d,
        (m[2] * m[3] - m[0] * m[5]) * d,
        (m[3] * m[7] - m[4] * m[6]) * d,
        (m[1] * m[6] - m[0] * m[7]) * d,
        (m[0] * m[4] - m[1] * m[3]) * d,
    ]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
