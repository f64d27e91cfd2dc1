//! Geometric multigrid for the velocity block on a refinement hierarchy.

use std::borrow::Cow;
use std::sync::Arc;

use super::direct::SparseLu;
use super::sparse::{Block, BlockCsr, Csr};
use crate::error::{invalid, Result};
use crate::fem::{p2_values, TaylorHoodSpace};

/// Scalar P2 prolongation from `coarse` to its refinement `fine`
/// (fine nodes by coarse nodes). Rows of fine boundary nodes and columns of
/// coarse boundary nodes are omitted.
pub fn prolongation(coarse: &TaylorHoodSpace, fine: &TaylorHoodSpace) -> Result<Csr> {
    build_prolongation(coarse, fine, false)
}

fn build_prolongation(coarse: &TaylorHoodSpace, fine: &TaylorHoodSpace, keep_boundary: bool) -> Result<Csr> {
    let parents = fine
        .mesh()
        .parents()
        .ok_or_else(|| invalid("fine space carries no refinement lineage"))?;
    if parents.len() != fine.mesh().n_tets() || parents.iter().any(|&p| p >= coarse.mesh().n_tets()) {
        return Err(invalid("refinement lineage does not match the coarse space"));
    }
    let mut rows: Vec<Option<Vec<(u32, f64)>>> = vec![None; fine.n_nodes()];
    for (t, &parent) in parents.iter().enumerate() {
        let geo = coarse.geometry(parent);
        let coarse_nodes = coarse.tet_nodes(parent);
        for &node in fine.tet_nodes(t) {
            if rows[node].is_some() {
                continue;
            }
            if fine.is_boundary_node(node) && !keep_boundary {
                rows[node] = Some(Vec::new());
                continue;
            }
            let phi = p2_values(&geo.barycentric(fine.node_position(node)));
            let row = coarse_nodes
                .iter()
                .zip(phi)
                .filter(|&(&c, w)| w.abs() > 1e-13 && (keep_boundary || !coarse.is_boundary_node(c)))
                .map(|(&c, w)| (c as u32, w))
                .collect();
            rows[node] = Some(row);
        }
    }
    Ok(Csr::from_rows(coarse.n_nodes(), rows.into_iter().map(Option::unwrap_or_default).collect()))
}

struct Level<'a> {
    a: Cow<'a, BlockCsr>,
    dinv: Vec<Block>,
    /// Prolongation from the next coarser level.
    p: Csr,
    pt: Csr,
}

/// V-cycle preconditioner with block Gauss-Seidel smoothing and a sparse LU
/// on the coarsest level.
pub struct Multigrid<'a> {
    levels: Vec<Level<'a>>,
    coarse: SparseLu,
    pub sweeps: usize,
}

impl std::fmt::Debug for Multigrid<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multigrid")
            .field("levels", &(self.levels.len() + 1))
            .field("coarse_dim", &self.coarse.dim())
            .finish()
    }
}

/// Node count at or below which the hierarchy stops and factorizes.
const COARSE_NODES: usize = 2500;

impl<'a> Multigrid<'a> {
    /// Builds the hierarchy below `space` for the operator `a`, which must
    /// already carry identity rows on boundary nodes.
    pub fn new(space: &Arc<TaylorHoodSpace>, a: &'a BlockCsr) -> Result<Self> {
        let mut levels = Vec::new();
        let mut current = space.clone();
        let mut op = Cow::Borrowed(a);
        while current.n_nodes() > COARSE_NODES {
            let Some(coarser) = current.coarse().cloned() else { break };
            let p = prolongation(&coarser, &current)?;
            let pt = p.transpose();
            let next = Cow::Owned(op.galerkin(&p, &pt));
            let dinv = op.diagonal_inverses();
            levels.push(Level { a: op, dinv, p, pt });
            op = next;
            current = coarser;
        }
        let coarse = SparseLu::new(op.dim(), op.triplets())?;
        Ok(Self { levels, coarse, sweeps: 2 })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// One symmetric V-cycle from a zero initial guess: `x ~ A^{-1} b`.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x);
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        if k == self.levels.len() {
            let sol = self.coarse.solve(b).expect("coarse factorization is nonsingular");
            x.copy_from_slice(&sol);
            return;
        }
        let lv = &self.levels[k];
        x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.sweeps {
            lv.a.gauss_seidel(&lv.dinv, b, x, true);
        }
        let mut r = vec![0.0; b.len()];
        lv.a.matvec(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let nc = lv.p.ncols;
        let mut rc = vec![0.0; 3 * nc];
        lv.pt.matvec3(&r, &mut rc);
        let mut ec = vec![0.0; 3 * nc];
        self.cycle(k + 1, &rc, &mut ec);
        let mut e = vec![0.0; b.len()];
        lv.p.matvec3(&ec, &mut e);
        for (xi, ei) in x.iter_mut().zip(&e) {
            *xi += ei;
        }
        for _ in 0..self.sweeps {
            lv.a.gauss_seidel(&lv.dinv, b, x, false);
        }
    }
}
