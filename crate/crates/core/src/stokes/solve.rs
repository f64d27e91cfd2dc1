use serde::{Deserialize, Serialize};

use super::assembly::StokesSystem;
use crate::error::{Error, Result};
use crate::fem::{FEFunction, Role};
use crate::linalg::sparse::norm;
use crate::linalg::{gmres, minres, Multigrid, SparseLu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Sparse LU of the full KKT matrix with a Lagrange row for the mean.
    Direct,
    /// MINRES (GMRES when non-symmetric) with a multigrid / lumped-mass
    /// block-diagonal preconditioner.
    Iterative,
    /// Direct below `direct_max_dofs`, iterative above.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub backend: Backend,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub direct_max_dofs: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { backend: Backend::Auto, rel_tol: 1e-12, max_iter: 3000, direct_max_dofs: 10_000 }
    }
}

impl SolverOptions {
    pub fn direct() -> Self {
        Self { backend: Backend::Direct, ..Self::default() }
    }

    pub fn iterative() -> Self {
        Self { backend: Backend::Iterative, ..Self::default() }
    }

    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn resolve(&self, n: usize) -> Backend {
        match self.backend {
            Backend::Auto if n <= self.direct_max_dofs => Backend::Direct,
            Backend::Auto => Backend::Iterative,
            b => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub backend: Backend,
    pub iterations: usize,
    pub multigrid_levels: usize,
    /// `|F - A u - B^T p| / |(F, G)|`
    pub momentum_residual: f64,
    /// `|G - B u| / |(F, G)|`
    pub continuity_residual: f64,
    pub relative_residual: f64,
    pub kkt_dim: usize,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub velocity: FEFunction,
    /// Zero-mean pressure.
    pub pressure: FEFunction,
    pub stats: SolverStats,
}

pub fn solve_saddle(system: &StokesSystem, opts: &SolverOptions) -> Result<StokesSolution> {
    solve_saddle_from(system, opts, None)
}

/// Like [`solve_saddle`], starting the iterative backend from `guess`.
pub fn solve_saddle_from(
    system: &StokesSystem,
    opts: &SolverOptions,
    guess: Option<(&[f64], &[f64])>,
) -> Result<StokesSolution> {
    let space = &system.space;
    let (nu, np) = (space.n_velocity_dofs(), space.n_pressure_dofs());
    let mask = space.boundary_node_mask();
    let f: Vec<f64> = system.f.iter().enumerate().map(|(i, &v)| if mask[i / 3] { 0.0 } else { v }).collect();
    let total_m: f64 = system.pressure_moments.iter().sum();
    // Only the part of G orthogonal to constants is attainable.
    let shift = system.g.iter().sum::<f64>() / total_m;
    let g: Vec<f64> = system.g.iter().zip(&system.pressure_moments).map(|(gi, mi)| gi - shift * mi).collect();
    let rhs_norm = (norm(&f).powi(2) + norm(&g).powi(2)).sqrt();
    let backend = opts.resolve(nu + np + 1);
    let (mut u, mut p, iterations, levels) = if rhs_norm == 0.0 {
        (vec![0.0; nu], vec![0.0; np], 0, 0)
    } else {
        match backend {
            Backend::Direct => {
                let (u, p) = solve_direct(system, &f, &g)?;
                (u, p, 0, 0)
            }
            _ => solve_iterative(system, &f, &g, opts, guess)?,
        }
    };
    let mean = p.iter().zip(&system.pressure_moments).map(|(a, b)| a * b).sum::<f64>() / total_m;
    p.iter_mut().for_each(|v| *v -= mean);
    for (i, v) in u.iter_mut().enumerate() {
        if mask[i / 3] {
            *v = 0.0;
        }
    }
    let (ru, rp) = system.residual(&u, &p);
    let scale = if rhs_norm == 0.0 { 1.0 } else { rhs_norm };
    // residual() uses the raw G; measure against the attainable part
    let rp: Vec<f64> = rp.iter().zip(&system.pressure_moments).map(|(r, m)| r - shift * m).collect();
    let stats = SolverStats {
        backend,
        iterations,
        multigrid_levels: levels,
        momentum_residual: norm(&ru) / scale,
        continuity_residual: norm(&rp) / scale,
        relative_residual: (norm(&ru).powi(2) + norm(&rp).powi(2)).sqrt() / scale,
        kkt_dim: nu + np,
    };
    if !(stats.relative_residual <= 1e-10_f64.max(10.0 * opts.rel_tol)) {
        return Err(Error::Solver(format!(
            "saddle solve ({:?}) stopped at relative residual {:.3e} after {} iterations (momentum {:.3e}, continuity {:.3e}); \
             a singular system usually means missing boundary conditions",
            backend, stats.relative_residual, iterations, stats.momentum_residual, stats.continuity_residual
        )));
    }
    Ok(StokesSolution {
        velocity: FEFunction::new(space.clone(), Role::Velocity, u)?,
        pressure: FEFunction::new(space.clone(), Role::Pressure, p)?,
        stats,
    })
}

fn solve_direct(system: &StokesSystem, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = f.len();
    let np = g.len();
    let n = nu + np + 1;
    let mut entries: Vec<(usize, usize, f64)> = system.a.triplets().collect();
    for (i, j, v) in system.b.triplets() {
        entries.push((nu + i, j, v));
        entries.push((j, nu + i, v));
    }
    for (i, &m) in system.pressure_moments.iter().enumerate() {
        entries.push((nu + np, nu + i, m));
        entries.push((nu + i, nu + np, m));
    }
    let lu = SparseLu::new(n, entries)?;
    let mut rhs = Vec::with_capacity(n);
    rhs.extend_from_slice(f);
    rhs.extend_from_slice(g);
    rhs.push(0.0);
    let x = lu.solve(&rhs)?;
    Ok((x[..nu].to_vec(), x[nu..nu + np].to_vec()))
}

fn solve_iterative(
    system: &StokesSystem,
    f: &[f64],
    g: &[f64],
    opts: &SolverOptions,
    guess: Option<(&[f64], &[f64])>,
) -> Result<(Vec<f64>, Vec<f64>, usize, usize)> {
    let nu = f.len();
    let mg = Multigrid::new(&system.space, &system.a)?;
    let apply = |x: &[f64], y: &mut [f64]| {
        let (yu, yp) = y.split_at_mut(nu);
        system.a.matvec(&x[..nu], yu);
        system.b.add_transpose_matvec(&x[nu..], yu);
        system.b.matvec(&x[..nu], yp);
    };
    let precond = |r: &[f64], z: &mut [f64]| {
        let (zu, zp) = z.split_at_mut(nu);
        mg.apply(&r[..nu], zu);
        for ((zi, ri), d) in zp.iter_mut().zip(&r[nu..]).zip(&system.schur_diag) {
            *zi = ri / d;
        }
    };
    let mut rhs = f.to_vec();
    rhs.extend_from_slice(g);
    let mut x = vec![0.0; rhs.len()];
    if let Some((u0, p0)) = guess {
        if u0.len() == nu && p0.len() == g.len() {
            x[..nu].copy_from_slice(u0);
            x[nu..].copy_from_slice(p0);
        }
    }
    let stats = if system.symmetric {
        minres(&apply, &precond, &rhs, &mut x, opts.rel_tol, opts.max_iter)
    } else {
        gmres(&apply, &precond, &rhs, &mut x, opts.rel_tol, opts.max_iter, 60)
    };
    let p = x.split_off(nu);
    Ok((x, p, stats.iterations, mg.n_levels()))
}
