use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{assemble_divergence, assemble_velocity_block, pressure_mass, pressure_moments, ViscousForm};
use crate::error::{invalid, Error, Result};
use crate::fem::{interpolate_pressure, weighted_norm, Derivative, FEFunction, Role, TaylorHoodSpace};
use crate::linalg::sparse::{axpy, dot, BlockCsr, Coupling, Csr};
use crate::linalg::{pcg, Multigrid};
use crate::weights::{conjugate, dual_weight, WeightField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfSupMethod {
    Lanczos,
    Dense,
    /// Minimum over a fixed probe set of the quotient at `v = A^{-1} B^T p`.
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub beta: f64,
    pub method: InfSupMethod,
    /// For the probe method each probe's quotient bounds its supremum from
    /// below; the minimum is not a certified bound on the infimum.
    pub lower_bound: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Velocity Laplacian (boundary eliminated) and divergence coupling.
struct Operators {
    a: BlockCsr,
    b: Coupling,
}

fn operators(space: &TaylorHoodSpace) -> Result<Operators> {
    let (a, _) = assemble_velocity_block(space, ViscousForm::Gradient, 2, &|_, _, _| 1.0)?;
    Ok(Operators { a, b: assemble_divergence(space)? })
}

/// Applies `K p = B A^{-1} B^T p` with multigrid-preconditioned CG.
struct Schur<'a> {
    ops: &'a Operators,
    mg: Multigrid<'a>,
}

impl Schur<'_> {
    fn solve_a(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; rhs.len()];
        let stats = pcg(
            &|x, y| self.ops.a.matvec(x, y),
            &|r, z| self.mg.apply(r, z),
            rhs,
            &mut v,
            1e-11,
            500,
        );
        if !stats.converged {
            return Err(Error::Solver(format!(
                "velocity solve inside the inf-sup iteration stalled at {:.3e}",
                stats.relative_residual
            )));
        }
        Ok(v)
    }

    fn velocity_of(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.ops.a.dim()];
        self.ops.b.add_transpose_matvec(p, &mut rhs);
        self.solve_a(&rhs)
    }

    fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        let v = self.velocity_of(p)?;
        let mut out = vec![0.0; p.len()];
        self.ops.b.matvec(&v, &mut out);
        Ok(out)
    }
}

fn mass_solve(m: &Csr, rhs: &[f64]) -> Vec<f64> {
    let diag: Vec<f64> = (0..m.nrows).map(|i| m.row(i).find(|&(j, _)| j == i).map_or(1.0, |e| e.1)).collect();
    let mut x = vec![0.0; rhs.len()];
    pcg(
        &|x, y| m.matvec(x, y),
        &|r, z| {
            for i in 0..r.len() {
                z[i] = r[i] / diag[i];
            }
        },
        rhs,
        &mut x,
        1e-14,
        1000,
    );
    x
}

/// Discrete inf-sup constant of the Taylor-Hood pair.
///
/// For `q = 2` and a constant weight, `beta^2` is the smallest eigenvalue of
/// `B A^{-1} B^T p = lambda M_p p` on zero-mean pressures, with `A` the
/// vector Laplacian, found by Lanczos with full reorthogonalization in the
/// `M_p` inner product. Otherwise the weighted quotient
/// `|int p div v| / (|grad v|_{L^q(w)} |p|_{L^q'(w')})` is evaluated at
/// `v = A^{-1} B^T p` over a fixed probe set and the minimum is reported.
pub fn discrete_infsup(space: &Arc<TaylorHoodSpace>, weight: &WeightField, q: f64) -> Result<InfSupReport> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(invalid(format!("inf-sup index must lie in (1, inf), got {q}")));
    }
    let ops = operators(space)?;
    let schur = Schur { ops: &ops, mg: Multigrid::new(space, &ops.a)? };
    if q == 2.0 && weight.is_constant() {
        lanczos(space, &schur)
    } else {
        probe(space, &schur, weight, q)
    }
}

fn lanczos(space: &Arc<TaylorHoodSpace>, schur: &Schur<'_>) -> Result<InfSupReport> {
    let np = space.n_pressure_dofs();
    let m = pressure_mass(space);
    let moments = pressure_moments(space);
    let volume: f64 = moments.iter().sum();
    // M-normalized constant: M 1 = moments, 1^T M 1 = volume.
    let project = |v: &mut Vec<f64>| {
        let c = dot(v, &moments) / volume;
        v.iter_mut().for_each(|x| *x -= c);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut v: Vec<f64> = (0..np).map(|_| rng.random_range(-1.0..1.0)).collect();
    project(&mut v);
    let mut mv = vec![0.0; np];
    m.matvec(&v, &mut mv);
    let nrm = dot(&v, &mv).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    mv.iter_mut().for_each(|x| *x /= nrm);
    let max_steps = (np - 1).min(300);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut mbasis: Vec<Vec<f64>> = Vec::new();
    let (mut alphas, mut betas): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut theta_prev = f64::INFINITY;
    let mut theta = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0;
    while steps < max_steps {
        steps += 1;
        let kv = schur.apply(&v)?;
        let alpha = dot(&kv, &v);
        let mut w = mass_solve(&m, &kv);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(v.clone());
        mbasis.push(mv.clone());
        alphas.push(alpha);
        for _ in 0..2 {
            project(&mut w);
            for (bv, mb) in basis.iter().zip(&mbasis) {
                let c = dot(&w, mb);
                axpy(-c, bv, &mut w);
            }
        }
        let mut mw = vec![0.0; np];
        m.matvec(&w, &mut mw);
        let beta = dot(&w, &mw).max(0.0).sqrt();
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &tmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty tridiagonal");
        theta = tmin;
        let resid = beta * eig.eigenvectors[(k - 1, imin)].abs();
        if (resid <= 1e-7 * theta.abs() && (theta - theta_prev).abs() <= 1e-9 * theta.abs()) || beta <= 1e-13 {
            converged = true;
            break;
        }
        theta_prev = theta;
        betas.push(beta);
        v = w.into_iter().map(|x| x / beta).collect();
        mv = mw.into_iter().map(|x| x / beta).collect();
    }
    if !converged {
        return Err(Error::Solver(format!(
            "Lanczos for the inf-sup constant did not converge in {steps} steps (last Ritz value {theta:.6e})"
        )));
    }
    Ok(InfSupReport {
        beta: theta.max(0.0).sqrt(),
        method: InfSupMethod::Lanczos,
        lower_bound: false,
        iterations: steps,
        converged,
    })
}

fn probe(space: &Arc<TaylorHoodSpace>, schur: &Schur<'_>, weight: &WeightField, q: f64) -> Result<InfSupReport> {
    use std::f64::consts::PI;
    let dual = dual_weight(weight, q)?;
    let qc = conjugate(q);
    let n = space.mesh().vertices().len();
    let probes: Vec<Box<dyn Fn([f64; 3]) -> f64>> = vec![
        Box::new(|x| x[0] - 0.5),
        Box::new(|x| x[1] - 0.5),
        Box::new(|x| x[2] - 0.5),
        Box::new(|x| (x[0] - 0.5) * (x[1] - 0.5)),
        Box::new(|x| (PI * x[0]).cos() * (PI * x[1]).cos() * (PI * x[2]).cos()),
        Box::new(|x| (2.0 * PI * x[0]).sin() * (3.0 * PI * x[2]).cos()),
    ];
    let mut best = f64::INFINITY;
    let mut checker = vec![0.0; n];
    let h = space.mesh().h_max() / 3f64.sqrt();
    for (i, x) in space.mesh().vertices().iter().enumerate() {
        let s: i64 = x.iter().map(|c| (c / h).round() as i64).sum();
        checker[i] = if s % 2 == 0 { 1.0 } else { -1.0 };
    }
    let mut fields: Vec<FEFunction> = probes.iter().map(|f| interpolate_pressure(space, f)).collect();
    fields.push(FEFunction::new(space.clone(), Role::Pressure, checker)?);
    for p in fields.iter_mut() {
        let moments = pressure_moments(space);
        let c = dot(p.coeffs(), &moments) / moments.iter().sum::<f64>();
        p.coeffs_mut().iter_mut().for_each(|v| *v -= c);
        let v = schur.velocity_of(p.coeffs())?;
        let mut bv = vec![0.0; p.coeffs().len()];
        schur.ops.b.matvec(&v, &mut bv);
        let num = dot(p.coeffs(), &bv).abs();
        let vf = FEFunction::new(space.clone(), Role::Velocity, v)?;
        let den = weighted_norm(&vf, weight, q, Derivative::Gradient, 5)? * weighted_norm(p, &dual, qc, Derivative::None, 5)?;
        if den > 0.0 {
            best = best.min(num / den);
        }
    }
    Ok(InfSupReport { beta: best, method: InfSupMethod::Probe, lower_bound: true, iterations: fields.len(), converged: true })
}

/// Dense reference computation for small spaces.
pub fn discrete_infsup_dense(space: &Arc<TaylorHoodSpace>) -> Result<InfSupReport> {
    let ops = operators(space)?;
    let mask = space.boundary_node_mask();
    let interior: Vec<usize> = (0..space.n_velocity_dofs()).filter(|&i| !mask[i / 3]).collect();
    if interior.len() > 4000 {
        return Err(invalid("dense inf-sup reference is limited to small meshes"));
    }
    let mut index = vec![usize::MAX; space.n_velocity_dofs()];
    for (k, &i) in interior.iter().enumerate() {
        index[i] = k;
    }
    let nu = interior.len();
    let np = space.n_pressure_dofs();
    let mut a = DMatrix::<f64>::zeros(nu, nu);
    for (i, j, v) in ops.a.triplets() {
        if index[i] != usize::MAX && index[j] != usize::MAX {
            a[(index[i], index[j])] += v;
        }
    }
    let mut bt = DMatrix::<f64>::zeros(nu, np);
    for (i, j, v) in ops.b.triplets() {
        if index[j] != usize::MAX {
            bt[(index[j], i)] += v;
        }
    }
    let chol = a.cholesky().ok_or_else(|| Error::Solver("velocity Laplacian is not positive definite".into()))?;
    let x = chol.solve(&bt);
    let s = bt.transpose() * x;
    let mut mmat = DMatrix::<f64>::zeros(np, np);
    let m = pressure_mass(space);
    for i in 0..np {
        for (j, v) in m.row(i) {
            mmat[(i, j)] = v;
        }
    }
    let l = mmat.cholesky().ok_or_else(|| Error::Solver("pressure mass is not positive definite".into()))?;
    let linv = l.l().try_inverse().ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let c = &linv * s * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    // the constant pressure is the only null direction
    let lambda = ev[1];
    Ok(InfSupReport {
        beta: lambda.max(0.0).sqrt(),
        method: InfSupMethod::Dense,
        lower_bound: false,
        iterations: 0,
        converged: true,
    })
}
