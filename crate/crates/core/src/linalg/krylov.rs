//! Krylov solvers on closures `apply(x, y)` computing `y = A x`.

use super::sparse::{axpy, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final true residual relative to the right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

fn true_residual(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// Preconditioned conjugate gradients for symmetric positive definite systems.
pub fn pcg(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> KrylovStats {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = true_residual(apply, b, x);
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < max_iter && norm(&r) > rel_tol * bnorm {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        it += 1;
    }
    let rel = norm(&true_residual(apply, b, x)) / bnorm;
    KrylovStats { iterations: it, relative_residual: rel, converged: rel <= rel_tol * 10.0 }
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems with a
/// symmetric positive definite preconditioner. Restarts from the current
/// iterate until the true residual meets the tolerance.
pub fn minres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> KrylovStats {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut total = 0;
    let mut rel = norm(&true_residual(apply, b, x)) / bnorm;
    let mut stagnant = 0;
    while rel > rel_tol && total < max_iter {
        let before = rel;
        total += minres_cycle(apply, precond, b, x, rel_tol * bnorm, max_iter - total);
        rel = norm(&true_residual(apply, b, x)) / bnorm;
        if rel > 0.5 * before {
            stagnant += 1;
            if stagnant >= 3 {
                break;
            }
        }
    }
    KrylovStats { iterations: total, relative_residual: rel, converged: rel <= rel_tol }
}

fn minres_cycle(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    abs_tol: f64,
    max_iter: usize,
) -> usize {
    let n = b.len();
    let mut v_old = vec![0.0; n];
    let mut v = true_residual(apply, b, x);
    let mut z = vec![0.0; n];
    precond(&v, &mut z);
    let mut gamma = dot(&z, &v).sqrt();
    if gamma == 0.0 {
        return 0;
    }
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut z_new = vec![0.0; n];
    // The preconditioned residual norm |eta| bounds the true residual only
    // up to the preconditioner's spectral range, so iterate a bit further.
    let target = 0.1 * abs_tol;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        z.iter_mut().for_each(|zi| *zi /= gamma);
        apply(&z, &mut az);
        let delta = dot(&az, &z);
        for i in 0..n {
            let vn = az[i] - (delta / gamma) * v[i] - (gamma / gamma_old) * v_old[i];
            v_old[i] = v[i];
            v[i] = vn;
        }
        precond(&v, &mut z_new);
        let gamma_new = dot(&z_new, &v).max(0.0).sqrt();
        let a0 = c * delta - c_old * s * gamma;
        let a1 = (a0 * a0 + gamma_new * gamma_new).sqrt();
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        let c_new = a0 / a1;
        let s_new = gamma_new / a1;
        for i in 0..n {
            let wn = (z[i] - a3 * w_old[i] - a2 * w[i]) / a1;
            w_old[i] = w[i];
            w[i] = wn;
            x[i] += c_new * eta * wn;
        }
        eta = -s_new * eta;
        gamma_old = gamma;
        gamma = gamma_new;
        std::mem::swap(&mut z, &mut z_new);
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
        if eta.abs() <= target || gamma == 0.0 {
            break;
        }
    }
    it
}

/// Restarted GMRES with right preconditioning.
pub fn gmres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    restart: usize,
) -> KrylovStats {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut total = 0;
    let mut tmp = vec![0.0; n];
    loop {
        let r = true_residual(apply, b, x);
        let beta = norm(&r);
        if beta <= rel_tol * bnorm || total >= max_iter {
            return KrylovStats { iterations: total, relative_residual: beta / bnorm, converged: beta <= rel_tol * bnorm };
        }
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            let mut z = vec![0.0; n];
            precond(&basis[k], &mut z);
            apply(&z, &mut tmp);
            zs.push(z);
            let mut wv = tmp.clone();
            for (j, vj) in basis.iter().enumerate() {
                h[j][k] = dot(&wv, vj);
                axpy(-h[j][k], vj, &mut wv);
            }
            // second pass for orthogonality
            for (j, vj) in basis.iter().enumerate() {
                let corr = dot(&wv, vj);
                h[j][k] += corr;
                axpy(-corr, vj, &mut wv);
            }
            h[k + 1][k] = norm(&wv);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            let hk1 = h[k + 1][k];
            h[k][k] = d;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            let next_norm = hk1;
            k += 1;
            total += 1;
            if g[k].abs() <= 0.1 * rel_tol * bnorm || next_norm == 0.0 {
                break;
            }
            basis.push(wv.iter().map(|v| v / next_norm).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            axpy(*yi, z, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Tridiagonal test matrices.
    fn spd(n: usize) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 4.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    fn indefinite(n: usize) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let d = if i % 3 == 0 { -3.0 } else { 5.0 + i as f64 * 0.01 };
                let mut s = d * x[i];
                if i > 0 {
                    s += 0.7 * x[i - 1];
                }
                if i + 1 < n {
                    s += 0.7 * x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    fn ident(x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    #[test]
    fn pcg_solves() {
        let n = 50;
        let a = spd(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; n];
        let s = pcg(&a, &ident, &b, &mut x, 1e-12, 500);
        assert!(s.converged && s.relative_residual < 1e-11);
    }

    #[test]
    fn minres_solves_indefinite() {
        let n = 60;
        let a = indefinite(n);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let jac = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                let d: f64 = if i % 3 == 0 { 3.0 } else { 5.0 };
                y[i] = x[i] / d;
            }
        };
        let s = minres(&a, &jac, &b, &mut x, 1e-12, 500);
        assert!(s.converged, "{s:?}");
        let mut r = vec![0.0; n];
        a(&x, &mut r);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric() {
        let n = 40;
        let a = move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 3.0 * x[i];
                if i > 0 {
                    s -= 1.5 * x[i - 1];
                }
                if i + 1 < n {
                    s += 0.4 * x[i + 1];
                }
                y[i] = s;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut x = vec![0.0; n];
        let s = gmres(&a, &ident, &b, &mut x, 1e-12, 400, 8);
        assert!(s.converged, "{s:?}");
    }
}
