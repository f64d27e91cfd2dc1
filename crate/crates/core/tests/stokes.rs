use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstokes::fem::{frobenius, interpolate_pressure, interpolate_velocity, sym, FEFunction, Mat3, Role, TaylorHoodSpace};
use wstokes::harness::builtin_case;
use wstokes::mesh::{locate_point, quadrature};
use wstokes::stokes::*;
use wstokes::weights::WeightField;
use wstokes::Error;

fn random_velocity(space: &Arc<TaylorHoodSpace>, rng: &mut ChaCha8Rng) -> FEFunction {
    let mut v = FEFunction::zeros(space.clone(), Role::Velocity);
    for (i, c) in v.coeffs_mut().iter_mut().enumerate() {
        if !space.is_boundary_node(i / 3) {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_integral(space: &TaylorHoodSpace, order: u32, mut f: impl FnMut(usize, &[f64; 4], [f64; 3]) -> f64) -> f64 {
    let rule = quadrature(order).unwrap();
    let mut total = 0.0;
    for t in 0..space.mesh().n_tets() {
        let geo = space.geometry(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            total += 6.0 * geo.volume * w * f(t, l, geo.point(l));
        }
    }
    total
}

fn div(g: &Mat3) -> f64 {
    g[0][0] + g[1][1] + g[2][2]
}

#[test]
fn forms_on_linear_field() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let mu = 1.0;
    let (a, _) = assemble_velocity_block_full(&space, ViscousForm::SymmetricGradient, 2, &|_, _, _| 2.0 * mu).unwrap();
    let v = interpolate_velocity(&space, |x| [x[0], 0.0, 0.0]);
    let mut av = vec![0.0; v.coeffs().len()];
    a.matvec(v.coeffs(), &mut av);
    assert!((dot(v.coeffs(), &av) - 2.0).abs() < 1e-12);

    // -int 1 * div v summed over the pressure partition of unity
    let b = assemble_divergence_full(&space).unwrap();
    let mut bv = vec![0.0; space.n_pressure_dofs()];
    b.matvec(v.coeffs(), &mut bv);
    assert!((-bv.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn constant_pressure_sees_no_divergence() {
    let space = TaylorHoodSpace::unit_cube(3).unwrap();
    let sys = assemble_stokes(&space, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let v = random_velocity(&space, &mut rng);
        let mut bv = vec![0.0; space.n_pressure_dofs()];
        sys.b.matvec(v.coeffs(), &mut bv);
        assert!(bv.iter().sum::<f64>().abs() < 1e-12);
    }
}

#[test]
fn matrices_match_quadrature_and_a_is_symmetric() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let mu = 0.7;
    let sys = assemble_stokes(&space, mu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..4 {
        let v = random_velocity(&space, &mut rng);
        let w = random_velocity(&space, &mut rng);
        let mut aw = vec![0.0; v.coeffs().len()];
        let mut av = vec![0.0; v.coeffs().len()];
        sys.a.matvec(w.coeffs(), &mut aw);
        sys.a.matvec(v.coeffs(), &mut av);
        let (vaw, wav) = (dot(v.coeffs(), &aw), dot(w.coeffs(), &av));
        let oracle = quad_integral(&space, 4, |t, l, _| {
            let (ev, ew) = (sym(&v.gradient_local(t, l)), sym(&w.gradient_local(t, l)));
            2.0 * mu * (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| ev[i][j] * ew[i][j]).sum::<f64>()
        });
        assert!((vaw - oracle).abs() < 1e-12 * oracle.abs().max(1.0), "{vaw} {oracle}");
        assert!((vaw - wav).abs() < 1e-13 * vaw.abs().max(1.0));

        let p: Vec<f64> = (0..space.n_pressure_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ph = FEFunction::new(space.clone(), Role::Pressure, p.clone()).unwrap();
        let mut bv = vec![0.0; p.len()];
        sys.b.matvec(v.coeffs(), &mut bv);
        let oracle = -quad_integral(&space, 3, |t, l, _| ph.pressure_local(t, l) * div(&v.gradient_local(t, l)));
        assert!((dot(&p, &bv) - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }
}

#[test]
fn divergence_form_loads() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let zero = assemble_rhs_divergence_form(&space, &|_| [[0.0; 3]; 3]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_velocity(&space, &mut rng);
    let c = [[1.0, 2.0, -0.5], [0.3, -1.0, 4.0], [2.0, 0.0, 1.5]];
    let f = assemble_rhs_divergence_form(&space, &|_| c).unwrap();
    assert!(dot(&f, v.coeffs()).abs() < 1e-12);

    let smooth = |x: [f64; 3]| -> Mat3 {
        [[x[0].sin(), x[1] * x[2], 1.0], [x[2].exp(), 0.0, x[0] * x[1]], [x[1].cos(), x[0], x[2] * x[2]]]
    };
    let f = assemble_rhs_divergence_form(&space, &smooth).unwrap();
    let oracle = quad_integral(&space, 6, |t, l, x| {
        let (s, g) = (smooth(x), v.gradient_local(t, l));
        (0..3).map(|i| (0..3).map(|j| s[i][j] * g[i][j]).sum::<f64>()).sum()
    });
    assert!((dot(&f, v.coeffs()) - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
}

#[test]
fn point_load_is_point_evaluation() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    // an interior edge midpoint node
    let node = (0..space.n_nodes()).find(|&n| !space.is_boundary_node(n) && n >= space.mesh().n_vertices()).unwrap();
    let z = space.node_position(node);
    let f = assemble_rhs_measure(&space, z, [1.0, 0.0, 0.0]).unwrap();
    assert!((f[3 * node] - 1.0).abs() < 1e-12);
    assert!(f.iter().enumerate().all(|(i, &v)| i == 3 * node || v.abs() < 1e-12));

    let z = [0.52, 0.5, 0.5];
    let f = assemble_rhs_measure(&space, z, [1.0, 0.0, 0.0]).unwrap();
    assert!((f.iter().step_by(3).sum::<f64>() - 1.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let mut v = FEFunction::zeros(space.clone(), Role::Velocity);
        v.coeffs_mut().iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
        let z = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
        let vz = v.eval(z).unwrap();
        for j in 0..3 {
            let mut amp = [0.0; 3];
            amp[j] = 1.0;
            let f = assemble_rhs_measure(&space, z, amp).unwrap();
            assert!((dot(&f, v.coeffs()) - vz[j]).abs() < 1e-12);
        }
    }
    assert!(matches!(assemble_rhs_measure(&space, [1.5, 0.5, 0.5], [1.0, 0.0, 0.0]), Err(Error::PointNotFound(_))));
}

#[test]
fn zero_data_gives_zero_solution() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let sys = assemble_stokes(&space, 1.0).unwrap();
    for opts in [SolverOptions::direct(), SolverOptions::iterative()] {
        let sol = solve_saddle(&sys, &opts).unwrap();
        assert!(sol.velocity.coeffs().iter().all(|&v| v.abs() < 1e-14));
        assert!(sol.pressure.coeffs().iter().all(|&v| v.abs() < 1e-14));
    }
}

#[test]
fn non_positive_viscosity_is_rejected() {
    let space = TaylorHoodSpace::unit_cube(1).unwrap();
    assert!(matches!(assemble_stokes(&space, 0.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(assemble_stokes(&space, f64::NAN), Err(Error::InvalidArgument(_))));
}

fn smooth_projection(space: &Arc<TaylorHoodSpace>, opts: &SolverOptions) -> StokesSolution {
    let case = builtin_case("smooth_curl").unwrap();
    let (u, g, p) = (case.velocity.unwrap(), case.gradient.unwrap(), case.pressure.unwrap());
    let exact = ExactSolution { velocity: &*u, gradient: &*g, pressure: &*p };
    stokes_projection(space, &exact, 1.0, opts).unwrap()
}

#[test]
fn backends_agree() {
    let space = TaylorHoodSpace::unit_cube(4).unwrap();
    let d = smooth_projection(&space, &SolverOptions::direct());
    let i = smooth_projection(&space, &SolverOptions::iterative());
    assert!(d.stats.relative_residual < 1e-10 && i.stats.relative_residual < 1e-10);
    let diff = d.velocity.sub(&i.velocity).unwrap();
    let rel = dot(diff.coeffs(), diff.coeffs()).sqrt() / dot(d.velocity.coeffs(), d.velocity.coeffs()).sqrt();
    assert!(rel < 1e-8, "{rel}");
    for s in [&d, &i] {
        let mean = quad_integral(&space, 2, |t, l, _| s.pressure.pressure_local(t, l));
        assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn projection_reproduces_discrete_pairs() {
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let p = |x: [f64; 3]| x[0] + 2.0 * x[1] - 1.5;
    let exact = ExactSolution { velocity: &|_| [0.0; 3], gradient: &|_| [[0.0; 3]; 3], pressure: &p };
    let sol = stokes_projection(&space, &exact, 1.0, &SolverOptions::direct()).unwrap();
    assert!(sol.velocity.coeffs().iter().all(|v| v.abs() < 1e-10));
    let ph = interpolate_pressure(&space, p);
    let err = sol.pressure.sub(&ph).unwrap();
    assert!(err.coeffs().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn projection_is_galerkin_orthogonal() {
    let space = TaylorHoodSpace::unit_cube(3).unwrap();
    let sol = smooth_projection(&space, &SolverOptions::direct());
    let case = builtin_case("smooth_curl").unwrap();
    let (g, p) = (case.gradient.unwrap(), case.pressure.unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let v = random_velocity(&space, &mut rng);
        let r = quad_integral(&space, 6, |t, l, x| {
            let e = sym(&g(x));
            let eh = sym(&sol.velocity.gradient_local(t, l));
            let ev = sym(&v.gradient_local(t, l));
            let a: f64 = (0..3).map(|i| (0..3).map(|j| 2.0 * (e[i][j] - eh[i][j]) * ev[i][j]).sum::<f64>()).sum();
            a - (p(x) - sol.pressure.pressure_local(t, l)) * div(&v.gradient_local(t, l))
        });
        assert!(r.abs() < 1e-10, "{r}");
    }
    for i in (0..space.n_pressure_dofs()).step_by(7) {
        let mut c = vec![0.0; space.n_pressure_dofs()];
        c[i] = 1.0;
        let ri = FEFunction::new(space.clone(), Role::Pressure, c).unwrap();
        let r = quad_integral(&space, 6, |t, l, x| {
            ri.pressure_local(t, l) * (div(&g(x)) - div(&sol.velocity.gradient_local(t, l)))
        });
        assert!(r.abs() < 1e-10, "{r}");
    }
}

#[test]
fn velocity_gradient_converges_at_second_order() {
    let mut errs = Vec::new();
    let case = builtin_case("smooth_curl").unwrap();
    let g = case.gradient.unwrap();
    for n in [2, 4] {
        let space = TaylorHoodSpace::unit_cube(n).unwrap();
        let sol = smooth_projection(&space, &SolverOptions::direct());
        let e2 = quad_integral(&space, 6, |t, l, x| {
            let gh = sol.velocity.gradient_local(t, l);
            let ge = g(x);
            let mut d = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    d[i][j] = ge[i][j] - gh[i][j];
                }
            }
            frobenius(&sym(&d)).powi(2)
        });
        errs.push(e2.sqrt());
    }
    // pre-asymptotic on these coarse meshes, but clearly better than first order
    assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
}

#[test]
fn dirac_solution_is_finite() {
    let mut norms = Vec::new();
    for n in [2, 4] {
        let space = TaylorHoodSpace::unit_cube(n).unwrap();
        let f = assemble_rhs_measure(&space, [0.52, 0.5, 0.5], [1.0, 0.0, 0.0]).unwrap();
        let np = space.n_pressure_dofs();
        let sys = assemble_stokes(&space, 1.0).unwrap().with_rhs(f, vec![0.0; np]).unwrap();
        let sol = solve_saddle(&sys, &SolverOptions::direct()).unwrap();
        let l2 = quad_integral(&space, 4, |t, l, _| sol.velocity.velocity_local(t, l).iter().map(|v| v * v).sum());
        assert!(l2.is_finite() && l2 > 0.0);
        norms.push(l2.sqrt());
    }
    assert!(norms[1] < 2.0 * norms[0] && norms[0] < 2.0 * norms[1], "{norms:?}");
}

#[test]
fn infsup_is_positive_and_excludes_constants() {
    for n in [2, 3] {
        let space = TaylorHoodSpace::unit_cube(n).unwrap();
        let r = discrete_infsup(&space, &WeightField::constant(), 2.0).unwrap();
        assert!(r.converged && r.beta > 0.1, "{r:?}");
        let d = discrete_infsup_dense(&space).unwrap();
        assert!((d.beta - r.beta).abs() < 1e-6 * d.beta, "{} {}", d.beta, r.beta);
    }
    let space = TaylorHoodSpace::unit_cube(2).unwrap();
    let w = WeightField::power_point([0.3, 0.3, 0.3], 1.0, 0.0);
    let r = discrete_infsup(&space, &w, 2.0).unwrap();
    assert_eq!(r.method, InfSupMethod::Probe);
    assert!(r.beta > 0.0);
}

#[test]
fn green_load_and_divergence() {
    let space = TaylorHoodSpace::unit_cube(4).unwrap();
    let z = [0.52, 0.48, 0.51];
    let report = approximate_green(&space, z, 0, 1, 1.0, &GreenOptions::default()).unwrap();
    assert!(report.divergence_residual <= 1e-10, "{}", report.divergence_residual);

    let delta = &report.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rule = quadrature(4).unwrap();
    let geo = space.geometry(delta.tet);
    for (i, j) in [(0, 0), (0, 1), (2, 1)] {
        let f = green_rhs(&space, delta, i, j).unwrap();
        let v = random_velocity(&space, &mut rng);
        let oracle: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| 6.0 * geo.volume * w * delta.eval_local(l) * sym(&v.gradient_local(delta.tet, l))[i][j])
            .sum();
        assert!((dot(&f, v.coeffs()) - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }
    assert!(green_rhs(&space, delta, 3, 0).is_err());
    assert_eq!(locate_point(space.mesh(), z).unwrap().0, delta.tet);
}

#[test]
fn coordinate_export() {
    let space = TaylorHoodSpace::unit_cube(1).unwrap();
    let sys = assemble_stokes(&space, 1.0).unwrap();
    let mut buf = Vec::new();
    sys.write_b_coo(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 3);
        assert!(parts[0].parse::<usize>().unwrap() < space.n_pressure_dofs());
        assert!(parts[1].parse::<usize>().unwrap() < space.n_velocity_dofs());
        parts[2].parse::<f64>().unwrap();
    }
}
