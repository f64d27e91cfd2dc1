use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstokes::fem::TaylorHoodSpace;
use wstokes::harness::*;
use wstokes::mesh::quadrature;
use wstokes::weights::WeightSpec;
use wstokes::Error;

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]
}

#[test]
fn smooth_cases_are_solenoidal_with_zero_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in ["smooth_curl", "polynomial_bubble"] {
        let case = builtin_case(name).unwrap();
        let (u, g, p) = (case.velocity.unwrap(), case.gradient.unwrap(), case.pressure.unwrap());
        for _ in 0..1000 {
            let x = random_point(&mut rng);
            let gx = g(x);
            assert!((gx[0][0] + gx[1][1] + gx[2][2]).abs() <= 1e-12, "{name} at {x:?}");
        }
        for _ in 0..1000 {
            let mut x = random_point(&mut rng);
            let axis = rng.random_range(0..3);
            x[axis] = if rng.random_bool(0.5) { 0.0 } else { 1.0 };
            assert!(u(x).iter().all(|v| v.abs() <= 1e-12), "{name} at {x:?}");
        }
        // central differences of the velocity reproduce the gradient
        for _ in 0..20 {
            let x = random_point(&mut rng);
            let h = 1e-6;
            for j in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                let (up, um) = (u(xp), u(xm));
                for i in 0..3 {
                    assert!(((up[i] - um[i]) / (2.0 * h) - g(x)[i][j]).abs() < 1e-7);
                }
            }
        }
        // pressures are polynomials of degree <= 3: an order-6 rule is exact
        let space = TaylorHoodSpace::unit_cube(2).unwrap();
        let rule = quadrature(6).unwrap();
        let mut mean = 0.0;
        for t in 0..space.mesh().n_tets() {
            let geo = space.geometry(t);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                mean += 6.0 * geo.volume * w * p(geo.point(l));
            }
        }
        assert!(mean.abs() <= 1e-10, "{name}: {mean}");
    }
}

#[test]
fn dirac_case_and_unknown_names() {
    let d = builtin_case("dirac_point").unwrap();
    assert!(!d.has_exact_solution());
    assert_eq!(d.point_load, Some(([0.52, 0.5, 0.5], [1.0, 0.0, 0.0])));
    match builtin_case("lid_driven") {
        Err(Error::UnknownCase { name, valid }) => {
            assert_eq!(name, "lid_driven");
            assert_eq!(valid, CASE_NAMES.to_vec());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn scaling_multiplies_fields() {
    let base = builtin_case("smooth_curl").unwrap();
    let scaled = base.clone().scaled(3.0, -2.0);
    let x = [0.3, 0.6, 0.2];
    let (u0, u1) = (base.velocity.unwrap()(x), scaled.velocity.unwrap()(x));
    assert!((0..3).all(|i| (u1[i] - 3.0 * u0[i]).abs() < 1e-15));
    assert!((scaled.pressure.unwrap()(x) + 2.0 * base.pressure.unwrap()(x)).abs() < 1e-15);
}

#[test]
fn eoc_examples() {
    assert_eq!(compute_eoc(&[4.0, 1.0], &[0.5, 0.25]).unwrap(), vec![Some(2.0)]);
    assert_eq!(compute_eoc(&[1.0, 1.0], &[0.5, 0.25]).unwrap(), vec![Some(0.0)]);
    let e = compute_eoc(&[0.9, 0.32, 0.11], &[0.25, 0.125, 0.0625]).unwrap();
    assert!((e[0].unwrap() - 1.49).abs() < 0.005 && (e[1].unwrap() - 1.54).abs() < 0.005);
    assert_eq!(compute_eoc(&[1.0, -1.0], &[0.5, 0.25]).unwrap(), vec![None]);
    assert!(compute_eoc(&[1.0, 2.0, 3.0], &[0.5, 0.25]).is_err());
    assert!(compute_eoc(&[1.0, 2.0], &[0.5, 0.5]).is_err());
}

#[test]
fn linear_study_report() {
    let mut cfg = StudyConfig::new("smooth_curl", vec![1, 2, 4]);
    cfg.stability_weights =
        vec![WeightSpec { kind: "power_point".into(), alpha: 1.0, center: Some([0.3, 0.3, 0.3]), epsilon: 0.0 }];
    let report = run_study(&cfg).unwrap();
    assert_eq!(report.error_names, ["velocity_l2", "gradient_l2", "pressure_l2"]);
    assert_eq!(report.ratio_names, ["stability_power_point_a1"]);
    for (row, n) in report.levels.iter().zip([1usize, 2, 4]) {
        let space = TaylorHoodSpace::unit_cube(n).unwrap();
        assert_eq!(row.n, n);
        assert_eq!(row.h, 1.0 / n as f64);
        assert_eq!(row.velocity_dofs, 3 * (space.mesh().n_vertices() + space.n_edges()));
        assert_eq!(row.pressure_dofs, space.mesh().n_vertices());
        assert!(row.ratios[0] > 0.0 && row.ratios[0].is_finite());
    }
    for (c, name) in report.error_names.iter().enumerate() {
        let e = report.error_column(name).unwrap();
        let eoc = report.eoc_column(name).unwrap();
        for i in 0..2 {
            assert_eq!(eoc[i], Some((e[i] / e[i + 1]).log2()), "column {c}");
        }
    }
    let grad = report.eoc_column("gradient_l2").unwrap();
    assert!(grad[1].unwrap() > 1.5);

    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,n,h,velocity_dofs,pressure_dofs,velocity_l2,gradient_l2,pressure_l2,\
         eoc_velocity_l2,eoc_gradient_l2,eoc_pressure_l2,stability_power_point_a1,iterations"
    );
    assert_eq!(lines.count(), 3);
    assert_eq!(run_study(&cfg).unwrap().to_csv(), csv);

    let mut json = Vec::new();
    report.write_json(&mut json).unwrap();
    let back: StudyReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(back.to_csv(), csv);
}

#[test]
fn nonlinear_study_report() {
    let cfg: StudyConfig = serde_json::from_str(
        r#"{
            "case": "smooth_curl",
            "levels": [1, 2, 4],
            "model": {"kind": "smagorinski-distance", "mu": 1.0, "mu_nl": 0.5, "q": 3, "alpha": 0.25},
            "norms": [{"derivative": "symmetric_gradient"}],
            "solver": {"tol": 1e-9}
        }"#,
    )
    .unwrap();
    let report = run_study(&cfg).unwrap();
    assert_eq!(report.error_names, ["strain_l2"]);
    assert_eq!(report.ratio_names, ["lhs", "rhs", "ratio"]);
    assert_eq!(report.traces.len(), 3);
    assert!(report.traces.iter().all(|t| t.converged));
}

#[test]
fn config_validation() {
    let parse = |s: &str| serde_json::from_str::<StudyConfig>(s);
    let cfg = parse(r#"{"case": "smooth_curl", "levels": [2, 4, 8]}"#).unwrap();
    assert_eq!(cfg, StudyConfig::new("smooth_curl", vec![2, 4, 8]));
    assert!(parse(r#"{"levels": [2, 4, 8]}"#).is_err());

    let bad = [
        r#"{"case": "smooth_curl", "levels": [2, 4]}"#,
        r#"{"case": "smooth_curl", "levels": [2, 3, 4]}"#,
        r#"{"case": "smooth_curl", "levels": [1, 2, 4], "domain": "l_shape"}"#,
        r#"{"case": "smooth_curl", "levels": [1, 2, 4], "mu": 0}"#,
        r#"{"case": "dirac_point", "levels": [1, 2, 4], "model": {"kind": "linear", "mu": 1}}"#,
        r#"{"case": "dirac_point", "levels": [1, 2, 4], "norms": [{"derivative": "pressure"}]}"#,
        r#"{"case": "dirac_point", "levels": [1, 2, 4], "reference_level": 6}"#,
    ];
    for s in bad {
        assert!(matches!(run_study(&parse(s).unwrap()), Err(Error::InvalidArgument(_))), "{s}");
    }
    let unknown = parse(r#"{"case": "vortex", "levels": [1, 2, 4]}"#).unwrap();
    assert!(matches!(run_study(&unknown), Err(Error::UnknownCase { .. })));
}

#[test]
fn failing_level_keeps_partial_report() {
    let mut cfg = StudyConfig::new("smooth_curl", vec![1, 2, 4]);
    cfg.model = Some(wstokes::nonnewtonian::StressModelSpec {
        kind: wstokes::nonnewtonian::StressKind::SmagorinskiDistance,
        mu_nl: 1.0,
        alpha: 0.25,
        q: 3.0,
        ..wstokes::nonnewtonian::StressModelSpec::linear(1.0)
    });
    cfg.velocity_scale = 1e3;
    cfg.solver.max_iter = 2;
    match run_study(&cfg) {
        Err(Error::Study { level, source, partial }) => {
            assert_eq!(partial.levels.len(), level);
            assert!(matches!(*source, Error::NonConvergence { .. }));
        }
        other => panic!("{:?}", other.map(|r| r.to_csv())),
    }
}

#[test]
fn reference_study_records_checks() {
    let mut cfg = StudyConfig::new("dirac_point", vec![1, 2, 4]);
    cfg.norms = vec![NormSpec::new(NormQuantity::Velocity)];
    let report = run_study(&cfg).unwrap();
    assert_eq!(report.levels.len(), 3);
    assert!(report.notes[0].contains("n = 8"));
    assert_eq!(report.reference_checks.len(), 2);
    for c in &report.reference_checks {
        assert!(c.is_consistent(), "{c:?}");
        assert!(c.against_reference > 0.0 && c.against_finest_level > 0.0);
    }
    let e = report.error_column("velocity_l2").unwrap();
    assert!(e.iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn nested_differences() {
    let spaces = nested_spaces(&[1, 2, 4]).unwrap();
    let map = ancestor_map(&spaces[2], &spaces[0]).unwrap();
    assert_eq!(map.len(), spaces[2].mesh().n_tets());
    assert!(map.iter().all(|&t| t < 6));
    assert!(ancestor_map(&spaces[0], &spaces[2]).is_err());

    let case = builtin_case("smooth_curl").unwrap();
    let u = case.velocity.unwrap();
    let coarse = wstokes::fem::interpolate_velocity(&spaces[1], |x| u(x));
    let fine = wstokes::fem::interpolate_velocity(&spaces[2], |x| u(x));
    let same = nested_difference(&coarse, &coarse, &NormSpec::new(NormQuantity::Gradient));
    assert!(same.is_ok_and(|d| d < 1e-12));
    let d = nested_difference(&coarse, &fine, &NormSpec::new(NormQuantity::Velocity)).unwrap();
    assert!(d > 0.0 && d < 1e-2);
}
