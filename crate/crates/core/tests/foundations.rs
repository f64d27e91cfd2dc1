use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::sync::Arc;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstokes::fem::*;
use wstokes::mesh::*;
use wstokes::weights::*;
use wstokes::Error;

#[test]
fn cube_meshes_and_refinement() {
    for n in 1..=3 {
        let m = build_cube_mesh(n).unwrap();
        assert_eq!(m.n_vertices(), (n + 1).pow(3));
        assert_eq!(m.n_tets(), 6 * n.pow(3));
        assert_relative_eq!(m.h_max(), 3f64.sqrt() / n as f64, max_relative = 1e-14);
        assert!(audit(&m).is_valid(1.0, 6.0));
    }
    assert!(matches!(build_cube_mesh(0), Err(Error::InvalidArgument(_))));

    let mut m = build_cube_mesh(1).unwrap();
    for level in 1..=3 {
        let fine = refine_uniform(&m).unwrap();
        assert_eq!(fine.n_tets(), 8 * m.n_tets());
        assert_eq!(fine.level(), level);
        assert_relative_eq!(fine.h_max(), m.h_max() / 2.0, max_relative = 1e-14);
        let parents = fine.parents().unwrap();
        let mut child_volume = vec![0.0; m.n_tets()];
        for (t, &p) in parents.iter().enumerate() {
            child_volume[p] += fine.geometry(t).volume;
        }
        for (t, v) in child_volume.iter().enumerate() {
            assert_relative_eq!(*v, m.geometry(t).volume, max_relative = 1e-12);
        }
        assert!(audit(&fine).is_valid(1.0, 6.0));
        m = fine;
    }
}

#[test]
fn mesh_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.txt");
    let mesh = refine_uniform(&build_cube_mesh(2).unwrap()).unwrap();
    let mut w = BufWriter::new(File::create(&path).unwrap());
    write_mesh(&mesh, &mut w).unwrap();
    w.flush().unwrap();
    drop(w);
    let back = read_mesh(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.tets(), mesh.tets());
    assert_eq!(mesh_hash(&back), mesh_hash(&mesh));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(&format!("tetmesh {} {}\n", mesh.n_vertices(), mesh.n_tets())));
}

#[test]
fn quadrature_and_location() {
    assert!(matches!(quadrature(7), Err(Error::UnsupportedOrder { requested: 7, .. })));
    let r = quadrature(3).unwrap();
    // int x^2 y over the reference tet = 2! 1! / 6! = 1/360
    let v: f64 = r.points.iter().zip(&r.weights).map(|(l, w)| w * l[1] * l[1] * l[2]).sum();
    assert_relative_eq!(v, 1.0 / 360.0, max_relative = 1e-13);

    let mesh = build_cube_mesh(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let (t, l) = locate_point(&mesh, x).unwrap();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let y = mesh.geometry(t).point(&l);
        assert!((0..3).all(|i| (x[i] - y[i]).abs() < 1e-12));
    }
    assert!(matches!(locate_point(&mesh, [0.5, 0.5, -0.01]), Err(Error::PointNotFound(_))));
}

#[test]
fn weight_fields() {
    let z = [0.5, 0.5, 0.5];
    assert_eq!(WeightField::constant().eval([0.1, 0.2, 0.3]).unwrap(), 1.0);
    assert_relative_eq!(WeightField::power_point(z, 2.0, 0.0).eval([0.5, 0.5, 1.0]).unwrap(), 0.25);
    assert_relative_eq!(WeightField::power_boundary(1.0, 0.0).eval([0.1, 0.5, 0.5]).unwrap(), 0.1);
    assert!(matches!(WeightField::power_point(z, -1.0, 0.0).eval(z), Err(Error::SingularEvaluation(_))));

    let w = WeightField::power_point(z, 1.5, 0.0);
    let d = dual_weight(&w, 2.0).unwrap();
    let x = [0.2, 0.9, 0.4];
    assert_relative_eq!(d.eval(x).unwrap(), w.eval(x).unwrap().powf(-1.0), max_relative = 1e-14);
    let dd = dual_weight(&d, conjugate(2.0)).unwrap();
    assert_relative_eq!(dd.eval(x).unwrap(), w.eval(x).unwrap(), max_relative = 1e-12);
    assert!(dual_weight(&w, 1.0).is_err());

    let spec: WeightSpec = serde_json::from_str(r#"{"kind": "power_point", "alpha": 1, "center": [0.3, 0.3, 0.3]}"#).unwrap();
    assert_relative_eq!(spec.build().unwrap().eval([0.3, 0.3, 0.8]).unwrap(), 0.5, max_relative = 1e-14);

    let interior = is_in_restricted_class(&WeightField::power_point(z, -1.0, 0.0), 0.1).unwrap();
    assert!(interior.member);
    let boundary = is_in_restricted_class(&WeightField::power_boundary(1.0, 0.0), 0.1).unwrap();
    assert!(!boundary.member);
    let one = is_in_restricted_class(&WeightField::constant(), 0.1).unwrap();
    assert!(one.member && one.lower_bound == 1.0);
}

#[test]
fn aq_estimates() {
    for depth in 1..=4 {
        assert_eq!(estimate_aq(&WeightField::constant(), 2.0, depth).unwrap().value, 1.0);
    }
    let z = [0.3, 0.3, 0.3];
    let w = WeightField::power_point(z, 2.0, 0.0);
    let v: Vec<f64> = (1..=4).map(|d| estimate_aq(&w, 2.0, d).unwrap().value).collect();
    assert!(v.windows(2).all(|p| p[1] >= p[0]) && v[0] >= 1.0);
    assert!(estimate_aq(&w, 1.0, 2).is_err());
}

#[test]
fn maximal_operators_and_decomposition() {
    let grid = ScalarGrid::sample(8, |x| (x[0] - 0.4).abs() + x[1] * x[2]).unwrap();
    let (hl, sharp) = maximal_fields(&grid);
    for (i, v) in grid.values().iter().enumerate() {
        assert!(hl[i] >= v.abs() - 1e-15);
        assert!(sharp[i] >= 0.0);
        assert_eq!(hl[i], maximal_hl(&grid, i));
    }

    let cube = Cube { center: [0.5, 0.5, 0.5], side: 0.3 };
    let g = |x: Point| (2.0 * std::f64::consts::PI * x[0]).sin() * (x[1] + 0.5);
    let w = WeightField::power_point([0.3, 0.3, 0.3], 1.0, 0.0);
    let split = decompose_zero_mean(&g, cube, &w, 2.0).unwrap();
    let rep = &split.report;
    assert!(rep.integral_g1.abs() <= 1e-10 * rep.l1_norm_g);
    assert!(rep.integral_g2.abs() <= 1e-10 * rep.l1_norm_g);
    assert!(rep.max_split_defect <= 1e-12);
    // g2 vanishes on Q, g1 off 3/2 Q
    assert_eq!(split.g2([0.5, 0.55, 0.45]), 0.0);
    assert_eq!(split.g1([0.9, 0.5, 0.5]), 0.0);
    let big = Cube { center: [0.5, 0.5, 0.5], side: 0.8 };
    assert!(decompose_zero_mean(&g, big, &w, 2.0).is_err());
}

fn space(n: usize) -> Arc<TaylorHoodSpace> {
    TaylorHoodSpace::unit_cube(n).unwrap()
}

#[test]
fn spaces_interpolation_and_norms() {
    let s = space(2);
    assert_eq!(s.n_velocity_dofs(), 3 * (s.mesh().n_vertices() + s.n_edges()));
    assert_eq!(s.n_pressure_dofs(), s.mesh().n_vertices());
    for d in s.boundary_dofs() {
        let x = s.node_position(d / 3);
        assert!(x.iter().any(|&c| c == 0.0 || c == 1.0));
    }

    let u = interpolate_velocity(&s, |x| [x[0], 0.0, 0.0]);
    let one = WeightField::constant();
    assert_relative_eq!(weighted_norm(&u, &one, 2.0, Derivative::Gradient, 4).unwrap(), 1.0, max_relative = 1e-13);
    assert_relative_eq!(weighted_norm(&u, &one, 2.0, Derivative::SymmetricGradient, 4).unwrap(), 1.0, max_relative = 1e-13);
    let u = interpolate_velocity(&s, |x| [x[1], 0.0, 0.0]);
    assert_relative_eq!(weighted_norm(&u, &one, 2.0, Derivative::Gradient, 4).unwrap(), 1.0, max_relative = 1e-13);
    assert_relative_eq!(
        weighted_norm(&u, &one, 2.0, Derivative::SymmetricGradient, 4).unwrap(),
        0.5f64.sqrt(),
        max_relative = 1e-13
    );
    let lin = interpolate_velocity(&s, |x| [x[0], x[1], x[2]]);
    assert_eq!(lin.eval([0.31, 0.72, 0.18]).unwrap().len(), 3);
    for (a, b) in lin.eval([0.31, 0.72, 0.18]).unwrap().iter().zip([0.31, 0.72, 0.18]) {
        assert!((a - b).abs() < 1e-13);
    }

    let p = interpolate_pressure(&s, |x| x[0]);
    let p0 = zero_mean_project(&p);
    let shifted = interpolate_pressure(&s, |x| x[0] - 0.5);
    assert!(p0.coeffs().iter().zip(shifted.coeffs()).all(|(a, b)| (a - b).abs() < 1e-14));
    assert!(zero_mean_project(&interpolate_pressure(&s, |_| 5.0)).coeffs().iter().all(|c| c.abs() < 1e-14));
}

#[test]
fn function_file_round_trip() {
    let s = space(2);
    let u = interpolate_velocity(&s, |x| [x[0].sin(), x[1] * x[2], 1.0 / 3.0]);
    let mut buf = Vec::new();
    write_fe_function(&u, &mut buf).unwrap();
    let back = read_fe_function(&buf[..], &s).unwrap();
    assert_eq!(back.coeffs(), u.coeffs());
    assert_eq!(back.role(), Role::Velocity);
    assert!(matches!(read_fe_function(&buf[..], &space(3)), Err(Error::Parse(_))));
}

#[test]
fn regularized_delta_reproduces_quadratics() {
    let s = space(2);
    let z = [0.52, 0.47, 0.33];
    let delta = build_regularized_delta(&s, z).unwrap();
    let rule = quadrature(6).unwrap();
    let geo = s.geometry(delta.tet);
    let integrate = |f: &dyn Fn(&[f64; 4]) -> f64| -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(l, w)| 6.0 * geo.volume * w * delta.eval_local(l) * f(l)).sum()
    };
    assert!((integrate(&|_| 1.0) - 1.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let c: [f64; 10] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let quad = |x: Point| {
            c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[0] * x[0] + c[5] * x[1] * x[1]
                + c[6] * x[2] * x[2] + c[7] * x[0] * x[1] + c[8] * x[1] * x[2] + c[9] * x[0] * x[2]
        };
        let v = integrate(&|l| quad(geo.point(l)));
        assert!((v - quad(z)).abs() < 1e-12 * quad(z).abs().max(1.0), "{v} {}", quad(z));
    }
    // a lattice vertex lies on faces of its host tet
    assert!(build_regularized_delta(&s, [0.5, 0.5, 0.5]).is_err());
}
