use curvbound::grassmann::{sample_frames, Plane, SearchConfig, Subspace};
use curvbound::immersions::oracle::{radial_field_jet, sectional_curvature_fd};
use curvbound::immersions::{
    catalog, point_minmax, sample_chart, scan_minmax, CurvatureKind, ParametricImmersion, PointFrameData,
};
use curvbound::principles::truncate;
use curvbound::spaces::cb;
use curvbound::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::sync::Arc;

fn entries() -> Vec<(&'static str, Value)> {
    vec![
        ("geodesic_sphere_cylinder", json!({"b": 0.0, "m": 3, "R": 2.0, "l": 1})),
        ("geodesic_sphere_cylinder", json!({"b": -1.0, "m": 3, "R": 1.0, "l": 0})),
        ("geodesic_sphere_cylinder", json!({"b": 1.0, "m": 3, "R": 0.7, "l": 1})),
        ("round_sphere", json!({"R": 1.5, "m": 2})),
        ("clifford_torus", json!({"n": 2})),
        ("flat_cylinder", json!({"R": 1.0})),
    ]
}

fn load(name: &str, params: &Value) -> ParametricImmersion {
    let f = catalog(name, params).unwrap();
    if f.axial_coords().is_empty() {
        f
    } else {
        truncate(&f, 3.0).unwrap()
    }
}

/// `u ↦ f(x + Cᵀu)`: orthonormal at `u = 0`, so frame components are chart
/// components and polar singularities of the original chart stay away.
fn local_chart(f: &ParametricImmersion, data: &PointFrameData) -> ParametricImmersion {
    let m = f.dims().m;
    let (x, c) = (DVector::from_column_slice(&data.chart_point), data.chart_to_frame.transpose());
    let g = f.clone();
    let map = Arc::new(move |u: &[f64]| g.evaluate((&x + &c * DVector::from_column_slice(u)).as_slice()).unwrap());
    ParametricImmersion::new("local", vec![-0.05; m], vec![0.05; m], f.ambient().clone(), map).unwrap()
}

#[test]
fn gauss_equation_is_consistent_with_the_metric() {
    for (name, params) in entries() {
        let f = load(name, &params);
        let m = f.dims().m;
        if m < 2 {
            continue;
        }
        let frames = sample_frames(m, 2, 100, 3);
        for (x, frame) in sample_chart(&f, 100, 8).iter().zip(frames) {
            let data = f.fundamental_forms(x).unwrap();
            let sigma = Plane::from_subspace(Subspace::from_frame(frame).unwrap()).unwrap();
            let intrinsic = data.intrinsic_curvature(f.ambient(), &sigma).unwrap();
            let split = data.extrinsic_curvature(&sigma).unwrap() + data.ambient_curvature(f.ambient(), &sigma).unwrap();
            assert!((intrinsic - split).abs() < 1e-6, "{name}: {intrinsic} vs {split}");
            let local = local_chart(&f, &data);
            let (u, v) = (sigma.first(), sigma.second());
            let fd = sectional_curvature_fd(&local, &vec![0.0; m], u.as_slice(), v.as_slice(), 1e-3).unwrap();
            assert!((intrinsic - fd).abs() < 1e-3, "{name} at {x:?}: {intrinsic} vs {fd}");
        }
    }
}

#[test]
fn assembled_hessian_matches_chart_differences() {
    for (name, params) in entries() {
        let f = load(name, &params);
        let b = f.ambient().factor_p().curvature();
        let tol = 1e-6f64.max(10.0 * f.fd().h2.powi(2));
        for x in sample_chart(&f, 100, 13) {
            // The modified radial function is only defined inside the hemisphere.
            let Ok(pull) = f.pullback_radial(&x, b) else {
                assert_eq!(name, "clifford_torus");
                continue;
            };
            let jet = radial_field_jet(&f, &x, b).unwrap();
            let gap = (&pull.hess_chart - &jet.hessian).abs().max();
            assert!(gap <= tol, "{name} at {x:?}: {gap}");
        }
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

#[test]
fn curvatures_do_not_depend_on_the_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (name, params) in entries() {
        let f = load(name, &params);
        let (m, codim) = (f.dims().m, f.dims().p);
        for x in sample_chart(&f, 20, 2) {
            let data = f.fundamental_forms(&x).unwrap();
            let (rt, rn) = (random_orthogonal(m, &mut rng), random_orthogonal(codim, &mut rng));
            let turned = data.reframed(&rt, &rn).unwrap();
            // The same ambient plane, expressed in either frame.
            let u = DVector::from_fn(m, |i, _| rng.random_range(-1.0..1.0) + f64::from(u8::from(i == 0)));
            let v = DVector::from_fn(m, |i, _| rng.random_range(-1.0..1.0) + f64::from(u8::from(i == 1)));
            let sigma = Plane::new(&u, &v).unwrap();
            let sigma_t = Plane::new(&(rt.transpose() * &u), &(rt.transpose() * &v)).unwrap();
            let a = data.intrinsic_curvature(f.ambient(), &sigma).unwrap();
            let c = turned.intrinsic_curvature(f.ambient(), &sigma_t).unwrap();
            assert!((a - c).abs() < 1e-9, "{name}: {a} vs {c}");
            let a = data.extrinsic_curvature(&sigma).unwrap();
            let c = turned.extrinsic_curvature(&sigma_t).unwrap();
            assert!((a - c).abs() < 1e-9, "{name}: {a} vs {c}");
            assert!((data.mean_curvature.norm() - turned.mean_curvature.norm()).abs() < 1e-9);
            assert!(turned.frame_defect(f.ambient()) < 1e-9);
        }
    }
}

#[test]
fn geodesic_spheres_are_umbilic() {
    let cases = [(0.0, 3, 1.5), (0.0, 4, 0.5), (-1.0, 3, 1.0), (1.0, 3, 0.7)];
    for (b, m, r) in cases {
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": b, "m": m, "R": r, "l": 0})).unwrap();
        let c = cb(b, r).unwrap();
        let o = f.ambient().basepoint().clone();
        for x in sample_chart(&f, 100, 6) {
            let data = f.fundamental_forms(&x).unwrap();
            let y = data.ambient_point.as_slice();
            // Inward unit normal: −grad r, from the ambient distance alone.
            let inward = -f.ambient().factor_p().distance_and_derivatives(y, o.as_slice()).unwrap().grad;
            let alpha = &data.second_fundamental_form;
            let k = m - 1;
            for i in 0..k {
                for j in 0..k {
                    let lifted = alpha.matrices().iter().enumerate().fold(DVector::zeros(y.len()), |acc, (n, a)| {
                        acc + data.normal_frame.column(n) * a[(i, j)]
                    });
                    let expected = &inward * (c * f64::from(u8::from(i == j)));
                    assert!((lifted - expected).amax() < 1e-6, "b = {b}, R = {r}");
                }
            }
        }
    }
}

#[test]
fn thresholds_above_the_dimension_are_refused() {
    let f = catalog("round_sphere", &json!({"R": 1.0, "m": 2})).unwrap();
    let samples = sample_chart(&f, 4, 0);
    let err = scan_minmax(&f, &samples, 2, &SearchConfig::default(), CurvatureKind::Extrinsic).unwrap_err();
    assert!(matches!(err, Error::EmptyConstraintSet { required: 3, available: 2 }), "{err}");
    let err = point_minmax(&f, &samples[0], 5, &SearchConfig::default(), CurvatureKind::Intrinsic).unwrap_err();
    assert!(matches!(err, Error::EmptyConstraintSet { .. }));
}

#[test]
fn round_sphere_scan_finds_the_constant_value() {
    let f = catalog("round_sphere", &json!({"R": 2.0, "m": 3})).unwrap();
    let samples = sample_chart(&f, 10, 1);
    for kind in [CurvatureKind::Extrinsic, CurvatureKind::Intrinsic] {
        let scan = scan_minmax(&f, &samples, 1, &SearchConfig::default(), kind).unwrap();
        assert!((scan.sup_value - 0.25).abs() < 1e-6, "{kind:?}: {}", scan.sup_value);
        assert_eq!(scan.per_point.len(), 10);
    }
}
