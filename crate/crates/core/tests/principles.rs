use curvbound::immersions::{catalog, ParametricImmersion};
use curvbound::principles::sequence::estimate_sup;
use curvbound::principles::{
    decay_condition_check, growth_condition_check, penalized_sequence, strong_hessian_sequence, weak_hessian_sequence,
    ChartField, DecayFunction, GrowthFunction, ModifiedRadial, PenalizedOptions, Profile, SequenceOptions,
};
use proptest::prelude::*;
use serde_json::json;

fn cylinder() -> ParametricImmersion {
    catalog("geodesic_sphere_cylinder", &json!({"b": 0.0, "m": 3, "R": 2.0, "l": 1})).unwrap()
}

fn opts(truncation: f64) -> SequenceOptions {
    SequenceOptions { samples: 400, truncation: Some(truncation), ..SequenceOptions::default() }
}

#[test]
fn weak_and_strong_records_survive_reverification() {
    let f = cylinder();
    let radial = ModifiedRadial { b: 0.0 };
    // A field with interior critical points: cos θ₁ plus a bump in z.
    let bumpy = ChartField::new("cos(θ₁) − z²/4", |x: &[f64]| x[0].cos() - 0.25 * x[2] * x[2]);
    for rec in [
        weak_hessian_sequence(&f, &radial, &opts(3.0)).unwrap(),
        strong_hessian_sequence(&f, &radial, &opts(3.0)).unwrap(),
        weak_hessian_sequence(&f, &bumpy, &opts(2.0)).unwrap(),
        strong_hessian_sequence(&f, &bumpy, &opts(2.0)).unwrap(),
    ] {
        assert!(rec.all_found(), "{}: {:?}", rec.field, rec.entries);
        let field: &dyn curvbound::principles::ScalarField = if rec.field.starts_with("modified") { &radial } else { &bumpy };
        let ok = rec.verify(&f, field, 1e-5).unwrap();
        assert!(ok.iter().all(|&b| b), "{} {:?}: {ok:?}", rec.field, rec.mode);
        let lines = rec.to_json_lines().unwrap();
        assert_eq!(lines.lines().count(), rec.entries.len());
    }
}

#[test]
fn penalized_maximizers_satisfy_the_gradient_identity() {
    let f = cylinder();
    // With x₀ at the peak of g, g − g(x₀) + 1 is positive only for
    // z ∈ (π/6, 5π/6), so every maximizer is interior and off the pole of Q.
    let field = ChartField::new("sin z (1 + cos φ)", |x: &[f64]| x[2].sin() * (1.0 + x[1].cos()));
    for growth in [GrowthFunction::constant(1.0).unwrap(), GrowthFunction::power(1.0, 1.0).unwrap()] {
        let (growth, report) = growth.checked(1e60).unwrap();
        assert!(report.first_theorem_ok);
        let opts = PenalizedOptions {
            k_max: 6,
            samples: 400,
            refine_starts: 5,
            seed: 3,
            truncation: 3.0,
            x0: vec![1.0, 0.0, std::f64::consts::FRAC_PI_2],
            tol: 1e-6,
        };
        let rec = penalized_sequence(&f, &field, &growth, &opts).unwrap();
        assert_eq!(rec.entries.len(), 6);
        for e in &rec.entries {
            let rel = e.gradient_residual / e.gradient_scale.max(1e-8);
            assert!(rel <= 1e-5, "k = {}: residual {}", e.k, rel);
            assert!(e.gradient_identity_holds && !e.boundary_hit);
            assert!(e.axial_distance > 0.5 && e.axial_distance < 2.7, "{}", e.axial_distance);
        }
    }
}

#[test]
fn penalization_refuses_compact_targets_and_convergent_growth() {
    let sphere = catalog("round_sphere", &json!({"R": 1.0, "m": 2})).unwrap();
    let field = ModifiedRadial { b: 0.0 };
    let opts = PenalizedOptions { k_max: 2, samples: 16, refine_starts: 1, seed: 0, truncation: 1.0, x0: vec![1.0, 0.0], tol: 1e-6 };
    assert!(penalized_sequence(&sphere, &field, &GrowthFunction::constant(1.0).unwrap(), &opts).is_err());
    let (steep, _) = GrowthFunction::power(1.0, 2.0).unwrap().checked(1e60).unwrap();
    assert_eq!(steep.integral_diverges, Some(false));
    let opts = PenalizedOptions { x0: vec![1.0, 0.0, 0.0], ..opts };
    assert!(penalized_sequence(&cylinder(), &field, &steep, &opts).is_err());
}

#[test]
fn larger_truncations_never_lower_the_supremum() {
    let f = cylinder();
    let field = ChartField::new("tanh z + sin θ₁/10", |x: &[f64]| x[2].tanh() + 0.1 * x[0].sin());
    let mut last = f64::NEG_INFINITY;
    for t in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let g = curvbound::principles::truncate(&f, t).unwrap();
        let sup = estimate_sup(&g, &field, &SequenceOptions { samples: 256, ..SequenceOptions::default() }, &[]).unwrap()[0].1;
        assert!(sup >= last - 1e-12, "t = {t}: {sup} < {last}");
        last = sup;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn the_decay_family_passes(a in 0.1f64..10.0, j in 1usize..=3) {
        let r = decay_condition_check(&DecayFunction::log_family(a, j).unwrap(), 1e60).unwrap();
        prop_assert!(r.passed, "{r:?}");
    }

    #[test]
    fn decay_faster_than_quadratic_fails(eps in 0.05f64..2.0, c in 0.1f64..10.0) {
        let f = DecayFunction::new(Profile::Power { c, shift: 1.0, exponent: 2.0 + eps }).unwrap();
        let r = decay_condition_check(&f, 1e60).unwrap();
        prop_assert!(!r.passed);
        prop_assert!(r.positive_at_zero && r.nondecreasing);
    }

    #[test]
    fn sublinear_growth_passes_both_conditions(c in 0.1f64..10.0, e in 0.0f64..1.0) {
        let r = growth_condition_check(&GrowthFunction::power(c, e).unwrap(), 1e60).unwrap();
        prop_assert!(r.first_theorem_ok && r.second_theorem_ok, "{r:?}");
    }

    #[test]
    fn superlinear_growth_fails_the_integral(c in 0.1f64..10.0, e in 1.05f64..4.0) {
        let r = growth_condition_check(&GrowthFunction::power(c, e).unwrap(), 1e60).unwrap();
        prop_assert!(!r.first_theorem_ok);
    }
}
