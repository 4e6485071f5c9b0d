use curvbound::immersions::oracle::sectional_curvature_fd;
use curvbound::immersions::ParametricImmersion;
use curvbound::spaces::{
    cb, cb_inverse, hessian_comparison_check_against, hessian_comparison_margin, psi_prime, psi_second, ProductSpace,
    SpaceForm,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn limit(b: f64) -> f64 {
    if b > 0.0 {
        PI / (2.0 * b.sqrt())
    } else {
        4.0
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn psi_second_is_cb_times_psi_prime(b in -3.0f64..3.0, s in 0.01f64..0.99) {
        let t = s * limit(b);
        let lhs = psi_second(b, t).unwrap();
        let rhs = cb(b, t).unwrap() * psi_prime(b, t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn cb_inverse_round_trips(b in -3.0f64..3.0, s in 0.01f64..0.95) {
        let t = s * limit(b);
        let back = cb_inverse(b, cb(b, t).unwrap()).unwrap();
        prop_assert!((back - t).abs() <= 1e-10 * t.max(1.0), "{t} -> {back}");
    }

    #[test]
    fn cb_decreases_in_b(b1 in -3.0f64..3.0, gap in 0.01f64..2.0, s in 0.01f64..0.95) {
        let b2 = b1 + gap;
        let t = s * limit(b2);
        prop_assert!(cb(b1, t).unwrap() > cb(b2, t).unwrap());
    }

    #[test]
    fn larger_comparison_curvature_still_bounds_the_hessian(b in -1.5f64..1.5, gap in 0.0f64..1.0, seed in any::<u64>()) {
        let space = SpaceForm::new(b, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = unit((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let bigger = b + gap;
        let r = rng.random_range(0.05..0.9) * limit(bigger).min(limit(b));
        let x = space.point_at(&omega, r).unwrap();
        let (_, lo, _) = hessian_comparison_margin(&space, x.as_slice(), space.origin().as_slice(), bigger).unwrap();
        prop_assert!(lo >= -1e-9, "{lo}");
    }
}

#[test]
fn cb_is_strictly_decreasing_on_grids() {
    for b in [-4.0, -1.0, -0.1, 0.0, 0.1, 1.0, 4.0] {
        let values: Vec<f64> = (1..2000).map(|i| cb(b, limit(b) * i as f64 / 2000.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "b = {b}");
    }
}

#[test]
fn hessian_equality_holds_in_every_model() {
    for b in [-1.0, 0.0, 1.0] {
        let space = SpaceForm::new(b, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<DVector<f64>> = (0..300)
            .map(|_| {
                let omega = unit((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
                space.point_at(&omega, rng.random_range(0.05..0.95) * limit(b)).unwrap()
            })
            .collect();
        let report = hessian_comparison_check_against(&space, &samples, b, 1e-9);
        assert!(report.skipped.is_empty(), "{:?}", report.skipped);
        assert!(report.equality, "b = {b}: {}", report.max_abs_margin);
        // A smaller comparison curvature is too strong.
        let report = hessian_comparison_check_against(&space, &samples, b - 0.5, 1e-9);
        assert!(!report.holds);
    }
}

/// A chart covering a neighborhood of the origin of a space form, written
/// independently of the library's own parametrizations.
fn chart(space: &SpaceForm, u: &[f64]) -> Vec<f64> {
    let b = space.curvature();
    if b == 0.0 {
        return u.to_vec();
    }
    let n2: f64 = u.iter().map(|x| x * x).sum();
    if b > 0.0 {
        let s = 1.0 / (b.sqrt() * (1.0 + n2).sqrt());
        std::iter::once(s).chain(u.iter().map(|x| s * x)).collect()
    } else {
        std::iter::once((1.0 / -b + n2).sqrt()).chain(u.iter().copied()).collect()
    }
}

#[test]
fn product_curvature_matches_the_metric_oracle() {
    let factors = [(1.0, 2, -1.0, 2), (-1.0, 2, 0.0, 1), (0.5, 1, 2.0, 2), (-2.0, 3, 0.0, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (bp, p, bq, q) in factors {
        let (sp, sq) = (SpaceForm::new(bp, p).unwrap(), SpaceForm::new(bq, q).unwrap());
        let n = ProductSpace::standard(sp, sq);
        let map = Arc::new(move |x: &[f64]| {
            DVector::from_vec(chart(&sp, &x[..p]).into_iter().chain(chart(&sq, &x[p..])).collect())
        });
        let f = ParametricImmersion::new("chart", vec![-0.5; p + q], vec![0.5; p + q], n.clone(), map.clone()).unwrap();
        for _ in 0..25 {
            let x: Vec<f64> = (0..p + q).map(|_| rng.random_range(-0.4..0.4)).collect();
            let u: Vec<f64> = (0..p + q).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..p + q).map(|_| rng.random_range(-1.0..1.0)).collect();
            let push = |w: &[f64]| {
                let h = 1e-6;
                let plus: Vec<f64> = x.iter().zip(w).map(|(a, d)| a + h * d).collect();
                let minus: Vec<f64> = x.iter().zip(w).map(|(a, d)| a - h * d).collect();
                (map(&plus) - map(&minus)) / (2.0 * h)
            };
            let point = map(&x);
            let analytic = n.sectional_curvature(point.as_slice(), push(&u).as_slice(), push(&v).as_slice()).unwrap();
            let fd = sectional_curvature_fd(&f, &x, &u, &v, 5e-3).unwrap();
            assert!((analytic - fd).abs() < 1e-3, "P({bp},{p}) × Q({bq},{q}): {analytic} vs {fd}");
        }
        // Planes inside one factor see that factor; mixed planes see nothing.
        let point = map(&vec![0.0; p + q]);
        let e = |i: usize| DVector::from_fn(n.coord_dim(), |j, _| f64::from(u8::from(j == i)));
        let (cp, cq) = (sp.coord_dim(), sq.coord_dim());
        let first_p = usize::from(bp != 0.0);
        let first_q = cp + usize::from(bq != 0.0);
        if p >= 2 {
            let k = n.sectional_curvature(point.as_slice(), e(first_p).as_slice(), e(first_p + 1).as_slice()).unwrap();
            assert!((k - bp).abs() < 1e-12);
        }
        if q >= 2 {
            let k = n.sectional_curvature(point.as_slice(), e(first_q).as_slice(), e(first_q + 1).as_slice()).unwrap();
            assert!((k - bq).abs() < 1e-12);
        }
        if q >= 1 && cq > 0 {
            let k = n.sectional_curvature(point.as_slice(), e(first_p).as_slice(), e(first_q).as_slice()).unwrap();
            assert!(k.abs() < 1e-12);
        }
    }
}

#[test]
fn out_of_range_arguments_are_rejected() {
    assert!(cb(1.0, PI / 2.0).is_err());
    assert!(cb(-1.0, 0.0).is_err());
    assert!(cb_inverse(-1.0, 0.5).is_err());
    assert!(cb_inverse(0.0, -1.0).is_err());
}
