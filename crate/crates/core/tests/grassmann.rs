use curvbound::forms::random_form;
use curvbound::grassmann::{brute_force_minmax, max_over_planes, minmax_functional, sample_frames, Plane, SearchConfig, Subspace};
use proptest::prelude::*;

fn oracle(seed: u64, n: usize, p: usize) -> impl Fn(&Plane) -> f64 {
    let form = random_form(n, p, seed, 1.0).unwrap();
    move |s: &Plane| form.curvature_plane(s).unwrap()
}

/// A lighter search for properties that call the functional many times.
fn quick() -> SearchConfig {
    SearchConfig { starts: 12, inner_starts: 2, outer_starts: 2, max_iters: 80, outer_min_step: 1e-3, ..SearchConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn larger_subspaces_have_larger_maxima(seed in any::<u64>(), n in 3usize..=5, k_off in 0usize..3, j_off in 0usize..3) {
        let outer_dim = 3 + k_off % (n - 2);
        let inner_dim = 2 + j_off % (outer_dim - 1);
        let outer = Subspace::from_frame(sample_frames(n, outer_dim, 1, seed).remove(0)).unwrap();
        let local = Subspace::from_frame(sample_frames(outer_dim, inner_dim, 1, seed ^ 1).remove(0)).unwrap();
        let inner = outer.embed(&local).unwrap();
        prop_assert!(outer.contains(&inner, 1e-10));
        let f = oracle(seed, n, 2);
        let cfg = SearchConfig::default();
        let (big, _) = max_over_planes(&f, &outer, &cfg).unwrap();
        let (small, _) = max_over_planes(&f, &inner, &cfg).unwrap();
        prop_assert!(big >= small - 1e-6, "{big} < {small}");
    }

    #[test]
    fn functional_is_monotone_in_the_threshold(seed in any::<u64>(), n in 3usize..=4) {
        let f = oracle(seed, n, 1 + (seed % 2) as usize);
        let cfg = quick();
        let values: Vec<f64> = (1..n).map(|d| minmax_functional(&f, n, d, &cfg).unwrap().value).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-6, "{values:?}");
        }
    }

    #[test]
    fn results_carry_valid_witnesses(seed in any::<u64>(), n in 3usize..=4, d_off in 0usize..3) {
        let d = 1 + d_off % (n - 1);
        let f = oracle(seed, n, 2);
        let r = minmax_functional(&f, n, d, &quick()).unwrap();
        prop_assert!(r.check(&f, 1e-9));
        prop_assert_eq!(r.argmin_subspace.dim(), d + 1);
    }
}

#[test]
fn functional_matches_the_grid_oracle() {
    let cfg = SearchConfig::default();
    for seed in 0..100u64 {
        let n = 2 + (seed % 2) as usize;
        let p = 1 + (seed / 2 % 2) as usize;
        let f = oracle(5000 + seed, n, p);
        for d in 1..n {
            let opt = minmax_functional(&f, n, d, &cfg).unwrap().value;
            let grid = brute_force_minmax(&f, n, d, 0.01).unwrap();
            assert!((opt - grid).abs() <= 1e-3, "seed {seed}, n {n}, d {d}: {opt} vs {grid}");
        }
    }
}

#[test]
fn empty_constraint_sets_are_named() {
    let f = oracle(1, 3, 1);
    let err = minmax_functional(&f, 3, 3, &SearchConfig::default()).unwrap_err();
    assert!(matches!(err, curvbound::Error::EmptyConstraintSet { required: 4, available: 3 }), "{err}");
}
