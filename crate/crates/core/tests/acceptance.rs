//! The nine acceptance criteria, run in order at their stated tolerances.
//! Each prints one `PASS`/`FAIL` line; the test fails if any criterion does.

use curvbound::forms::{max_plane_curvature, otsuki_search, random_form};
use curvbound::grassmann::{plane_grid, Plane, SearchConfig, Subspace};
use curvbound::harness::{self, CatalogRef, Experiment, ExperimentConfig, ExperimentReport};
use curvbound::immersions::oracle::{field_jet, radial_field_jet};
use curvbound::immersions::{catalog, point_minmax, sample_chart, CurvatureKind, ParametricImmersion};
use curvbound::principles::{
    decay_condition_check, growth_condition_check, truncate, DecayFunction, GrowthFunction, Profile,
};
use curvbound::spaces::{cb, cb_inverse, hessian_comparison_margin, psi_prime, psi_second, SpaceForm};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn failed_checks(r: &ExperimentReport) -> String {
    r.failed_checks().iter().map(|c| format!("{} (margin {:e})", c.name, c.margin.value)).collect::<Vec<_>>().join(", ")
}

fn computed(r: &ExperimentReport, name: &str) -> Result<f64, String> {
    r.check(name).map(|c| c.computed.value).ok_or_else(|| format!("report has no `{name}` check"))
}

fn sharpness_reproduction() -> Outcome {
    let mut lines = Vec::new();
    for (b, r, m, l) in [(0.0, 2.0, 3, 0), (0.0, 2.0, 3, 1), (1.0, PI / 4.0, 3, 0), (-1.0, 1.0, 4, 1)] {
        let cfg = ExperimentConfig { b, r: Some(r), m, l, budget: 1000, ..ExperimentConfig::new(Experiment::Sharpness) };
        let start = Instant::now();
        let report = harness::sharpness(&cfg).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let c2 = cb(b, r).unwrap().powi(2);
        let ext = computed(&report, "extrinsic_equality")?;
        let int = computed(&report, "intrinsic_equality")?;
        ensure((ext - c2).abs() <= 0.01 * c2, || format!("({b},{r},{m},{l}): extrinsic {ext} vs {c2}"))?;
        ensure((int - (c2 + b)).abs() <= 0.01 * (c2 + b).abs(), || {
            format!("({b},{r},{m},{l}): intrinsic {int} vs {}", c2 + b)
        })?;
        ensure(report.passed, || format!("({b},{r},{m},{l}): {}", failed_checks(&report)))?;
        ensure(elapsed < Duration::from_secs(120), || format!("({b},{r},{m},{l}) took {elapsed:?}"))?;
        lines.push(format!("({b},{r:.4},{m},{l}) ext {ext:.6} int {int:.6} in {:.1}s", elapsed.as_secs_f64()));
    }
    Ok(lines.join("; "))
}

fn flat_cylinder_counterexample() -> Outcome {
    let base = ExperimentConfig {
        catalog: Some(CatalogRef { name: "flat_cylinder".into(), params: json!({"R": 1.0}) }),
        ..ExperimentConfig::new(Experiment::Sharpness)
    };
    let refused = matches!(harness::sharpness(&base), Err(curvbound::Error::Hypothesis(_)));
    ensure(refused, || "flat_cylinder ran without the override".into())?;
    let report =
        harness::sharpness(&ExperimentConfig { override_codimension: true, ..base }).map_err(|e| e.to_string())?;
    let check = report.check("counterexample_gap").ok_or("no counterexample_gap check")?;
    let sup = check.computed.value;
    ensure(sup.abs() <= 1e-8, || format!("sup K_f = {sup}"))?;
    ensure((check.bound.value - 1.0).abs() < 1e-12 && check.pass, || format!("bound {} pass {}", check.bound.value, check.pass))?;
    Ok(format!("refused without override; sup K_f = {sup:e} < C_0²(1) = 1"))
}

fn clifford_sharpness() -> Outcome {
    let f = catalog("clifford_torus", &json!({"n": 2})).map_err(|e| e.to_string())?;
    let dims = f.dims();
    ensure(dims.p == 1 && dims.m == 2 && dims.p + 1 == dims.m, || format!("{dims:?}"))?;
    let sigma = Plane::coordinate(2, 0, 1).unwrap();
    let mut worst_ext: f64 = 0.0;
    let mut worst_int: f64 = 0.0;
    let cfg = SearchConfig::default();
    for x in sample_chart(&f, 100, 11) {
        let ext = f.extrinsic_curvature(&x, &sigma).map_err(|e| e.to_string())?;
        let int = f.intrinsic_curvature(&x, &sigma).map_err(|e| e.to_string())?;
        let mm = point_minmax(&f, &x, 1, &cfg, CurvatureKind::Extrinsic).map_err(|e| e.to_string())?;
        worst_ext = worst_ext.max((ext + 1.0).abs()).max((mm.value + 1.0).abs());
        worst_int = worst_int.max(int.abs());
    }
    ensure(worst_ext <= 1e-5, || format!("max |K_f + 1| = {worst_ext}"))?;
    ensure(worst_int <= 1e-4, || format!("max |K_M| = {worst_int}"))?;
    Ok(format!("max |K_f + 1| = {worst_ext:.1e}, max |K_M| = {worst_int:.1e}, p = 1 = d − 1"))
}

/// Largest plane curvature over a grid of `G_2(R^3)`; the oracle for the
/// optimizer on three-dimensional forms.
fn grid_max(form: &curvbound::forms::BilinearForm, grid: &[DMatrix<f64>]) -> f64 {
    grid.iter()
        .map(|u| form.curvature_plane(&Plane::new(&u.column(0).into_owned(), &u.column(1).into_owned()).unwrap()).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn otsuki_suite() -> Outcome {
    let start = Instant::now();
    let cfg = SearchConfig::default();
    let mut reports = 0;
    for n in 2..=5 {
        for p in 1..n {
            for s in 0..1000u64 {
                let form = random_form(n, p, 1000 * (10 * n + p) as u64 + s, 1.0).unwrap();
                let search = otsuki_search(&form, &cfg).map_err(|e| e.to_string())?;
                for lambda in [0.0, 1.0] {
                    let r = search.report(lambda, 1e-9).map_err(|e| e.to_string())?;
                    ensure(r.consistent, || format!("inconsistent report n={n} p={p} seed={s} λ={lambda}: {r:?}"))?;
                    reports += 1;
                }
            }
        }
    }
    let grid = plane_grid(3, 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..200u64 {
        let p = 1 + (s % 2) as usize;
        let form = random_form(3, p, 77_000 + s, 1.0).unwrap();
        let (opt, _) = max_plane_curvature(&form, &Subspace::full(3), &cfg).map_err(|e| e.to_string())?;
        let oracle = grid_max(&form, &grid);
        worst = worst.max((opt - oracle).abs());
    }
    ensure(worst <= 1e-3, || format!("optimizer-grid gap {worst}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{reports} consistent reports; grid gap ≤ {worst:.1e} on 200 forms; {:.0}s", elapsed.as_secs_f64()))
}

fn comparison_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_psi: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for _ in 0..1000 {
        let b: f64 = rng.random_range(-2.0..2.0);
        let limit = if b > 0.0 { PI / (2.0 * b.sqrt()) } else { 3.0 };
        let t = rng.random_range(0.01..0.99) * limit;
        let lhs = psi_second(b, t).unwrap();
        let rhs = cb(b, t).unwrap() * psi_prime(b, t).unwrap();
        worst_psi = worst_psi.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        let back = cb_inverse(b, cb(b, t).unwrap()).unwrap();
        worst_round = worst_round.max((back - t).abs());
    }
    ensure(worst_psi <= 1e-10, || format!("ψ'' − C_bψ' = {worst_psi}"))?;
    ensure(worst_round <= 1e-10, || format!("cb round trip {worst_round}"))?;
    let mut worst_hess: f64 = 0.0;
    for (i, b) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let space = SpaceForm::new(b, 3).unwrap();
        let o = space.origin();
        let limit = if b > 0.0 { PI / (2.0 * b.sqrt()) } else { 3.0 };
        for _ in 0..(1000 / 3 + usize::from(i == 0)) {
            let omega: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = omega.iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega: Vec<f64> = omega.iter().map(|v| v / norm).collect();
            let r = rng.random_range(0.05..0.95) * limit;
            let x = space.point_at(&omega, r).unwrap();
            let (_, lo, hi) = hessian_comparison_margin(&space, x.as_slice(), o.as_slice(), b).unwrap();
            worst_hess = worst_hess.max(lo.abs()).max(hi.abs());
        }
    }
    ensure(worst_hess < 1e-9, || format!("space-form Hessian margin {worst_hess}"))?;
    Ok(format!("ψ'' − C_bψ' ≤ {worst_psi:.1e}, round trip ≤ {worst_round:.1e}, Hessian margin ≤ {worst_hess:.1e}"))
}

fn orthonormal_chart_laplacian(f: &ParametricImmersion, x: &[f64], b: f64) -> Result<f64, String> {
    let c = f.fundamental_forms(x).map_err(|e| e.to_string())?.chart_to_frame;
    let (x0, ct, g) = (DVector::from_column_slice(x), c.transpose(), f.clone());
    let map = Arc::new(move |u: &[f64]| g.evaluate((&x0 + &ct * DVector::from_column_slice(u)).as_slice()).expect("inside the chart"));
    let m = x.len();
    let local = ParametricImmersion::new("local", vec![-0.05; m], vec![0.05; m], f.ambient().clone(), map)
        .map_err(|e| e.to_string())?;
    let height = |u: &[f64]| -> curvbound::Result<f64> {
        let y = local.evaluate(u)?;
        Ok(local.ambient().modified_radial_height(b, y.as_slice())?.h)
    };
    Ok(field_jet(&local, &height, &vec![0.0; m], f.fd().h2, 1e-4).map_err(|e| e.to_string())?.laplacian())
}

fn composition_cross_check() -> Outcome {
    let entries = [
        ("geodesic_sphere_cylinder", json!({"b": 0.0, "m": 3, "R": 2.0, "l": 1})),
        ("round_sphere", json!({"R": 2.0, "m": 2})),
        ("geodesic_sphere_cylinder", json!({"b": -1.0, "m": 3, "R": 1.0, "l": 0})),
        ("geodesic_sphere_cylinder", json!({"b": 1.0, "m": 3, "R": 0.7, "l": 1})),
    ];
    let mut worst_fd: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for (name, params) in &entries {
        let f = catalog(name, params).map_err(|e| e.to_string())?;
        let f = if f.axial_coords().is_empty() { f } else { truncate(&f, 3.0).map_err(|e| e.to_string())? };
        let b = f.ambient().factor_p().curvature();
        for x in sample_chart(&f, 100, 21) {
            let pull = f.pullback_radial(&x, b).map_err(|e| e.to_string())?;
            let jet = radial_field_jet(&f, &x, b).map_err(|e| e.to_string())?;
            worst_fd = worst_fd.max((&pull.hess_chart - &jet.hessian).abs().max());
            // Δg = Σ Hess^N h(e_i, e_i) + m ⟨grad h, H⟩. The left side comes
            // from differences in the chart u ↦ x + Cᵀu, which is orthonormal
            // at u = 0, so polar coordinate singularities are not amplified.
            let laplacian = orthonormal_chart_laplacian(&f, &x, b)?;
            let trace = (laplacian - pull.ambient_trace - pull.mean_curvature_term).abs();
            worst_trace = worst_trace.max(trace);
        }
    }
    ensure(worst_fd <= 1e-5, || format!("assembled vs finite-difference Hessian {worst_fd}"))?;
    ensure(worst_trace <= 1e-6, || format!("trace identity {worst_trace}"))?;
    Ok(format!("Hessian gap ≤ {worst_fd:.1e}, trace identity ≤ {worst_trace:.1e} on 4 entries × 100 points"))
}

fn proof_chains() -> Outcome {
    let cfg = ExperimentConfig { b: 0.0, r: Some(2.0), m: 3, l: 1, k_max: 10, ..ExperimentConfig::new(Experiment::Chain) };
    let (chain, record) = harness::chain(&cfg).map_err(|e| e.to_string())?;
    ensure(chain.passed, || format!("chain: {}", failed_checks(&chain)))?;
    let ks: Vec<usize> = record.steps.iter().map(|s| s.k).collect();
    ensure(ks == (1..=10).collect::<Vec<_>>(), || format!("chain terms {ks:?}"))?;
    let e = record.fit_exponent.ok_or("no fit exponent")?;
    ensure((0.8..=1.2).contains(&e), || format!("fit exponent {e}"))?;
    let cfg = ExperimentConfig {
        growth: vec![Profile::constant(1.0), Profile::Power { c: 1.0, shift: 1.0, exponent: 1.0 }],
        ..ExperimentConfig { experiment: Experiment::Penalized, ..cfg }
    };
    let (pen, records) = harness::penalized(&cfg).map_err(|e| e.to_string())?;
    ensure(pen.passed, || format!("penalized: {}", failed_checks(&pen)))?;
    for rec in &records {
        ensure(rec.sequence.entries.len() == 10, || format!("{}: {} terms", rec.growth, rec.sequence.entries.len()))?;
    }
    let identities = pen.checks.iter().filter(|c| c.name.starts_with("gradient_identity")).count();
    let squared = pen.checks.iter().filter(|c| c.name.contains("squared")).count();
    ensure(identities == 20 && squared > 0, || format!("{identities} gradient identities, {squared} squared checks"))?;
    Ok(format!(
        "chain {} checks, penalized {} checks, all margins ≥ −tol; fit exponent {e:.3}",
        chain.checks.len(),
        pen.checks.len()
    ))
}

fn radius_bounds() -> Outcome {
    let mut lines = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let cfg = ExperimentConfig {
            catalog: Some(CatalogRef { name: "round_sphere".into(), params: json!({"R": r, "m": 2}) }),
            budget: 300,
            ..ExperimentConfig::new(Experiment::Radius)
        };
        let report = harness::radius(&cfg).map_err(|e| e.to_string())?;
        let bound = report.check("radius_equality").ok_or("no radius_equality check")?.bound.value;
        ensure((bound - r).abs() <= 0.01 * r && report.passed, || format!("R = {r}: bound {bound}; {}", failed_checks(&report)))?;
        lines.push(format!("R={r}: C_0⁻¹ = {bound:.6}"));
    }
    let cfg = ExperimentConfig { b: -1.0, r: Some(1.0), m: 3, l: 0, budget: 300, ..ExperimentConfig::new(Experiment::Radius) };
    let report = harness::radius(&cfg).map_err(|e| e.to_string())?;
    let bound = report.check("radius_equality").ok_or("no radius_equality check")?.bound.value;
    ensure((bound - 1.0).abs() <= 0.01 && report.passed, || format!("hyperbolic sphere bound {bound}"))?;
    lines.push(format!("b=−1 R=1: {bound:.6}"));
    let synthetic = ExperimentConfig { synthetic_curvature: Some(0.5), ..cfg };
    let report = harness::radius(&synthetic).map_err(|e| e.to_string())?;
    ensure(report.branch.as_deref() == Some("cylindrically-unbounded") && report.passed, || format!("branch {:?}", report.branch))?;
    lines.push("synthetic 0.5 with b = −1: cylindrically unbounded".into());
    Ok(lines.join("; "))
}

fn hypothesis_checkers() -> Outcome {
    let t_max = 1e60;
    for a in [1.0, 2.0, 3.0] {
        for j in 1..=3 {
            let r = decay_condition_check(&DecayFunction::log_family(a, j).unwrap(), t_max).map_err(|e| e.to_string())?;
            ensure(r.passed, || format!("F(A={a}, J={j}) failed: {r:?}"))?;
        }
    }
    let quartic = DecayFunction::new(Profile::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 0.0, 1.0] }).unwrap();
    let r = decay_condition_check(&quartic, t_max).map_err(|e| e.to_string())?;
    ensure(!r.passed, || "t⁴ passed the decay check".into())?;
    let shifted_quartic = DecayFunction::new(Profile::Power { c: 1.0, shift: 1.0, exponent: 4.0 }).unwrap();
    let r4 = decay_condition_check(&shifted_quartic, t_max).map_err(|e| e.to_string())?;
    ensure(!r4.passed && r4.positive_at_zero, || "(1+t)⁴ failed for the wrong reason".into())?;
    let linear = growth_condition_check(&GrowthFunction::power(1.0, 1.0).unwrap(), t_max).map_err(|e| e.to_string())?;
    ensure(linear.first_theorem_ok && linear.second_theorem_ok, || format!("1+t: {linear:?}"))?;
    let square = growth_condition_check(&GrowthFunction::power(1.0, 2.0).unwrap(), t_max).map_err(|e| e.to_string())?;
    ensure(!square.first_theorem_ok, || format!("(1+t)²: {square:?}"))?;
    Ok("F family passes for A, J ∈ {1,2,3}; t⁴ fails; 1+t passes both; (1+t)² fails the integral".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 sharpness reproduction", sharpness_reproduction),
        ("2 flat-cylinder counterexample", flat_cylinder_counterexample),
        ("3 Clifford sharpness", clifford_sharpness),
        ("4 Otsuki property suite", otsuki_suite),
        ("5 comparison identities", comparison_identities),
        ("6 composition cross-check", composition_cross_check),
        ("7 proof-chain verification", proof_chains),
        ("8 radius bounds", radius_bounds),
        ("9 hypothesis checkers", hypothesis_checkers),
    ];
    let mut failures = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}: {detail}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
