use super::{
    validate_radius, Check, ExperimentConfig, ExperimentReport, Hypothesis, HypothesisStatus, Provenance, Quantity,
    Relation, Table,
};
use crate::error::{Error, Result};
use crate::forms::{max_plane_curvature, min_diagonal_norm, BilinearForm};
use crate::grassmann::{max_over_planes, Plane, SearchConfig, Subspace};
use crate::immersions::{
    point_minmax, refine_sup, sample_chart, scan_minmax, CurvatureKind, Dims, ParametricImmersion, PointFrameData,
};
use crate::principles::sequence::{estimate_sup, p_tangent_subspace};
use crate::principles::{
    decay_condition_check, penalized_sequence, truncate, weak_hessian_sequence,
    DecayFunction, GrowthFunction, ModifiedRadial, PenalizedOptions, PenalizedRecord, SequenceOptions,
    SequenceRecord,
};
use crate::spaces::{cb, cb_inverse, hessian_comparison_margin, psi, ProductSpace, SpaceForm};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use Provenance::{Computed, DerivedOracle, PaperBound};

/// Horizon used by the growth and decay checkers.
const HYPOTHESIS_T_MAX: f64 = 1e60;
/// Unit vectors sampled in `V_k` for the pointwise chain inequalities.
const CHAIN_DIRECTIONS: usize = 256;

/// The entry with the facts every experiment needs.
struct Prepared {
    /// The entry, truncated along its axial coordinates.
    f: ParametricImmersion,
    dims: Dims,
    /// Curvature of the space form `P`, which is also `inf_{B_P[R]} K_P`.
    b: f64,
    /// Ball radius used in the bounds.
    r: f64,
    /// Known or sampled `sup r`.
    r_f: f64,
    r_f_provenance: Provenance,
    /// Axial truncation radius, when the entry has axial coordinates.
    truncation: Option<f64>,
}

fn prepare(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<Prepared> {
    let b_cfg = cfg.b;
    if cfg.catalog.is_none() {
        let r = cfg.r.unwrap_or(super::DEFAULT_RADIUS);
        validate_radius(b_cfg, r, &SpaceForm::new(b_cfg, cfg.m.max(1))?)?;
    }
    let f = cfg.immersion()?;
    let dims = f.dims();
    let b = f.ambient().factor_p().curvature();
    if cfg.catalog.is_some() && b != b_cfg {
        report.notes.push(format!("b = {b} is taken from the entry's factor P"));
    }
    let truncation = if f.axial_coords().is_empty() { None } else { Some(cfg.truncation) };
    let ft = match truncation {
        Some(t) => truncate(&f, t)?,
        None => f.clone(),
    };
    let (r_f, r_f_provenance) = match f.info().extrinsic_radius {
        Some(r) => (r, DerivedOracle),
        None => {
            let samples = sample_chart(&ft, cfg.budget.max(1), cfg.seed ^ 0x7ad1);
            let mut worst: f64 = 0.0;
            for x in &samples {
                let y = ft.evaluate(x)?;
                worst = worst.max(ft.ambient().radial_distance(y.as_slice())?);
            }
            report.notes.push(format!("sup r = {worst} is sampled over {} chart points", samples.len()));
            (worst, Computed)
        }
    };
    let r = cfg.r.filter(|_| cfg.catalog.is_some()).unwrap_or(r_f);
    if r + 1e-12 < r_f {
        return Err(Error::Hypothesis(format!("f(M) ⊂ B_P[R] × Q fails: R = {r} < sup r = {r_f}")));
    }
    validate_radius(b, r, f.ambient().factor_p())?;
    report.hypotheses.push(Hypothesis {
        name: "0 < R < min{inj_P(o), π/(2√b)}".into(),
        status: HypothesisStatus::Verified,
        detail: format!("R = {r}, b = {b}"),
    });
    report.hypotheses.push(Hypothesis {
        name: "f(M) ⊂ B_P[R] × Q".into(),
        status: if r_f_provenance == Computed { HypothesisStatus::Sampled } else { HypothesisStatus::Verified },
        detail: format!("sup r = {r_f}"),
    });
    report.hypotheses.push(Hypothesis {
        name: "K_P^rad ≤ b".into(),
        status: HypothesisStatus::Verified,
        detail: "P is a space form of curvature b".into(),
    });
    Ok(Prepared { f: ft, dims, b, r, r_f, r_f_provenance, truncation })
}

/// Refuses `p ≥ m − l` unless overridden; returns whether it holds.
fn codimension(cfg: &ExperimentConfig, p: &Prepared, report: &mut ExperimentReport) -> Result<bool> {
    let d = p.dims;
    let ok = d.codimension_ok();
    let detail = format!("p = {}, m − l = {}", d.p, d.m as i64 - d.l as i64);
    if !ok && !cfg.override_codimension {
        return Err(Error::Hypothesis(format!(
            "p < m − l fails ({detail}); S¹ × R ⊂ R³ shows this restriction cannot be dropped"
        )));
    }
    report.hypotheses.push(Hypothesis {
        name: "p < m − l".into(),
        status: if ok { HypothesisStatus::Verified } else { HypothesisStatus::Violated },
        detail,
    });
    Ok(ok)
}

/// Samples `inf K_M ≥ −F(0)`, which implies the radial decay hypothesis for
/// nondecreasing `F`, on at most 64 chart points.
fn decay_hypothesis(cfg: &ExperimentConfig, p: &Prepared, report: &mut ExperimentReport) -> Result<()> {
    if p.truncation.is_none() {
        report.hypotheses.push(Hypothesis {
            name: "K_M^rad ≥ −F(ρ)".into(),
            status: HypothesisStatus::Vacuous,
            detail: "compact entry".into(),
        });
        return Ok(());
    }
    let decay = DecayFunction::new(cfg.decay.clone())?;
    let dr = decay_condition_check(&decay, HYPOTHESIS_T_MAX)?;
    if !dr.passed {
        return Err(Error::Hypothesis(format!("the decay profile {} fails the decay conditions", cfg.decay)));
    }
    let samples = sample_chart(&p.f, cfg.budget.clamp(1, 64), cfg.seed ^ 0xdeca);
    let search = SearchConfig { starts: 8, ..cfg.search.clone() };
    let ambient = p.f.ambient();
    let worst = samples
        .par_iter()
        .map(|x| -> Result<f64> {
            let data = p.f.fundamental_forms(x)?;
            let neg = |s: &Plane| -data.intrinsic_curvature(ambient, s).unwrap_or(f64::NAN);
            Ok(-max_over_planes(&neg, &Subspace::full(p.dims.m), &search)?.0)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let floor = decay.curvature_floor(0.0);
    report.hypotheses.push(Hypothesis {
        name: "K_M^rad ≥ −F(ρ)".into(),
        status: if worst >= floor { HypothesisStatus::Sampled } else { HypothesisStatus::Violated },
        detail: format!(
            "sampled inf K_M = {worst:.6e} {} −F(0) = {floor:.6e} on {} points with |z| ≤ {}",
            if worst >= floor { "≥" } else { "<" },
            samples.len(),
            p.truncation.unwrap_or(0.0)
        ),
    });
    Ok(())
}

fn relative_tol(cfg: &ExperimentConfig, bound: f64) -> f64 {
    (cfg.tolerances.relative * bound.abs()).max(cfg.tolerances.analytic)
}

/// Sampled supremum of the min-max functional: a coarse scan, the best
/// `confirm_top` candidates re-evaluated with the full search, then local
/// refinement of the best one. Returns the per-sample coarse values too.
fn scanned_sup(
    cfg: &ExperimentConfig,
    p: &Prepared,
    d: usize,
    kind: CurvatureKind,
    samples: &[Vec<f64>],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let scan = scan_minmax(&p.f, samples, d, &cfg.scan_search, kind)?;
    let values: Vec<f64> = scan.per_point.iter().map(|s| s.value).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let confirmed = order
        .iter()
        .take(cfg.confirm_top.max(1))
        .map(|&i| Ok((point_minmax(&p.f, &samples[i], d, &cfg.search, kind)?.value, samples[i].clone())))
        .collect::<Result<Vec<_>>>()?;
    let (mut sup, mut at) =
        confirmed.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one candidate");
    if cfg.refine_rounds > 0 {
        let (x, _) = refine_sup(&p.f, &at, d, &cfg.scan_search, kind, cfg.refine_rounds)?;
        let refined = point_minmax(&p.f, &x, d, &cfg.search, kind)?.value;
        if refined > sup {
            sup = refined;
            at = x;
        }
    }
    Ok((sup, at, values))
}

fn sample_table(name: &str, samples: &[Vec<f64>], columns: &[(&str, Vec<f64>)]) -> Table {
    let m = samples.first().map_or(0, Vec::len);
    let coords: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    let mut spec: Vec<(&str, Provenance)> = vec![("index", Computed)];
    spec.extend(coords.iter().map(|c| (c.as_str(), Computed)));
    spec.extend(columns.iter().map(|(n, _)| (*n, Computed)));
    let mut t = Table::new(name, &spec);
    for (i, x) in samples.iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(x);
        row.extend(columns.iter().map(|(_, v)| v[i]));
        t.push(row);
    }
    t
}

/// `sup_M min{max_{σ⊂W} K(σ) : dim W > p + l}` against `C_b²(R)` and
/// `C_b²(R) + inf K_P`.
pub fn sharpness(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg, None);
    let p = prepare(cfg, &mut report)?;
    report.entry = p.f.name().to_string();
    report.entry_parameters = p.f.info().parameters.clone();
    let ok = codimension(cfg, &p, &mut report)?;
    decay_hypothesis(cfg, &p, &mut report)?;
    let mut d = cfg.d_threshold.unwrap_or(p.dims.p + p.dims.l);
    if !ok && d + 1 > p.dims.m {
        d = p.dims.m - 1;
        report.notes.push(format!(
            "no subspace has dimension > p + l = {}; scanning with W = T_xM (threshold {d})",
            p.dims.p + p.dims.l
        ));
    }
    let samples = sample_chart(&p.f, cfg.budget.max(1), cfg.seed);
    report.notes.push(format!(
        "sup is a sampled lower bound over {} points plus {} refinement rounds",
        samples.len(),
        cfg.refine_rounds
    ));
    if let Some(t) = p.truncation {
        report.notes.push(format!("samples restricted to the truncation |z| ≤ {t}"));
    }
    let (ext, _, ext_values) = scanned_sup(cfg, &p, d, CurvatureKind::Extrinsic, &samples)?;
    let (int, _, int_values) = scanned_sup(cfg, &p, d, CurvatureKind::Intrinsic, &samples)?;
    let c = cb(p.b, p.r)?;
    let bound_ext = c * c;
    let bound_int = c * c + p.b;
    let tol = cfg.tolerances.analytic;
    if ok {
        report.checks.push(Check::new(
            "extrinsic_estimate",
            Relation::AtLeast,
            Quantity::computed(ext),
            Quantity::bound(bound_ext),
            relative_tol(cfg, bound_ext),
        ));
        report.checks.push(Check::new(
            "intrinsic_estimate",
            Relation::AtLeast,
            Quantity::computed(int),
            Quantity::bound(bound_int),
            relative_tol(cfg, bound_int),
        ));
        if p.f.info().sharp && (p.r - p.r_f).abs() <= 1e-12 {
            report.checks.push(Check::new(
                "extrinsic_equality",
                Relation::Equal,
                Quantity::computed(ext),
                Quantity::bound(bound_ext),
                relative_tol(cfg, bound_ext),
            ));
            report.checks.push(Check::new(
                "intrinsic_equality",
                Relation::Equal,
                Quantity::computed(int),
                Quantity::bound(bound_int),
                relative_tol(cfg, bound_int),
            ));
        }
    } else {
        report.branch = Some("codimension-counterexample".into());
        report.checks.push(Check::new(
            "counterexample_gap",
            Relation::StrictlyBelow,
            Quantity::computed(ext),
            Quantity::bound(bound_ext),
            tol,
        ));
        report.notes.push(
            "the estimate fails without p < m − l; this shows the hypothesis is needed, not that the estimate is wrong"
                .into(),
        );
    }
    report.tables.push(sample_table("scan", &samples, &[("extrinsic", ext_values), ("intrinsic", int_values)]));
    Ok(report.finish())
}

/// Radius bounds: `R_f ≥ C_b^{-1}(√sup)` with the unbounded branch for
/// `b ≤ 0`, and `R_f ≥ π/(2√b)` when the intrinsic side is at most `b`.
pub fn radius(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg, None);
    let p = prepare(cfg, &mut report)?;
    report.entry = p.f.name().to_string();
    report.entry_parameters = p.f.info().parameters.clone();
    codimension_strict(&p, &mut report)?;
    decay_hypothesis(cfg, &p, &mut report)?;
    let d = p.dims.p + p.dims.l;
    let samples = sample_chart(&p.f, cfg.budget.max(1), cfg.seed);
    let (ext, ext_prov) = match cfg.synthetic_curvature {
        Some(v) => {
            report.notes.push(format!("curvature side replaced by the synthetic value {v}"));
            (v, DerivedOracle)
        }
        None => (scanned_sup(cfg, &p, d, CurvatureKind::Extrinsic, &samples)?.0, Computed),
    };
    let side = Quantity { value: ext, provenance: ext_prov };
    let r_f = Quantity { value: p.r_f, provenance: p.r_f_provenance };
    let tol = cfg.tolerances.analytic;
    let b = p.b;
    if b <= 0.0 && ext <= -b + tol {
        report.branch = Some("cylindrically-unbounded".into());
        report.checks.push(Check::new("unbounded_criterion", Relation::AtMost, side, Quantity::bound(-b), tol));
        report.notes.push(format!("sup min max K_f = {ext} ≤ −b = {}: f is cylindrically unbounded", -b));
        return Ok(report.finish());
    }
    let bound = cb_inverse(b, ext.sqrt())?;
    report.branch = Some("radius-bound".into());
    report.checks.push(Check::new("radius_bound", Relation::AtLeast, r_f, Quantity::bound(bound), relative_tol(cfg, bound)));
    if p.f.info().sharp {
        report.checks.push(Check::new("radius_equality", Relation::Equal, r_f, Quantity::bound(bound), relative_tol(cfg, bound)));
    }
    if b <= 0.0 {
        report.checks.push(Check::new("bounded_criterion", Relation::StrictlyAbove, side, Quantity::bound(-b), 0.0));
    } else {
        let int = match cfg.synthetic_curvature {
            Some(v) => Quantity::oracle(v + b),
            None => Quantity::computed(scanned_sup(cfg, &p, d, CurvatureKind::Intrinsic, &samples)?.0),
        };
        let hemisphere = PI / (2.0 * b.sqrt());
        if int.value <= b {
            report.checks.push(Check::new("hemisphere_bound", Relation::AtLeast, r_f, Quantity::bound(hemisphere), tol));
        } else {
            report.notes.push(format!(
                "intrinsic side {} > b = {b}: the hemisphere bound R_f ≥ {hemisphere} does not apply",
                int.value
            ));
        }
    }
    Ok(report.finish())
}

fn codimension_strict(p: &Prepared, report: &mut ExperimentReport) -> Result<()> {
    let cfg = ExperimentConfig { override_codimension: false, ..report.config.clone() };
    codimension(&cfg, p, report).map(|_| ())
}

/// Pointwise `(s_M, min_σ K_M(σ))` at each sample.
pub fn scalar_and_min_plane(
    f: &ParametricImmersion,
    samples: &[Vec<f64>],
    search: &SearchConfig,
) -> Result<Vec<(f64, f64)>> {
    let m = f.dims().m;
    samples
        .par_iter()
        .map(|x| {
            let data = f.fundamental_forms(x)?;
            let (s, _) = data.scalar_and_ricci(f.ambient())?;
            if m < 2 {
                return Ok((s, f64::NAN));
            }
            let neg = |sig: &Plane| -data.intrinsic_curvature(f.ambient(), sig).unwrap_or(f64::NAN);
            let (v, _) = max_over_planes(&neg, &Subspace::full(m), search)?;
            Ok((s, -v))
        })
        .collect()
}

/// `sup s_M ≥ C_b²(R) + inf K_P` for hypersurfaces.
pub fn scalar(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg, None);
    let p = prepare(cfg, &mut report)?;
    report.entry = p.f.name().to_string();
    report.entry_parameters = p.f.info().parameters.clone();
    if p.dims.p != 1 || p.dims.l != 0 {
        return Err(Error::Hypothesis(format!(
            "the scalar estimate needs a hypersurface of P (p = 1, l = 0); got p = {}, l = {}",
            p.dims.p, p.dims.l
        )));
    }
    decay_hypothesis(cfg, &p, &mut report)?;
    let samples = sample_chart(&p.f, cfg.budget.max(1), cfg.seed);
    let search = SearchConfig { starts: 8, ..cfg.search.clone() };
    let pairs = scalar_and_min_plane(&p.f, &samples, &search)?;
    let sup = pairs.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let (gap_s, gap_k) = pairs
        .iter()
        .copied()
        .min_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
        .expect("at least one sample");
    let c = cb(p.b, p.r)?;
    let bound = c * c + p.b;
    report.checks.push(Check::new(
        "scalar_estimate",
        Relation::AtLeast,
        Quantity::computed(sup),
        Quantity::bound(bound),
        relative_tol(cfg, bound),
    ));
    if p.f.info().sharp {
        report.checks.push(Check::new(
            "scalar_equality",
            Relation::Equal,
            Quantity::computed(sup),
            Quantity::bound(bound),
            relative_tol(cfg, bound),
        ));
    }
    report.checks.push(Check::new(
        "scalar_at_least_min_plane",
        Relation::AtLeast,
        Quantity::computed(gap_s),
        Quantity::computed(gap_k),
        cfg.tolerances.analytic,
    ));
    report.tables.push(sample_table(
        "scalar",
        &samples,
        &[("scalar", pairs.iter().map(|v| v.0).collect()), ("min_plane", pairs.iter().map(|v| v.1).collect())],
    ));
    Ok(report.finish())
}

/// The quantities entering the radial-function chain at one point.
struct RadialFrame {
    r: f64,
    psi_prime: f64,
    c: f64,
    /// Analytic `Hess^M g` in the orthonormal frame.
    hess_g: DMatrix<f64>,
    grad_norm: f64,
    /// `⟨grad r, ν_k⟩` for each normal.
    grad_r_normal: DVector<f64>,
    /// `⟨grad r, e_a⟩` for each tangent frame vector.
    grad_r_tangent: DVector<f64>,
    /// `Hess^P r(e_a, e_b)`.
    hess_r: DMatrix<f64>,
    /// Normal components of `grad^N h`.
    grad_h_normal: DVector<f64>,
    /// Orthonormal frame of `V = f_*^{-1}(f_* TM ∩ TP)`.
    v: DMatrix<f64>,
}

fn radial_frame(f: &ParametricImmersion, data: &PointFrameData, b: f64) -> Result<RadialFrame> {
    let ambient: &ProductSpace = f.ambient();
    let pull = f.pullback_radial_with(data, b)?;
    let y = data.ambient_point.as_slice();
    let height = ambient.modified_radial_height(b, y)?;
    let gram = ambient.gram();
    let e = &data.tangent_frame;
    let nu = &data.normal_frame;
    let kp = ambient.factor_p().coord_dim();
    let (yp, _) = ambient.split(y);
    let dd = ambient.factor_p().distance_and_derivatives(yp, ambient.basepoint().as_slice())?;
    let ep = e.rows(0, kp).into_owned();
    Ok(RadialFrame {
        r: pull.r,
        psi_prime: pull.psi_prime,
        c: cb(b, pull.r)?,
        grad_norm: pull.grad_norm,
        hess_g: pull.hess_frame,
        grad_r_normal: nu.transpose() * &gram * &height.grad_r,
        grad_r_tangent: e.transpose() * &gram * &height.grad_r,
        hess_r: ep.transpose() * &dd.hess * &ep,
        grad_h_normal: nu.transpose() * &gram * &height.grad,
        v: p_tangent_subspace(f, data),
    })
}

fn unit_directions(v: &DMatrix<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let (m, d) = v.shape();
    let mut out: Vec<DVector<f64>> = (0..d).map(|j| v.column(j).into_owned()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let c: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let n = c.norm();
        if n > 1e-12 {
            out.push(v * (c / n));
        }
    }
    debug_assert!(out.iter().all(|x| x.len() == m));
    out
}

fn alpha_xx(alpha: &BilinearForm, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(alpha.dim_target(), alpha.matrices().iter().map(|a| x.dot(&(a * x))))
}

fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Adds the check `lhs(X) ≥ rhs(X)` at the direction with the smallest gap.
fn worst_case(
    name: &str,
    k: usize,
    dirs: &[DVector<f64>],
    tol: f64,
    lhs_rhs: impl Fn(&DVector<f64>) -> (f64, f64),
    lhs: Provenance,
    rhs: Provenance,
) -> Check {
    let (l, r) = dirs
        .iter()
        .map(&lhs_rhs)
        .min_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
        .unwrap_or((f64::NAN, f64::NAN));
    Check::new(name, Relation::AtLeast, Quantity { value: l, provenance: lhs }, Quantity { value: r, provenance: rhs }, tol)
        .at_k(k)
}

/// Per-`k` quantities of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub k: usize,
    pub point: Vec<f64>,
    pub r: f64,
    pub psi_prime: f64,
    pub c: f64,
    /// `dim V_k`.
    pub v_dim: usize,
    pub algebraic_codimension: usize,
    /// The coefficient in the lower bound on `‖α(X, X)‖`.
    pub coefficient: f64,
    pub alpha_min: f64,
    pub plane_max: Option<f64>,
    /// `max K_f − coefficient²` on `V_k`.
    pub final_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub sequence: SequenceRecord,
    pub steps: Vec<ChainStep>,
    /// Exponent `e` in `final_margin ≈ c·k^{−e}`.
    pub fit_exponent: Option<f64>,
}

/// Least-squares decay exponent of `ys` against `ks` on a log-log scale.
pub fn decay_exponent(ks: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ks.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(k, y)| (k.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

fn plane_checks(
    report: &mut ExperimentReport,
    alpha: &BilinearForm,
    v: &DMatrix<f64>,
    coefficient: f64,
    suffix: &str,
    k: usize,
    search: &SearchConfig,
    tol: f64,
) -> Result<(f64, Option<(f64, Plane)>)> {
    let vs = Subspace::from_frame(v.clone())?;
    let amin = min_diagonal_norm(alpha, &vs, search)?.value;
    report.checks.push(
        Check::new(format!("alpha_lower_bound{suffix}"), Relation::AtLeast, Quantity::computed(amin), Quantity::bound(coefficient), tol)
            .at_k(k),
    );
    if coefficient <= 0.0 {
        report.notes.push(format!("k = {k}: coefficient{suffix} = {coefficient} ≤ 0, the plane bound does not apply"));
        return Ok((amin, None));
    }
    if vs.dim() < 2 {
        report.notes.push(format!("k = {k}: dim V = {} < 2, no plane to bound", vs.dim()));
        return Ok((amin, None));
    }
    let (kmax, plane) = max_plane_curvature(alpha, &vs, search)?;
    report.checks.push(
        Check::new(
            format!("otsuki_plane{suffix}"),
            Relation::AtLeast,
            Quantity::computed(kmax),
            Quantity::bound(coefficient * coefficient),
            tol,
        )
        .at_k(k),
    );
    Ok((amin, Some((kmax, plane))))
}

/// The inequalities of the weak-Hessian-sequence argument, checked at each
/// `x_k` on `V_k`.
pub fn chain(cfg: &ExperimentConfig) -> Result<(ExperimentReport, ChainRecord)> {
    let mut report = ExperimentReport::new(cfg, None);
    let p = prepare(cfg, &mut report)?;
    report.entry = p.f.name().to_string();
    report.entry_parameters = p.f.info().parameters.clone();
    codimension_strict(&p, &mut report)?;
    decay_hypothesis(cfg, &p, &mut report)?;
    let field = ModifiedRadial { b: p.b };
    let opts = SequenceOptions {
        k_max: cfg.k_max,
        samples: cfg.budget.max(1),
        seed: cfg.seed,
        tol: cfg.tolerances.analytic,
        ..SequenceOptions::default()
    };
    let seq = weak_hessian_sequence(&p.f, &field, &opts)?;
    let tol = cfg.tolerances.analytic;
    let ambient = p.f.ambient();
    let g_bound = psi(p.b, p.r)?;
    report.checks.push(Check::new(
        "g_star_below_psi_R",
        Relation::AtMost,
        Quantity::computed(seq.g_star),
        Quantity::bound(g_bound),
        tol,
    ));
    let mut steps = Vec::new();
    let mut table = Table::new(
        "chain",
        &[
            ("k", Computed),
            ("r", Computed),
            ("coefficient", PaperBound),
            ("alpha_min", Computed),
            ("plane_max", Computed),
            ("final_margin", Computed),
        ],
    );
    for entry in &seq.entries {
        let k = entry.k;
        let Some(x) = entry.point.clone() else {
            report.notes.push(format!("k = {k}: no sample satisfies the weak Hessian conditions"));
            report.checks.push(
                Check::new("sequence_term_found", Relation::AtLeast, Quantity::computed(0.0), Quantity::bound(1.0), 0.0)
                    .at_k(k),
            );
            continue;
        };
        let data = p.f.fundamental_forms(&x)?;
        let alpha = &data.second_fundamental_form;
        let rf = radial_frame(&p.f, &data, p.b)?;
        let kf = k as f64;
        let inv_k = 1.0 / kf;
        report.checks.push(
            Check::new(
                "value_condition",
                Relation::AtLeast,
                Quantity::computed(entry.value.unwrap_or(f64::NAN)),
                Quantity::bound(seq.g_star - inv_k),
                0.0,
            )
            .at_k(k),
        );
        report.checks.push(
            Check::new(
                "hessian_condition",
                Relation::AtMost,
                Quantity::computed(entry.hess_max_eig.unwrap_or(f64::NAN)),
                Quantity::bound(inv_k),
                tol,
            )
            .at_k(k),
        );
        let p_k = alpha.algebraic_codimension(cfg.tolerances.rank);
        let v_dim = rf.v.ncols();
        report.checks.push(
            Check::new(
                "codimension_below_dim_v",
                Relation::AtLeast,
                Quantity::computed(v_dim as f64),
                Quantity::bound(p_k as f64 + 1.0),
                0.0,
            )
            .at_k(k),
        );
        let dirs = unit_directions(&rf.v, CHAIN_DIRECTIONS, cfg.seed ^ k as u64);
        let c = rf.c;
        let pp = rf.psi_prime;
        let alpha_dir = |x: &DVector<f64>| alpha_xx(alpha, x);
        // Hess g = ψ'(C⟨grad r, X⟩² + ⟨grad r, α(X,X)⟩ + Hess r(X, X)).
        let identity = dirs
            .iter()
            .map(|x| {
                let gx = rf.grad_r_tangent.dot(x);
                let rhs = pp * (c * gx * gx + rf.grad_r_normal.dot(&alpha_dir(x)) + quad(&rf.hess_r, x));
                (quad(&rf.hess_g, x) - rhs).abs()
            })
            .fold(0.0, f64::max);
        report.checks.push(
            Check::new("radial_hessian_identity", Relation::Equal, Quantity::computed(identity), Quantity::oracle(0.0), tol)
                .at_k(k),
        );
        report.checks.push(worst_case(
            "hessian_comparison",
            k,
            &dirs,
            tol,
            |x| {
                let gx = rf.grad_r_tangent.dot(x);
                (quad(&rf.hess_r, x), c * (x.norm_squared() - gx * gx))
            },
            Computed,
            PaperBound,
        ));
        report.checks.push(worst_case(
            "hessian_lower_bound",
            k,
            &dirs,
            tol,
            |x| (quad(&rf.hess_g, x), pp * (c * x.norm_squared() + rf.grad_r_normal.dot(&alpha_dir(x)))),
            Computed,
            PaperBound,
        ));
        report.checks.push(worst_case(
            "cauchy_schwarz",
            k,
            &dirs,
            tol,
            |x| {
                let a = alpha_dir(x);
                (pp * (c + rf.grad_r_normal.dot(&a)), pp * (c - a.norm()))
            },
            Computed,
            PaperBound,
        ));
        report.checks.push(worst_case(
            "sequence_hessian_bound",
            k,
            &dirs,
            tol,
            |x| (inv_k * x.norm_squared(), pp * (c * x.norm_squared() - alpha_dir(x).norm())),
            PaperBound,
            Computed,
        ));
        let coefficient = c - inv_k / pp;
        let (amin, plane) = plane_checks(&mut report, alpha, &rf.v, coefficient, "", k, &cfg.search, tol)?;
        let (plane_max, final_margin) = match &plane {
            Some((kmax, sigma)) => {
                let intrinsic = data.intrinsic_curvature(ambient, sigma)?;
                report.checks.push(
                    Check::new(
                        "intrinsic_plane",
                        Relation::AtLeast,
                        Quantity::computed(intrinsic),
                        Quantity::bound(coefficient * coefficient + p.b),
                        tol,
                    )
                    .at_k(k),
                );
                (Some(*kmax), Some(kmax - coefficient * coefficient))
            }
            None => (None, None),
        };
        let d = p.dims.p + p.dims.l;
        let mm = point_minmax(&p.f, &x, d, &cfg.search, CurvatureKind::Extrinsic)?;
        if coefficient > 0.0 {
            report.checks.push(
                Check::new(
                    "minmax_at_x_k",
                    Relation::AtLeast,
                    Quantity::computed(mm.value),
                    Quantity::bound(coefficient * coefficient),
                    tol,
                )
                .at_k(k),
            );
        }
        table.push(vec![kf, rf.r, coefficient, amin, plane_max.unwrap_or(f64::NAN), final_margin.unwrap_or(f64::NAN)]);
        steps.push(ChainStep {
            k,
            point: x,
            r: rf.r,
            psi_prime: pp,
            c,
            v_dim,
            algebraic_codimension: p_k,
            coefficient,
            alpha_min: amin,
            plane_max,
            final_margin,
        });
    }
    let ks: Vec<f64> = steps.iter().filter(|s| s.final_margin.is_some()).map(|s| s.k as f64).collect();
    let ms: Vec<f64> = steps.iter().filter_map(|s| s.final_margin).collect();
    let fit_exponent = decay_exponent(&ks, &ms);
    if let Some(e) = fit_exponent {
        report.checks.push(Check::new("final_margin_rate", Relation::Equal, Quantity::computed(e), Quantity::oracle(1.0), 0.2));
    }
    if p.truncation.is_none() {
        compact_case(cfg, &p, &seq, &mut report)?;
    }
    report.tables.push(table);
    let record = ChainRecord { sequence: seq, steps, fit_exponent };
    Ok((report.finish(), record))
}

/// At a maximizer of `g` on a compact entry: `Hess g ≤ 0`, hence
/// `‖α(X,X)‖ ≥ C_b(r_∞)` on `V` and a plane with `K_f ≥ C_b²(r_∞)`.
fn compact_case(cfg: &ExperimentConfig, p: &Prepared, seq: &SequenceRecord, report: &mut ExperimentReport) -> Result<()> {
    let x = seq.g_star_point.clone();
    let data = p.f.fundamental_forms(&x)?;
    let rf = radial_frame(&p.f, &data, p.b)?;
    let tol = cfg.tolerances.analytic;
    let hv = rf.v.transpose() * &rf.hess_g * &rf.v;
    let top = crate::linalg::symmetric_eigenvalues(&hv).last().copied().unwrap_or(0.0);
    report.checks.push(Check::new(
        "compact_hessian_nonpositive",
        Relation::AtMost,
        Quantity::computed(top),
        Quantity::bound(0.0),
        tol,
    ));
    let dirs = unit_directions(&rf.v, CHAIN_DIRECTIONS, cfg.seed ^ 0xc0);
    report.checks.push(worst_case(
        "compact_hessian_lower_bound",
        0,
        &dirs,
        tol,
        |x| (0.0, rf.psi_prime * (rf.c - alpha_xx(&data.second_fundamental_form, x).norm())),
        PaperBound,
        Computed,
    ));
    report.checks.last_mut().expect("just pushed").k = None;
    let before = report.checks.len();
    plane_checks(report, &data.second_fundamental_form, &rf.v, rf.c, "_compact", 0, &cfg.search, tol)?;
    for c in &mut report.checks[before..] {
        c.k = None;
    }
    Ok(())
}

/// Per-`k` record of one penalized run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenalizedChainRecord {
    pub growth: String,
    pub sequence: PenalizedRecord,
}

/// The penalized constructions for each configured growth profile.
pub fn penalized(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<PenalizedChainRecord>)> {
    let mut report = ExperimentReport::new(cfg, None);
    let p = prepare(cfg, &mut report)?;
    report.entry = p.f.name().to_string();
    report.entry_parameters = p.f.info().parameters.clone();
    if p.dims.l == 0 {
        return Err(Error::Hypothesis("the penalized construction needs a product ambient with l ≥ 1".into()));
    }
    report.hypotheses.push(Hypothesis {
        name: "f is proper".into(),
        status: HypothesisStatus::Verified,
        detail: "the axial coordinates are those of Q".into(),
    });
    let tol = cfg.tolerances.analytic;
    let psi_r = psi(p.b, p.r)?;
    let x0: Vec<f64> = {
        let mut x: Vec<f64> = p.f.lower().iter().zip(p.f.upper()).map(|(a, b)| 0.5 * (a + b) + 0.1 * (b - a)).collect();
        for &i in p.f.axial_coords() {
            x[i] = 0.3 * p.truncation.unwrap_or(1.0);
        }
        x
    };
    let field = ModifiedRadial { b: p.b };
    let mut records = Vec::new();
    for profile in &cfg.growth {
        let (growth, gr) = GrowthFunction::new(profile.clone())?.checked(HYPOTHESIS_T_MAX)?;
        let label = profile.to_string();
        if !gr.first_theorem_ok {
            return Err(Error::Hypothesis(format!("∫ 1/ς = ∞ fails for ς = {label}")));
        }
        report.hypotheses.push(Hypothesis {
            name: format!("∫ 1/ς = ∞ for ς = {label}"),
            status: HypothesisStatus::Sampled,
            detail: format!("tail comparison on [{:e}, {:e}]", gr.integral.tail_start, gr.integral.tail_end),
        });
        let variant = gr.second_theorem_ok && p.dims.p == 1;
        report.hypotheses.push(Hypothesis {
            name: format!("limsup 1/ς < ∞ for ς = {label}"),
            status: if gr.second_theorem_ok { HypothesisStatus::Sampled } else { HypothesisStatus::Violated },
            detail: if p.dims.p == 1 { "hypersurface".into() } else { "p > 1: the squared variant is skipped".into() },
        });
        let opts = PenalizedOptions {
            k_max: cfg.k_max,
            samples: cfg.budget.max(1),
            refine_starts: 5,
            seed: cfg.seed,
            truncation: cfg.truncation,
            x0: x0.clone(),
            tol,
        };
        let rec = penalized_sequence(&p.f, &field, &growth, &opts)?;
        let g_star = estimate_sup(&p.f, &field, &SequenceOptions { samples: cfg.budget.max(1), ..SequenceOptions::default() }, &[])?[0].1;
        for e in &rec.entries {
            let k = e.k;
            let kf = k as f64;
            let data = p.f.fundamental_forms(&e.point)?;
            let alpha = &data.second_fundamental_form;
            let rf = radial_frame(&p.f, &data, p.b)?;
            let name = |s: &str| format!("{s}[{label}]");
            report.checks.push(
                Check::new(
                    name("gradient_identity"),
                    Relation::Equal,
                    Quantity::computed(e.gradient_residual),
                    Quantity::oracle(0.0),
                    crate::principles::sequence::GRADIENT_IDENTITY_RTOL * e.gradient_scale
                        + crate::principles::sequence::GRADIENT_IDENTITY_FLOOR,
                )
                .at_k(k),
            );
            report.checks.push(
                Check::new(name("penalized_hessian"), Relation::AtLeast, Quantity::computed(e.hessian_margin), Quantity::bound(0.0), tol)
                    .at_k(k),
            );
            report.checks.push(
                Check::new(name("boundary_clear"), Relation::AtMost, Quantity::computed(e.boundary_hit as u8 as f64), Quantity::bound(0.0), 0.0)
                    .at_k(k),
            );
            // (1/φ) Hess φ(X, X) = (1/ς) ⟨grad^Q|z|, α(X, X)⟩ on V.
            let gram = p.f.ambient().gram();
            let kp = p.f.ambient().factor_p().coord_dim();
            let y = &data.ambient_point;
            let z = y.rows(kp, y.len() - kp);
            let mut u = DVector::zeros(y.len());
            if z.norm() > 1e-12 {
                u.rows_mut(kp, y.len() - kp).copy_from(&(z / z.norm()));
            }
            let w = data.normal_frame.transpose() * &gram * &u;
            let dirs = unit_directions(&e.v_basis, CHAIN_DIRECTIONS, cfg.seed ^ (k as u64) << 8);
            let s = e.varsigma;
            report.checks.push(worst_case(
                &name("phi_hessian_vs_alpha"),
                k,
                &dirs,
                tol,
                |x| {
                    let a = alpha_xx(alpha, x);
                    (a.norm() / s, w.dot(&a) / s)
                },
                Computed,
                Computed,
            ));
            report.checks.push(worst_case(
                &name("alpha_growth"),
                k,
                &dirs,
                tol,
                |x| (s * x.norm_squared(), alpha_xx(alpha, x).norm()),
                PaperBound,
                Computed,
            ));
            let upper = (psi_r + 1.0) / kf;
            report.checks.push(worst_case(
                &name("penalized_upper_bound"),
                k,
                &dirs,
                tol,
                |x| (upper * x.norm_squared(), quad(&rf.hess_g, x)),
                PaperBound,
                Computed,
            ));
            report.checks.push(worst_case(
                &name("hessian_lower_bound"),
                k,
                &dirs,
                tol,
                |x| (quad(&rf.hess_g, x), rf.psi_prime * (rf.c * x.norm_squared() - alpha_xx(alpha, x).norm())),
                Computed,
                PaperBound,
            ));
            let coefficient = rf.c - (psi_r + 1.0) / (kf * rf.psi_prime);
            plane_checks(&mut report, alpha, &e.v_basis, coefficient, &format!("[{label}]"), k, &cfg.search, tol)?;
            if variant {
                report.checks.push(
                    Check::new(
                        name("gradient_growth_bound"),
                        Relation::AtMost,
                        Quantity::computed(rf.grad_norm),
                        Quantity::bound((g_star + 1.0) / (kf * s)),
                        tol,
                    )
                    .at_k(k),
                );
                let normal = rf.grad_h_normal.norm();
                report.checks.push(
                    Check::new(
                        name("gradient_split"),
                        Relation::Equal,
                        Quantity::computed(rf.grad_norm.powi(2) + normal * normal),
                        Quantity::oracle(rf.psi_prime.powi(2)),
                        tol * rf.psi_prime.powi(2).max(1.0),
                    )
                    .at_k(k),
                );
                let root = (rf.psi_prime.powi(2) - rf.grad_norm.powi(2)).max(0.0).sqrt();
                let sq_upper = upper * upper / root;
                report.checks.push(worst_case(
                    &name("squared_upper_bound"),
                    k,
                    &dirs,
                    tol,
                    |x| (sq_upper * x.norm_squared(), quad(&rf.hess_g, x)),
                    PaperBound,
                    Computed,
                ));
                report.checks.push(worst_case(
                    &name("squared_alpha_growth"),
                    k,
                    &dirs,
                    tol,
                    |x| (s * s * x.norm_squared(), alpha_xx(alpha, x).norm()),
                    PaperBound,
                    Computed,
                ));
                let sq_coefficient = rf.c - (psi_r + 1.0).powi(2) / (kf * kf * rf.psi_prime * root);
                plane_checks(&mut report, alpha, &e.v_basis, sq_coefficient, &format!("_squared[{label}]"), k, &cfg.search, tol)?;
            }
        }
        report.tables.push(penalized_table(&label, &rec));
        records.push(PenalizedChainRecord { growth: label, sequence: rec });
    }
    Ok((report.finish(), records))
}

fn penalized_table(label: &str, rec: &PenalizedRecord) -> Table {
    let mut t = Table::new(
        format!("penalized[{label}]"),
        &[
            ("k", Computed),
            ("value", Computed),
            ("axial_distance", Computed),
            ("phi", Computed),
            ("coefficient", Computed),
            ("gradient_residual", Computed),
            ("hessian_margin", Computed),
        ],
    );
    for e in &rec.entries {
        t.push(vec![
            e.k as f64,
            e.value,
            e.axial_distance,
            e.phi,
            e.coefficient,
            e.gradient_residual,
            e.hessian_margin,
        ]);
    }
    t
}

/// `Hess r ≥ C_b(r)(g − dr ⊗ dr)` on a space form of curvature `b' ≤ b`,
/// with the off-radial margin compared against `C_{b'}(r) − C_b(r)`.
pub fn perturbed(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg, None);
    let dim = cfg.m.max(2);
    let space = SpaceForm::new(cfg.b_prime, dim)?;
    report.entry = format!("space_form(b'={}, n={dim})", cfg.b_prime);
    report.entry_parameters = serde_json::json!({"b_prime": cfg.b_prime, "b": cfg.b, "n": dim});
    if cfg.b_prime > cfg.b {
        return Err(Error::Hypothesis(format!("K_P^rad ≤ b fails: b' = {} > b = {}", cfg.b_prime, cfg.b)));
    }
    report.hypotheses.push(Hypothesis {
        name: "K_P^rad ≤ b".into(),
        status: HypothesisStatus::Verified,
        detail: format!("b' = {} ≤ b = {}", cfg.b_prime, cfg.b),
    });
    let o = space.origin();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tolerances.analytic;
    let directions = (cfg.budget / cfg.radii.len().max(1)).clamp(1, 64);
    let mut table = Table::new(
        "perturbed",
        &[("r", Computed), ("min_margin", Computed), ("off_radial_min", Computed), ("off_radial_oracle", DerivedOracle)],
    );
    let mut inf_k = f64::INFINITY;
    for &r in &cfg.radii {
        validate_radius(cfg.b, r, &space)?;
        let oracle = cb(cfg.b_prime, r)? - cb(cfg.b, r)?;
        let mut lo = f64::INFINITY;
        let mut off = f64::INFINITY;
        for _ in 0..directions {
            let omega: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = omega.iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega: Vec<f64> = omega.iter().map(|v| v / n).collect();
            let x = space.point_at(&omega, r)?;
            let (_, min_eig, _) = hessian_comparison_margin(&space, x.as_slice(), o.as_slice(), cfg.b)?;
            lo = lo.min(min_eig);
            off = off.min(off_radial_margin(&space, &x, &o, cfg.b)?);
            let frame = space.tangent_frame(x.as_slice())?;
            let (u, v) = (frame.column(0).into_owned(), frame.column(1).into_owned());
            inf_k = inf_k.min(space.sectional_curvature(x.as_slice(), u.as_slice(), v.as_slice())?);
        }
        report.checks.push(Check::new(format!("comparison_holds[r={r}]"), Relation::AtLeast, Quantity::computed(lo), Quantity::bound(0.0), tol));
        report.checks.push(Check::new(
            format!("off_radial_margin[r={r}]"),
            Relation::Equal,
            Quantity::computed(off),
            Quantity::oracle(oracle),
            tol,
        ));
        if cfg.b_prime < cfg.b {
            report.checks.push(Check::new(
                format!("strict_off_radial[r={r}]"),
                Relation::StrictlyAbove,
                Quantity::computed(off),
                Quantity::bound(0.0),
                0.0,
            ));
        }
        table.push(vec![r, lo, off, oracle]);
    }
    report.checks.push(Check::new("sampled_inf_curvature", Relation::Equal, Quantity::computed(inf_k), Quantity::oracle(cfg.b_prime), tol));
    report.notes.push("inf K_P is sampled on the tested spheres".into());
    report.tables.push(table);
    Ok(report.finish())
}

/// Smallest eigenvalue of `Hess r − C_b(r)(g − dr ⊗ dr)` on the orthogonal
/// complement of `grad r`.
fn off_radial_margin(space: &SpaceForm, x: &DVector<f64>, o: &DVector<f64>, b: f64) -> Result<f64> {
    let d = space.distance_and_derivatives(x.as_slice(), o.as_slice())?;
    let c = cb(b, d.r)?;
    let frame = space.tangent_frame(x.as_slice())?;
    let gram = space.gram();
    let g = frame.transpose() * &gram * &d.grad;
    let comp = crate::linalg::orthonormal_complement(&DMatrix::from_column_slice(g.len(), 1, g.as_slice()));
    let h = frame.transpose() * &d.hess * &frame;
    let m = g.len();
    let margin = h - (DMatrix::identity(m, m) - &g * g.transpose()) * c;
    let restricted = comp.transpose() * margin * &comp;
    Ok(crate::linalg::symmetric_eigenvalues(&restricted).first().copied().unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_exponent_of_powers() {
        let ks: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = ks.iter().map(|k| 3.0 / k).collect();
        assert!((decay_exponent(&ks, &ys).unwrap() - 1.0).abs() < 1e-12);
        assert!(decay_exponent(&ks[..2], &ys[..2]).is_none());
    }
}
