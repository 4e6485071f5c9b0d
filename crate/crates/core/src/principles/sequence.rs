//! Weak, strong and penalized Hessian sequences on truncated charts.

use super::GrowthFunction;
use crate::error::{invalid, Error, Result};
use crate::immersions::{halton_box, oracle, ParametricImmersion, PointFrameData};
use crate::linalg::{null_space, symmetric_eigenvalues};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Value of a field together with its first and second covariant
/// derivatives in the orthonormal frame of [`PointFrameData`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDerivatives {
    pub value: f64,
    pub grad_frame: DVector<f64>,
    pub grad_norm: f64,
    pub hess_frame: DMatrix<f64>,
    pub hess_max_eig: f64,
}

impl FieldDerivatives {
    fn from_frame(value: f64, grad_frame: DVector<f64>, hess_frame: DMatrix<f64>) -> Self {
        let eig = symmetric_eigenvalues(&hess_frame);
        FieldDerivatives {
            value,
            grad_norm: grad_frame.norm(),
            hess_max_eig: eig.last().copied().unwrap_or(0.0),
            grad_frame,
            hess_frame,
        }
    }

    fn from_jet(jet: &oracle::FieldJet, data: &PointFrameData) -> Self {
        let c = &data.chart_to_frame;
        FieldDerivatives::from_frame(jet.value, c * &jet.partials, c * &jet.hessian * c.transpose())
    }
}

/// A scalar function on the chart of an immersion.
pub trait ScalarField: Sync {
    fn name(&self) -> String;

    fn value(&self, f: &ParametricImmersion, x: &[f64]) -> Result<f64>;

    /// Derivatives used by the sequence finders. Defaults to chart finite
    /// differences with step `h2`.
    fn derivatives(&self, f: &ParametricImmersion, x: &[f64]) -> Result<FieldDerivatives> {
        fd_derivatives(self, f, x, f.fd().h2)
    }

    /// Derivatives used to re-verify a finished record, computed along a path
    /// that does not share step sizes with [`ScalarField::derivatives`].
    fn verification_derivatives(&self, f: &ParametricImmersion, x: &[f64]) -> Result<FieldDerivatives> {
        fd_derivatives(self, f, x, 5e-4)
    }
}

fn fd_derivatives<S: ScalarField + ?Sized>(s: &S, f: &ParametricImmersion, x: &[f64], h: f64) -> Result<FieldDerivatives> {
    let data = f.fundamental_forms(x)?;
    let field = |y: &[f64]| s.value(f, y);
    let jet = oracle::field_jet(f, &field, x, h, 1e-4)?;
    Ok(FieldDerivatives::from_jet(&jet, &data))
}

/// The modified radial function `ψ_b ∘ r ∘ π_P ∘ f`, differentiated through
/// the composition formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedRadial {
    pub b: f64,
}

impl ScalarField for ModifiedRadial {
    fn name(&self) -> String {
        format!("modified_radial(b={})", self.b)
    }

    fn value(&self, f: &ParametricImmersion, x: &[f64]) -> Result<f64> {
        let y = f.evaluate(x)?;
        Ok(f.ambient().modified_radial_height(self.b, y.as_slice())?.h)
    }

    fn derivatives(&self, f: &ParametricImmersion, x: &[f64]) -> Result<FieldDerivatives> {
        let p = f.pullback_radial(x, self.b)?;
        Ok(FieldDerivatives::from_frame(p.g, p.grad_frame, p.hess_frame))
    }

    fn verification_derivatives(&self, f: &ParametricImmersion, x: &[f64]) -> Result<FieldDerivatives> {
        let data = f.fundamental_forms(x)?;
        let jet = oracle::radial_field_jet(f, x, self.b)?;
        Ok(FieldDerivatives::from_jet(&jet, &data))
    }
}

/// A field given directly as a function of chart coordinates.
#[derive(Clone)]
pub struct ChartField {
    pub label: String,
    pub func: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl ChartField {
    pub fn new(label: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ChartField { label: label.into(), func: Arc::new(func) }
    }
}

impl ScalarField for ChartField {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn value(&self, _f: &ParametricImmersion, x: &[f64]) -> Result<f64> {
        Ok((self.func)(x))
    }
}

/// Restricts the axial chart coordinates to `[−t, t]`. Entries without axial
/// coordinates are returned unchanged.
pub fn truncate(f: &ParametricImmersion, t: f64) -> Result<ParametricImmersion> {
    if !(t > 0.0) {
        return Err(invalid("truncation radius must be positive"));
    }
    let mut lower = f.lower().to_vec();
    let mut upper = f.upper().to_vec();
    for &i in f.axial_coords() {
        lower[i] = lower[i].max(-t);
        upper[i] = upper[i].min(t);
    }
    f.clone().with_box(lower, upper)
}

fn interior_margin(f: &ParametricImmersion) -> f64 {
    3.0 * f.fd().h2
}

/// Compass search for a maximum of `obj` inside the chart box.
fn compass_max(f: &ParametricImmersion, obj: &dyn Fn(&[f64]) -> Option<f64>, start: &[f64], value: f64) -> (Vec<f64>, f64) {
    let margin = interior_margin(f);
    let width = f.lower().iter().zip(f.upper()).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut step = 0.1 * width;
    let mut x = start.to_vec();
    let mut best = value;
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut c = x.clone();
                c[i] = (c[i] + sign * step).clamp(f.lower()[i] + margin, f.upper()[i] - margin);
                if c[i] == x[i] {
                    continue;
                }
                if let Some(v) = obj(&c) {
                    if v > best {
                        best = v;
                        x = c;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

fn on_boundary(f: &ParametricImmersion, x: &[f64]) -> bool {
    let tol = interior_margin(f) + 1e-6;
    let coords: Vec<usize> = if f.axial_coords().is_empty() { (0..x.len()).collect() } else { f.axial_coords().to_vec() };
    coords.iter().any(|&i| x[i] - f.lower()[i] <= tol || f.upper()[i] - x[i] <= tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceMode {
    Weak,
    Strong,
    Penalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceOptions {
    pub k_max: usize,
    /// Low-discrepancy samples used to estimate the supremum.
    pub samples: usize,
    /// Number of best samples refined by local ascent.
    pub refine_starts: usize,
    pub seed: u64,
    /// Slack on the Hessian condition for discretization error.
    pub tol: f64,
    /// Axial truncation radius; `None` uses the whole chart.
    pub truncation: Option<f64>,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions { k_max: 10, samples: 512, refine_starts: 5, seed: 0, tol: 1e-6, truncation: None }
    }
}

/// One term `x_k` of a sequence, or the record that none was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub k: usize,
    pub threshold: f64,
    pub found: bool,
    pub point: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub grad_norm: Option<f64>,
    pub hess_max_eig: Option<f64>,
    pub boundary_hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub mode: SequenceMode,
    pub field: String,
    pub truncation_radius: Option<f64>,
    /// Estimated supremum of the field on the truncation.
    pub g_star: f64,
    pub g_star_point: Vec<f64>,
    pub samples: usize,
    pub entries: Vec<SequenceEntry>,
}

impl SequenceRecord {
    /// One JSON object per `k`.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            let line = serde_json::json!({
                "mode": self.mode,
                "field": self.field,
                "truncation_radius": self.truncation_radius,
                "g_star": self.g_star,
                "entry": e,
            });
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn all_found(&self) -> bool {
        self.entries.iter().all(|e| e.found)
    }

    /// Re-checks every found entry with the field's verification
    /// derivatives, allowing `tol` on top of `1/k`.
    pub fn verify<S: ScalarField + ?Sized>(&self, f: &ParametricImmersion, field: &S, tol: f64) -> Result<Vec<bool>> {
        let f = match self.truncation_radius {
            Some(t) => truncate(f, t)?,
            None => f.clone(),
        };
        self.entries
            .iter()
            .filter(|e| e.found)
            .map(|e| {
                let x = e.point.as_ref().expect("found entries carry a point");
                let d = field.verification_derivatives(&f, x)?;
                let t = e.threshold;
                let value_ok = d.value > self.g_star - t - tol;
                let hess_ok = d.hess_max_eig <= t + tol;
                let grad_ok = self.mode != SequenceMode::Strong || d.grad_norm < t + tol;
                Ok(value_ok && hess_ok && grad_ok)
            })
            .collect()
    }
}

/// Estimated supremum: sampled values, then compass ascent from the best
/// `refine_starts` samples and from every point in `seeds`.
pub fn estimate_sup<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    opts: &SequenceOptions,
    seeds: &[Vec<f64>],
) -> Result<Vec<(Vec<f64>, f64)>> {
    let pts = halton_box(f.lower(), f.upper(), interior_margin(f), opts.samples.max(1), opts.seed);
    let mut scored: Vec<(Vec<f64>, f64)> =
        pts.into_iter().filter_map(|x| field.value(f, &x).ok().filter(|v| v.is_finite()).map(|v| (x, v))).collect();
    if scored.is_empty() {
        return Err(invalid("the field is undefined at every sample"));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let obj = |x: &[f64]| field.value(f, x).ok().filter(|v| v.is_finite());
    let mut starts: Vec<(Vec<f64>, f64)> = scored.iter().take(opts.refine_starts).cloned().collect();
    for s in seeds {
        if f.is_interior(s, interior_margin(f)) {
            if let Some(v) = obj(s) {
                starts.push((s.clone(), v));
            }
        }
    }
    let mut refined: Vec<(Vec<f64>, f64)> = starts.iter().map(|(x, v)| compass_max(f, &obj, x, *v)).collect();
    refined.extend(scored);
    refined.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(refined)
}

fn hessian_sequence<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    opts: &SequenceOptions,
    mode: SequenceMode,
) -> Result<SequenceRecord> {
    if opts.k_max == 0 || opts.k_max > 20 {
        return Err(invalid("k_max must lie in 1..=20"));
    }
    let f = match opts.truncation {
        Some(t) => truncate(f, t)?,
        None => f.clone(),
    };
    let candidates = estimate_sup(&f, field, opts, &[])?;
    let (g_star_point, g_star) = candidates[0].clone();
    if !g_star.is_finite() {
        return Err(Error::Hypothesis("the field is not bounded above on the truncation".into()));
    }
    let mut cache: Vec<Option<Option<FieldDerivatives>>> = vec![None; candidates.len()];
    let mut entries = Vec::with_capacity(opts.k_max);
    for k in 1..=opts.k_max {
        let t = 1.0 / k as f64;
        let mut chosen = None;
        for (i, (x, v)) in candidates.iter().enumerate() {
            if *v <= g_star - t {
                break;
            }
            let d = cache[i].get_or_insert_with(|| field.derivatives(&f, x).ok());
            if let Some(d) = d {
                let ok =
                    d.hess_max_eig <= t + opts.tol && (mode == SequenceMode::Weak || d.grad_norm < t);
                if ok {
                    chosen = Some((x.clone(), d.clone()));
                    break;
                }
            }
        }
        entries.push(match chosen {
            Some((x, d)) => SequenceEntry {
                k,
                threshold: t,
                found: true,
                boundary_hit: on_boundary(&f, &x),
                point: Some(x),
                value: Some(d.value),
                grad_norm: Some(d.grad_norm),
                hess_max_eig: Some(d.hess_max_eig),
            },
            None => SequenceEntry {
                k,
                threshold: t,
                found: false,
                point: None,
                value: None,
                grad_norm: None,
                hess_max_eig: None,
                boundary_hit: false,
            },
        });
    }
    Ok(SequenceRecord {
        mode,
        field: field.name(),
        truncation_radius: opts.truncation,
        g_star,
        g_star_point,
        samples: opts.samples,
        entries,
    })
}

/// Points with `g(x_k) > g* − 1/k` and `Hess g(x_k) ≤ (1/k)⟨,⟩`.
pub fn weak_hessian_sequence<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    opts: &SequenceOptions,
) -> Result<SequenceRecord> {
    hessian_sequence(f, field, opts, SequenceMode::Weak)
}

/// As [`weak_hessian_sequence`] with `‖grad g(x_k)‖ < 1/k` added.
pub fn strong_hessian_sequence<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    opts: &SequenceOptions,
) -> Result<SequenceRecord> {
    hessian_sequence(f, field, opts, SequenceMode::Strong)
}

#[derive(Clone, Debug)]
pub struct PenalizedOptions {
    pub k_max: usize,
    pub samples: usize,
    pub refine_starts: usize,
    pub seed: u64,
    /// Axial truncation radius.
    pub truncation: f64,
    /// Reference point `x_0` in chart coordinates.
    pub x0: Vec<f64>,
    /// Tolerance for the Hessian inequality.
    pub tol: f64,
}

/// Relative tolerance and absolute floor for the gradient identity.
pub const GRADIENT_IDENTITY_RTOL: f64 = 1e-5;
pub const GRADIENT_IDENTITY_FLOOR: f64 = 1e-8;
/// Axial coordinates closer than this to the pole are tried at the pole.
pub const POLE_SNAP: f64 = 1e-3;

/// The maximizer `x_k` of `g_k = (g − g(x_0) + 1)/φ^{1/k}` and the identities
/// it must satisfy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenalizedEntry {
    pub k: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub penalized_value: f64,
    /// `|z(x_k)|`.
    pub axial_distance: f64,
    pub phi: f64,
    pub varsigma: f64,
    /// `(g(x_k) − g(x_0) + 1)/(k φ(x_k))`.
    pub coefficient: f64,
    pub grad_g: DVector<f64>,
    pub grad_phi: DVector<f64>,
    pub gradient_residual: f64,
    pub gradient_scale: f64,
    pub gradient_identity_holds: bool,
    /// Smallest eigenvalue of `c·Hess φ − Hess g` on `V = {X : X_Q = 0}`.
    pub hessian_margin: f64,
    pub hessian_inequality_holds: bool,
    /// Orthonormal frame components spanning `V`.
    pub v_basis: DMatrix<f64>,
    pub boundary_hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenalizedRecord {
    pub field: String,
    pub x0: Vec<f64>,
    pub g_x0: f64,
    pub truncation_radius: f64,
    pub entries: Vec<PenalizedEntry>,
    /// `g(x_k)` nondecreasing in `k` up to `1e−9`.
    pub monotone_values: bool,
}

impl PenalizedRecord {
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            let line = serde_json::json!({
                "mode": SequenceMode::Penalized,
                "field": self.field,
                "truncation_radius": self.truncation_radius,
                "entry": e,
            });
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Frame components of vectors tangent to `M` with zero `Q` part.
pub fn p_tangent_subspace(f: &ParametricImmersion, data: &PointFrameData) -> DMatrix<f64> {
    let kp = f.ambient().factor_p().coord_dim();
    let e_q = data.tangent_frame.rows(kp, data.tangent_frame.nrows() - kp).into_owned();
    null_space(&e_q, 1e-9)
}

/// Unit radial direction of `Q` at `f(x)` in ambient coordinates, or zero at
/// the pole.
fn axial_direction(f: &ParametricImmersion, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let kp = f.ambient().factor_p().coord_dim();
    let z = y.rows(kp, y.len() - kp);
    let r = z.norm();
    let mut u = DVector::zeros(y.len());
    if r > 1e-12 {
        u.rows_mut(kp, y.len() - kp).copy_from(&(z / r));
    }
    (r, u)
}

/// Maximizes `g_k` on the truncation for `k = 1..k_max` and checks the
/// gradient identity and the Hessian inequality at each maximizer.
pub fn penalized_sequence<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    varsigma: &GrowthFunction,
    opts: &PenalizedOptions,
) -> Result<PenalizedRecord> {
    if f.dims().l == 0 {
        return Err(Error::Hypothesis("the penalized construction needs a product ambient with l ≥ 1".into()));
    }
    if varsigma.integral_diverges == Some(false) {
        return Err(Error::Hypothesis("the growth function must satisfy ∫ 1/ς = ∞".into()));
    }
    if opts.k_max == 0 || opts.k_max > 20 {
        return Err(invalid("k_max must lie in 1..=20"));
    }
    let f = truncate(f, opts.truncation)?;
    let g_x0 = field.value(&f, &opts.x0)?;
    let ambient = f.ambient().clone();
    let log_phi = |x: &[f64]| -> Option<(f64, f64)> {
        let y = f.evaluate(x).ok()?;
        let g = field.value(&f, x).ok()?;
        let t = ambient.axial_distance(y.as_slice()).ok()?;
        Some((g, varsigma.reciprocal_integral(t)))
    };
    let pts = halton_box(f.lower(), f.upper(), interior_margin(&f), opts.samples.max(1), opts.seed);
    let scored: Vec<(Vec<f64>, f64, f64)> =
        pts.into_iter().filter_map(|x| log_phi(&x).map(|(g, lp)| (x, g, lp))).collect();
    if scored.is_empty() {
        return Err(invalid("the field is undefined at every sample"));
    }
    let mut entries = Vec::with_capacity(opts.k_max);
    for k in 1..=opts.k_max {
        let kf = k as f64;
        let gk = |x: &[f64]| log_phi(x).map(|(g, lp)| (g - g_x0 + 1.0) * (-lp / kf).exp());
        let mut ranked: Vec<(Vec<f64>, f64)> =
            scored.iter().map(|(x, g, lp)| (x.clone(), (g - g_x0 + 1.0) * (-lp / kf).exp())).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (mut x, mut best) = ranked
            .iter()
            .take(opts.refine_starts.max(1))
            .map(|(x, v)| compass_max(&f, &gk, x, *v))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one start");
        // The penalty has a kink at the pole of Q; direct search only gets
        // close to it, so try the pole itself.
        for &i in f.axial_coords() {
            if x[i].abs() < POLE_SNAP {
                let mut c = x.clone();
                c[i] = 0.0;
                if let Some(v) = gk(&c) {
                    if v >= best {
                        best = v;
                        x = c;
                    }
                }
            }
        }
        entries.push(penalized_entry(&f, field, varsigma, k, x, best, g_x0, opts.tol)?);
    }
    let monotone_values = entries.windows(2).all(|w| w[1].value >= w[0].value - 1e-9);
    Ok(PenalizedRecord {
        field: field.name(),
        x0: opts.x0.clone(),
        g_x0,
        truncation_radius: opts.truncation,
        entries,
        monotone_values,
    })
}

#[allow(clippy::too_many_arguments)]
fn penalized_entry<S: ScalarField + ?Sized>(
    f: &ParametricImmersion,
    field: &S,
    varsigma: &GrowthFunction,
    k: usize,
    x: Vec<f64>,
    penalized_value: f64,
    g_x0: f64,
    tol: f64,
) -> Result<PenalizedEntry> {
    let data = f.fundamental_forms(&x)?;
    let d = field.derivatives(f, &x)?;
    let gram = f.ambient().gram();
    let (t, u) = axial_direction(f, &data.ambient_point);
    let phi = varsigma.reciprocal_integral(t).exp();
    let s = varsigma.eval(t);
    let coefficient = (d.value - g_x0 + 1.0) / (k as f64 * phi);
    // grad φ = (φ/ς) (grad^Q |z|)^T.
    let grad_phi = data.tangent_frame.transpose() * &gram * &u * (phi / s);
    let rhs = &grad_phi * coefficient;
    let gradient_residual = (&d.grad_frame - &rhs).norm();
    let gradient_scale = d.grad_norm.max(rhs.norm());
    let gradient_identity_holds =
        gradient_residual <= GRADIENT_IDENTITY_RTOL * gradient_scale + GRADIENT_IDENTITY_FLOOR;

    // On V, Hess φ(X, X) = (φ/ς) ⟨grad^Q|z|, α(X, X)⟩.
    let v = p_tangent_subspace(f, &data);
    let w = data.normal_frame.transpose() * &gram * &u;
    let m = data.tangent_frame.ncols();
    let mut along = DMatrix::zeros(m, m);
    for (i, a) in data.second_fundamental_form.matrices().iter().enumerate() {
        along += a * w[i];
    }
    let hess_phi_v = v.transpose() * along * &v * (phi / s);
    let hess_g_v = v.transpose() * &d.hess_frame * &v;
    let diff = hess_phi_v * coefficient - hess_g_v;
    let hessian_margin = symmetric_eigenvalues(&diff).first().copied().unwrap_or(0.0);
    Ok(PenalizedEntry {
        k,
        boundary_hit: on_boundary(f, &x),
        point: x,
        value: d.value,
        penalized_value,
        axial_distance: t,
        phi,
        varsigma: s,
        coefficient,
        grad_g: d.grad_frame,
        grad_phi,
        gradient_residual,
        gradient_scale,
        gradient_identity_holds,
        hessian_inequality_holds: hessian_margin >= -tol,
        hessian_margin,
        v_basis: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersions::catalog;
    use serde_json::json;

    fn small() -> SequenceOptions {
        SequenceOptions { samples: 64, k_max: 5, ..SequenceOptions::default() }
    }

    #[test]
    fn compact_sphere_has_every_term() {
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": 0.0, "m": 3, "R": 2.0})).unwrap();
        let rec = weak_hessian_sequence(&f, &ModifiedRadial { b: 0.0 }, &small()).unwrap();
        assert!(rec.all_found());
        assert!((rec.g_star - 4.0).abs() < 1e-12);
        assert!(rec.verify(&f, &ModifiedRadial { b: 0.0 }, 1e-5).unwrap().into_iter().all(|ok| ok));
    }

    #[test]
    fn plane_peak_at_the_origin() {
        let f = catalog("flat_plane", &json!({"m": 2})).unwrap();
        let field = ChartField::new("-rho^2", |x: &[f64]| -(x[0] * x[0] + x[1] * x[1]));
        let rec = strong_hessian_sequence(&f, &field, &small()).unwrap();
        assert!(rec.all_found());
        assert!(rec.g_star.abs() < 1e-12);
        for e in &rec.entries {
            assert!((e.hess_max_eig.unwrap() + 2.0).abs() < 1e-4);
        }
        assert!(rec.verify(&f, &field, 1e-5).unwrap().into_iter().all(|ok| ok));
        assert_eq!(rec.to_json_lines().unwrap().lines().count(), 5);
    }

    #[test]
    fn unbounded_hessian_records_misses() {
        // g = x² on a line segment: the maximum sits on the boundary where
        // Hess g = 2 > 1/k, so no term qualifies.
        let f = catalog("flat_plane", &json!({"m": 1})).unwrap();
        let field = ChartField::new("x^2", |x: &[f64]| x[0] * x[0]);
        let rec = weak_hessian_sequence(&f, &field, &small()).unwrap();
        assert!(rec.entries.iter().all(|e| !e.found));
    }

    #[test]
    fn penalized_cylinder() {
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": 0.0, "m": 3, "R": 2.0, "l": 1})).unwrap();
        for s in [GrowthFunction::constant(1.0).unwrap(), GrowthFunction::power(1.0, 1.0).unwrap()] {
            let opts = PenalizedOptions {
                k_max: 4,
                samples: 64,
                refine_starts: 3,
                seed: 1,
                truncation: 3.0,
                x0: vec![1.2, 0.3, 1.0],
                tol: 1e-6,
            };
            let rec = penalized_sequence(&f, &ModifiedRadial { b: 0.0 }, &s, &opts).unwrap();
            for e in &rec.entries {
                assert_eq!(e.axial_distance, 0.0);
                assert!(e.gradient_identity_holds, "{e:?}");
                assert!(e.hessian_inequality_holds);
                assert!(!e.boundary_hit);
                assert_eq!(e.v_basis.ncols(), 2);
            }
            assert!(rec.monotone_values);
        }
    }

    #[test]
    fn truncation_limits_axial_coordinates() {
        let f = catalog("flat_cylinder", &json!({"R": 1.0})).unwrap();
        let t = truncate(&f, 2.0).unwrap();
        assert_eq!(t.lower()[1], -2.0);
        assert_eq!(t.upper()[0], f.upper()[0]);
    }
}
