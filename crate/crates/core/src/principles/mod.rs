//! Maximum-principle machinery: decay and growth hypothesis checkers and
//! Hessian sequence finders on truncated chart domains.

pub mod sequence;

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub use sequence::{
    penalized_sequence, strong_hessian_sequence, truncate, weak_hessian_sequence, ChartField, FieldDerivatives,
    ModifiedRadial, PenalizedEntry, PenalizedOptions, PenalizedRecord, ScalarField, SequenceEntry, SequenceMode,
    SequenceOptions, SequenceRecord,
};

/// `log` iterated `j` times.
pub fn iterated_log(t: f64, j: usize) -> f64 {
    (0..j).fold(t, |v, _| v.ln())
}

/// `exp` iterated `j` times starting at 1: the point where `log^{(j)}` is 1.
pub fn iterated_exp_one(j: usize) -> f64 {
    (0..j).fold(1.0, |v: f64, _| v.exp())
}

/// A positive function of `t ≥ 0`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `A² t² ∏_{j=1..J} (log^{(j)} t)²` for `t ≥ exp^{(J)}(1)`, constant below.
    LogFamily { a: f64, j: usize },
    /// `c (shift + t)^exponent`.
    Power { c: f64, shift: f64, exponent: f64 },
    /// `Σ coeffs[i] tⁱ`.
    Polynomial { coeffs: Vec<f64> },
    /// Monotone cubic interpolation of samples, constant outside their range.
    Tabulated { t: Vec<f64>, v: Vec<f64> },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::LogFamily { a, j } => write!(f, "LogFamily {{ a: {a}, j: {j} }}"),
            Profile::Power { c, shift, exponent } => write!(f, "Power {{ c: {c}, shift: {shift}, exponent: {exponent} }}"),
            Profile::Polynomial { coeffs } => write!(f, "Polynomial {coeffs:?}"),
            Profile::Tabulated { t, .. } => write!(f, "Tabulated ({} samples)", t.len()),
            Profile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::LogFamily { a, j } => write!(f, "F(A={a},J={j})"),
            Profile::Power { c, shift, exponent } => write!(f, "{c}({shift}+t)^{exponent}"),
            Profile::Polynomial { coeffs } => {
                let terms: Vec<String> = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(i, c)| match i {
                        0 => format!("{c}"),
                        1 => format!("{c}t"),
                        _ => format!("{c}t^{i}"),
                    })
                    .collect();
                if terms.is_empty() {
                    write!(f, "0")
                } else {
                    write!(f, "{}", terms.join("+"))
                }
            }
            Profile::Tabulated { t, .. } => write!(f, "tabulated({})", t.len()),
            Profile::Custom(_) => write!(f, "custom"),
        }
    }
}

impl PartialEq for Profile {
    fn eq(&self, other: &Self) -> bool {
        use Profile::*;
        match (self, other) {
            (LogFamily { a, j }, LogFamily { a: a2, j: j2 }) => a == a2 && j == j2,
            (Power { c, shift, exponent }, Power { c: c2, shift: s2, exponent: e2 }) => {
                c == c2 && shift == s2 && exponent == e2
            }
            (Polynomial { coeffs }, Polynomial { coeffs: c2 }) => coeffs == c2,
            (Tabulated { t, v }, Tabulated { t: t2, v: v2 }) => t == t2 && v == v2,
            (Custom(f), Custom(g)) => Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl Profile {
    pub fn constant(c: f64) -> Profile {
        Profile::Polynomial { coeffs: vec![c] }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Profile {
        Profile::Custom(Arc::new(f))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::LogFamily { a, j } if !(*a > 0.0) || *j < 1 => Err(invalid("log family needs A > 0 and J ≥ 1")),
            Profile::Power { c, shift, .. } if !(*c > 0.0) || !(*shift > 0.0) => {
                Err(invalid("power profile needs c > 0 and shift > 0"))
            }
            Profile::Polynomial { coeffs } if coeffs.is_empty() => Err(invalid("polynomial profile needs coefficients")),
            Profile::Tabulated { t, v } => {
                if t.len() != v.len() || t.len() < 2 {
                    return Err(invalid("tabulated profile needs at least two (t, v) pairs"));
                }
                if t.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(invalid("tabulated profile abscissae must increase"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::LogFamily { a, j } => {
                let start = iterated_exp_one(*j);
                let s = t.max(start);
                let logs: f64 = (1..=*j).map(|i| iterated_log(s, i)).product();
                (a * s * logs).powi(2)
            }
            Profile::Power { c, shift, exponent } => c * (shift + t).powf(*exponent),
            Profile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Profile::Tabulated { t: ts, v } => monotone_cubic(ts, v, t),
            Profile::Custom(f) => f(t),
        }
    }
}

/// Fritsch-Carlson monotone cubic Hermite interpolation.
pub fn monotone_cubic(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if t <= ts[0] {
        return vs[0];
    }
    if t >= ts[n - 1] {
        return vs[n - 1];
    }
    let delta: Vec<f64> = (0..n - 1).map(|i| (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 { 0.0 } else { 0.5 * (delta[i - 1] + delta[i]) };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta[i];
        let b = m[i + 1] / delta[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * a * delta[i];
            m[i + 1] = tau * b * delta[i];
        }
    }
    let i = ts.partition_point(|&x| x <= t) - 1;
    let h = ts[i + 1] - ts[i];
    let s = (t - ts[i]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * vs[i] + h10 * h * m[i] + h01 * vs[i + 1] + h11 * h * m[i + 1]
}

/// Three-valued outcome of a heuristic check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

/// Slack allowed in log-log slope comparisons.
pub const SLOPE_TOL: f64 = 1e-3;
/// Deepest iterated-log comparison family used by the divergence test.
pub const MAX_LOG_DEPTH: usize = 3;

/// `1/(t ∏_{j≤depth} log^{(j)} t)`: integrals of these diverge.
fn divergent_family(t: f64, depth: usize) -> f64 {
    let logs: f64 = (1..=depth).map(|j| iterated_log(t, j)).product();
    1.0 / (t * logs)
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    ls_slope(&lx, &ly)
}

fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Comparison of a positive integrand's tail with the divergent family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailComparison {
    pub tail_start: f64,
    pub tail_end: f64,
    /// Log-log slope of the integrand itself.
    pub integrand_slope: f64,
    /// `(depth, slope of integrand / family)` for each usable depth.
    pub ratio_slopes: Vec<(usize, f64)>,
    pub outcome: Outcome,
}

/// Decides whether `∫^∞ u = ∞` by comparing the tail of `u` on
/// `[√t_max, t_max]` with `1/(t ∏ log^{(j)} t)`.
///
/// Passes when `u` divided by some family member does not decay; fails when
/// `u` decays faster than `1/t` and faster than every family member;
/// anything else is inconclusive.
pub fn tail_divergence(u: impl Fn(f64) -> f64, t_max: f64) -> TailComparison {
    let start = t_max.sqrt().max(1.0 + 1e-9);
    let grid = geometric_grid(start, t_max, 200);
    let vals: Vec<f64> = grid.iter().map(|&t| u(t)).collect();
    if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return TailComparison {
            tail_start: start,
            tail_end: t_max,
            integrand_slope: f64::NAN,
            ratio_slopes: Vec::new(),
            outcome: Outcome::Inconclusive,
        };
    }
    let integrand_slope = log_log_slope(&grid, &vals);
    let mut ratio_slopes = Vec::new();
    for depth in 0..=MAX_LOG_DEPTH {
        // The family must be defined with log^{(depth)} ≥ 1 on the whole tail.
        if iterated_exp_one(depth) > start {
            continue;
        }
        let ratio: Vec<f64> = grid.iter().zip(&vals).map(|(&t, v)| v / divergent_family(t, depth)).collect();
        ratio_slopes.push((depth, log_log_slope(&grid, &ratio)));
    }
    let outcome = if ratio_slopes.iter().any(|(_, s)| *s >= -SLOPE_TOL) {
        Outcome::Pass
    } else if integrand_slope < -1.0 && !ratio_slopes.is_empty() {
        Outcome::Fail
    } else {
        Outcome::Inconclusive
    };
    TailComparison { tail_start: start, tail_end: t_max, integrand_slope, ratio_slopes, outcome }
}

/// A function `F` for the decay hypothesis on the radial curvature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFunction {
    pub profile: Profile,
}

impl DecayFunction {
    /// The family `A² t² ∏_{j=1..J} (log^{(j)} t)²`, extended by a constant.
    pub fn log_family(a: f64, j: usize) -> Result<Self> {
        DecayFunction::new(Profile::LogFamily { a, j })
    }

    pub fn new(profile: Profile) -> Result<Self> {
        profile.validate()?;
        Ok(DecayFunction { profile })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    /// The bound `−A² ρ² ∏ (log^{(j)} ρ)²`, i.e. `−F(ρ)`, on the radial
    /// curvature at distance `ρ`.
    pub fn curvature_floor(&self, rho: f64) -> f64 {
        -self.eval(rho)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub t_max: f64,
    pub f_at_zero: f64,
    /// `F(0) > 0`.
    pub positive_at_zero: bool,
    /// `F' ≥ 0` on a dense grid.
    pub nondecreasing: bool,
    /// First grid interval where `F` decreased, if any.
    pub first_decrease: Option<(f64, f64)>,
    /// `1/√F ∉ L¹`.
    pub divergence: TailComparison,
    pub passed: bool,
}

fn dense_grid(t_max: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=400).map(|i| i as f64 * 10.0 / 400.0).collect();
    if t_max > 10.0 {
        g.extend(geometric_grid(10.0, t_max, 2000).into_iter().skip(1));
    }
    g
}

pub fn decay_condition_check(f: &DecayFunction, t_max: f64) -> Result<DecayReport> {
    if !(t_max >= 10.0) {
        return Err(invalid("decay_condition_check needs t_max ≥ 10"));
    }
    let f0 = f.eval(0.0);
    let grid = dense_grid(t_max);
    let vals: Vec<f64> = grid.iter().map(|&t| f.eval(t)).collect();
    let first_decrease = grid
        .windows(2)
        .zip(vals.windows(2))
        .find(|(_, v)| v[1] < v[0] * (1.0 - 1e-12) || !v[1].is_finite())
        .map(|(t, _)| (t[0], t[1]));
    let divergence = tail_divergence(|t| 1.0 / f.eval(t).sqrt(), t_max);
    let positive_at_zero = f0 > 0.0;
    let nondecreasing = first_decrease.is_none();
    let passed = positive_at_zero && nondecreasing && divergence.outcome == Outcome::Pass;
    Ok(DecayReport { t_max, f_at_zero: f0, positive_at_zero, nondecreasing, first_decrease, divergence, passed })
}

/// A growth profile `ς` for the second fundamental form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthFunction {
    pub profile: Profile,
    /// `∫₀^∞ 1/ς = ∞`, filled in by [`growth_condition_check`].
    pub integral_diverges: Option<bool>,
    /// `limsup 1/ς < ∞`, filled in by [`growth_condition_check`].
    pub limsup_reciprocal_finite: Option<bool>,
}

impl GrowthFunction {
    pub fn new(profile: Profile) -> Result<Self> {
        profile.validate()?;
        Ok(GrowthFunction { profile, integral_diverges: None, limsup_reciprocal_finite: None })
    }

    pub fn constant(c: f64) -> Result<Self> {
        GrowthFunction::new(Profile::constant(c))
    }

    /// `c (1 + t)^exponent`.
    pub fn power(c: f64, exponent: f64) -> Result<Self> {
        GrowthFunction::new(Profile::Power { c, shift: 1.0, exponent })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    /// `∫₀^t ds/ς(s)`: closed form for power profiles, otherwise composite
    /// Simpson with 64 panels per unit length.
    pub fn reciprocal_integral(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Power { c, shift, exponent } if shift > 0.0 => {
                if exponent == 1.0 {
                    ((shift + t) / shift).ln() / c
                } else {
                    let e = 1.0 - exponent;
                    ((shift + t).powf(e) - shift.powf(e)) / (c * e)
                }
            }
            _ => simpson(|s| 1.0 / self.eval(s), 0.0, t, 64),
        }
    }

    /// Runs the checker and records its flags on `self`.
    pub fn checked(mut self, t_max: f64) -> Result<(Self, GrowthReport)> {
        let report = growth_condition_check(&self, t_max)?;
        self.integral_diverges = Some(report.integral.outcome == Outcome::Pass);
        self.limsup_reciprocal_finite = Some(report.limsup == Outcome::Pass);
        Ok((self, report))
    }
}

/// Composite Simpson rule on `[a, b]` with `panels_per_unit` panels per unit
/// length (at least two, always even).
pub fn simpson(u: impl Fn(f64) -> f64, a: f64, b: f64, panels_per_unit: usize) -> f64 {
    let len = (b - a).abs();
    if len == 0.0 {
        return 0.0;
    }
    let mut n = ((len * panels_per_unit as f64).ceil() as usize).max(2);
    n += n % 2;
    let h = (b - a) / n as f64;
    let mut s = u(a) + u(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * u(a + i as f64 * h);
    }
    s * h / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub t_max: f64,
    pub positive: bool,
    /// `∫₀^∞ 1/ς = ∞`.
    pub integral: TailComparison,
    /// `limsup 1/ς < ∞`.
    pub limsup: Outcome,
    pub reciprocal_tail_slope: f64,
    /// The growth hypothesis of the penalized construction.
    pub first_theorem_ok: bool,
    /// The hypersurface variant needs both conditions.
    pub second_theorem_ok: bool,
}

pub fn growth_condition_check(s: &GrowthFunction, t_max: f64) -> Result<GrowthReport> {
    if !(t_max >= 10.0) {
        return Err(invalid("growth_condition_check needs t_max ≥ 10"));
    }
    let grid = dense_grid(t_max);
    let positive = grid.iter().all(|&t| s.eval(t) > 0.0);
    let integral = tail_divergence(|t| 1.0 / s.eval(t), t_max);
    let tail = geometric_grid(t_max.sqrt(), t_max, 200);
    let recip: Vec<f64> = tail.iter().map(|&t| 1.0 / s.eval(t)).collect();
    let reciprocal_tail_slope = if positive { log_log_slope(&tail, &recip) } else { f64::NAN };
    let limsup = if !positive {
        Outcome::Fail
    } else if reciprocal_tail_slope <= SLOPE_TOL {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    let first_theorem_ok = positive && integral.outcome == Outcome::Pass;
    let second_theorem_ok = first_theorem_ok && limsup == Outcome::Pass;
    Ok(GrowthReport { t_max, positive, integral, limsup, reciprocal_tail_slope, first_theorem_ok, second_theorem_ok })
}
