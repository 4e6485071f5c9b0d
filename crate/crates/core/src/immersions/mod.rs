//! Chart-based immersions into model ambients and their curvature data.
//!
//! Derivatives of the chart map are central finite differences. All point
//! data is expressed in an orthonormal tangent frame and an orthonormal normal
//! frame, so the second fundamental form is an ordinary [`BilinearForm`].

pub mod catalog;
pub mod oracle;
pub mod tabulated;

use crate::error::{invalid, Error, Result};
use crate::forms::BilinearForm;
use crate::grassmann::{minmax_functional, MinMaxResult, Plane, SearchConfig};
use crate::spaces::{orthonormalize_in, ProductSpace};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub use catalog::{catalog, catalog_names, CatalogInfo};

/// Evaluation of a chart map into ambient embedding coordinates.
pub type ChartMap = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Finite-difference steps in chart units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    /// Step for first derivatives.
    pub h1: f64,
    /// Step for second derivatives.
    pub h2: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { h1: 1e-5, h2: 1e-4 }
    }
}

/// `(m, n, l, p)`: dimensions of `M`, `P`, `Q`, and the codimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub p: usize,
}

impl Dims {
    /// Whether the codimension hypothesis `p < m − l` holds.
    pub fn codimension_ok(&self) -> bool {
        self.m > self.l && self.p < self.m - self.l
    }
}

/// An immersion `f: box ⊂ R^m → P × Q` given by a chart map.
#[derive(Clone)]
pub struct ParametricImmersion {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    map: ChartMap,
    ambient: ProductSpace,
    fd: FdConfig,
    axial: Vec<usize>,
    info: CatalogInfo,
}

impl fmt::Debug for ParametricImmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricImmersion")
            .field("name", &self.name)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("ambient", &self.ambient)
            .field("fd", &self.fd)
            .finish_non_exhaustive()
    }
}

impl ParametricImmersion {
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        ambient: ProductSpace,
        map: ChartMap,
    ) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("chart box bounds must have equal, nonzero length"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(invalid("chart box must have lower < upper in every coordinate"));
        }
        if lower.len() > ambient.dim() {
            return Err(invalid(format!(
                "a {}-dimensional chart cannot immerse into a {}-dimensional ambient",
                lower.len(),
                ambient.dim()
            )));
        }
        Ok(ParametricImmersion {
            name: name.into(),
            lower,
            upper,
            map,
            ambient,
            fd: FdConfig::default(),
            axial: Vec::new(),
            info: CatalogInfo::default(),
        })
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    /// Declares which chart coordinates parametrize the `Q` factor.
    pub fn with_axial_coords(mut self, axial: Vec<usize>) -> Self {
        self.axial = axial;
        self
    }

    pub fn with_info(mut self, info: CatalogInfo) -> Self {
        self.info = info;
        self
    }

    /// Re-centers the radial function at another point of `P`.
    pub fn with_basepoint(mut self, o: DVector<f64>) -> Result<Self> {
        self.ambient = self.ambient.with_basepoint(o)?;
        self.info.extrinsic_radius = None;
        Ok(self)
    }

    /// Restricts the chart box (used for truncations).
    pub fn with_box(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != self.lower.len() || upper.len() != self.upper.len() {
            return Err(invalid("replacement box has the wrong dimension"));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient(&self) -> &ProductSpace {
        &self.ambient
    }

    pub fn fd(&self) -> FdConfig {
        self.fd
    }

    pub fn info(&self) -> &CatalogInfo {
        &self.info
    }

    pub fn axial_coords(&self) -> &[usize] {
        &self.axial
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dims(&self) -> Dims {
        let m = self.lower.len();
        let n = self.ambient.factor_p().dim();
        let l = self.ambient.factor_q().dim();
        Dims { m, n, l, p: n + l - m }
    }

    /// Evaluates the chart map, checking dimensions and ambient membership.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.lower.len() {
            return Err(Error::DimensionMismatch { expected: self.lower.len(), found: x.len() });
        }
        let y = (self.map)(x);
        if y.len() != self.ambient.coord_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient.coord_dim(), found: y.len() });
        }
        if !self.ambient.contains(y.as_slice(), 1e-8) {
            return Err(Error::ImmersionViolation {
                point: x.to_vec(),
                reason: "image point does not lie on the ambient model".into(),
            });
        }
        Ok(y)
    }

    pub(crate) fn eval_raw(&self, x: &[f64]) -> DVector<f64> {
        (self.map)(x)
    }

    /// Whether `x` lies in the box at distance at least `margin` from its faces.
    pub fn is_interior(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.lower.len()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *v >= a + margin && *v <= b - margin)
    }

    fn require_interior(&self, x: &[f64]) -> Result<()> {
        if !self.is_interior(x, 2.0 * self.fd.h2) {
            return Err(invalid(format!("chart point {x:?} is not interior by 2·h2 = {}", 2.0 * self.fd.h2)));
        }
        Ok(())
    }

    /// Jacobian columns by central differences, using the realized steps.
    pub(crate) fn jacobian(&self, x: &[f64], h: f64) -> DMatrix<f64> {
        let m = x.len();
        let mut cols = Vec::with_capacity(m);
        for i in 0..m {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let span = plus[i] - minus[i];
            cols.push((self.eval_raw(&plus) - self.eval_raw(&minus)) / span);
        }
        DMatrix::from_columns(&cols)
    }

    /// Second derivatives `f_ij` by central differences.
    fn second_derivatives(&self, x: &[f64], h: f64) -> Vec<Vec<DVector<f64>>> {
        let m = x.len();
        let f0 = self.eval_raw(x);
        let shifted = |i: usize, si: f64, j: usize, sj: f64| {
            let mut y = x.to_vec();
            y[i] += si * h;
            y[j] += sj * h;
            y
        };
        let mut out = vec![vec![DVector::zeros(f0.len()); m]; m];
        for i in 0..m {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let hp = plus[i] - x[i];
            let hm = x[i] - minus[i];
            let fp = self.eval_raw(&plus);
            let fm = self.eval_raw(&minus);
            out[i][i] = ((&fp - &f0) / hp - (&f0 - &fm) / hm) * (2.0 / (hp + hm));
            for j in (i + 1)..m {
                let pp = shifted(i, 1.0, j, 1.0);
                let pm = shifted(i, 1.0, j, -1.0);
                let mp = shifted(i, -1.0, j, 1.0);
                let mm = shifted(i, -1.0, j, -1.0);
                let di = pp[i] - mp[i];
                let dj = pp[j] - pm[j];
                let v = (self.eval_raw(&pp) - self.eval_raw(&pm) - self.eval_raw(&mp) + self.eval_raw(&mm)) / (di * dj);
                out[i][j] = v.clone();
                out[j][i] = v;
            }
        }
        out
    }

    /// Induced metric, frames, and second fundamental form at `x`.
    pub fn fundamental_forms(&self, x: &[f64]) -> Result<PointFrameData> {
        self.require_interior(x)?;
        let y = self.evaluate(x)?;
        let ys = y.as_slice();
        let dims = self.dims();
        let m = dims.m;
        let raw = self.jacobian(x, self.fd.h1);
        let cols: Vec<DVector<f64>> =
            (0..m).map(|i| self.ambient.tangent_projection(ys, raw.column(i).as_slice())).collect();
        let jac = DMatrix::from_columns(&cols);
        let gram = self.ambient.gram();
        let metric = jac.transpose() * &gram * &jac;
        let metric = (&metric + metric.transpose()) * 0.5;
        let eig = crate::linalg::symmetric_eigenvalues(&metric);
        if !(eig[0] > 1e-10 * eig[m - 1].max(1e-300)) {
            return Err(Error::ImmersionViolation {
                point: x.to_vec(),
                reason: format!("Jacobian is rank deficient (metric eigenvalues {eig:?})"),
            });
        }
        let chol = metric.clone().cholesky().ok_or_else(|| Error::ImmersionViolation {
            point: x.to_vec(),
            reason: "induced metric is not positive definite".into(),
        })?;
        let l = chol.l();
        let c = l.clone().try_inverse().ok_or_else(|| Error::ImmersionViolation {
            point: x.to_vec(),
            reason: "induced metric is singular".into(),
        })?;
        let tangent = &jac * c.transpose();

        // Normal frame: tangent projections of the coordinate axes with the
        // M-tangent part removed, orthonormalized with pivoting.
        let inner = |u: &DVector<f64>, v: &DVector<f64>| self.ambient.inner(u.as_slice(), v.as_slice());
        let coord_dim = self.ambient.coord_dim();
        let candidates: Vec<DVector<f64>> = (0..coord_dim)
            .map(|i| {
                let mut e = vec![0.0; coord_dim];
                e[i] = 1.0;
                let mut v = self.ambient.tangent_projection(ys, &e);
                for a in 0..m {
                    let ea = tangent.column(a).into_owned();
                    let k = inner(&ea, &v);
                    v.axpy(-k, &ea, 1.0);
                }
                v
            })
            .collect();
        let normal = if dims.p == 0 {
            DMatrix::zeros(coord_dim, 0)
        } else {
            orthonormalize_in(&candidates, dims.p, inner).ok_or_else(|| Error::ImmersionViolation {
                point: x.to_vec(),
                reason: "could not build a normal frame".into(),
            })?
        };

        let second = self.second_derivatives(x, self.fd.h2);
        let mats = (0..dims.p)
            .map(|k| {
                let nu = normal.column(k).into_owned();
                let h = DMatrix::from_fn(m, m, |i, j| inner(&second[i][j], &nu));
                &c * h * c.transpose()
            })
            .collect();
        let alpha = BilinearForm::new(m, mats)?;
        let mean = mean_curvature(&alpha);
        Ok(PointFrameData {
            chart_point: x.to_vec(),
            ambient_point: y,
            metric,
            chart_to_frame: c,
            tangent_frame: tangent,
            normal_frame: normal,
            second_fundamental_form: alpha,
            mean_curvature: mean,
        })
    }

    /// `K_f(σ) = K_α(σ)` for a plane in the orthonormal tangent frame.
    pub fn extrinsic_curvature(&self, x: &[f64], sigma: &Plane) -> Result<f64> {
        self.fundamental_forms(x)?.extrinsic_curvature(sigma)
    }

    /// `K_M(σ) = K_f(σ) + K_N(f_* σ)`.
    pub fn intrinsic_curvature(&self, x: &[f64], sigma: &Plane) -> Result<f64> {
        self.fundamental_forms(x)?.intrinsic_curvature(&self.ambient, sigma)
    }

    /// Scalar curvature (average convention) and Ricci eigenvalues.
    pub fn scalar_and_ricci(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.fundamental_forms(x)?.scalar_and_ricci(&self.ambient)
    }

    /// The modified radial function `g = ψ_b ∘ r ∘ π_P ∘ f` with its gradient
    /// and Hessian assembled from the composition formulas.
    pub fn pullback_radial(&self, x: &[f64], b: f64) -> Result<RadialPullback> {
        let data = self.fundamental_forms(x)?;
        self.pullback_radial_with(&data, b)
    }

    pub fn pullback_radial_with(&self, data: &PointFrameData, b: f64) -> Result<RadialPullback> {
        let y = data.ambient_point.as_slice();
        let height = self.ambient.modified_radial_height(b, y)?;
        let hess_n = self.ambient.radial_height_hessian(b, y)?;
        let gram = self.ambient.gram();
        let e = &data.tangent_frame;
        let m = e.ncols();
        let grad_frame = e.transpose() * &gram * &height.grad;
        let ambient_term = e.transpose() * &hess_n * e;
        let grad_normal = data.normal_frame.transpose() * &gram * &height.grad;
        let mut normal_term = DMatrix::zeros(m, m);
        for (k, a) in data.second_fundamental_form.matrices().iter().enumerate() {
            normal_term += a * grad_normal[k];
        }
        let hess_frame = &ambient_term + &normal_term;
        let cinv = data.frame_to_chart();
        let mean_term = m as f64 * grad_normal.dot(&data.mean_curvature);
        Ok(RadialPullback {
            chart_point: data.chart_point.clone(),
            b,
            r: height.r,
            g: height.h,
            psi_prime: height.psi_prime,
            psi_second: height.psi_second,
            grad_norm: grad_frame.norm(),
            grad_chart: &cinv * &grad_frame,
            hess_chart: &cinv * &hess_frame * cinv.transpose(),
            laplacian: hess_frame.trace(),
            ambient_trace: ambient_term.trace(),
            mean_curvature_term: mean_term,
            grad_frame,
            ambient_term,
            normal_term,
            hess_frame,
        })
    }
}

fn mean_curvature(alpha: &BilinearForm) -> DVector<f64> {
    let m = alpha.dim_domain() as f64;
    DVector::from_iterator(alpha.dim_target(), alpha.matrices().iter().map(|a| a.trace() / m))
}

/// Frames and fundamental forms at one chart point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFrameData {
    pub chart_point: Vec<f64>,
    pub ambient_point: DVector<f64>,
    /// Induced metric in chart coordinates.
    pub metric: DMatrix<f64>,
    /// `C` with `e_a = Σ_i C[a][i] ∂_i`.
    pub chart_to_frame: DMatrix<f64>,
    /// Orthonormal tangent frame `f_* e_a` as columns.
    pub tangent_frame: DMatrix<f64>,
    /// Orthonormal normal frame as columns.
    pub normal_frame: DMatrix<f64>,
    pub second_fundamental_form: BilinearForm,
    /// `H = (1/m) trace α`.
    pub mean_curvature: DVector<f64>,
}

impl PointFrameData {
    /// `C⁻¹`, mapping frame components to chart components of covectors.
    pub fn frame_to_chart(&self) -> DMatrix<f64> {
        self.chart_to_frame.clone().try_inverse().expect("C is invertible by construction")
    }

    /// Ambient image `f_* X` of frame components `X`.
    pub fn push_forward(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.tangent_frame * x
    }

    /// Chart components of the tangent vector with frame components `X`.
    pub fn chart_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chart_to_frame.transpose() * x
    }

    /// Largest deviation of the joined tangent and normal frames from
    /// orthonormality in the ambient metric.
    pub fn frame_defect(&self, ambient: &ProductSpace) -> f64 {
        let cols: Vec<DVector<f64>> = (0..self.tangent_frame.ncols())
            .map(|j| self.tangent_frame.column(j).into_owned())
            .chain((0..self.normal_frame.ncols()).map(|j| self.normal_frame.column(j).into_owned()))
            .collect();
        let mut worst: f64 = 0.0;
        for (i, u) in cols.iter().enumerate() {
            for (j, v) in cols.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ambient.inner(u.as_slice(), v.as_slice()) - target).abs());
            }
        }
        worst
    }

    /// The same data in rotated frames: new tangent frame `E·R`, new normal
    /// frame `ν·O`.
    pub fn reframed(&self, tangent: &DMatrix<f64>, normal: &DMatrix<f64>) -> Result<PointFrameData> {
        let alpha = self.second_fundamental_form.reframed(tangent, normal)?;
        let mean = mean_curvature(&alpha);
        Ok(PointFrameData {
            chart_point: self.chart_point.clone(),
            ambient_point: self.ambient_point.clone(),
            metric: self.metric.clone(),
            chart_to_frame: tangent.transpose() * &self.chart_to_frame,
            tangent_frame: &self.tangent_frame * tangent,
            normal_frame: &self.normal_frame * normal,
            second_fundamental_form: alpha,
            mean_curvature: mean,
        })
    }

    pub fn extrinsic_curvature(&self, sigma: &Plane) -> Result<f64> {
        self.second_fundamental_form.curvature_plane(sigma)
    }

    /// Ambient sectional curvature of `f_* σ`.
    pub fn ambient_curvature(&self, ambient: &ProductSpace, sigma: &Plane) -> Result<f64> {
        let u = self.push_forward(&sigma.first());
        let v = self.push_forward(&sigma.second());
        ambient.sectional_curvature(self.ambient_point.as_slice(), u.as_slice(), v.as_slice())
    }

    pub fn intrinsic_curvature(&self, ambient: &ProductSpace, sigma: &Plane) -> Result<f64> {
        Ok(self.extrinsic_curvature(sigma)? + self.ambient_curvature(ambient, sigma)?)
    }

    /// `R_M(e_a, e_b, e_c, e_d)` from the Gauss equation.
    pub fn intrinsic_tensor(&self, ambient: &ProductSpace, a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
        let e = |i: usize| self.tangent_frame.column(i).into_owned();
        let x = self.ambient_point.as_slice();
        let rn = ambient.curvature_tensor(x, e(a).as_slice(), e(b).as_slice(), e(c).as_slice(), e(d).as_slice())?;
        let alpha = &self.second_fundamental_form;
        let m = alpha.dim_domain();
        let unit = |i: usize| {
            let mut v = DVector::zeros(m);
            v[i] = 1.0;
            v
        };
        let ad = alpha.apply(&unit(a), &unit(d))?;
        let bc = alpha.apply(&unit(b), &unit(c))?;
        let ac = alpha.apply(&unit(a), &unit(c))?;
        let bd = alpha.apply(&unit(b), &unit(d))?;
        Ok(rn + ad.dot(&bc) - ac.dot(&bd))
    }

    /// Scalar curvature `Σ_{i≠j} K(e_i, e_j) / (m(m−1))` and the eigenvalues
    /// of the Ricci tensor.
    pub fn scalar_and_ricci(&self, ambient: &ProductSpace) -> Result<(f64, Vec<f64>)> {
        let m = self.tangent_frame.ncols();
        let mut ric = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.intrinsic_tensor(ambient, i, k, k, j)?;
                }
                ric[(i, j)] = s;
                ric[(j, i)] = s;
            }
        }
        let scalar = if m > 1 { ric.trace() / (m * (m - 1)) as f64 } else { 0.0 };
        Ok((scalar, crate::linalg::symmetric_eigenvalues(&ric)))
    }

    /// Smallest intrinsic curvature over the coordinate planes of the frame.
    pub fn min_coordinate_plane_curvature(&self, ambient: &ProductSpace) -> Result<f64> {
        let m = self.tangent_frame.ncols();
        let mut best = f64::INFINITY;
        for i in 0..m {
            for j in (i + 1)..m {
                best = best.min(self.intrinsic_curvature(ambient, &Plane::coordinate(m, i, j)?)?);
            }
        }
        Ok(best)
    }
}

/// The modified radial function and its derivatives at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPullback {
    pub chart_point: Vec<f64>,
    pub b: f64,
    pub r: f64,
    pub g: f64,
    pub psi_prime: f64,
    pub psi_second: f64,
    /// Gradient components in the orthonormal frame (tangent part of `grad h`).
    pub grad_frame: DVector<f64>,
    pub grad_norm: f64,
    /// Chart partial derivatives `∂_i g`.
    pub grad_chart: DVector<f64>,
    /// `Hess^N h(f_* e_a, f_* e_b)`.
    pub ambient_term: DMatrix<f64>,
    /// `⟨grad h, α(e_a, e_b)⟩`.
    pub normal_term: DMatrix<f64>,
    /// Assembled `Hess^M g` in the frame.
    pub hess_frame: DMatrix<f64>,
    /// Assembled `Hess^M g(∂_i, ∂_j)` in chart coordinates.
    pub hess_chart: DMatrix<f64>,
    pub laplacian: f64,
    /// `Σ_i Hess^N h(f_* e_i, f_* e_i)`.
    pub ambient_trace: f64,
    /// `m ⟨grad h, H⟩`.
    pub mean_curvature_term: f64,
}

/// Which curvature the min-max scan evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureKind {
    Extrinsic,
    Intrinsic,
}

/// The min-max functional at one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointScan {
    pub chart_point: Vec<f64>,
    pub value: f64,
    pub result: MinMaxResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub kind: CurvatureKind,
    pub d_threshold: usize,
    /// Largest sampled value: a lower bound for the supremum over `M`.
    pub sup_value: f64,
    pub argsup: usize,
    pub per_point: Vec<PointScan>,
}

/// The min-max functional of the chosen curvature at one point.
pub fn point_minmax(
    f: &ParametricImmersion,
    x: &[f64],
    d_threshold: usize,
    cfg: &SearchConfig,
    kind: CurvatureKind,
) -> Result<MinMaxResult> {
    let m = f.dims().m;
    if d_threshold + 1 > m {
        return Err(Error::EmptyConstraintSet { required: d_threshold + 1, available: m });
    }
    let data = f.fundamental_forms(x)?;
    let alpha = &data.second_fundamental_form;
    let ambient = f.ambient();
    let eval = |sigma: &Plane| -> f64 {
        let k = alpha.curvature_plane(sigma).unwrap_or(f64::NAN);
        match kind {
            CurvatureKind::Extrinsic => k,
            CurvatureKind::Intrinsic => k + data.ambient_curvature(ambient, sigma).unwrap_or(f64::NAN),
        }
    };
    minmax_functional(&eval, m, d_threshold, cfg)
}

/// Evaluates the min-max functional at every sample and reports the largest
/// value.
pub fn scan_minmax(
    f: &ParametricImmersion,
    samples: &[Vec<f64>],
    d_threshold: usize,
    cfg: &SearchConfig,
    kind: CurvatureKind,
) -> Result<ScanResult> {
    let m = f.dims().m;
    if d_threshold + 1 > m {
        return Err(Error::EmptyConstraintSet { required: d_threshold + 1, available: m });
    }
    if samples.is_empty() {
        return Err(invalid("scan_minmax needs at least one sample"));
    }
    let per_point = samples
        .par_iter()
        .map(|x| {
            let result = point_minmax(f, x, d_threshold, cfg, kind)?;
            Ok(PointScan { chart_point: x.clone(), value: result.value, result })
        })
        .collect::<Result<Vec<_>>>()?;
    let (argsup, sup_value) = per_point
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.value))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(ScanResult { kind, d_threshold, sup_value, argsup, per_point })
}

/// Compass search in chart coordinates that tries to increase the min-max
/// value from `start`. Returns the best point and value found.
pub fn refine_sup(
    f: &ParametricImmersion,
    start: &[f64],
    d_threshold: usize,
    cfg: &SearchConfig,
    kind: CurvatureKind,
    rounds: usize,
) -> Result<(Vec<f64>, f64)> {
    let margin = 3.0 * f.fd().h2;
    let mut x = start.to_vec();
    let mut best = point_minmax(f, &x, d_threshold, cfg, kind)?.value;
    let width = f.lower().iter().zip(f.upper()).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut step = 0.05 * width;
    for _ in 0..rounds {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[i] += sign * step;
                if !f.is_interior(&cand, margin) {
                    continue;
                }
                if let Ok(r) = point_minmax(f, &cand, d_threshold, cfg, kind) {
                    if r.value > best {
                        best = r.value;
                        x = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((x, best))
}

/// First `count` points of a shifted Halton sequence in the chart box,
/// kept `3·h2` away from its faces.
pub fn sample_chart(f: &ParametricImmersion, count: usize, seed: u64) -> Vec<Vec<f64>> {
    halton_box(f.lower(), f.upper(), 3.0 * f.fd().h2, count, seed)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// Halton points with a seeded Cranley-Patterson rotation.
pub fn halton_box(lower: &[f64], upper: &[f64], margin: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let d = lower.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let u = (radical_inverse(i, PRIMES[k % PRIMES.len()]) + shift[k]).fract();
                    let a = lower[k] + margin;
                    let b = upper[k] - margin;
                    a + (b - a) * u
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::BilinearForm;
    use approx::assert_relative_eq;
    use serde_json::json;

    fn sphere(r: f64) -> ParametricImmersion {
        catalog("round_sphere", &json!({"R": r, "m": 2})).unwrap()
    }

    #[test]
    fn unit_sphere_is_umbilic() {
        let f = sphere(1.0);
        let d = f.fundamental_forms(&[1.0, 0.4]).unwrap();
        let a = &d.second_fundamental_form.matrices()[0];
        assert!(d.frame_defect(f.ambient()) < 1e-8);
        // Sign depends on the normal orientation.
        let s = a[(0, 0)].signum();
        assert!((a - DMatrix::identity(2, 2) * s).norm() < 1e-6, "{a}");
    }

    #[test]
    fn flat_plane_is_totally_geodesic() {
        let f = catalog("flat_plane", &json!({"m": 2})).unwrap();
        let d = f.fundamental_forms(&[0.3, -1.2]).unwrap();
        assert_eq!(d.second_fundamental_form, BilinearForm::zero(2, 1).unwrap());
    }

    #[test]
    fn flat_cylinder_principal_curvatures() {
        let r = 1.5;
        let f = catalog("flat_cylinder", &json!({"R": r})).unwrap();
        let d = f.fundamental_forms(&[0.7, 0.2]).unwrap();
        let eig = crate::linalg::symmetric_eigenvalues(&d.second_fundamental_form.matrices()[0]);
        let mut abs: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        assert!(abs[0] < 1e-8);
        assert!((abs[1] - 1.0 / r).abs() < 1e-5);
    }

    #[test]
    fn clifford_torus_curvatures() {
        let f = catalog("clifford_torus", &json!({"n": 2})).unwrap();
        let x = [0.3, -2.0];
        let plane = Plane::coordinate(2, 0, 1).unwrap();
        assert_relative_eq!(f.extrinsic_curvature(&x, &plane).unwrap(), -1.0, epsilon = 1e-6);
        assert!(f.intrinsic_curvature(&x, &plane).unwrap().abs() < 1e-6);
        assert_eq!(f.dims().p, 1);
        let (s, _) = f.scalar_and_ricci(&x).unwrap();
        assert!(s.abs() < 1e-6);
    }

    #[test]
    fn sphere_scalar_curvature() {
        let (s, ric) = sphere(1.0).scalar_and_ricci(&[1.1, 0.2]).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-6);
        assert!(ric.iter().all(|v| (v - 1.0).abs() < 1e-6));
        let cyl = catalog("flat_cylinder", &json!({"R": 1.0})).unwrap();
        assert!(cyl.scalar_and_ricci(&[0.1, 0.1]).unwrap().0.abs() < 1e-8);
    }

    #[test]
    fn geodesic_sphere_in_s3() {
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": 1.0, "m": 3, "R": 0.9, "l": 0})).unwrap();
        let plane = Plane::coordinate(2, 0, 1).unwrap();
        let expected = (1.0f64 / 0.9f64.tan()).powi(2) + 1.0;
        assert_relative_eq!(f.intrinsic_curvature(&[1.0, 0.5], &plane).unwrap(), expected, epsilon = 1e-6);
    }

    #[test]
    fn sphere_pullback_cancels() {
        let r = 2.0;
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": 0.0, "m": 3, "R": r, "l": 0})).unwrap();
        let p = f.pullback_radial(&[1.2, 0.3], 0.0).unwrap();
        assert_relative_eq!(p.g, r * r, epsilon = 1e-12);
        assert!(p.grad_norm < 1e-9);
        assert!(p.hess_frame.norm() < 1e-8, "{}", p.hess_frame);
        assert!((&p.ambient_term - DMatrix::identity(2, 2) * 2.0).norm() < 1e-9);
    }

    #[test]
    fn flat_plane_pullback() {
        let f = catalog("flat_plane", &json!({"m": 2})).unwrap();
        let p = f.pullback_radial(&[0.5, -0.25], 0.0).unwrap();
        assert_relative_eq!(p.g, 0.3125, epsilon = 1e-12);
        assert!((&p.hess_frame - DMatrix::identity(2, 2) * 2.0).norm() < 1e-9);
    }

    #[test]
    fn scan_examples() {
        let cfg = SearchConfig { starts: 8, ..SearchConfig::default() };
        let r = 2.0;
        let f = catalog("geodesic_sphere_cylinder", &json!({"b": 0.0, "m": 3, "R": r, "l": 0})).unwrap();
        let samples = sample_chart(&f, 5, 1);
        let scan = scan_minmax(&f, &samples, 1, &cfg, CurvatureKind::Extrinsic).unwrap();
        assert!(scan.per_point.iter().all(|p| (p.value - 0.25).abs() < 1e-6));

        let cyl = catalog("flat_cylinder", &json!({"R": 1.0})).unwrap();
        let scan = scan_minmax(&cyl, &sample_chart(&cyl, 5, 2), 1, &cfg, CurvatureKind::Extrinsic).unwrap();
        assert!(scan.sup_value.abs() < 1e-8);
        assert!(matches!(
            scan_minmax(&cyl, &sample_chart(&cyl, 1, 2), 2, &cfg, CurvatureKind::Extrinsic),
            Err(Error::EmptyConstraintSet { required: 3, available: 2 })
        ));

        let torus = catalog("clifford_torus", &json!({"n": 2})).unwrap();
        let scan = scan_minmax(&torus, &sample_chart(&torus, 5, 3), 1, &cfg, CurvatureKind::Extrinsic).unwrap();
        assert!((scan.sup_value + 1.0).abs() < 1e-5);
    }

    #[test]
    fn halton_points_fill_the_box() {
        let pts = halton_box(&[0.0, -1.0], &[1.0, 1.0], 0.0, 64, 4);
        assert_eq!(pts.len(), 64);
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p[0]) && (-1.0..=1.0).contains(&p[1])));
        assert_eq!(pts, halton_box(&[0.0, -1.0], &[1.0, 1.0], 0.0, 64, 4));
    }

    #[test]
    fn rank_deficient_chart_is_rejected() {
        let ambient = ProductSpace::from(crate::spaces::SpaceForm::euclidean(3));
        let f = ParametricImmersion::new(
            "fold",
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            ambient,
            Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0] + x[1], 0.0, 0.0])),
        )
        .unwrap();
        assert!(matches!(f.fundamental_forms(&[0.0, 0.0]), Err(Error::ImmersionViolation { .. })));
    }
}
