//! Vector-valued symmetric bilinear forms and their extrinsic curvature.
//!
//! A form `α: R^n × R^n → R^p` is stored as `p` symmetric n×n matrices with
//! `α(X, Y)_k = Xᵀ A_k Y`, always relative to orthonormal bases.

use crate::error::{invalid, Error, Result};
use crate::grassmann::{ascend, multi_start, prefer, sample_frames, FrameObjective, Plane, SearchConfig, Subspace};
use crate::linalg::{orthonormality_defect, sign_normalize_columns};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A symmetric bilinear form with values in `R^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FormRepr", into = "FormRepr")]
pub struct BilinearForm {
    n: usize,
    matrices: Vec<DMatrix<f64>>,
}

/// Versioned wire format: each matrix as its row-major upper triangle.
#[derive(Serialize, Deserialize)]
struct FormRepr {
    version: u32,
    n: usize,
    p: usize,
    matrices: Vec<Vec<f64>>,
}

const FORM_VERSION: u32 = 1;

impl From<BilinearForm> for FormRepr {
    fn from(f: BilinearForm) -> Self {
        let matrices = f
            .matrices
            .iter()
            .map(|a| {
                let mut upper = Vec::with_capacity(f.n * (f.n + 1) / 2);
                for i in 0..f.n {
                    for j in i..f.n {
                        upper.push(a[(i, j)]);
                    }
                }
                upper
            })
            .collect();
        FormRepr { version: FORM_VERSION, n: f.n, p: f.matrices.len(), matrices }
    }
}

impl TryFrom<FormRepr> for BilinearForm {
    type Error = Error;

    fn try_from(r: FormRepr) -> Result<Self> {
        if r.version != FORM_VERSION {
            return Err(invalid(format!("unsupported form version {}", r.version)));
        }
        if r.matrices.len() != r.p {
            return Err(Error::DimensionMismatch { expected: r.p, found: r.matrices.len() });
        }
        BilinearForm::from_upper_triangular(r.n, &r.matrices)
    }
}

impl BilinearForm {
    /// Builds a form from `p` square matrices, symmetrizing each one.
    pub fn new(n: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a form needs a domain of dimension n >= 1"));
        }
        let mut out = Vec::with_capacity(matrices.len());
        for a in matrices {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.nrows().max(a.ncols()) });
            }
            out.push((&a + a.transpose()) * 0.5);
        }
        Ok(BilinearForm { n, matrices: out })
    }

    pub fn zero(n: usize, p: usize) -> Result<Self> {
        BilinearForm::new(n, vec![DMatrix::zeros(n, n); p])
    }

    /// The form `c·I` with one-dimensional target.
    pub fn umbilic(n: usize, c: f64) -> Result<Self> {
        BilinearForm::new(n, vec![DMatrix::identity(n, n) * c])
    }

    /// A form with diagonal matrices.
    pub fn diagonal(diagonals: &[Vec<f64>]) -> Result<Self> {
        let n = diagonals.first().map_or(0, Vec::len);
        let mats = diagonals
            .iter()
            .map(|d| {
                if d.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: d.len() });
                }
                Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
            })
            .collect::<Result<Vec<_>>>()?;
        BilinearForm::new(n, mats)
    }

    /// Builds a form from row-major upper triangles.
    pub fn from_upper_triangular(n: usize, uppers: &[Vec<f64>]) -> Result<Self> {
        let expected = n * (n + 1) / 2;
        let mut mats = Vec::with_capacity(uppers.len());
        for u in uppers {
            if u.len() != expected {
                return Err(Error::DimensionMismatch { expected, found: u.len() });
            }
            let mut a = DMatrix::zeros(n, n);
            let mut idx = 0;
            for i in 0..n {
                for j in i..n {
                    a[(i, j)] = u[idx];
                    a[(j, i)] = u[idx];
                    idx += 1;
                }
            }
            mats.push(a);
        }
        BilinearForm::new(n, mats)
    }

    pub fn dim_domain(&self) -> usize {
        self.n
    }

    pub fn dim_target(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        Ok(())
    }

    /// `α(X, Y)` as a vector of length `p`.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.apply_unchecked(x, y))
    }

    fn apply_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.matrices.len(), self.matrices.iter().map(|a| x.dot(&(a * y))))
    }

    /// `K_α(X, Y) = ⟨α(X,X), α(Y,Y)⟩ − ‖α(X,Y)‖²`.
    pub fn curvature_pair(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.pair_unchecked(x, y))
    }

    fn pair_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut k = 0.0;
        for a in &self.matrices {
            let ax = a * x;
            let xx = x.dot(&ax);
            let xy = y.dot(&ax);
            let yy = y.dot(&(a * y));
            k += xx * yy - xy * xy;
        }
        k
    }

    /// `K_α(σ) = K_α(X, Y) / ‖X ∧ Y‖²` for any basis `{X, Y}` of `σ`.
    pub fn curvature_plane(&self, sigma: &Plane) -> Result<f64> {
        if sigma.ambient_dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: sigma.ambient_dim() });
        }
        Ok(self.pair_unchecked(&sigma.first(), &sigma.second()))
    }

    /// Curvature of the plane spanned by an arbitrary (not necessarily
    /// orthonormal) basis.
    pub fn curvature_basis(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let k = self.curvature_pair(x, y)?;
        let wedge = x.norm_squared() * y.norm_squared() - x.dot(y).powi(2);
        if wedge <= 1e-24 * (x.norm_squared() * y.norm_squared()).max(f64::MIN_POSITIVE) {
            return Err(Error::DegeneratePlane(wedge));
        }
        Ok(k / wedge)
    }

    /// `Fᵀ A_k F` for the frame `F` of `s`.
    pub fn restrict(&self, s: &Subspace) -> Result<BilinearForm> {
        self.restrict_frame(s.frame())
    }

    /// Restriction to the span of an orthonormal n×d frame.
    pub fn restrict_frame(&self, frame: &DMatrix<f64>) -> Result<BilinearForm> {
        if frame.nrows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: frame.nrows() });
        }
        if orthonormality_defect(frame) > 1e-10 {
            return Err(invalid("restriction frame is not orthonormal"));
        }
        let mats = self.matrices.iter().map(|a| frame.transpose() * a * frame).collect();
        BilinearForm::new(frame.ncols(), mats)
    }

    /// The form `t·α`.
    pub fn scaled(&self, t: f64) -> BilinearForm {
        BilinearForm { n: self.n, matrices: self.matrices.iter().map(|a| a * t).collect() }
    }

    /// Re-expresses the form in rotated bases: `A'_k = Σ_j O_kj Rᵀ A_j R`.
    pub fn reframed(&self, tangent: &DMatrix<f64>, normal: &DMatrix<f64>) -> Result<BilinearForm> {
        let p = self.dim_target();
        if tangent.nrows() != self.n || normal.nrows() != p {
            return Err(invalid("reframing matrices have the wrong size"));
        }
        let rotated: Vec<DMatrix<f64>> =
            self.matrices.iter().map(|a| tangent.transpose() * a * tangent).collect();
        let mats = (0..p)
            .map(|k| {
                let mut m = DMatrix::zeros(self.n, self.n);
                for (j, r) in rotated.iter().enumerate() {
                    m += r * normal[(j, k)];
                }
                m
            })
            .collect();
        BilinearForm::new(self.n, mats)
    }

    fn is_zero(&self) -> bool {
        self.matrices.iter().all(|a| a.iter().all(|&v| v == 0.0))
    }

    /// Numerical rank of the `p × n(n+1)/2` matrix of values `α(e_i, e_j)`,
    /// counting singular values above `rank_tol` times the largest one.
    pub fn algebraic_codimension(&self, rank_tol: f64) -> usize {
        let p = self.dim_target();
        if p == 0 || self.is_zero() {
            return 0;
        }
        let cols = self.n * (self.n + 1) / 2;
        let mut m = DMatrix::zeros(p, cols);
        for (k, a) in self.matrices.iter().enumerate() {
            let mut c = 0;
            for i in 0..self.n {
                for j in i..self.n {
                    m[(k, c)] = a[(i, j)];
                    c += 1;
                }
            }
        }
        let sv = m.singular_values();
        let largest = sv.iter().fold(0.0f64, |a, &b| a.max(b));
        sv.iter().filter(|&&s| s > rank_tol * largest).count()
    }
}

/// Default relative rank tolerance for [`BilinearForm::algebraic_codimension`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// A seeded random form with i.i.d. normal entries of spread `scale`,
/// symmetrized.
pub fn random_form(n: usize, p: usize, seed: u64, scale: f64) -> Result<BilinearForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats = (0..p)
        .map(|_| {
            DMatrix::from_fn(n, n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
        })
        .collect();
    BilinearForm::new(n, mats)
}

/// Plane curvature with its analytic gradient, on n×2 frames.
struct PlaneCurvature<'a>(&'a BilinearForm);

impl FrameObjective for PlaneCurvature<'_> {
    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        self.0.pair_unchecked(&frame.column(0).into_owned(), &frame.column(1).into_owned())
    }

    fn euclidean_gradient(&self, frame: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let x = frame.column(0).into_owned();
        let y = frame.column(1).into_owned();
        let mut gx = DVector::zeros(x.len());
        let mut gy = DVector::zeros(x.len());
        for a in &self.0.matrices {
            let ax = a * &x;
            let ay = a * &y;
            let xx = x.dot(&ax);
            let yy = y.dot(&ay);
            let xy = x.dot(&ay);
            gx += &ax * (2.0 * yy) - &ay * (2.0 * xy);
            gy += &ay * (2.0 * xx) - &ax * (2.0 * xy);
        }
        Some(DMatrix::from_columns(&[gx, gy]))
    }
}

/// `‖α(X, X)‖²` on unit vectors, with its analytic gradient.
struct DiagonalNormSq<'a>(&'a BilinearForm);

impl FrameObjective for DiagonalNormSq<'_> {
    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        let x = frame.column(0).into_owned();
        self.0.apply_unchecked(&x, &x).norm_squared()
    }

    fn euclidean_gradient(&self, frame: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let x = frame.column(0).into_owned();
        let mut g = DVector::zeros(x.len());
        for a in &self.0.matrices {
            let ax = a * &x;
            g += &ax * (4.0 * x.dot(&ax));
        }
        Some(DMatrix::from_columns(&[g]))
    }
}

/// Damped Gauss-Newton on the residual `r(x) = α(x, x)` over the unit sphere.
/// Converges quadratically onto zeros, which plain gradient steps reach only
/// slowly.
fn polish_diagonal(form: &BilinearForm, x0: &DVector<f64>, max_iters: usize) -> (f64, DVector<f64>) {
    let n = form.n;
    let mut x = x0.normalize();
    let mut r = form.apply_unchecked(&x, &x).norm();
    for _ in 0..max_iters {
        if r == 0.0 {
            break;
        }
        let residual = form.apply_unchecked(&x, &x);
        let tangent = DMatrix::identity(n, n) - &x * x.transpose();
        let mut jac = DMatrix::zeros(form.dim_target(), n);
        for (k, a) in form.matrices.iter().enumerate() {
            let row = (a * &x * 2.0).transpose() * &tangent;
            jac.set_row(k, &row);
        }
        let svd = jac.svd(true, true);
        let Ok(step) = svd.solve(&residual, 1e-12 * svd.singular_values.max().max(1e-300)) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let cand = (&x - &step * t).normalize();
            let rc = form.apply_unchecked(&cand, &cand).norm();
            if rc < r {
                let gain = r - rc;
                x = cand;
                r = rc;
                improved = gain > 1e-15 * (1.0 + r);
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (r, x)
}

/// Minimum of `‖α(X, X)‖` over unit `X` in a subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMinimum {
    pub value: f64,
    /// Minimizer in the coordinates of the full domain.
    pub argmin: DVector<f64>,
    pub evaluations: usize,
}

fn sign_normalized(v: &DVector<f64>) -> DVector<f64> {
    let m = sign_normalize_columns(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()), 1e-12);
    m.column(0).into_owned()
}

/// Multi-start minimization of `‖α(X, X)‖` over the unit sphere of `s`.
pub fn min_diagonal_norm(form: &BilinearForm, s: &Subspace, cfg: &SearchConfig) -> Result<DiagonalMinimum> {
    if s.ambient_dim() != form.n {
        return Err(Error::DimensionMismatch { expected: form.n, found: s.ambient_dim() });
    }
    let local = form.restrict(s)?;
    let frame = s.frame();
    if local.is_zero() || local.dim_target() == 0 {
        return Ok(DiagonalMinimum { value: 0.0, argmin: s.basis_vector(0), evaluations: 0 });
    }
    let d = s.dim();
    let starts = sample_frames(d, 1, cfg.starts.max(1), cfg.seed ^ 0xd1a9_0001);
    let obj = DiagonalNormSq(&local);
    let mut evaluations = 0;
    let candidates: Vec<(f64, DVector<f64>)> = starts
        .iter()
        .map(|start| {
            let run = crate::grassmann::descend(&obj, start, cfg);
            evaluations += run.evaluations;
            let (value, x) = polish_diagonal(&local, &run.frame.column(0).into_owned(), 50);
            evaluations += 50;
            (value, sign_normalized(&(frame * x)))
        })
        .collect();
    let (value, argmin) = candidates
        .into_iter()
        .min_by(|a, b| prefer(false, (a.0, a.1.as_slice()), (b.0, b.1.as_slice()), cfg.tie_tol))
        .expect("at least one start");
    Ok(DiagonalMinimum { value, argmin, evaluations })
}

/// A unit `X ∈ S` with `‖α(X, X)‖ ≤ tol`, if the search finds one.
pub fn find_asymptotic_vector(
    form: &BilinearForm,
    s: &Subspace,
    tol: f64,
    cfg: &SearchConfig,
) -> Result<Option<DVector<f64>>> {
    if !(tol > 0.0) {
        return Err(invalid("asymptotic-vector tolerance must be positive"));
    }
    let min = min_diagonal_norm(form, s, cfg)?;
    Ok((min.value <= tol).then_some(min.argmin))
}

/// Largest plane curvature over `G_2(S)`, with the attaining plane.
pub fn max_plane_curvature(form: &BilinearForm, s: &Subspace, cfg: &SearchConfig) -> Result<(f64, Plane)> {
    if s.ambient_dim() != form.n {
        return Err(Error::DimensionMismatch { expected: form.n, found: s.ambient_dim() });
    }
    if s.dim() < 2 {
        return Err(invalid("planes need a subspace of dimension >= 2"));
    }
    let local = form.restrict(s)?;
    let frame = s.frame();
    if s.dim() == 2 {
        let plane = Plane::from_orthonormal(frame.clone());
        return Ok((form.curvature_plane(&plane)?, plane));
    }
    let starts = sample_frames(s.dim(), 2, cfg.starts.max(1), cfg.seed ^ 0x91a0_0001);
    let best = multi_start(&PlaneCurvature(&local), &starts, true, cfg).expect("at least one start");
    let plane = Plane::from_orthonormal(frame * &best.frame);
    Ok((form.curvature_plane(&plane)?, plane))
}

/// Single local refinement of the plane curvature from a given frame.
pub fn refine_plane_curvature(form: &BilinearForm, start: &Plane, cfg: &SearchConfig) -> Result<(f64, Plane)> {
    if start.ambient_dim() != form.n {
        return Err(Error::DimensionMismatch { expected: form.n, found: start.ambient_dim() });
    }
    let run = ascend(&PlaneCurvature(form), start.frame(), cfg);
    let plane = Plane::from_orthonormal(run.frame);
    Ok((form.curvature_plane(&plane)?, plane))
}

/// How a check reached its conclusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtsukiStatus {
    /// At least one hypothesis of the lemma is violated by an explicit witness.
    WitnessFound,
    /// `p ≥ n`, so the lemma's conclusion holds and no witness is required.
    NotRequired,
    /// `p < n` yet neither search produced a witness: the optimizer ran out
    /// of budget. This never counts as a counterexample.
    BudgetExhausted,
}

/// Best values of the two searches behind an Otsuki check. They do not
/// depend on `λ`, so one search serves any number of thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtsukiSearch {
    pub n: usize,
    pub p: usize,
    pub max_plane: Option<(f64, Plane)>,
    pub min_diagonal: DiagonalMinimum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtsukiReport {
    pub lambda: f64,
    /// Slack allowed on the vector witness `‖α(X,X)‖ ≤ √λ + tolerance`.
    pub tolerance: f64,
    pub n: usize,
    pub p: usize,
    pub max_plane_curvature: Option<f64>,
    pub min_diagonal_norm: f64,
    pub condition_i_violated_witness: Option<Plane>,
    pub condition_ii_violated_witness: Option<DVector<f64>>,
    pub consistent: bool,
    pub status: OtsukiStatus,
}

/// Default slack on the vector witness.
pub const OTSUKI_WITNESS_TOL: f64 = 1e-8;

/// Runs both searches of an Otsuki check over the whole domain.
pub fn otsuki_search(form: &BilinearForm, cfg: &SearchConfig) -> Result<OtsukiSearch> {
    let full = Subspace::full(form.n);
    let max_plane = if form.n >= 2 { Some(max_plane_curvature(form, &full, cfg)?) } else { None };
    let min_diagonal = min_diagonal_norm(form, &full, cfg)?;
    Ok(OtsukiSearch { n: form.n, p: form.dim_target(), max_plane, min_diagonal })
}

impl OtsukiSearch {
    pub fn report(&self, lambda: f64, tolerance: f64) -> Result<OtsukiReport> {
        if !(lambda >= 0.0) {
            return Err(invalid("Otsuki's threshold λ must be nonnegative"));
        }
        let plane_witness = self
            .max_plane
            .as_ref()
            .filter(|(k, _)| *k > lambda)
            .map(|(_, p)| p.clone());
        let vector_witness = (self.min_diagonal.value <= lambda.sqrt() + tolerance)
            .then(|| self.min_diagonal.argmin.clone());
        let any = plane_witness.is_some() || vector_witness.is_some();
        let (consistent, status) = match (any, self.p >= self.n) {
            (true, _) => (true, OtsukiStatus::WitnessFound),
            (false, true) => (true, OtsukiStatus::NotRequired),
            (false, false) => (false, OtsukiStatus::BudgetExhausted),
        };
        Ok(OtsukiReport {
            lambda,
            tolerance,
            n: self.n,
            p: self.p,
            max_plane_curvature: self.max_plane.as_ref().map(|(k, _)| *k),
            min_diagonal_norm: self.min_diagonal.value,
            condition_i_violated_witness: plane_witness,
            condition_ii_violated_witness: vector_witness,
            consistent,
            status,
        })
    }
}

/// Searches for witnesses against the two hypotheses of Otsuki's lemma.
pub fn check_otsuki(form: &BilinearForm, lambda: f64, cfg: &SearchConfig) -> Result<OtsukiReport> {
    if !(lambda >= 0.0) {
        return Err(invalid("Otsuki's threshold λ must be nonnegative"));
    }
    otsuki_search(form, cfg)?.report(lambda, OTSUKI_WITNESS_TOL)
}

/// A plane with `K_α ≥ 0`, if the search finds one. When every plane has
/// `K_α < 0` and there is no asymptotic vector, `p ≥ n − 1`.
pub fn find_nonnegative_plane(form: &BilinearForm, cfg: &SearchConfig) -> Result<Option<Plane>> {
    if form.n < 2 {
        return Ok(None);
    }
    let (k, plane) = max_plane_curvature(form, &Subspace::full(form.n), cfg)?;
    Ok((k >= 0.0).then_some(plane))
}
