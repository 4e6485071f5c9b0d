//! Subspaces, planes, and the nested min-max curvature functional.
//!
//! Points of a Grassmannian `G_k(R^n)` are stored as orthonormal n×k frames.
//! Local refinement moves frames along Grassmann geodesics, so iterates never
//! leave the manifold.

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    lexicographic_cmp, orthonormal_complement, orthonormality_defect, orthonormalize_columns,
    sign_normalize_columns, PIVOT_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::PI;

/// A linear subspace of `R^n` carried by an orthonormal frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRepr", into = "SubspaceRepr")]
pub struct Subspace {
    frame: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    ambient_dim: usize,
    frame: Vec<Vec<f64>>,
}

impl TryFrom<SubspaceRepr> for Subspace {
    type Error = Error;

    fn try_from(r: SubspaceRepr) -> Result<Self> {
        let vectors: Vec<DVector<f64>> = r.frame.into_iter().map(DVector::from_vec).collect();
        if vectors.iter().any(|v| v.len() != r.ambient_dim) {
            return Err(invalid("frame vector length differs from ambient_dim"));
        }
        Subspace::from_vectors(r.ambient_dim, &vectors)
    }
}

impl From<Subspace> for SubspaceRepr {
    fn from(s: Subspace) -> Self {
        SubspaceRepr {
            ambient_dim: s.ambient_dim(),
            frame: (0..s.dim()).map(|j| s.frame.column(j).iter().copied().collect()).collect(),
        }
    }
}

impl Subspace {
    /// Builds the span of the columns of `frame`, orthonormalizing them.
    pub fn from_frame(frame: DMatrix<f64>) -> Result<Self> {
        if frame.ncols() == 0 || frame.ncols() > frame.nrows() {
            return Err(invalid(format!(
                "subspace dimension {} must lie in 1..={}",
                frame.ncols(),
                frame.nrows()
            )));
        }
        let frame = orthonormalize_columns(&frame, PIVOT_TOL)
            .ok_or_else(|| invalid("frame vectors are linearly dependent"))?;
        Ok(Subspace { frame })
    }

    pub fn from_vectors(ambient_dim: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(invalid("a subspace needs at least one vector"));
        }
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch { expected: ambient_dim, found: v.len() });
            }
        }
        Subspace::from_frame(DMatrix::from_columns(vectors))
    }

    /// Wraps a frame that is already orthonormal, without touching it.
    pub(crate) fn from_orthonormal(frame: DMatrix<f64>) -> Self {
        debug_assert!(orthonormality_defect(&frame) < 1e-8);
        Subspace { frame }
    }

    /// The whole space `R^n`.
    pub fn full(n: usize) -> Self {
        Subspace { frame: DMatrix::identity(n, n) }
    }

    /// The span of the listed coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        let mut frame = DMatrix::zeros(n, axes.len());
        for (j, &a) in axes.iter().enumerate() {
            if a >= n {
                return Err(invalid(format!("axis {a} out of range for R^{n}")));
            }
            frame[(a, j)] = 1.0;
        }
        Subspace::from_frame(frame)
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// The n×d orthonormal frame.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        self.frame.column(i).into_owned()
    }

    /// The orthogonal projector onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Whether `other` lies inside `self`, up to `tol` in projection residual.
    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        if other.ambient_dim() != self.ambient_dim() {
            return false;
        }
        let residual = other.frame() - self.projector() * other.frame();
        residual.norm() <= tol
    }

    /// Maps a subspace of `R^d` (local coordinates of `self`) into the ambient space.
    pub fn embed(&self, local: &Subspace) -> Result<Subspace> {
        if local.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: local.ambient_dim() });
        }
        Ok(Subspace::from_orthonormal(&self.frame * local.frame()))
    }

    /// Largest deviation of the frame Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.frame)
    }

    /// Sign-normalized, column-major vectorized frame used for tie-breaking.
    pub fn canonical_key(&self) -> Vec<f64> {
        sign_normalize_columns(&self.frame, 1e-12).iter().copied().collect()
    }
}

/// A two-dimensional subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Subspace", into = "Subspace")]
pub struct Plane(Subspace);

impl TryFrom<Subspace> for Plane {
    type Error = Error;

    fn try_from(s: Subspace) -> Result<Self> {
        Plane::from_subspace(s)
    }
}

impl From<Plane> for Subspace {
    fn from(p: Plane) -> Self {
        p.0
    }
}

impl Plane {
    /// The plane spanned by `x` and `y`.
    pub fn new(x: &DVector<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        let wedge = x.norm_squared() * y.norm_squared() - x.dot(y).powi(2);
        let scale = (x.norm_squared() * y.norm_squared()).max(f64::MIN_POSITIVE);
        if wedge <= 1e-24 * scale || wedge <= 0.0 {
            return Err(Error::DegeneratePlane(wedge));
        }
        Subspace::from_vectors(x.len(), &[x.clone(), y.clone()])
            .map(Plane)
            .map_err(|_| Error::DegeneratePlane(wedge))
    }

    pub fn from_subspace(s: Subspace) -> Result<Self> {
        if s.dim() != 2 {
            return Err(invalid(format!("a plane has dimension 2, not {}", s.dim())));
        }
        Ok(Plane(s))
    }

    pub(crate) fn from_orthonormal(frame: DMatrix<f64>) -> Self {
        Plane(Subspace::from_orthonormal(frame))
    }

    /// The coordinate plane spanned by axes `i` and `j` of `R^n`.
    pub fn coordinate(n: usize, i: usize, j: usize) -> Result<Self> {
        Plane::from_subspace(Subspace::coordinate(n, &[i, j])?)
    }

    pub fn first(&self) -> DVector<f64> {
        self.0.basis_vector(0)
    }

    pub fn second(&self) -> DVector<f64> {
        self.0.basis_vector(1)
    }

    pub fn as_subspace(&self) -> &Subspace {
        &self.0
    }
}

impl std::ops::Deref for Plane {
    type Target = Subspace;

    fn deref(&self) -> &Subspace {
        &self.0
    }
}

/// Budget and tolerances shared by every multi-start search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Starts for single-level searches (sphere and plane searches).
    pub starts: usize,
    /// Iteration cap for one local refinement.
    pub max_iters: usize,
    /// Convergence threshold on the objective improvement.
    pub tol: f64,
    /// Finite-difference step along rotation generators.
    pub fd_step: f64,
    /// Starts for each inner plane search of the min-max functional.
    pub inner_starts: usize,
    /// Starts for the outer subspace search of the min-max functional.
    pub outer_starts: usize,
    /// Smallest rotation angle tried by the outer pattern search.
    pub outer_min_step: f64,
    /// Values closer than this are treated as ties.
    pub tie_tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            starts: 64,
            max_iters: 200,
            tol: 1e-8,
            fd_step: 1e-6,
            inner_starts: 8,
            outer_starts: 12,
            outer_min_step: 1e-6,
            tie_tol: 1e-12,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// An objective on orthonormal frames that only depends on their span.
pub trait FrameObjective {
    fn value(&self, frame: &DMatrix<f64>) -> f64;

    /// Euclidean gradient with respect to the frame entries, if known.
    fn euclidean_gradient(&self, _frame: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

impl<F: Fn(&DMatrix<f64>) -> f64> FrameObjective for F {
    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        self(frame)
    }
}

/// Outcome of one local refinement.
#[derive(Clone, Debug)]
pub struct Ascent {
    pub value: f64,
    pub frame: DMatrix<f64>,
    pub evaluations: usize,
    pub iterations: usize,
}

struct Negated<'a, O: ?Sized>(&'a O);

impl<O: FrameObjective + ?Sized> FrameObjective for Negated<'_, O> {
    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        -self.0.value(frame)
    }

    fn euclidean_gradient(&self, frame: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.0.euclidean_gradient(frame).map(|g| -g)
    }
}

/// Rotates column `i` of `q` toward the unit vector `v` by `angle`.
fn rotate_column(q: &DMatrix<f64>, i: usize, v: &DVector<f64>, angle: f64) -> DMatrix<f64> {
    let mut out = q.clone();
    let col = q.column(i) * angle.cos() + v * angle.sin();
    out.set_column(i, &col);
    out
}

/// Follows the Grassmann geodesic from `q` with initial velocity `delta`
/// (which must satisfy `qᵀdelta = 0`) for unit time.
fn geodesic(q: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = delta.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return q.clone(),
    };
    let r = svd.singular_values.len();
    let cos = DMatrix::from_diagonal(&svd.singular_values.map(f64::cos));
    let sin = DMatrix::from_diagonal(&svd.singular_values.map(f64::sin));
    let v = vt.transpose();
    let next = q * &v * cos * &vt + u.columns(0, r) * sin * &vt;
    orthonormalize_columns(&next, PIVOT_TOL).unwrap_or(next)
}

fn riemannian_gradient<O: FrameObjective + ?Sized>(
    obj: &O,
    q: &DMatrix<f64>,
    h: f64,
    evaluations: &mut usize,
) -> DMatrix<f64> {
    if let Some(e) = obj.euclidean_gradient(q) {
        return &e - q * (q.transpose() * &e);
    }
    let complement = orthonormal_complement(q);
    let mut g = DMatrix::zeros(q.nrows(), q.ncols());
    for i in 0..q.ncols() {
        for j in 0..complement.ncols() {
            let v = complement.column(j).into_owned();
            let plus = obj.value(&rotate_column(q, i, &v, h));
            let minus = obj.value(&rotate_column(q, i, &v, -h));
            *evaluations += 2;
            let c = (plus - minus) / (2.0 * h);
            for r in 0..q.nrows() {
                g[(r, i)] += c * v[r];
            }
        }
    }
    g
}

/// Gradient ascent along Grassmann geodesics with Armijo step-halving.
pub fn ascend<O: FrameObjective + ?Sized>(obj: &O, start: &DMatrix<f64>, cfg: &SearchConfig) -> Ascent {
    let mut q = start.clone();
    let mut f = obj.value(&q);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut t: f64 = 1.0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let g = riemannian_gradient(obj, &q, cfg.fd_step, &mut evaluations);
        let gn = g.norm();
        if !(gn > 1e-13) {
            break;
        }
        // Cap the rotation angle at a quarter turn.
        t = t.min(0.25 * PI / gn);
        let mut accepted = None;
        while t * gn > 1e-13 {
            let q1 = geodesic(&q, &(&g * t));
            let f1 = obj.value(&q1);
            evaluations += 1;
            if f1 >= f + 1e-4 * t * gn * gn {
                accepted = Some((q1, f1));
                break;
            }
            t *= 0.5;
        }
        let Some((q1, f1)) = accepted else { break };
        let improvement = f1 - f;
        q = q1;
        f = f1;
        t *= 2.0;
        if improvement < cfg.tol * (1.0 + f.abs()) {
            break;
        }
    }
    Ascent { value: f, frame: q, evaluations, iterations }
}

/// Gradient descent: the mirror image of [`ascend`].
pub fn descend<O: FrameObjective + ?Sized>(obj: &O, start: &DMatrix<f64>, cfg: &SearchConfig) -> Ascent {
    let mut a = ascend(&Negated(obj), start, cfg);
    a.value = -a.value;
    a
}

/// Orders candidates: larger value first when maximizing, ties broken by the
/// lexicographically smallest canonical frame.
pub(crate) fn prefer(
    maximize: bool,
    a: (f64, &[f64]),
    b: (f64, &[f64]),
    tie_tol: f64,
) -> Ordering {
    if (a.0 - b.0).abs() > tie_tol {
        let ord = a.0.total_cmp(&b.0);
        return if maximize { ord.reverse() } else { ord };
    }
    lexicographic_cmp(a.1, b.1, 1e-9)
}

fn best_of(maximize: bool, runs: Vec<Ascent>, tie_tol: f64) -> Option<Ascent> {
    let keyed: Vec<(Vec<f64>, Ascent)> = runs
        .into_iter()
        .filter(|a| a.value.is_finite())
        .map(|a| (Subspace::from_orthonormal(a.frame.clone()).canonical_key(), a))
        .collect();
    keyed
        .into_iter()
        .min_by(|(ka, a), (kb, b)| prefer(maximize, (a.value, ka), (b.value, kb), tie_tol))
        .map(|(_, a)| a)
}

/// Random orthonormal n×k frames from Gaussian matrices.
pub fn sample_frames(n: usize, k: usize, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
        if let Some(q) = orthonormalize_columns(&m, 1e-6) {
            out.push(q);
        }
    }
    out
}

/// `count` subspaces of dimension `d`, approximately uniform on `G_d(R^n)`.
pub fn sample_subspaces(n: usize, d: usize, count: usize, seed: u64) -> Result<Vec<Subspace>> {
    if d == 0 || d > n {
        return Err(invalid(format!("subspace dimension {d} must lie in 1..={n}")));
    }
    Ok(sample_frames(n, d, count, seed).into_iter().map(Subspace::from_orthonormal).collect())
}

/// Multi-start local search over `G_k(R^n)`: every start is refined and the
/// best result wins.
pub fn multi_start<O: FrameObjective + ?Sized>(
    obj: &O,
    starts: &[DMatrix<f64>],
    maximize: bool,
    cfg: &SearchConfig,
) -> Option<Ascent> {
    let runs: Vec<Ascent> = starts
        .iter()
        .map(|s| if maximize { ascend(obj, s, cfg) } else { descend(obj, s, cfg) })
        .collect();
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let iterations = runs.iter().map(|r| r.iterations).sum();
    best_of(maximize, runs, cfg.tie_tol).map(|mut a| {
        a.evaluations = evaluations;
        a.iterations = iterations;
        a
    })
}

/// Maximum of a plane oracle over `G_2(W)` by sampling plus local refinement.
pub fn max_over_planes<F>(evaluate: &F, w: &Subspace, cfg: &SearchConfig) -> Result<(f64, Plane)>
where
    F: Fn(&Plane) -> f64 + ?Sized,
{
    let (value, plane, _) = max_over_planes_counted(evaluate, w, cfg.starts, &[], cfg)?;
    Ok((value, plane))
}

fn max_over_planes_counted<F>(
    evaluate: &F,
    w: &Subspace,
    starts: usize,
    warm: &[DMatrix<f64>],
    cfg: &SearchConfig,
) -> Result<(f64, Plane, usize)>
where
    F: Fn(&Plane) -> f64 + ?Sized,
{
    let d = w.dim();
    if d < 2 {
        return Err(invalid(format!("max_over_planes needs dim W >= 2, got {d}")));
    }
    let frame = w.frame();
    if d == 2 {
        let plane = Plane::from_orthonormal(frame.clone());
        return Ok((evaluate(&plane), plane, 1));
    }
    let local = |u: &DMatrix<f64>| evaluate(&Plane::from_orthonormal(frame * u));
    let mut initial = sample_frames(d, 2, starts, cfg.seed ^ 0x5eed_0001);
    initial.extend(warm.iter().cloned());
    let best = multi_start(&local, &initial, true, cfg).expect("at least one start");
    let plane = Plane::from_orthonormal(frame * &best.frame);
    // Report the exact oracle value at the returned plane.
    Ok((evaluate(&plane), plane, best.evaluations + 1))
}

/// One entry of the outer search trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub subspace: Subspace,
    pub max_value: f64,
}

/// Work done by a min-max computation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub evaluations: usize,
    pub outer_iterations: usize,
    pub inner_searches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxResult {
    pub value: f64,
    pub argmin_subspace: Subspace,
    pub argmax_plane: Plane,
    pub inner_max_trace: Vec<TraceEntry>,
    pub budget_used: Budget,
}

impl MinMaxResult {
    /// Checks the containment and re-evaluation invariants.
    pub fn check<F: Fn(&Plane) -> f64 + ?Sized>(&self, evaluate: &F, tol: f64) -> bool {
        self.argmin_subspace.contains(&self.argmax_plane, 1e-8)
            && (evaluate(&self.argmax_plane) - self.value).abs() <= tol
    }
}

/// `min { max_{σ ⊂ W} K(σ) : dim W > d_threshold }`, computed over subspaces
/// of dimension exactly `d_threshold + 1`.
pub fn minmax_functional<F>(
    evaluate: &F,
    n: usize,
    d_threshold: usize,
    cfg: &SearchConfig,
) -> Result<MinMaxResult>
where
    F: Fn(&Plane) -> f64 + ?Sized,
{
    let k = d_threshold + 1;
    if k > n {
        return Err(Error::EmptyConstraintSet { required: k, available: n });
    }
    if k < 2 {
        return Err(invalid("the min-max functional needs d_threshold >= 1"));
    }
    let mut budget = Budget::default();

    if k == n {
        let w = Subspace::full(n);
        let (value, plane, evals) = max_over_planes_counted(evaluate, &w, cfg.starts, &[], cfg)?;
        budget.evaluations = evals;
        budget.inner_searches = 1;
        let trace = vec![TraceEntry { subspace: w.clone(), max_value: value }];
        return Ok(MinMaxResult {
            value,
            argmin_subspace: w,
            argmax_plane: plane,
            inner_max_trace: trace,
            budget_used: budget,
        });
    }

    if k == 2 {
        // Each W is itself a plane, so the inner max is a single evaluation.
        let obj = |u: &DMatrix<f64>| evaluate(&Plane::from_orthonormal(u.clone()));
        let starts = sample_frames(n, 2, cfg.starts, cfg.seed ^ 0x5eed_0002);
        let best = multi_start(&obj, &starts, false, cfg).expect("at least one start");
        let plane = Plane::from_orthonormal(best.frame.clone());
        let value = evaluate(&plane);
        budget.evaluations = best.evaluations + 1;
        budget.outer_iterations = best.iterations;
        budget.inner_searches = budget.evaluations;
        let w = plane.as_subspace().clone();
        return Ok(MinMaxResult {
            value,
            argmin_subspace: w.clone(),
            argmax_plane: plane,
            inner_max_trace: vec![TraceEntry { subspace: w, max_value: value }],
            budget_used: budget,
        });
    }

    let mut trace = Vec::new();
    let mut finals: Vec<(f64, Subspace, Plane)> = Vec::new();
    let inner = |w: &Subspace, warm: Option<&Plane>, budget: &mut Budget| -> (f64, Plane) {
        let warm_frames: Vec<DMatrix<f64>> = warm
            .and_then(|p| orthonormalize_columns(&(w.frame().transpose() * p.frame()), 1e-6))
            .into_iter()
            .collect();
        let (v, p, e) = max_over_planes_counted(evaluate, w, cfg.inner_starts, &warm_frames, cfg)
            .expect("dim W >= 3 here");
        budget.evaluations += e;
        budget.inner_searches += 1;
        (v, p)
    };

    for start in sample_frames(n, k, cfg.outer_starts, cfg.seed ^ 0x5eed_0003) {
        let mut w = Subspace::from_orthonormal(start);
        let (mut fw, mut pw) = inner(&w, None, &mut budget);
        let mut step = 0.5;
        let mut iters = 0;
        while step > cfg.outer_min_step && iters < cfg.max_iters {
            iters += 1;
            budget.outer_iterations += 1;
            let complement = orthonormal_complement(w.frame());
            let mut improved = false;
            'dirs: for i in 0..k {
                for j in 0..complement.ncols() {
                    let v = complement.column(j).into_owned();
                    for sign in [1.0, -1.0] {
                        let cand = rotate_column(w.frame(), i, &v, sign * step);
                        let cand = Subspace::from_orthonormal(
                            orthonormalize_columns(&cand, PIVOT_TOL).unwrap_or(cand),
                        );
                        let (fc, pc) = inner(&cand, Some(&pw), &mut budget);
                        if fc < fw - cfg.tie_tol {
                            w = cand;
                            fw = fc;
                            pw = pc;
                            improved = true;
                            break 'dirs;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        trace.push(TraceEntry { subspace: w.clone(), max_value: fw });
        finals.push((fw, w, pw));
    }

    let (value, w, plane) = finals
        .into_iter()
        .map(|(v, w, p)| (w.canonical_key(), v, w, p))
        .min_by(|a, b| prefer(false, (a.1, &a.0), (b.1, &b.0), cfg.tie_tol))
        .map(|(_, v, w, p)| (v, w, p))
        .expect("outer_starts >= 1");
    debug_assert!((evaluate(&plane) - value).abs() < 1e-9);
    Ok(MinMaxResult {
        value,
        argmin_subspace: w,
        argmax_plane: plane,
        inner_max_trace: trace,
        budget_used: budget,
    })
}

/// Points of the half-sphere `{x ∈ S^{n-1} : x_0 ≥ 0}` (n ∈ {2, 3, 4}) on an
/// angular grid of spacing about `res`.
pub fn half_sphere_grid(n: usize, res: f64) -> Result<Vec<DVector<f64>>> {
    let steps = |span: f64, scale: f64| ((span * scale / res).ceil() as usize).max(1);
    let mut out = Vec::new();
    match n {
        1 => out.push(DVector::from_vec(vec![1.0])),
        2 => {
            let count = steps(PI, 1.0);
            for i in 0..=count {
                let t = -0.5 * PI + PI * i as f64 / count as f64;
                out.push(DVector::from_vec(vec![t.cos(), t.sin()]));
            }
        }
        3 => {
            let nt = steps(0.5 * PI, 1.0);
            for i in 0..=nt {
                let theta = 0.5 * PI * i as f64 / nt as f64;
                let np = steps(2.0 * PI, theta.sin());
                for j in 0..np {
                    let phi = 2.0 * PI * j as f64 / np as f64;
                    out.push(DVector::from_vec(vec![
                        theta.cos(),
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                    ]));
                }
            }
        }
        4 => {
            let nc = steps(0.5 * PI, 1.0);
            for i in 0..=nc {
                let chi = 0.5 * PI * i as f64 / nc as f64;
                let nt = steps(PI, chi.sin());
                for j in 0..=nt {
                    let theta = PI * j as f64 / nt as f64;
                    let np = steps(2.0 * PI, chi.sin() * theta.sin());
                    for l in 0..np {
                        let phi = 2.0 * PI * l as f64 / np as f64;
                        out.push(DVector::from_vec(vec![
                            chi.cos(),
                            chi.sin() * theta.cos(),
                            chi.sin() * theta.sin() * phi.cos(),
                            chi.sin() * theta.sin() * phi.sin(),
                        ]));
                    }
                }
            }
        }
        _ => return Err(invalid(format!("sphere grids are limited to n <= 4, got {n}"))),
    }
    Ok(out)
}

fn full_sphere2_grid(res: f64) -> Vec<DVector<f64>> {
    let mut out = half_sphere_grid(3, res).expect("n = 3");
    let lower: Vec<DVector<f64>> =
        out.iter().filter(|v| v[0] > 1e-12).map(|v| DVector::from_vec(vec![-v[0], v[1], v[2]])).collect();
    out.extend(lower);
    out
}

fn skew(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m[(j, i)] = -1.0;
    m
}

/// Frames (d×2) of a grid over `G_2(R^d)` for d ∈ {2, 3, 4}.
pub fn plane_grid(d: usize, res: f64) -> Result<Vec<DMatrix<f64>>> {
    match d {
        2 => Ok(vec![DMatrix::identity(2, 2)]),
        3 => Ok(half_sphere_grid(3, res)?
            .into_iter()
            .map(|normal| orthonormal_complement(&DMatrix::from_column_slice(3, 1, normal.as_slice())))
            .collect()),
        4 => {
            // Unit decomposable 2-vectors split into equal-norm self-dual and
            // anti-self-dual parts; (ξ, η) and (-ξ, -η) give the same plane.
            let sd = [
                skew(4, 0, 1) + skew(4, 2, 3),
                skew(4, 0, 2) - skew(4, 1, 3),
                skew(4, 0, 3) + skew(4, 1, 2),
            ];
            let asd = [
                skew(4, 0, 1) - skew(4, 2, 3),
                skew(4, 0, 2) + skew(4, 1, 3),
                skew(4, 0, 3) - skew(4, 1, 2),
            ];
            let xis = full_sphere2_grid(res);
            let etas = half_sphere_grid(3, res)?;
            let mut out = Vec::with_capacity(xis.len() * etas.len());
            for xi in &xis {
                for eta in &etas {
                    let mut m = DMatrix::zeros(4, 4);
                    for a in 0..3 {
                        m += &sd[a] * xi[a] + &asd[a] * eta[a];
                    }
                    out.push(plane_of_skew(&m));
                }
            }
            Ok(out)
        }
        _ => Err(invalid(format!("plane grids are limited to d <= 4, got {d}"))),
    }
}

/// Column space of a rank-two skew matrix, as an orthonormal 4×2 frame.
fn plane_of_skew(m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = m * m.transpose();
    let mut cols: Vec<(f64, usize)> = (0..p.ncols()).map(|j| (p.column(j).norm(), j)).collect();
    cols.sort_by(|a, b| b.0.total_cmp(&a.0));
    let a = p.column(cols[0].1).into_owned();
    let a = &a / a.norm();
    // The image of `a` under m is orthogonal to `a` and lies in the plane.
    let b = m * &a;
    let b = &b / b.norm();
    DMatrix::from_columns(&[a, b])
}

/// Exhaustive-grid min-max value for n ≤ 4. Test oracle only.
pub fn brute_force_minmax<F>(evaluate: &F, n: usize, d_threshold: usize, grid_resolution: f64) -> Result<f64>
where
    F: Fn(&Plane) -> f64 + ?Sized,
{
    if n > 4 {
        return Err(invalid(format!("brute_force_minmax is limited to n <= 4, got {n}")));
    }
    let k = d_threshold + 1;
    if k > n {
        return Err(Error::EmptyConstraintSet { required: k, available: n });
    }
    if k < 2 {
        return Err(invalid("the min-max functional needs d_threshold >= 1"));
    }
    let planes = plane_grid(n, grid_resolution)?;
    let eval = |u: &DMatrix<f64>| evaluate(&Plane::from_orthonormal(u.clone()));
    if k == n {
        return Ok(planes.iter().map(eval).fold(f64::NEG_INFINITY, f64::max));
    }
    if k == 2 {
        return Ok(planes.iter().map(eval).fold(f64::INFINITY, f64::min));
    }
    // n = 4, k = 3: hyperplanes by their normals, planes inside from a G_2(R^3) grid.
    let inner = plane_grid(3, grid_resolution)?;
    let mut best = f64::INFINITY;
    for normal in half_sphere_grid(4, grid_resolution)? {
        let w = orthonormal_complement(&DMatrix::from_column_slice(4, 1, normal.as_slice()));
        let max = inner.iter().map(|u| eval(&(&w * u))).fold(f64::NEG_INFINITY, f64::max);
        best = best.min(max);
    }
    Ok(best)
}
