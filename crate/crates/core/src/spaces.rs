//! Model ambient geometries: space forms `Q_b^n` and products `P × Q`.
//!
//! Points live in global embedding coordinates. Euclidean space uses
//! Cartesian coordinates, the sphere of curvature `b > 0` is `|x|² = 1/b` in
//! `R^{n+1}`, and hyperbolic space of curvature `b < 0` is the upper sheet of
//! `⟨x, x⟩_L = 1/b` in Minkowski space with signature `(−, +, …, +)`.
//!
//! Bilinear forms on tangent spaces (Hessians) are returned as coordinate
//! matrices `H` with `Hess(u, v) = uᵀ H v` for tangent vectors `u, v`.

use crate::error::{domain, invalid, Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Threshold on `|b|·t²` below which the series branches are used.
const SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Euclidean,
    Sphere,
    Hyperbolic,
}

impl Model {
    pub fn from_curvature(b: f64) -> Model {
        if b > 0.0 {
            Model::Sphere
        } else if b < 0.0 {
            Model::Hyperbolic
        } else {
            Model::Euclidean
        }
    }
}

/// The simply connected space form of constant curvature `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceFormRepr", into = "SpaceFormRepr")]
pub struct SpaceForm {
    b: f64,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SpaceFormRepr {
    model: Model,
    b: f64,
    dim: usize,
}

impl TryFrom<SpaceFormRepr> for SpaceForm {
    type Error = Error;

    fn try_from(r: SpaceFormRepr) -> Result<Self> {
        if Model::from_curvature(r.b) != r.model {
            return Err(invalid(format!("model {:?} is inconsistent with curvature b = {}", r.model, r.b)));
        }
        SpaceForm::new(r.b, r.dim)
    }
}

impl From<SpaceForm> for SpaceFormRepr {
    fn from(s: SpaceForm) -> Self {
        SpaceFormRepr { model: s.model(), b: s.b, dim: s.dim }
    }
}

impl SpaceForm {
    pub fn new(b: f64, dim: usize) -> Result<Self> {
        if !b.is_finite() {
            return Err(invalid("curvature must be finite"));
        }
        if dim == 0 && b != 0.0 {
            return Err(invalid("zero-dimensional factors must be flat"));
        }
        Ok(SpaceForm { b, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        SpaceForm { b: 0.0, dim }
    }

    pub fn model(&self) -> Model {
        Model::from_curvature(self.b)
    }

    pub fn curvature(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of embedding coordinates.
    pub fn coord_dim(&self) -> usize {
        match self.model() {
            Model::Euclidean => self.dim,
            _ => self.dim + 1,
        }
    }

    /// `+∞` for `b ≤ 0`, `π/√b` for the sphere.
    pub fn injectivity_radius(&self) -> f64 {
        if self.b > 0.0 {
            PI / self.b.sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// The standard base point: the coordinate origin, or the pole on the
    /// first axis.
    pub fn origin(&self) -> DVector<f64> {
        let mut o = DVector::zeros(self.coord_dim());
        if self.model() != Model::Euclidean {
            o[0] = 1.0 / self.b.abs().sqrt();
        }
        o
    }

    /// Signature of the embedding metric in coordinate `i`.
    fn sign(&self, i: usize) -> f64 {
        if i == 0 && self.model() == Model::Hyperbolic {
            -1.0
        } else {
            1.0
        }
    }

    /// Diagonal Gram matrix of the embedding metric.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.coord_dim(), self.coord_dim(), |i, j| if i == j { self.sign(i) } else { 0.0 })
    }

    /// Embedding inner product (Euclidean, or Minkowski for hyperbolic space).
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).enumerate().map(|(i, (a, b))| self.sign(i) * a * b).sum()
    }

    /// Orthogonal projection of an embedding vector onto `T_x`.
    pub fn tangent_projection(&self, x: &[f64], v: &[f64]) -> DVector<f64> {
        let mut out = DVector::from_column_slice(v);
        if self.model() != Model::Euclidean {
            let c = self.b * self.inner(v, x);
            for (o, xi) in out.iter_mut().zip(x) {
                *o -= c * xi;
            }
        }
        out
    }

    /// `|⟨x, x⟩ − 1/b|` relative to `1/|b|`, or 0 for flat space.
    pub fn membership_defect(&self, x: &[f64]) -> f64 {
        match self.model() {
            Model::Euclidean => 0.0,
            Model::Sphere => (self.b * self.inner(x, x) - 1.0).abs(),
            Model::Hyperbolic => {
                let on_sheet = (self.b * self.inner(x, x) - 1.0).abs();
                if x[0] > 0.0 {
                    on_sheet
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.coord_dim() && self.membership_defect(x) <= tol
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.coord_dim() {
            return Err(Error::DimensionMismatch { expected: self.coord_dim(), found: x.len() });
        }
        Ok(())
    }

    /// Geodesic distance.
    pub fn distance(&self, x: &[f64], o: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(o)?;
        let diff: Vec<f64> = x.iter().zip(o).map(|(a, b)| a - b).collect();
        let chord2 = self.inner(&diff, &diff).max(0.0);
        Ok(match self.model() {
            Model::Euclidean => chord2.sqrt(),
            Model::Sphere => {
                let k = self.b.sqrt();
                2.0 * (0.5 * k * chord2.sqrt()).min(1.0).asin() / k
            }
            Model::Hyperbolic => {
                let k = (-self.b).sqrt();
                2.0 * (0.5 * k * chord2.sqrt()).asinh() / k
            }
        })
    }

    /// Point at distance `r` from [`SpaceForm::origin`] along the unit
    /// direction `omega ∈ R^dim`.
    pub fn point_at(&self, omega: &[f64], r: f64) -> Result<DVector<f64>> {
        if omega.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: omega.len() });
        }
        Ok(match self.model() {
            Model::Euclidean => DVector::from_iterator(self.dim, omega.iter().map(|w| r * w)),
            Model::Sphere => {
                let k = self.b.sqrt();
                let mut x = DVector::zeros(self.dim + 1);
                x[0] = (k * r).cos() / k;
                for (i, w) in omega.iter().enumerate() {
                    x[i + 1] = (k * r).sin() / k * w;
                }
                x
            }
            Model::Hyperbolic => {
                let k = (-self.b).sqrt();
                let mut x = DVector::zeros(self.dim + 1);
                x[0] = (k * r).cosh() / k;
                for (i, w) in omega.iter().enumerate() {
                    x[i + 1] = (k * r).sinh() / k * w;
                }
                x
            }
        })
    }

    /// Distance to `o` with its Riemannian gradient and Hessian at `x`.
    pub fn distance_and_derivatives(&self, x: &[f64], o: &[f64]) -> Result<DistanceDerivatives> {
        let r = self.distance(x, o)?;
        if r <= 1e-12 * (1.0 + self.inj_scale()) {
            return Err(Error::UndefinedGradient);
        }
        let dim = self.coord_dim();
        let xv = DVector::from_column_slice(x);
        let ov = DVector::from_column_slice(o);
        // Differential and coordinate second derivative of an extension r̃.
        let (dr, d2r) = match self.model() {
            Model::Euclidean => {
                let u = (&xv - &ov) / r;
                let d2 = (DMatrix::identity(dim, dim) - &u * u.transpose()) / r;
                (u, d2)
            }
            Model::Sphere => {
                if r >= self.injectivity_radius() * (1.0 - 1e-12) {
                    return Err(domain("point lies on the cut locus of the base point"));
                }
                let k = self.b.sqrt();
                let theta = k * r;
                let bo = &ov * self.b;
                let dr = &bo * (-1.0 / (k * theta.sin()));
                let d2 = &bo * bo.transpose() * (-theta.cos() / (k * theta.sin().powi(3)));
                (dr, d2)
            }
            Model::Hyperbolic => {
                let k = (-self.b).sqrt();
                let theta = k * r;
                let jo = &self.gram() * &ov * self.b;
                let dr = &jo * (1.0 / (k * theta.sinh()));
                let d2 = &jo * jo.transpose() * (-theta.cosh() / (k * theta.sinh().powi(3)));
                (dr, d2)
            }
        };
        let gram = self.gram();
        let (grad, hess) = if self.model() == Model::Euclidean {
            (dr.clone(), d2r)
        } else {
            // Tangential projector P = I − b x xᵀ G.
            let proj = DMatrix::identity(dim, dim) - &xv * (xv.transpose() * &gram) * self.b;
            let grad = &proj * (&gram * &dr);
            let along = dr.dot(&xv);
            let h = d2r - &gram * (self.b * along);
            // Project through an orthonormal frame E (as G E (Eᵀ h E) Eᵀ G):
            // `proj` has entries of size |x|² and loses precision far from o.
            let frame = self.tangent_frame(x)?;
            let inner = frame.transpose() * h * &frame;
            let gf = &gram * &frame;
            (grad, &gf * inner * gf.transpose())
        };
        Ok(DistanceDerivatives { r, grad, hess })
    }

    fn inj_scale(&self) -> f64 {
        if self.b == 0.0 {
            1.0
        } else {
            1.0 / self.b.abs().sqrt()
        }
    }

    /// A basis of `T_x` orthonormal for the embedding metric, as columns.
    pub fn tangent_frame(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let dim = self.coord_dim();
        let candidates: Vec<DVector<f64>> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                self.tangent_projection(x, &e)
            })
            .collect();
        orthonormalize_in(&candidates, self.dim, |u, v| self.inner(u.as_slice(), v.as_slice()))
            .ok_or_else(|| domain("could not build a tangent frame"))
    }

    /// Sectional curvature of the plane spanned by tangent vectors `u, v`.
    pub fn sectional_curvature(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let wedge = self.inner(u, u) * self.inner(v, v) - self.inner(u, v).powi(2);
        let scale = (self.inner(u, u) * self.inner(v, v)).abs().max(f64::MIN_POSITIVE);
        if wedge <= 1e-20 * scale {
            return Err(Error::DegeneratePlane(wedge));
        }
        Ok(self.b)
    }
}

/// Pivoted Gram-Schmidt in an arbitrary inner product, keeping `count`
/// vectors.
pub(crate) fn orthonormalize_in<F>(candidates: &[DVector<f64>], count: usize, inner: F) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    let mut pool: Vec<DVector<f64>> = candidates.to_vec();
    while basis.len() < count {
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for (i, c) in pool.iter().enumerate() {
            let mut v = c.clone();
            for _pass in 0..2 {
                for b in &basis {
                    let k = inner(b, &v);
                    v.axpy(-k, b, 1.0);
                }
            }
            let n2 = inner(&v, &v);
            if best.as_ref().is_none_or(|(m, _, _)| n2 > *m) {
                best = Some((n2, i, v));
            }
        }
        let (n2, i, v) = best?;
        if !(n2 > 1e-20) {
            return None;
        }
        basis.push(v / n2.sqrt());
        pool.swap_remove(i);
    }
    if basis.is_empty() {
        return Some(DMatrix::zeros(candidates.first().map_or(0, |c| c.len()), 0));
    }
    Some(DMatrix::from_columns(&basis))
}

/// Distance from a base point and its first two covariant derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceDerivatives {
    pub r: f64,
    /// Unit tangent vector in embedding coordinates.
    pub grad: DVector<f64>,
    /// Coordinate matrix of the Hessian, zero on the normal direction.
    pub hess: DMatrix<f64>,
}

fn check_cb_domain(b: f64, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("C_b needs t > 0, got {t}")));
    }
    if b > 0.0 && t >= 0.5 * PI / b.sqrt() {
        return Err(domain(format!("C_b with b = {b} needs t < π/(2√b) = {}", 0.5 * PI / b.sqrt())));
    }
    Ok(())
}

/// The comparison function `C_b(t)`.
pub fn cb(b: f64, t: f64) -> Result<f64> {
    check_cb_domain(b, t)?;
    Ok(cb_unchecked(b, t))
}

/// `C_b(t)` without the `t < π/(2√b)` restriction (still `t > 0`).
pub(crate) fn cb_unchecked(b: f64, t: f64) -> f64 {
    let x2 = b * t * t;
    if x2.abs() < SERIES_THRESHOLD {
        return 1.0 / t - b * t / 3.0 - b * b * t * t * t / 45.0;
    }
    if b > 0.0 {
        let k = b.sqrt();
        k / (k * t).tan()
    } else {
        let k = (-b).sqrt();
        k / (k * t).tanh()
    }
}

/// Inverse of `C_b` on its range: `s > 0` for `b ≥ 0`, `s > √(−b)` for `b < 0`.
pub fn cb_inverse(b: f64, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(domain("C_b^{-1} needs a finite argument"));
    }
    if b >= 0.0 {
        if !(s > 0.0) {
            return Err(domain(format!("C_b^{{-1}} with b = {b} needs s > 0, got {s}")));
        }
        if b == 0.0 {
            return Ok(1.0 / s);
        }
        let k = b.sqrt();
        Ok((k / s).atan() / k)
    } else {
        let k = (-b).sqrt();
        if !(s > k) {
            return Err(domain(format!("C_b^{{-1}} with b = {b} needs s > √(−b) = {k}, got {s}")));
        }
        Ok((k / s).atanh() / k)
    }
}

fn check_psi_domain(b: f64, t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("ψ_b needs t ≥ 0, got {t}")));
    }
    if b > 0.0 && t >= 0.5 * PI / b.sqrt() {
        return Err(domain(format!("ψ_b with b = {b} needs t < π/(2√b) = {}", 0.5 * PI / b.sqrt())));
    }
    Ok(())
}

/// `ψ_b(t)`: `1 − cos(√b t)`, `t²`, or `cosh(√(−b) t)`.
pub fn psi(b: f64, t: f64) -> Result<f64> {
    check_psi_domain(b, t)?;
    Ok(if b > 0.0 {
        2.0 * (0.5 * b.sqrt() * t).sin().powi(2)
    } else if b == 0.0 {
        t * t
    } else {
        ((-b).sqrt() * t).cosh()
    })
}

/// `ψ_b'(t)`.
pub fn psi_prime(b: f64, t: f64) -> Result<f64> {
    check_psi_domain(b, t)?;
    Ok(if b > 0.0 {
        let k = b.sqrt();
        k * (k * t).sin()
    } else if b == 0.0 {
        2.0 * t
    } else {
        let k = (-b).sqrt();
        k * (k * t).sinh()
    })
}

/// `ψ_b''(t)`.
pub fn psi_second(b: f64, t: f64) -> Result<f64> {
    check_psi_domain(b, t)?;
    Ok(if b > 0.0 {
        b * (b.sqrt() * t).cos()
    } else if b == 0.0 {
        2.0
    } else {
        -b * ((-b).sqrt() * t).cosh()
    })
}

/// Margins of `Hess r − C_b(r)(g − dr ⊗ dr)` at one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMargin {
    pub index: usize,
    pub r: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianComparisonReport {
    pub space_curvature: f64,
    pub comparison_b: f64,
    pub tolerance: f64,
    pub samples: Vec<SampleMargin>,
    pub skipped: Vec<SkippedSample>,
    pub min_margin: f64,
    pub max_abs_margin: f64,
    /// Every checked margin is at least `−tolerance`.
    pub holds: bool,
    /// Every checked margin is within `tolerance` of zero.
    pub equality: bool,
}

/// Smallest and largest eigenvalue of `Hess r − C_b(r)(g − dr ⊗ dr)` at `x`,
/// with `r` the distance from `o` and `b = comparison_b`.
pub fn hessian_comparison_margin(
    space: &SpaceForm,
    x: &[f64],
    o: &[f64],
    comparison_b: f64,
) -> Result<(f64, f64, f64)> {
    let d = space.distance_and_derivatives(x, o)?;
    let c = cb(comparison_b, d.r)?;
    let frame = space.tangent_frame(x)?;
    let gram = space.gram();
    let g_frame = frame.transpose() * &gram * &d.grad;
    let h = frame.transpose() * &d.hess * &frame;
    let m = space.dim();
    let model = DMatrix::identity(m, m) - &g_frame * g_frame.transpose();
    let margin = h - model * c;
    let eig = crate::linalg::symmetric_eigenvalues(&margin);
    Ok((d.r, eig[0], eig[eig.len() - 1]))
}

/// Checks the Hessian comparison inequality against the space's own curvature.
pub fn hessian_comparison_check(space: &SpaceForm, samples: &[DVector<f64>], tol: f64) -> HessianComparisonReport {
    hessian_comparison_check_against(space, samples, space.curvature(), tol)
}

/// Checks `Hess r ≥ C_b(r)(g − dr ⊗ dr)` for an arbitrary comparison `b`,
/// with `r` measured from [`SpaceForm::origin`].
pub fn hessian_comparison_check_against(
    space: &SpaceForm,
    samples: &[DVector<f64>],
    comparison_b: f64,
    tol: f64,
) -> HessianComparisonReport {
    let o = space.origin();
    let mut margins = Vec::new();
    let mut skipped = Vec::new();
    for (index, x) in samples.iter().enumerate() {
        if !space.contains(x.as_slice(), 1e-9) {
            skipped.push(SkippedSample { index, reason: "point is not on the model".into() });
            continue;
        }
        match hessian_comparison_margin(space, x.as_slice(), o.as_slice(), comparison_b) {
            Ok((r, lo, hi)) => margins.push(SampleMargin { index, r, min_eigenvalue: lo, max_eigenvalue: hi }),
            Err(e) => skipped.push(SkippedSample { index, reason: e.to_string() }),
        }
    }
    let min_margin = margins.iter().map(|m| m.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let max_abs_margin = margins
        .iter()
        .map(|m| m.min_eigenvalue.abs().max(m.max_eigenvalue.abs()))
        .fold(0.0, f64::max);
    HessianComparisonReport {
        space_curvature: space.curvature(),
        comparison_b,
        tolerance: tol,
        holds: !margins.is_empty() && min_margin >= -tol,
        equality: !margins.is_empty() && max_abs_margin <= tol,
        samples: margins,
        skipped,
        min_margin,
        max_abs_margin,
    }
}

/// A Riemannian product `N = P × Q` with a base point `o ∈ P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProductRepr", into = "ProductRepr")]
pub struct ProductSpace {
    p: SpaceForm,
    q: SpaceForm,
    basepoint: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProductRepr {
    p: SpaceForm,
    q: SpaceForm,
    basepoint: Vec<f64>,
}

impl TryFrom<ProductRepr> for ProductSpace {
    type Error = Error;

    fn try_from(r: ProductRepr) -> Result<Self> {
        ProductSpace::new(r.p, r.q, DVector::from_vec(r.basepoint))
    }
}

impl From<ProductSpace> for ProductRepr {
    fn from(s: ProductSpace) -> Self {
        ProductRepr { p: s.p, q: s.q, basepoint: s.basepoint.iter().copied().collect() }
    }
}

impl From<SpaceForm> for ProductSpace {
    fn from(p: SpaceForm) -> Self {
        ProductSpace { p, q: SpaceForm::euclidean(0), basepoint: p.origin() }
    }
}

/// `h = ψ_b(r(π_P(·)))` and its ambient gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialHeight {
    pub r: f64,
    pub h: f64,
    pub psi_prime: f64,
    pub psi_second: f64,
    /// Gradient in product embedding coordinates (zero `Q` block).
    pub grad: DVector<f64>,
    /// Unit gradient of `r` in product embedding coordinates.
    pub grad_r: DVector<f64>,
}

impl ProductSpace {
    pub fn new(p: SpaceForm, q: SpaceForm, basepoint: DVector<f64>) -> Result<Self> {
        if !p.contains(basepoint.as_slice(), 1e-9) {
            return Err(invalid("base point does not lie on P"));
        }
        Ok(ProductSpace { p, q, basepoint })
    }

    /// `P × Q` with `o` the standard origin of `P`.
    pub fn standard(p: SpaceForm, q: SpaceForm) -> Self {
        ProductSpace { basepoint: p.origin(), p, q }
    }

    pub fn factor_p(&self) -> &SpaceForm {
        &self.p
    }

    pub fn factor_q(&self) -> &SpaceForm {
        &self.q
    }

    pub fn basepoint(&self) -> &DVector<f64> {
        &self.basepoint
    }

    /// The same product with another base point in `P`.
    pub fn with_basepoint(&self, o: DVector<f64>) -> Result<Self> {
        ProductSpace::new(self.p, self.q, o)
    }

    pub fn dim(&self) -> usize {
        self.p.dim() + self.q.dim()
    }

    pub fn coord_dim(&self) -> usize {
        self.p.coord_dim() + self.q.coord_dim()
    }

    /// Splits product coordinates into the `P` and `Q` blocks.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.p.coord_dim())
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let (up, uq) = self.split(u);
        let (vp, vq) = self.split(v);
        self.p.inner(up, vp) + self.q.inner(uq, vq)
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.coord_dim();
        let k = self.p.coord_dim();
        let gp = self.p.gram();
        let gq = self.q.gram();
        DMatrix::from_fn(n, n, |i, j| match (i < k, j < k) {
            (true, true) => gp[(i, j)],
            (false, false) => gq[(i - k, j - k)],
            _ => 0.0,
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.coord_dim() {
            return false;
        }
        let (y, z) = self.split(x);
        self.p.contains(y, tol) && self.q.contains(z, tol)
    }

    pub fn tangent_projection(&self, x: &[f64], v: &[f64]) -> DVector<f64> {
        let (xp, xq) = self.split(x);
        let (vp, vq) = self.split(v);
        let a = self.p.tangent_projection(xp, vp);
        let b = self.q.tangent_projection(xq, vq);
        DVector::from_iterator(self.coord_dim(), a.iter().chain(b.iter()).copied())
    }

    /// Product distance `√(d_P² + d_Q²)`.
    pub fn distance(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let (y, z) = self.split(x);
        let (y2, z2) = self.split(x2);
        Ok((self.p.distance(y, y2)?.powi(2) + self.q.distance(z, z2)?.powi(2)).sqrt())
    }

    /// `R(X, Y, Z, W)` of the product of constant-curvature factors, with the
    /// sign convention `R(X, Y, Y, X) = K(X, Y) ‖X ∧ Y‖²`.
    pub fn curvature_tensor(&self, x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<f64> {
        if x.len() != self.coord_dim() {
            return Err(Error::DimensionMismatch { expected: self.coord_dim(), found: x.len() });
        }
        let term = |space: &SpaceForm, a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
            space.curvature() * (space.inner(a, d) * space.inner(b, c) - space.inner(a, c) * space.inner(b, d))
        };
        let (ap, aq) = self.split(a);
        let (bp, bq) = self.split(b);
        let (cp, cq) = self.split(c);
        let (dp, dq) = self.split(d);
        Ok(term(&self.p, ap, bp, cp, dp) + term(&self.q, aq, bq, cq, dq))
    }

    /// Sectional curvature of the plane spanned by tangent vectors `u, v`.
    pub fn sectional_curvature(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let wedge = self.inner(u, u) * self.inner(v, v) - self.inner(u, v).powi(2);
        let scale = (self.inner(u, u) * self.inner(v, v)).abs().max(f64::MIN_POSITIVE);
        if wedge <= 1e-20 * scale {
            return Err(Error::DegeneratePlane(wedge));
        }
        Ok(self.curvature_tensor(x, u, v, v, u)? / wedge)
    }

    /// Tangent frame of `N` at `x`: the `P` frame followed by the `Q` frame.
    pub fn tangent_frame(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (y, z) = self.split(x);
        let fp = self.p.tangent_frame(y)?;
        let fq = self.q.tangent_frame(z)?;
        let k = self.p.coord_dim();
        let mut out = DMatrix::zeros(self.coord_dim(), self.dim());
        out.view_mut((0, 0), (k, fp.ncols())).copy_from(&fp);
        out.view_mut((k, fp.ncols()), (fq.nrows(), fq.ncols())).copy_from(&fq);
        Ok(out)
    }

    /// Distance in `P` from `π_P(x)` to the base point.
    pub fn radial_distance(&self, x: &[f64]) -> Result<f64> {
        let (y, _) = self.split(x);
        self.p.distance(y, self.basepoint.as_slice())
    }

    /// Distance in `Q` from `π_Q(x)` to the origin of `Q`.
    pub fn axial_distance(&self, x: &[f64]) -> Result<f64> {
        let (_, z) = self.split(x);
        self.q.distance(z, self.q.origin().as_slice())
    }

    fn embed_p(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.coord_dim());
        out.rows_mut(0, v.len()).copy_from(v);
        out
    }

    /// The modified radial height `h = ψ_b ∘ r ∘ π_P` with its gradient.
    pub fn modified_radial_height(&self, b: f64, x: &[f64]) -> Result<RadialHeight> {
        let (y, _) = self.split(x);
        let d = self.p.distance_and_derivatives(y, self.basepoint.as_slice())?;
        let h = psi(b, d.r)?;
        let pp = psi_prime(b, d.r)?;
        let ps = psi_second(b, d.r)?;
        let grad_r = self.embed_p(&d.grad);
        Ok(RadialHeight { r: d.r, h, psi_prime: pp, psi_second: ps, grad: &grad_r * pp, grad_r })
    }

    /// Coordinate matrix of `Hess^N h = ψ_b'' dr ⊗ dr + ψ_b' Hess^P r` at `x`.
    pub fn radial_height_hessian(&self, b: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let (y, _) = self.split(x);
        let d = self.p.distance_and_derivatives(y, self.basepoint.as_slice())?;
        let pp = psi_prime(b, d.r)?;
        let ps = psi_second(b, d.r)?;
        let dr = self.p.gram() * &d.grad;
        let block = &dr * dr.transpose() * ps + &d.hess * pp;
        let n = self.coord_dim();
        let k = self.p.coord_dim();
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (k, k)).copy_from(&block);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cb_examples() {
        assert_relative_eq!(cb(0.0, 2.0).unwrap(), 0.5);
        assert_relative_eq!(cb(1.0, PI / 4.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!((cb(-1.0, 20.0).unwrap() - 1.0).abs() < 1e-8);
        assert!(cb(1.0, 0.0).is_err());
        assert!(cb(1.0, 1.6).is_err());
    }

    #[test]
    fn cb_is_continuous_at_zero() {
        for t in [0.1, 1.0, 3.0] {
            let flat = cb(0.0, t).unwrap();
            for b in [1e-12, -1e-12, 1e-9, -1e-9] {
                assert!((cb(b, t).unwrap() - flat).abs() < 1e-8);
            }
            // Across the series threshold.
            let b = SERIES_THRESHOLD / (t * t);
            let below = cb(b * 0.999, t).unwrap();
            let above = cb(b * 1.001, t).unwrap();
            assert!((below - above).abs() < 1e-10);
        }
    }

    #[test]
    fn cb_inverse_examples() {
        assert_relative_eq!(cb_inverse(0.0, 0.5).unwrap(), 2.0);
        assert_relative_eq!(cb_inverse(1.0, 1.0).unwrap(), PI / 4.0, epsilon = 1e-15);
        assert!(matches!(cb_inverse(-1.0, 1.0), Err(Error::Domain(_))));
        assert!(cb_inverse(-1.0, 0.5).is_err());
        assert!(cb_inverse(0.0, 0.0).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0.0, 3.0).unwrap(), 9.0);
        assert_relative_eq!(psi(-1.0, 1e-300).unwrap(), 1.0);
        assert_eq!(psi(1.0, 0.0).unwrap(), 0.0);
        assert!(psi(1.0, 2.0).is_err());
        assert!(psi(0.0, -1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        let flat = SpaceForm::euclidean(3);
        let x = [2.0, 0.0, 0.0];
        let d = flat.distance_and_derivatives(&x, &[0.0; 3]).unwrap();
        let eig = crate::linalg::symmetric_eigenvalues(&d.hess);
        assert_relative_eq!(eig[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(eig[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(eig[2], 0.5, epsilon = 1e-15);

        let sphere = SpaceForm::new(1.0, 3).unwrap();
        let x = sphere.point_at(&[0.0, 1.0, 0.0], PI / 4.0).unwrap();
        let (r, lo, hi) = hessian_comparison_margin(&sphere, x.as_slice(), sphere.origin().as_slice(), 1.0).unwrap();
        assert_relative_eq!(r, PI / 4.0, epsilon = 1e-14);
        assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12);

        let hyp = SpaceForm::new(-1.0, 2).unwrap();
        let x = hyp.point_at(&[0.6, 0.8], 1.0).unwrap();
        let d = hyp.distance_and_derivatives(x.as_slice(), hyp.origin().as_slice()).unwrap();
        assert_relative_eq!(d.r, 1.0, epsilon = 1e-14);
        let frame = hyp.tangent_frame(x.as_slice()).unwrap();
        let eig = crate::linalg::symmetric_eigenvalues(&(frame.transpose() * &d.hess * &frame));
        assert!(eig[0].abs() < 1e-12);
        assert_relative_eq!(eig[1], 1.0f64 / 1.0f64.tanh(), epsilon = 1e-12);
        assert!(matches!(
            hyp.distance_and_derivatives(hyp.origin().as_slice(), hyp.origin().as_slice()),
            Err(Error::UndefinedGradient)
        ));
    }

    #[test]
    fn hyperbolic_hessian_matches_differences() {
        // Differences of r along geodesics t ↦ cosh(t)x + sinh(t)e.
        let hyp = SpaceForm::new(-1.0, 2).unwrap();
        let x = hyp.point_at(&[0.6, 0.8], 0.7).unwrap();
        let o = hyp.origin();
        let d = hyp.distance_and_derivatives(x.as_slice(), o.as_slice()).unwrap();
        let frame = hyp.tangent_frame(x.as_slice()).unwrap();
        let h = 1e-4;
        for a in 0..2 {
            let e = frame.column(a).into_owned();
            let at = |t: f64| hyp.distance((x.clone() * t.cosh() + &e * t.sinh()).as_slice(), o.as_slice()).unwrap();
            let fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            let exact = e.dot(&(&d.hess * &e));
            assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
        }
    }

    #[test]
    fn product_curvature_examples() {
        let hyp = SpaceForm::new(-1.0, 3).unwrap();
        let x = hyp.origin();
        let u = [0.0, 1.0, 0.0, 0.0];
        let v = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(hyp.sectional_curvature(x.as_slice(), &u, &v).unwrap(), -1.0);

        let flat = ProductSpace::standard(SpaceForm::euclidean(2), SpaceForm::euclidean(1));
        let k = flat.sectional_curvature(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(k, 0.0);

        let cyl = ProductSpace::standard(SpaceForm::new(1.0, 2).unwrap(), SpaceForm::euclidean(1));
        let x = [0.0, 0.0, 1.0, 0.3];
        let tangent = cyl.sectional_curvature(&x, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(tangent, 1.0);
        let mixed = cyl.sectional_curvature(&x, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(mixed, 0.0);
        assert!(cyl.sectional_curvature(&x, &[1.0, 0.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn radial_height_examples() {
        let n = ProductSpace::standard(SpaceForm::euclidean(3), SpaceForm::euclidean(1));
        let rh = n.modified_radial_height(0.0, &[0.0, 3.0, 0.0, 5.0]).unwrap();
        assert_eq!(rh.h, 9.0);
        assert_relative_eq!(rh.grad.norm(), 6.0);
        assert_eq!(rh.grad[3], 0.0);
        let near = n.modified_radial_height(0.0, &[1e-6, 0.0, 0.0, 2.0]).unwrap();
        assert!(near.h < 1e-11);
        assert!(matches!(n.modified_radial_height(0.0, &[0.0, 0.0, 0.0, 1.0]), Err(Error::UndefinedGradient)));
    }

    #[test]
    fn descriptors_serialize() {
        let s = SpaceForm::new(-0.5, 3).unwrap();
        let v = serde_json::to_value(s).unwrap();
        assert_eq!(v["model"], "hyperbolic");
        let bad = serde_json::json!({"model": "sphere", "b": -1.0, "dim": 2});
        assert!(serde_json::from_value::<SpaceForm>(bad).is_err());
        let prod = ProductSpace::standard(s, SpaceForm::euclidean(1));
        let back: ProductSpace = serde_json::from_str(&serde_json::to_string(&prod).unwrap()).unwrap();
        assert_eq!(back, prod);
    }
}
