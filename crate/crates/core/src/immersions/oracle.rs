//! Finite-difference oracles that use only the chart map and the ambient
//! inner product: the Riemann tensor of the induced metric and covariant
//! derivatives of scalar fields on `M`.

use super::ParametricImmersion;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default step for differentiating the induced metric.
pub const METRIC_STEP: f64 = 5e-3;

/// Induced metric in chart coordinates from a central-difference Jacobian.
pub fn induced_metric(f: &ParametricImmersion, x: &[f64], h: f64) -> DMatrix<f64> {
    let jac = f.jacobian(x, h);
    let g = jac.transpose() * f.ambient().gram() * &jac;
    (&g + g.transpose()) * 0.5
}

struct MetricJet {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    /// `dg[k] = ∂_k g`.
    dg: Vec<DMatrix<f64>>,
    /// `ddg[k][l] = ∂_k ∂_l g`.
    ddg: Vec<Vec<DMatrix<f64>>>,
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

fn metric_jet(f: &ParametricImmersion, x: &[f64], step: f64) -> Result<MetricJet> {
    let m = x.len();
    let h1 = f.fd().h1;
    let g_at = |y: &[f64]| induced_metric(f, y, h1);
    let g = g_at(x);
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::ImmersionViolation {
        point: x.to_vec(),
        reason: "induced metric is singular".into(),
    })?;
    let plus: Vec<DMatrix<f64>> = (0..m).map(|k| g_at(&shifted(x, &[(k, step)]))).collect();
    let minus: Vec<DMatrix<f64>> = (0..m).map(|k| g_at(&shifted(x, &[(k, -step)]))).collect();
    let dg = (0..m).map(|k| (&plus[k] - &minus[k]) / (2.0 * step)).collect();
    let mut ddg = vec![vec![DMatrix::zeros(m, m); m]; m];
    for k in 0..m {
        ddg[k][k] = (&plus[k] - &g * 2.0 + &minus[k]) / (step * step);
        for l in (k + 1)..m {
            let pp = g_at(&shifted(x, &[(k, step), (l, step)]));
            let pm = g_at(&shifted(x, &[(k, step), (l, -step)]));
            let mp = g_at(&shifted(x, &[(k, -step), (l, step)]));
            let mm = g_at(&shifted(x, &[(k, -step), (l, -step)]));
            let v = (pp - pm - mp + mm) / (4.0 * step * step);
            ddg[k][l] = v.clone();
            ddg[l][k] = v;
        }
    }
    Ok(MetricJet { g, ginv, dg, ddg })
}

/// `Γ^n_{kl}` as `gamma[n][(k, l)]`.
fn christoffel(jet: &MetricJet) -> Vec<DMatrix<f64>> {
    let m = jet.g.nrows();
    // First-kind symbols Γ_{q,kl} = ½(∂_k g_ql + ∂_l g_qk − ∂_q g_kl).
    let first = |q: usize, k: usize, l: usize| 0.5 * (jet.dg[k][(q, l)] + jet.dg[l][(q, k)] - jet.dg[q][(k, l)]);
    (0..m)
        .map(|n| DMatrix::from_fn(m, m, |k, l| (0..m).map(|q| jet.ginv[(n, q)] * first(q, k, l)).sum()))
        .collect()
}

/// Sectional curvature of the induced metric on the plane spanned by the
/// chart vectors `u, v`, from second differences of the metric.
pub fn sectional_curvature_fd(f: &ParametricImmersion, x: &[f64], u: &[f64], v: &[f64], step: f64) -> Result<f64> {
    let jet = metric_jet(f, x, step)?;
    let gamma = christoffel(&jet);
    let m = x.len();
    // R_iklm = ½(g_im,kl + g_kl,im − g_il,km − g_km,il)
    //        + g_np (Γ^n_kl Γ^p_im − Γ^n_km Γ^p_il)
    let riemann = |i: usize, k: usize, l: usize, mm: usize| {
        let d = &jet.ddg;
        let mut r = 0.5 * (d[k][l][(i, mm)] + d[i][mm][(k, l)] - d[k][mm][(i, l)] - d[i][l][(k, mm)]);
        for n in 0..m {
            for p in 0..m {
                r += jet.g[(n, p)] * (gamma[n][(k, l)] * gamma[p][(i, mm)] - gamma[n][(k, mm)] * gamma[p][(i, l)]);
            }
        }
        r
    };
    let mut rxyxy = 0.0;
    for i in 0..m {
        for k in 0..m {
            for l in 0..m {
                for mm in 0..m {
                    let c = u[i] * v[k] * u[l] * v[mm];
                    if c != 0.0 {
                        rxyxy += c * riemann(i, k, l, mm);
                    }
                }
            }
        }
    }
    let uu = DVector::from_column_slice(u);
    let vv = DVector::from_column_slice(v);
    let area = uu.dot(&(&jet.g * &uu)) * vv.dot(&(&jet.g * &vv)) - uu.dot(&(&jet.g * &vv)).powi(2);
    if area <= 1e-14 {
        return Err(Error::DegeneratePlane(area));
    }
    Ok(rxyxy / area)
}

/// A scalar field on `M` differentiated in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    /// `∂_i φ`.
    pub partials: DVector<f64>,
    /// Covariant Hessian `∂_i∂_j φ − Γ^k_ij ∂_k φ`.
    pub hessian: DMatrix<f64>,
    /// Induced metric at the point.
    pub metric: DMatrix<f64>,
}

impl FieldJet {
    pub fn grad_norm(&self) -> f64 {
        let ginv = self.metric.clone().try_inverse().expect("metric is invertible");
        self.partials.dot(&(&ginv * &self.partials)).max(0.0).sqrt()
    }

    /// Laplacian `g^{ij} Hess_ij`.
    pub fn laplacian(&self) -> f64 {
        let ginv = self.metric.clone().try_inverse().expect("metric is invertible");
        (ginv * &self.hessian).trace()
    }

    /// Eigenvalues of the Hessian relative to the metric, ascending.
    pub fn hessian_eigenvalues(&self) -> Vec<f64> {
        let l = self.metric.clone().cholesky().expect("metric is positive definite").l();
        let linv = l.try_inverse().expect("Cholesky factor is invertible");
        crate::linalg::symmetric_eigenvalues(&(&linv * &self.hessian * linv.transpose()))
    }
}

/// Central differences of `field` with step `h` and of the metric with
/// `metric_step`.
pub fn field_jet<F>(f: &ParametricImmersion, field: &F, x: &[f64], h: f64, metric_step: f64) -> Result<FieldJet>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let m = x.len();
    let value = field(x)?;
    let mut partials = DVector::zeros(m);
    let mut second = DMatrix::zeros(m, m);
    for i in 0..m {
        let fp = field(&shifted(x, &[(i, h)]))?;
        let fm = field(&shifted(x, &[(i, -h)]))?;
        partials[i] = (fp - fm) / (2.0 * h);
        second[(i, i)] = (fp - 2.0 * value + fm) / (h * h);
        for j in (i + 1)..m {
            let pp = field(&shifted(x, &[(i, h), (j, h)]))?;
            let pm = field(&shifted(x, &[(i, h), (j, -h)]))?;
            let mp = field(&shifted(x, &[(i, -h), (j, h)]))?;
            let mm = field(&shifted(x, &[(i, -h), (j, -h)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            second[(i, j)] = v;
            second[(j, i)] = v;
        }
    }
    let jet = metric_jet_first(f, x, metric_step)?;
    let gamma = christoffel(&jet);
    let hessian = DMatrix::from_fn(m, m, |i, j| second[(i, j)] - (0..m).map(|k| gamma[k][(i, j)] * partials[k]).sum::<f64>());
    Ok(FieldJet { value, partials, hessian: (&hessian + hessian.transpose()) * 0.5, metric: jet.g })
}

fn metric_jet_first(f: &ParametricImmersion, x: &[f64], step: f64) -> Result<MetricJet> {
    let m = x.len();
    let h1 = f.fd().h1;
    let g = induced_metric(f, x, h1);
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::ImmersionViolation {
        point: x.to_vec(),
        reason: "induced metric is singular".into(),
    })?;
    let dg = (0..m)
        .map(|k| (induced_metric(f, &shifted(x, &[(k, step)]), h1) - induced_metric(f, &shifted(x, &[(k, -step)]), h1)) / (2.0 * step))
        .collect();
    Ok(MetricJet { g, ginv, dg, ddg: Vec::new() })
}

/// Chart-coordinate jet of the pulled-back modified radial function.
pub fn radial_field_jet(f: &ParametricImmersion, x: &[f64], b: f64) -> Result<FieldJet> {
    let field = |y: &[f64]| -> Result<f64> {
        let p = f.evaluate(y)?;
        Ok(f.ambient().modified_radial_height(b, p.as_slice())?.h)
    };
    field_jet(f, &field, x, f.fd().h2, 1e-4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersions::catalog;
    use serde_json::json;

    #[test]
    fn fd_curvature_of_round_and_flat_examples() {
        let s = catalog("round_sphere", &json!({"R": 2.0, "m": 2})).unwrap();
        let k = sectional_curvature_fd(&s, &[1.0, 0.3], &[1.0, 0.0], &[0.0, 1.0], METRIC_STEP).unwrap();
        assert!((k - 0.25).abs() < 1e-4, "{k}");
        let t = catalog("clifford_torus", &json!({"n": 2})).unwrap();
        let k = sectional_curvature_fd(&t, &[0.2, 0.9], &[1.0, 0.5], &[0.0, 1.0], METRIC_STEP).unwrap();
        assert!(k.abs() < 1e-6);
    }

    #[test]
    fn field_jet_of_the_plane() {
        let f = catalog("flat_plane", &json!({"m": 2})).unwrap();
        let jet = radial_field_jet(&f, &[0.5, -0.25], 0.0).unwrap();
        assert!((jet.value - 0.3125).abs() < 1e-12);
        assert!((jet.laplacian() - 4.0).abs() < 1e-6);
        assert!((jet.grad_norm() - 2.0 * 0.3125f64.sqrt()).abs() < 1e-8);
    }
}
