//! Named model immersions.

use super::{tabulated::TabulatedChart, ParametricImmersion};
use crate::error::{invalid, Result};
use crate::spaces::{ProductSpace, SpaceForm};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::sync::Arc;

/// Half-width of the axial chart coordinates of the cylinder entries.
pub const AXIAL_HALF_WIDTH: f64 = 5.0;
/// Distance kept from the coordinate singularities of hyperspherical angles.
const POLE_MARGIN: f64 = 0.05;

/// What the catalog knows about an entry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogInfo {
    pub parameters: Value,
    /// Extrinsic radius `sup r`, when the entry lies on a geodesic sphere
    /// about the base point.
    pub extrinsic_radius: Option<f64>,
    /// Whether the entry attains equality in the extrinsic bound.
    pub sharp: bool,
    /// Whether the entry violates `p < m − l`.
    pub codimension_counterexample: bool,
}

pub fn catalog_names() -> &'static [&'static str] {
    &["geodesic_sphere_cylinder", "flat_cylinder", "clifford_torus", "round_sphere", "flat_plane", "tabulated"]
}

fn number(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| invalid(format!("missing numeric parameter `{key}`")))
}

fn number_or(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| invalid(format!("parameter `{key}` must be a number"))),
    }
}

fn count(params: &Value, key: &str) -> Result<usize> {
    params
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| invalid(format!("missing integer parameter `{key}`")))
}

fn count_or(params: &Value, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_u64().map(|v| v as usize).ok_or_else(|| invalid(format!("parameter `{key}` must be a nonnegative integer"))),
    }
}

/// Looks up a catalog entry by name with JSON parameters.
///
/// `R` is the radius and `m` the dimension of the ambient factor `P`
/// (for `round_sphere`, the dimension of the sphere itself).
pub fn catalog(name: &str, params: &Value) -> Result<ParametricImmersion> {
    match name {
        "geodesic_sphere_cylinder" => geodesic_sphere_cylinder(
            number_or(params, "b", 0.0)?,
            count(params, "m")?,
            number(params, "R")?,
            count_or(params, "l", 0)?,
        ),
        "flat_cylinder" => flat_cylinder(number(params, "R")?),
        "clifford_torus" => clifford_torus(count(params, "n")?),
        "round_sphere" => round_sphere(number(params, "R")?, count(params, "m")?),
        "flat_plane" => flat_plane(count(params, "m")?),
        "tabulated" => {
            let path = params
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| invalid("missing string parameter `path`"))?;
            TabulatedChart::from_path(path)?.into_immersion()
        }
        other => Err(invalid(format!("unknown catalog entry `{other}`; known: {:?}", catalog_names()))),
    }
}

/// Unit vector with hyperspherical angles `θ_1..θ_{k−1}`.
pub fn hyperspherical(theta: &[f64]) -> Vec<f64> {
    let k = theta.len() + 1;
    let mut out = vec![0.0; k];
    let mut s = 1.0;
    for (i, t) in theta.iter().enumerate() {
        out[i] = s * t.cos();
        s *= t.sin();
    }
    out[k - 1] = s;
    out
}

/// `∂B_{Q_b^m}(R) × R^l` inside `Q_b^m × R^l`, centered at the base point.
pub fn geodesic_sphere_cylinder(b: f64, m: usize, r: f64, l: usize) -> Result<ParametricImmersion> {
    if m < 2 {
        return Err(invalid("geodesic_sphere_cylinder needs m ≥ 2"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("geodesic_sphere_cylinder needs R > 0"));
    }
    if b > 0.0 && r >= PI / (2.0 * b.sqrt()) {
        return Err(invalid(format!("geodesic_sphere_cylinder needs R < π/(2√b) = {}", PI / (2.0 * b.sqrt()))));
    }
    let p = SpaceForm::new(b, m)?;
    let q = SpaceForm::euclidean(l);
    let ambient = ProductSpace::standard(p, q);
    let mut lower = vec![POLE_MARGIN; m - 2];
    let mut upper = vec![PI - POLE_MARGIN; m - 2];
    lower.push(-PI);
    upper.push(PI);
    lower.extend(std::iter::repeat_n(-AXIAL_HALF_WIDTH, l));
    upper.extend(std::iter::repeat_n(AXIAL_HALF_WIDTH, l));
    let k = m - 1;
    let map = Arc::new(move |x: &[f64]| {
        let omega = hyperspherical(&x[..k]);
        let y = p.point_at(&omega, r).expect("radius validated at construction");
        DVector::from_iterator(y.len() + l, y.iter().copied().chain(x[k..].iter().copied()))
    });
    let info = CatalogInfo {
        parameters: serde_json::json!({"b": b, "m": m, "R": r, "l": l}),
        extrinsic_radius: Some(r),
        sharp: true,
        codimension_counterexample: m <= 2,
    };
    Ok(ParametricImmersion::new("geodesic_sphere_cylinder", lower, upper, ambient, map)?
        .with_axial_coords((k..k + l).collect())
        .with_info(info))
}

/// `S¹(R) × R ⊂ R³`, the entry showing that `p < m − l` cannot be dropped.
pub fn flat_cylinder(r: f64) -> Result<ParametricImmersion> {
    let mut f = geodesic_sphere_cylinder(0.0, 2, r, 1)?;
    f.name = "flat_cylinder".into();
    f.info.parameters = serde_json::json!({"R": r});
    f.info.sharp = false;
    f.info.codimension_counterexample = true;
    Ok(f)
}

/// `S^m(R) ⊂ R^{m+1}`.
pub fn round_sphere(r: f64, m: usize) -> Result<ParametricImmersion> {
    if m < 1 {
        return Err(invalid("round_sphere needs m ≥ 1"));
    }
    let mut f = geodesic_sphere_cylinder(0.0, m + 1, r, 0)?;
    f.name = "round_sphere".into();
    f.info.parameters = serde_json::json!({"R": r, "m": m});
    Ok(f)
}

/// The minimal Clifford torus `T^n ⊂ S^{2n−1}` with all radii `1/√n`.
pub fn clifford_torus(n: usize) -> Result<ParametricImmersion> {
    if n < 2 {
        return Err(invalid("clifford_torus needs n ≥ 2"));
    }
    let ambient = ProductSpace::standard(SpaceForm::new(1.0, 2 * n - 1)?, SpaceForm::euclidean(0));
    let s = 1.0 / (n as f64).sqrt();
    let map = Arc::new(move |x: &[f64]| DVector::from_iterator(2 * n, x.iter().flat_map(|t| [s * t.cos(), s * t.sin()])));
    let info = CatalogInfo {
        parameters: serde_json::json!({"n": n}),
        extrinsic_radius: None,
        sharp: true,
        codimension_counterexample: false,
    };
    Ok(ParametricImmersion::new("clifford_torus", vec![-PI; n], vec![PI; n], ambient, map)?.with_info(info))
}

/// `R^m × {0} ⊂ R^{m+1}`.
pub fn flat_plane(m: usize) -> Result<ParametricImmersion> {
    if m < 1 {
        return Err(invalid("flat_plane needs m ≥ 1"));
    }
    let ambient = ProductSpace::from(SpaceForm::euclidean(m + 1));
    let map = Arc::new(move |x: &[f64]| DVector::from_iterator(m + 1, x.iter().copied().chain([0.0])));
    let info = CatalogInfo { parameters: serde_json::json!({"m": m}), ..CatalogInfo::default() };
    Ok(ParametricImmersion::new("flat_plane", vec![-AXIAL_HALF_WIDTH; m], vec![AXIAL_HALF_WIDTH; m], ambient, map)?
        .with_info(info))
}
