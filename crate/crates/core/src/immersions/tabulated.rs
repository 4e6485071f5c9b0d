//! Immersions given by samples on a structured chart grid.
//!
//! File layout: one JSON header line
//! `{"version": 1, "m": .., "ambient": {..}, "shape": [..], "lower": [..], "upper": [..]}`
//! followed by whitespace-separated ambient coordinates of every grid node in
//! row-major order (last chart index fastest). Values between nodes come from
//! tensor-product natural cubic splines, then are retracted onto the ambient.

use super::ParametricImmersion;
use crate::error::{invalid, Result};
use crate::spaces::{Model, ProductSpace, SpaceForm};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedHeader {
    pub version: u32,
    pub m: usize,
    pub ambient: ProductSpace,
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedChart {
    pub header: TabulatedHeader,
    /// Node values, `coord_dim` numbers per node.
    pub values: Vec<f64>,
}

impl TabulatedChart {
    pub fn new(header: TabulatedHeader, values: Vec<f64>) -> Result<Self> {
        if header.version != 1 {
            return Err(invalid(format!("unsupported tabulated chart version {}", header.version)));
        }
        let m = header.m;
        if header.shape.len() != m || header.lower.len() != m || header.upper.len() != m || m == 0 {
            return Err(invalid("header shape, lower and upper must all have length m ≥ 1"));
        }
        if header.shape.iter().any(|&s| s < 4) {
            return Err(invalid("every grid axis needs at least 4 nodes"));
        }
        if header.lower.iter().zip(&header.upper).any(|(a, b)| !(a < b)) {
            return Err(invalid("grid bounds must satisfy lower < upper"));
        }
        let nodes: usize = header.shape.iter().product();
        let expected = nodes * header.ambient.coord_dim();
        if values.len() != expected {
            return Err(invalid(format!("expected {expected} values for the grid, found {}", values.len())));
        }
        Ok(TabulatedChart { header, values })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: TabulatedHeader = serde_json::from_str(line.trim())?;
        let mut rest = String::new();
        reader.read_to_string(&mut rest)?;
        let values = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| invalid(format!("bad number `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        TabulatedChart::new(header, values)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        TabulatedChart::from_reader(std::fs::File::open(path)?)
    }

    /// Writes the file format read by [`TabulatedChart::from_reader`].
    pub fn write<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", serde_json::to_string(&self.header)?)?;
        let k = self.header.ambient.coord_dim();
        for node in self.values.chunks(k) {
            let row: Vec<String> = node.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Tabulates `map` on the grid described by `header`.
    pub fn sample(header: TabulatedHeader, map: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let nodes: usize = header.shape.iter().product();
        let mut values = Vec::with_capacity(nodes * header.ambient.coord_dim());
        let mut idx = vec![0usize; header.m];
        for _ in 0..nodes {
            let x: Vec<f64> = (0..header.m).map(|a| node_coord(&header, a, idx[a])).collect();
            values.extend(map(&x));
            for a in (0..header.m).rev() {
                idx[a] += 1;
                if idx[a] < header.shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        TabulatedChart::new(header, values)
    }

    /// Spline-interpolated point, retracted onto the ambient.
    pub fn interpolate(&self, x: &[f64]) -> DVector<f64> {
        let k = self.header.ambient.coord_dim();
        let raw = interpolate_block(&self.header, 0, &self.values, k, x);
        retract(&self.header.ambient, DVector::from_vec(raw))
    }

    pub fn into_immersion(self) -> Result<ParametricImmersion> {
        let lower = self.header.lower.clone();
        let upper = self.header.upper.clone();
        let ambient = self.header.ambient.clone();
        let chart = Arc::new(self);
        let map = Arc::new(move |x: &[f64]| chart.interpolate(x));
        ParametricImmersion::new("tabulated", lower, upper, ambient, map)
    }
}

fn node_coord(h: &TabulatedHeader, axis: usize, i: usize) -> f64 {
    h.lower[axis] + (h.upper[axis] - h.lower[axis]) * i as f64 / (h.shape[axis] - 1) as f64
}

/// Interpolates along `axis` and below, for a block of `values` laid out
/// over axes `axis..m`, each node holding `k` numbers.
fn interpolate_block(h: &TabulatedHeader, axis: usize, values: &[f64], k: usize, x: &[f64]) -> Vec<f64> {
    let n = h.shape[axis];
    let stride = values.len() / n;
    let along: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let block = &values[i * stride..(i + 1) * stride];
            if axis + 1 == h.m {
                block.to_vec()
            } else {
                interpolate_block(h, axis + 1, block, k, x)
            }
        })
        .collect();
    let spacing = (h.upper[axis] - h.lower[axis]) / (n - 1) as f64;
    let t = (x[axis] - h.lower[axis]) / spacing;
    (0..k)
        .map(|c| {
            let ys: Vec<f64> = along.iter().map(|v| v[c]).collect();
            natural_spline(&ys, t)
        })
        .collect()
}

/// Natural cubic spline through `(i, ys[i])` evaluated at `t` (node units).
pub fn natural_spline(ys: &[f64], t: f64) -> f64 {
    let n = ys.len();
    // Second derivatives from the tridiagonal system with unit spacing.
    let mut m2 = vec![0.0; n];
    if n > 2 {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let rhs = 6.0 * (ys[i + 1] - 2.0 * ys[i] + ys[i - 1]);
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m2[i] = d[i] - c[i] * m2[i + 1];
        }
    }
    let j = (t.floor().max(0.0) as usize).min(n - 2);
    let s = t - j as f64;
    let a = 1.0 - s;
    a * ys[j] + s * ys[j + 1] + ((a * a * a - a) * m2[j] + (s * s * s - s) * m2[j + 1]) / 6.0
}

fn retract(ambient: &ProductSpace, mut y: DVector<f64>) -> DVector<f64> {
    let kp = ambient.factor_p().coord_dim();
    let fix = |space: &SpaceForm, block: &mut [f64]| {
        let b = space.curvature();
        let q = space.inner(block, block);
        if matches!(space.model(), Model::Sphere | Model::Hyperbolic) && q * b > 0.0 {
            let s = (1.0 / (b * q)).sqrt();
            block.iter_mut().for_each(|v| *v *= s);
        }
    };
    let (p, q) = y.as_mut_slice().split_at_mut(kp);
    fix(ambient.factor_p(), p);
    fix(ambient.factor_q(), q);
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::Plane;

    #[test]
    fn spline_reproduces_cubics_in_the_interior() {
        let ys: Vec<f64> = (0..40).map(|i| (i as f64 * 0.1).sin()).collect();
        let t = 17.3;
        assert!((natural_spline(&ys, t) - (t * 0.1).sin()).abs() < 1e-6);
        assert_eq!(natural_spline(&ys, 5.0), ys[5]);
    }

    #[test]
    fn tabulated_sphere_round_trips() {
        let header = TabulatedHeader {
            version: 1,
            m: 2,
            ambient: ProductSpace::from(SpaceForm::euclidean(3)),
            shape: vec![60, 60],
            lower: vec![0.6, -1.0],
            upper: vec![2.6, 1.0],
        };
        let chart = TabulatedChart::sample(header, |x| {
            vec![x[0].cos(), x[0].sin() * x[1].cos(), x[0].sin() * x[1].sin()]
        })
        .unwrap();
        let mut buf = Vec::new();
        chart.write(&mut buf).unwrap();
        let back = TabulatedChart::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back.header, chart.header);
        let f = back.into_immersion().unwrap();
        let k = f.extrinsic_curvature(&[1.5, 0.1], &Plane::coordinate(2, 0, 1).unwrap()).unwrap();
        assert!((k - 1.0).abs() < 1e-2, "{k}");
    }

    #[test]
    fn rejects_wrong_value_count() {
        let header = TabulatedHeader {
            version: 1,
            m: 1,
            ambient: ProductSpace::from(SpaceForm::euclidean(2)),
            shape: vec![5],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert!(TabulatedChart::new(header, vec![0.0; 9]).is_err());
    }
}
