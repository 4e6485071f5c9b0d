//! Small dense helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector};

/// Default pivot tolerance for Gram-Schmidt.
pub const PIVOT_TOL: f64 = 1e-12;

/// Orthonormalizes the columns of `m` with modified Gram-Schmidt (two passes).
///
/// Returns `None` if some column is dependent on the previous ones, i.e. its
/// residual falls below `pivot_tol` times its original norm (or below
/// `pivot_tol` for columns of norm below one).
pub fn orthonormalize_columns(m: &DMatrix<f64>, pivot_tol: f64) -> Option<DMatrix<f64>> {
    let mut out = m.clone();
    for j in 0..out.ncols() {
        let original = out.column(j).norm().max(1.0);
        let mut v = out.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let q = out.column(i);
                let c = q.dot(&v);
                v.axpy(-c, &q, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= pivot_tol * original {
            return None;
        }
        out.set_column(j, &(v / norm));
    }
    Some(out)
}

/// Completes the orthonormal columns of `q` (n×k) to an orthonormal basis of
/// the orthogonal complement, returned as an n×(n−k) matrix.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let k = q.ncols();
    let mut basis: Vec<DVector<f64>> = (0..k).map(|j| q.column(j).into_owned()).collect();
    let mut extra = Vec::with_capacity(n - k);
    // Candidates in order of how much of them survives projection.
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
            (e.norm(), i)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &candidates {
        if extra.len() == n - k {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for _pass in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            let e = e / norm;
            basis.push(e.clone());
            extra.push(e);
        }
    }
    if extra.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&extra)
    }
}

/// Largest deviation of `qᵀq` from the identity.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let k = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Flips signs so that the first entry of each column whose magnitude exceeds
/// `tol` is positive.
pub fn sign_normalize_columns(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for j in 0..out.ncols() {
        let lead = out.column(j).iter().copied().find(|v| v.abs() > tol);
        if matches!(lead, Some(v) if v < 0.0) {
            let neg = -out.column(j).into_owned();
            out.set_column(j, &neg);
        }
    }
    out
}

/// Lexicographic comparison of two equally sized slices, treating entries
/// within `tol` as equal.
pub fn lexicographic_cmp(a: &[f64], b: &[f64], tol: f64) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x.total_cmp(y);
        }
    }
    a.len().cmp(&b.len())
}

/// Null space of `m` (rows × cols), as orthonormal columns of length `cols`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Eigen-decomposition of mᵀm keeps full V even when rows < cols.
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let threshold = (rel_tol * scale.sqrt()).powi(2).max(rel_tol * rel_tol);
    let kernel: Vec<DVector<f64>> = (0..cols)
        .filter(|&i| eig.eigenvalues[i].abs() <= threshold)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if kernel.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        orthonormalize_columns(&DMatrix::from_columns(&kernel), PIVOT_TOL)
            .unwrap_or_else(|| DMatrix::zeros(cols, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_completes_basis() {
        let q = orthonormalize_columns(
            &DMatrix::from_row_slice(4, 2, &[1.0, 0.2, 1.0, -1.0, 0.0, 3.0, 0.5, 0.0]),
            PIVOT_TOL,
        )
        .unwrap();
        let c = orthonormal_complement(&q);
        assert_eq!(c.ncols(), 2);
        let full = DMatrix::from_columns(
            &(0..2)
                .map(|j| q.column(j).into_owned())
                .chain((0..2).map(|j| c.column(j).into_owned()))
                .collect::<Vec<_>>(),
        );
        assert!(orthonormality_defect(&full) < 1e-12);
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(orthonormalize_columns(&m, PIVOT_TOL).is_none());
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]);
        let k = null_space(&m, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((m * k).norm() < 1e-12);
    }
}
