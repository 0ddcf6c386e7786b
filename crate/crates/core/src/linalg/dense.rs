use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in nonincreasing
/// order and eigenvectors arranged accordingly.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::EigensolveFailed("matrix not square".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolveFailed("non-finite eigenvalue".into()));
    }
    let mut vectors = DMatrix::zeros(n, n);
    for (new, &old) in idx.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    Ok((values, vectors))
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    assert_eq!(n, l.ncols());
    let mut inv = DMatrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for i in col + 1..n {
            let mut s = 0.0;
            for k in col..i {
                s += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Orthonormalize columns in place by modified Gram-Schmidt with a second
/// reorthogonalization pass. Columns that collapse below `tol` relative to
/// the largest column norm are reported as an error.
pub fn orthonormalize_columns(m: &mut DMatrix<f64>, tol: f64) -> Result<()> {
    let k = m.ncols();
    let scale = (0..k)
        .map(|j| m.column(j).norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let qi = m.column(i).clone_owned();
                let mut cj = m.column_mut(j);
                cj.axpy(-proj, &qi, 1.0);
            }
        }
        let norm = m.column(j).norm();
        if norm < tol * scale {
            return Err(Error::EigensolveFailed(format!(
                "column {j} degenerate during orthonormalization"
            )));
        }
        m.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 5.0, 0.1, 0.0, 0.1, 1.0]);
        let (vals, vecs) = sorted_symmetric_eigen(m.clone()).unwrap();
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - m).norm() < 1e-12);
    }

    #[test]
    fn triangular_inverse_matches_identity() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -0.5, 0.2, 1.5]);
        let inv = lower_triangular_inverse(&l);
        let eye = &l * &inv;
        assert!((eye - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn gram_schmidt_produces_orthonormal_columns() {
        let mut m =
            DMatrix::from_fn(10, 4, |i, j| ((i * i * (j + 1) + 3 * i + j) as f64 * 0.37).sin());
        orthonormalize_columns(&mut m, 1e-12).unwrap();
        let g = m.transpose() * &m;
        assert!((g - DMatrix::identity(4, 4)).norm() < 1e-12);
    }
}
