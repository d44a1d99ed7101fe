//! Small dense linear-algebra helpers shared by the solvers and oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `(A + Aᵀ) / 2`.
pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `A - Aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sorted_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    if s.nrows() == 0 {
        return Vec::new();
    }
    let mut values: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    sorted_eigenvalues(s).first().copied().unwrap_or(0.0)
}

/// Spectral radius of a symmetric matrix, `max |λ|`.
pub fn spectral_radius(s: &DMatrix<f64>) -> f64 {
    sorted_eigenvalues(s).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Gershgorin upper bound on the spectral radius. Never below the true value.
pub fn gershgorin_bound(s: &DMatrix<f64>) -> f64 {
    s.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_are_sorted() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert_eq!(sorted_eigenvalues(&s), vec![1.0, 4.0]);
        assert_eq!(min_eigenvalue(&s), 1.0);
        assert_eq!(spectral_radius(&s), 4.0);
    }

    #[test]
    fn gershgorin_dominates_spectral_radius() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, 3.0, 0.2, 0.5, 0.2, -4.0]);
        assert!(gershgorin_bound(&s) >= spectral_radius(&s));
    }

    #[test]
    fn asymmetry_of_symmetric_part_is_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(asymmetry(&a), 2.0);
        assert_eq!(asymmetry(&symmetric_part(&a)), 0.0);
    }
}
