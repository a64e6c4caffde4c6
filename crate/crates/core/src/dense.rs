//! Dense helpers for the tiny symmetric systems that appear in the Nehari
//! projections and definiteness checks (dimension = component count, so a
//! handful at most). Row-major storage throughout.

use crate::scalar::Scalar;

/// Cholesky factor L (lower, row-major) of a symmetric matrix, or None when
/// the matrix is not positive definite.
pub(crate) fn cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves L Lᵀ x = b given the Cholesky factor.
pub(crate) fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i * n + k] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[k * n + i] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i * n + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_solves_spd_and_rejects_indefinite() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        let x = cholesky_solve(&l, 2, &[1.0, 2.0]);
        // exact solution of [[4,1],[1,3]] x = [1,2] is [1/11, 7/11]
        assert_relative_eq!(x[0], 1.0 / 11.0, max_relative = 1e-14);
        assert_relative_eq!(x[1], 7.0 / 11.0, max_relative = 1e-14);

        let indef = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(&indef, 2).is_none());
    }

}
