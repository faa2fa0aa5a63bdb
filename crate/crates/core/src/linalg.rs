//! Small dense linear-algebra helpers: vector arithmetic on slices and a
//! cyclic Jacobi eigensolver for symmetric matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest tolerated `|s_ij − s_ji|` for a matrix to count as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `y ← y + alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `M·x` for a column-major `M` and slice `x`.
pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, xj) in x.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * xj;
        }
    }
    out
}

/// `Mᵀ·y`.
pub fn mat_t_vec(m: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)] * y[i]).sum()).collect()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest entry of `|M − Mᵀ|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition `S = Q·diag(λ)·Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.values.len();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        debug_assert_eq!(self.vectors.ncols(), n);
        &self.vectors * lambda * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Each sweep visits every off-diagonal pair `(p, q)` in row order and
/// applies the plane rotation that annihilates `s_pq`. Sweeps stop once the
/// off-diagonal Frobenius mass drops below `1e-15·‖S‖_F`.
pub fn jacobi_eigen(s: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::InvalidInput(format!("eigendecomposition needs a square matrix, got {}x{}", n, s.ncols())));
    }
    let skew = asymmetry(s);
    if skew > SYMMETRY_TOL {
        return Err(Error::Asymmetric(skew));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }

    // symmetrize so rounding noise below SYMMETRY_TOL does not bias the result
    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();

    let mut converged = n <= 1 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&a);
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > 1e-12 * scale {
        return Err(Error::InvalidInput("Jacobi sweeps did not converge".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            sum += 2.0 * a[(p, q)] * a[(p, q)];
        }
    }
    sum.sqrt()
}

// A ← JᵀAJ and V ← VJ for the rotation J acting on coordinates (p, q).
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// `AᵀA`, assembled so the result is exactly symmetric.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = (0..a.nrows()).map(|r| a[(r, i)] * a[(r, j)]).sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Operator 2-norm, the square root of the largest eigenvalue of `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let eig = jacobi_eigen(&gram(a))?;
    Ok(eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn check_eigen(s: &DMatrix<f64>, eig: &SymmetricEigen, tol: f64) {
        let n = s.nrows();
        let qtq = eig.vectors.transpose() * &eig.vectors;
        let id = DMatrix::<f64>::identity(n, n);
        assert!(max_abs(&(qtq - id)) <= 1e-12);
        assert!(max_abs(&(eig.reconstruct() - s)) <= tol);
    }

    #[test]
    fn identity() {
        let s = DMatrix::<f64>::identity(2, 2);
        let eig = jacobi_eigen(&s).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0]);
        check_eigen(&s, &eig, 1e-15);
    }

    #[test]
    fn two_by_two_characteristic_polynomial() {
        // λ² − 4λ + 3 = 0
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = jacobi_eigen(&s).unwrap();
        assert_relative_eq!(eig.values[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(eig.values[1], 1.0, epsilon = 1e-14);
        check_eigen(&s, &eig, 1e-14);
    }

    #[test]
    fn five_by_five_matches_nalgebra() {
        #[rustfmt::skip]
        let s = DMatrix::from_row_slice(5, 5, &[
            1.0, 2.0, 3.0, 4.0, 5.0,
            2.0, 3.0, 0.0, 2.0, 4.0,
            3.0, 0.0, 2.0, 1.0, 3.0,
            4.0, 2.0, 1.0, 1.0, 2.0,
            5.0, 4.0, 3.0, 2.0, 1.0,
        ]);
        let eig = jacobi_eigen(&s).unwrap();
        let mut reference: Vec<f64> = s.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in eig.values.iter().zip(&reference) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        check_eigen(&s, &eig, 1e-13);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(jacobi_eigen(&s), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn spectral_norm_of_scaled_identity() {
        let a = DMatrix::<f64>::identity(3, 2) * 2.0;
        assert_relative_eq!(spectral_norm(&a).unwrap(), 2.0, epsilon = 1e-14);
    }
}
