//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{LabError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `log|det M|` and `det M / |det M|` from a partially pivoted LU.
/// Returns `(-∞, 0)` for an exactly singular matrix.
pub fn log_det(m: CMatrix) -> (f64, Complex64) {
    let n = m.nrows();
    let lu = m.lu();
    let mut log_abs = 0.0;
    let mut phase = c(lu.p().determinant::<f64>());
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        let a = d.norm();
        if a == 0.0 {
            return (f64::NEG_INFINITY, c(0.0));
        }
        log_abs += a.ln();
        phase *= d / a;
    }
    (log_abs, phase)
}

/// Inverse and `(log|det|, phase)` from one LU factorization.
pub fn inverse_with_det(m: CMatrix) -> Result<(CMatrix, f64, Complex64)> {
    let n = m.nrows();
    let lu = m.lu();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut phase = c(lu.p().determinant::<f64>());
    for i in 0..n {
        let d = u[(i, i)];
        let a = d.norm();
        if a == 0.0 {
            return Err(LabError::Singular);
        }
        log_abs += a.ln();
        phase *= d / a;
    }
    let inv = lu.try_inverse().ok_or(LabError::Singular)?;
    Ok((inv, log_abs, phase))
}

/// Inverse through a QR factorization (independent of the LU route).
pub fn inverse_qr(m: CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    let qr = m.qr();
    let mut x = identity(n);
    if !qr.solve_mut(&mut x) {
        return Err(LabError::Singular);
    }
    Ok(x)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Smallest singular value.
pub fn min_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(m.clone(), 1e-15 * scale, 100 * n.max(10))?;
    let (_, t) = schur.unpack();
    Some((0..n).map(|i| t[(i, i)]).collect())
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Product `a b` through four real products, which run on the blocked
/// `f64` kernel; small products stay on the generic path.
pub fn mm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_of_diagonal_and_permuted() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.0), c(2.0), c(0.0), c(3.0), c(0.0), c(0.0), c(0.0), c(0.0), Complex64::new(0.0, 1.0)],
        );
        // det = -(2·3)·i = -6i
        let (la, ph) = log_det(m);
        let d = ph * la.exp();
        assert!((d - Complex64::new(0.0, -6.0)).norm() < 1e-14);
    }

    #[test]
    fn schur_eigenvalues_of_triangular_plus_similarity() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5), Complex64::new(0.1, 0.2), c(-0.3)]));
        let s = CMatrix::from_fn(3, 3, |i, j| c(1.0 + (i * 3 + j) as f64 * 0.1) + if i == j { c(1.0) } else { c(0.0) });
        let m = &s * d * s.clone().try_inverse().unwrap();
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-0.3)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(0.1, 0.2)).norm() < 1e-12);
        assert!((ev[2] - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn inverses_agree() {
        let m = CMatrix::from_fn(4, 4, |i, j| Complex64::new(1.0 / (1 + i + j) as f64, (i as f64 - j as f64) * 0.1) + if i == j { c(2.0) } else { c(0.0) });
        let (a, _, _) = inverse_with_det(m.clone()).unwrap();
        let b = inverse_qr(m.clone()).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-13);
        assert!(max_abs_diff(&(&m * a), &identity(4)) < 1e-13);
    }

    #[test]
    fn split_product_matches_generic() {
        let a = CMatrix::from_fn(40, 50, |i, j| Complex64::new((i as f64 * 0.3).sin(), (j as f64 * 0.7).cos()));
        let b = CMatrix::from_fn(50, 45, |i, j| Complex64::new((i + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        assert!(max_abs_diff(&mm(&a, &b), &(&a * &b)) < 1e-12);
    }
}
