use std::borrow::Cow;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::QuadratureRule;
use crate::error::{LabError, Result};
use crate::kernel::Kernel;

/// Hermitian tolerance for weighted matrices, relative to the largest entry.
const HERMITIAN_MATRIX_TOL: f64 = 1e-12;
const POWER_TOL: f64 = 1e-10;
const POWER_BUDGET: usize = 20_000;

/// Nyström discretization `K_{ij} = T(x_i, x_j)` of a kernel on a rule.
#[derive(Clone)]
pub struct DiscreteOperator {
    matrix: Arc<DMatrix<Complex64>>,
    rule: Arc<QuadratureRule>,
    source: Arc<dyn Kernel>,
    weighted: Option<Arc<DMatrix<Complex64>>>,
    spectrum: Arc<OnceLock<Option<Vec<Complex64>>>>,
}

impl fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("source", &self.source.label())
            .field("size", &self.matrix.nrows())
            .field("half_width", &self.rule.half_width)
            .finish()
    }
}

/// Samples `T(r_a, c_b)` into a `rows × cols` matrix, rows in parallel.
pub fn sample_kernel(kernel: &dyn Kernel, rows: &[f64], cols: &[f64]) -> Result<DMatrix<Complex64>> {
    let data: Vec<Vec<Complex64>> = rows
        .par_iter()
        .map(|&s| cols.iter().map(|&t| kernel.eval(s, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j]))
}

pub fn discretize(source: Arc<dyn Kernel>, rule: Arc<QuadratureRule>) -> Result<DiscreteOperator> {
    let matrix = sample_kernel(source.as_ref(), &rule.nodes, &rule.nodes)?;
    DiscreteOperator::from_parts(matrix, rule, source)
}

impl DiscreteOperator {
    /// Wraps an already sampled matrix; the Hermitian cache is filled and
    /// checked when the source claims to be Hermitian.
    pub fn from_parts(
        matrix: DMatrix<Complex64>,
        rule: Arc<QuadratureRule>,
        source: Arc<dyn Kernel>,
    ) -> Result<Self> {
        if matrix.nrows() != rule.len() || matrix.ncols() != rule.len() {
            return Err(LabError::LengthMismatch {
                expected: rule.len(),
                got: matrix.nrows(),
            });
        }
        let mut op = Self {
            matrix: Arc::new(matrix),
            rule,
            source,
            weighted: None,
            spectrum: Arc::new(OnceLock::new()),
        };
        if op.source.is_hermitian() {
            let a = op.compute_weighted();
            let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
            let defect = (&a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > HERMITIAN_MATRIX_TOL * scale {
                return Err(LabError::NonHermitian);
            }
            op.weighted = Some(Arc::new(a));
        }
        Ok(op)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn rule_arc(&self) -> Arc<QuadratureRule> {
        Arc::clone(&self.rule)
    }

    pub fn source(&self) -> &dyn Kernel {
        self.source.as_ref()
    }

    pub fn source_arc(&self) -> Arc<dyn Kernel> {
        Arc::clone(&self.source)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.weighted.is_some()
    }

    fn compute_weighted(&self) -> DMatrix<Complex64> {
        let sw = self.rule.sqrt_weights();
        DMatrix::from_fn(self.len(), self.len(), |i, j| self.matrix[(i, j)] * (sw[i] * sw[j]))
    }

    /// `W^{1/2} K W^{1/2}`; cached for Hermitian sources.
    pub fn weighted(&self) -> Cow<'_, DMatrix<Complex64>> {
        match &self.weighted {
            Some(a) => Cow::Borrowed(a.as_ref()),
            None => Cow::Owned(self.compute_weighted()),
        }
    }

    /// Eigenvalues of the weighted matrix (equal to those of `K W`), computed
    /// once and shared by clones. `None` if the Schur iteration fails.
    pub fn spectrum(&self) -> Option<&[Complex64]> {
        self.spectrum
            .get_or_init(|| match &self.weighted {
                Some(a) => Some(
                    crate::linalg::hermitian_eigen(a)
                        .0
                        .into_iter()
                        .map(|v| Complex64::new(v, 0.0))
                        .collect(),
                ),
                None => crate::linalg::eigenvalues(&self.compute_weighted()),
            })
            .as_deref()
    }

    /// `K W`, the matrix acting on node samples.
    pub fn kw(&self) -> DMatrix<Complex64> {
        let w = &self.rule.weights;
        DMatrix::from_fn(self.len(), self.len(), |i, j| self.matrix[(i, j)] * w[j])
    }

    /// Re-discretizes the same source on the rule with doubled panel density.
    pub fn refined(&self) -> Result<Self> {
        discretize(self.source_arc(), Arc::new(self.rule.refined()))
    }

    /// Row vectors `T(s_a, x_j)` and column vectors `T(x_i, t_b)` for
    /// off-grid Nyström extension.
    pub fn rows_at(&self, s: &[f64]) -> Result<DMatrix<Complex64>> {
        sample_kernel(self.source(), s, &self.rule.nodes)
    }

    pub fn cols_at(&self, t: &[f64]) -> Result<DMatrix<Complex64>> {
        sample_kernel(self.source(), &self.rule.nodes, t)
    }
}

/// `(Tf)(x_i) ≈ Σ_j K_{ij} w_j f(x_j)`.
pub fn nystrom_apply(op: &DiscreteOperator, f: &[Complex64]) -> Result<Vec<Complex64>> {
    if f.len() != op.len() {
        return Err(LabError::LengthMismatch {
            expected: op.len(),
            got: f.len(),
        });
    }
    let wf = DVector::from_iterator(
        f.len(),
        f.iter().zip(&op.rule().weights).map(|(v, w)| v * *w),
    );
    Ok((op.matrix() * wf).iter().copied().collect())
}

/// Largest singular value of `W^{1/2} K W^{1/2}` by power iteration on `A*A`.
pub fn operator_norm_estimate(op: &DiscreteOperator) -> Result<f64> {
    let a = op.weighted();
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    // deterministic start with no special symmetry
    let mut x = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).sin(), 0.0)
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut sigma = 0.0;
    let mut change = f64::INFINITY;
    for _ in 0..POWER_BUDGET {
        let y = a.as_ref() * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        let z = a.adjoint() * y;
        let nz = z.norm();
        let next = nz.sqrt();
        change = (next - sigma).abs() / next;
        sigma = next;
        x = z / Complex64::new(nz, 0.0);
        if change < POWER_TOL {
            // Rayleigh quotient of A*A at the converged vector
            return Ok((a.as_ref() * &x).norm());
        }
    }
    Err(LabError::Accuracy {
        context: format!("operator norm power iteration (estimate {sigma:e})"),
        achieved: change,
        requested: POWER_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile, TruncationLadder};
    use crate::quadrature::build_rule;

    fn setup(spec: KernelSpec, n: usize) -> DiscreteOperator {
        let rule = build_rule(&TruncationLadder::linear2(), n, 1, 10).unwrap();
        discretize(Arc::new(spec), Arc::new(rule)).unwrap()
    }

    #[test]
    fn zero_kernel() {
        let op = setup(KernelSpec::zero(), 2);
        assert!(op.matrix().iter().all(|z| z.norm() == 0.0));
        assert_eq!(operator_norm_estimate(&op).unwrap(), 0.0);
        let f = vec![Complex64::new(1.0, 0.0); op.len()];
        assert!(nystrom_apply(&op, &f).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rank1_is_outer_product_and_norm() {
        let a = Profile::gaussian(0.5, 1.0);
        let b = Profile::gaussian(-0.3, 0.8);
        let op = setup(KernelSpec::rank1(a, b).unwrap(), 4);
        let x = &op.rule().nodes;
        for i in (0..op.len()).step_by(7) {
            for j in (0..op.len()).step_by(5) {
                assert_eq!(op.matrix()[(i, j)].re, a.eval(x[i]) * b.eval(x[j]));
            }
        }
        let expected = (a.norm_sq() * b.norm_sq()).sqrt();
        assert!((operator_norm_estimate(&op).unwrap() - expected).abs() < 1e-8);

        // T b = (∫ b²) a
        let f: Vec<Complex64> = x.iter().map(|&t| Complex64::new(b.eval(t), 0.0)).collect();
        let tf = nystrom_apply(&op, &f).unwrap();
        let bb = op.rule().integrate(|t| b.eval(t).powi(2));
        for (i, v) in tf.iter().enumerate() {
            assert!((v.re - bb * a.eval(x[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_rank_eigenvalues_and_norm() {
        let op = setup(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        assert!(op.is_hermitian());
        let eig = nalgebra::SymmetricEigen::new(op.weighted().into_owned());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!((ev[0] - 0.8).abs() < 1e-8);
        assert!((ev[1] - 0.3).abs() < 1e-8);
        assert!(ev[2].abs() < 1e-8);
        assert!((operator_norm_estimate(&op).unwrap() - 0.8).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        let op = setup(KernelSpec::gauss_bump(1.0).unwrap(), 1);
        assert!(matches!(
            nystrom_apply(&op, &[Complex64::new(1.0, 0.0)]),
            Err(LabError::LengthMismatch { .. })
        ));
    }
}
