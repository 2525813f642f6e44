//! Iterant kernels, Neumann-series and direct resolvents, resolvent Carleman
//! functions and the residuals of the defining identities.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fredholm::{characteristic_check, fredholm_resolvent};
use crate::kernel::{Kernel, Section};
use crate::linalg::{c, identity, inverse_qr, max_abs, max_abs_diff, mm, spectral_norm, CMatrix};
use crate::quadrature::{sample_kernel, DiscreteOperator};

/// Spectral radii below this are reported as zero (`r(T) = ∞`).
pub const RADIUS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolventMethod {
    FredholmRatio,
    Neumann { terms: usize },
    NystromDirect,
}

/// Resolvent kernel of a discretized (sub)kernel at `λ`.
///
/// With `Q` the discrete inverse of `I - λKW` (or its Neumann truncation),
/// the kernel is extended off the grid by
/// `R(s,t) = T(s,t) + λ Σ_{ij} T(s,x_i) w_i Q_{ij} T(x_j,t)`,
/// which is the defining integral equation applied pointwise.
#[derive(Clone)]
pub struct ResolventEvaluation {
    pub lambda: Complex64,
    pub method: ResolventMethod,
    /// `D(λ)`, when the route produced one.
    pub determinant: Option<Complex64>,
    /// `r(T)` estimate and `|λ| < r(T)`, for Neumann sums.
    pub radius: Option<f64>,
    pub converges: Option<bool>,
    op: DiscreteOperator,
    g: Arc<CMatrix>,
    nodes: Arc<CMatrix>,
}

impl fmt::Debug for ResolventEvaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolventEvaluation")
            .field("lambda", &self.lambda)
            .field("method", &self.method)
            .field("determinant", &self.determinant)
            .field("op", &self.op)
            .finish()
    }
}

impl ResolventEvaluation {
    /// Builds the evaluator from the middle matrix `Q`.
    pub(crate) fn from_inverse(
        op: &DiscreteOperator,
        lambda: Complex64,
        method: ResolventMethod,
        q: CMatrix,
    ) -> Self {
        let w = &op.rule().weights;
        let n = op.len();
        let g = CMatrix::from_fn(n, n, |i, j| q[(i, j)] * (lambda * w[i]));
        let k = op.matrix();
        let nodes = k + mm(&mm(k, &g), k);
        Self {
            lambda,
            method,
            determinant: None,
            radius: None,
            converges: None,
            op: op.clone(),
            g: Arc::new(g),
            nodes: Arc::new(nodes),
        }
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    /// `R(x_i, x_j)` on the rule nodes.
    pub fn node_matrix(&self) -> &CMatrix {
        &self.nodes
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        Ok(self.eval_grid(&[s], &[t])?[(0, 0)])
    }

    /// `R(s_a, t_b)` for all pairs.
    pub fn eval_grid(&self, s: &[f64], t: &[f64]) -> Result<CMatrix> {
        let direct = sample_kernel(self.op.source(), s, t)?;
        let rows = self.op.rows_at(s)?;
        let cols = self.op.cols_at(t)?;
        Ok(direct + mm(&mm(&rows, &self.g), &cols))
    }

    /// `t|λ(s)` sampled at the rule nodes: `conj R(s, x_j)`, one row per `s`.
    pub fn carleman_rows(&self, s: &[f64]) -> Result<CMatrix> {
        Ok(self.eval_grid(s, &self.op.rule().nodes)?.map(|z| z.conj()))
    }

    /// `t′|λ(t)` sampled at the rule nodes: `R(x_j, t)`, one column per `t`.
    pub fn carleman_cols(&self, t: &[f64]) -> Result<CMatrix> {
        self.eval_grid(&self.op.rule().nodes, t)
    }

    /// Weighted Fredholm resolvent `W^{1/2} R W^{1/2}` on the nodes.
    pub fn weighted(&self) -> CMatrix {
        let sw = self.op.rule().sqrt_weights();
        CMatrix::from_fn(self.op.len(), self.op.len(), |i, j| self.nodes[(i, j)] * (sw[i] * sw[j]))
    }

    /// `R_λ(T) = I + λ T|λ` in the weighted representation.
    pub fn resolvent_operator(&self) -> CMatrix {
        identity(self.op.len()) + self.weighted() * self.lambda
    }
}

/// Kernel of the `k`-th iterant, `T^{[k]}(s,t) = Σ T(s,x_i) M_{ij} T(x_j,t)`
/// with `M = W (KW)^{k-2}`.
#[derive(Clone)]
pub struct IterantKernel {
    base: Arc<dyn Kernel>,
    nodes: Arc<Vec<f64>>,
    middle: Arc<CMatrix>,
    k: usize,
}

impl fmt::Debug for IterantKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IterantKernel({}, k={})", self.base.label(), self.k)
    }
}

impl Kernel for IterantKernel {
    fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        let mut acc = c(0.0);
        let row: Vec<Complex64> = self.nodes.iter().map(|&x| self.base.eval(s, x)).collect::<Result<_>>()?;
        let col: Vec<Complex64> = self.nodes.iter().map(|&x| self.base.eval(x, t)).collect::<Result<_>>()?;
        for (i, r) in row.iter().enumerate() {
            if r.norm() == 0.0 {
                continue;
            }
            let mut inner = c(0.0);
            for (j, cj) in col.iter().enumerate() {
                inner += self.middle[(i, j)] * cj;
            }
            acc += r * inner;
        }
        Ok(acc)
    }

    fn is_hermitian(&self) -> bool {
        self.base.is_hermitian()
    }

    fn row_section(&self, s: f64) -> Section {
        if self.base.row_section(s).is_empty() {
            Section::empty()
        } else {
            Section::whole_line()
        }
    }

    fn column_section(&self, t: f64) -> Section {
        if self.base.column_section(t).is_empty() {
            Section::empty()
        } else {
            Section::whole_line()
        }
    }

    fn label(&self) -> String {
        format!("iterant {} of {}", self.k, self.base.label())
    }
}

/// Nyström form of `T^{[k]}`: the matrix `(KW)^{k-1} K`.
pub fn iterant(op: &DiscreteOperator, k: usize) -> Result<DiscreteOperator> {
    if k == 0 {
        return Err(LabError::Precondition("iterant order must be at least 1".into()));
    }
    if k == 1 {
        return Ok(op.clone());
    }
    let kw = op.kw();
    let w = &op.rule().weights;
    // M = W (KW)^{k-2}
    let mut middle = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(w.len(), w.iter().map(|&x| c(x))));
    for _ in 0..k - 2 {
        middle = mm(&middle, &kw);
    }
    let matrix = mm(&mm(op.matrix(), &middle), op.matrix());
    let source = IterantKernel {
        base: op.source_arc(),
        nodes: Arc::new(op.rule().nodes.clone()),
        middle: Arc::new(middle),
        k,
    };
    DiscreteOperator::from_parts(matrix, op.rule_arc(), Arc::new(source))
}

/// `r(T) = 1/ρ(T)` from the eigenvalues of the weighted matrix, with the
/// Gelfand estimate `‖A^{k_max}‖^{-1/k_max}` when the eigensolver fails.
/// Returns `f64::INFINITY` when `ρ < 1e-14`.
pub fn spectral_radius_reciprocal(op: &DiscreteOperator, k_max: usize) -> Result<f64> {
    if k_max < 4 {
        return Err(LabError::Precondition("k_max must be at least 4".into()));
    }
    let rho = match op.spectrum() {
        Some(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => {
            let a = op.weighted().into_owned();
            let mut p = a.clone();
            for _ in 1..k_max {
                p = mm(&p, &a);
            }
            spectral_norm(&p).powf(1.0 / k_max as f64)
        }
    };
    Ok(if rho < RADIUS_FLOOR { f64::INFINITY } else { 1.0 / rho })
}

/// Partial sum `Σ_{k=1}^{m} λ^{k-1} T^{[k]}`; the middle matrix
/// `Σ_{j=0}^{m-2} (λKW)^j` is accumulated in Horner form.
pub fn neumann_resolvent(op: &DiscreteOperator, lambda: Complex64, m: usize) -> Result<ResolventEvaluation> {
    if m == 0 {
        return Err(LabError::Precondition("Neumann sum needs at least one term".into()));
    }
    let n = op.len();
    let q = if m == 1 {
        CMatrix::zeros(n, n)
    } else {
        let lkw = op.kw() * lambda;
        let mut q = identity(n);
        for _ in 0..m - 2 {
            q = identity(n) + mm(&lkw, &q);
        }
        q
    };
    let radius = spectral_radius_reciprocal(op, 64)?;
    let mut eval = ResolventEvaluation::from_inverse(op, lambda, ResolventMethod::Neumann { terms: m }, q);
    eval.radius = Some(radius);
    eval.converges = Some(lambda.norm() < radius);
    Ok(eval)
}

/// Direct Nyström solve of `(I - λKW) Q = I` through QR.
/// `|D(λ)|` is read off the triangular factor for the characteristic check.
pub fn direct_resolvent(op: &DiscreteOperator, lambda: Complex64) -> Result<ResolventEvaluation> {
    let n = op.len();
    let m = identity(n) - op.kw() * lambda;
    let qr = m.clone().qr();
    let r = qr.r();
    let log_abs: f64 = (0..n).map(|i| r[(i, i)].norm().ln()).sum();
    characteristic_check(op, lambda, log_abs.exp())?;
    let q = inverse_qr(m)?;
    Ok(ResolventEvaluation::from_inverse(op, lambda, ResolventMethod::NystromDirect, q))
}

/// Dispatches on the requested method.
pub fn resolvent(op: &DiscreteOperator, lambda: Complex64, method: ResolventMethod) -> Result<ResolventEvaluation> {
    match method {
        ResolventMethod::FredholmRatio => fredholm_resolvent(op, lambda),
        ResolventMethod::Neumann { terms } => neumann_resolvent(op, lambda, terms),
        ResolventMethod::NystromDirect => direct_resolvent(op, lambda),
    }
}

/// Node-sampled resolvent Carleman functions `t|λ(x_i)` (rows) and `t′|λ(x_j)` (columns).
#[derive(Debug, Clone)]
pub struct ResolventCarleman {
    /// Row `i` holds `conj R(x_i, x_j)` over `j`.
    pub t: CMatrix,
    /// Column `j` holds `R(x_i, x_j)` over `i`.
    pub t_prime: CMatrix,
}

pub fn resolvent_carleman(eval: &ResolventEvaluation) -> ResolventCarleman {
    let r = eval.node_matrix();
    ResolventCarleman {
        t: r.map(|z| z.conj()),
        t_prime: r.clone(),
    }
}

/// Rebuilds `R(s,t)` from the column Carleman functions,
/// `R(s,t) = T(s,t) + λ Σ_j w_j T(s,x_j) R(x_j,t)`.
pub fn reconstruct_from_columns(eval: &ResolventEvaluation, s: &[f64], t: &[f64]) -> Result<CMatrix> {
    let op = eval.operator();
    let cols = eval.carleman_cols(t)?;
    let w = &op.rule().weights;
    let rows = op.rows_at(s)?;
    let rows_w = CMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| rows[(i, j)] * (w[j] * eval.lambda));
    Ok(sample_kernel(op.source(), s, t)? + mm(&rows_w, &cols))
}

/// Rebuilds `R(s,t)` from the row Carleman functions,
/// `R(s,t) = T(s,t) + λ Σ_j w_j R(s,x_j) T(x_j,t)`.
pub fn reconstruct_from_rows(eval: &ResolventEvaluation, s: &[f64], t: &[f64]) -> Result<CMatrix> {
    let op = eval.operator();
    let rows = eval.carleman_rows(s)?.map(|z| z.conj());
    let w = &op.rule().weights;
    let rows_w = CMatrix::from_fn(rows.nrows(), rows.ncols(), |i, j| rows[(i, j)] * (w[j] * eval.lambda));
    Ok(sample_kernel(op.source(), s, t)? + mm(&rows_w, &op.cols_at(t)?))
}

/// Sup-grid residuals of the two defining integral equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sup |R - λ T∘R - T|`.
    pub res31: f64,
    /// `sup |R - λ R∘T - T|`.
    pub res32: f64,
    /// Change of the composition terms under rule refinement.
    pub quadrature_error: f64,
    /// Round-off floor, `1e-13 · (1 + sup|R|)`.
    pub floor: f64,
}

impl ResidualReport {
    pub fn tolerance(&self, factor: f64) -> f64 {
        factor * self.quadrature_error.max(self.floor)
    }

    pub fn within(&self, factor: f64) -> bool {
        self.res31.max(self.res32) <= self.tolerance(factor)
    }
}

/// Residuals of `R = T + λ T∘R` and `R = T + λ R∘T` on `grid × grid`,
/// with the compositions integrated on `op_full`'s rule.
pub fn resolvent_residuals(
    eval: &ResolventEvaluation,
    op_full: &DiscreteOperator,
    grid: &[f64],
) -> Result<ResidualReport> {
    let lambda = eval.lambda;
    let r_grid = eval.eval_grid(grid, grid)?;
    let t_grid = sample_kernel(op_full.source(), grid, grid)?;
    let compose = |op: &DiscreteOperator| -> Result<(CMatrix, CMatrix)> {
        let x = &op.rule().nodes;
        let w = &op.rule().weights;
        let t_sx = sample_kernel(op.source(), grid, x)?;
        let r_xt = eval.eval_grid(x, grid)?;
        let r_sx = eval.eval_grid(grid, x)?;
        let t_xt = sample_kernel(op.source(), x, grid)?;
        let scale = |m: CMatrix| {
            let (r, cc) = m.shape();
            CMatrix::from_fn(r, cc, |i, j| m[(i, j)] * w[j])
        };
        Ok((mm(&scale(t_sx), &r_xt), mm(&scale(r_sx), &t_xt)))
    };
    let (tr, rt) = compose(op_full)?;
    let refined = op_full.refined()?;
    let (tr2, rt2) = compose(&refined)?;
    let res31 = max_abs(&(&r_grid - &tr * lambda - &t_grid));
    let res32 = max_abs(&(&r_grid - &rt * lambda - &t_grid));
    let quadrature_error = lambda.norm() * max_abs_diff(&tr, &tr2).max(max_abs_diff(&rt, &rt2));
    Ok(ResidualReport {
        res31,
        res32,
        quadrature_error,
        floor: 1e-13 * (1.0 + max_abs(&r_grid)),
    })
}

/// Discrete second resolvent equation for two resolvents on the same rule
/// and at the same `λ`: the larger of the residuals of
/// `T|λ - A|λ = (I + λT|λ)(T - A)(I + λA|λ)` and its mirrored form.
pub fn second_resolvent_residual(t: &ResolventEvaluation, a: &ResolventEvaluation) -> Result<f64> {
    if t.operator().rule().nodes != a.operator().rule().nodes {
        return Err(LabError::Precondition("second resolvent equation needs a common rule".into()));
    }
    if t.lambda != a.lambda {
        return Err(LabError::Precondition("second resolvent equation needs a common lambda".into()));
    }
    let lambda = t.lambda;
    let ft = t.weighted();
    let fa = a.weighted();
    let diff = t.operator().weighted().into_owned() - a.operator().weighted().into_owned();
    let n = ft.nrows();
    let lt = identity(n) + &ft * lambda;
    let la = identity(n) + &fa * lambda;
    let lhs = &ft - &fa;
    let r1 = max_abs(&(&lhs - mm(&mm(&lt, &diff), &la)));
    let r2 = max_abs(&(&lhs - mm(&mm(&la, &diff), &lt)));
    Ok(r1.max(r2))
}

/// Outcome of the self-adjoint bound `‖R_λ(T)‖ ≤ |λ| / |Im λ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn selfadjoint_resolvent_bound_check(op: &DiscreteOperator, lambda: Complex64) -> Result<BoundCheck> {
    if !op.is_hermitian() {
        return Err(LabError::NonHermitian);
    }
    if lambda.im == 0.0 {
        return Err(LabError::Precondition("the bound needs Im λ ≠ 0".into()));
    }
    let n = op.len();
    let m = identity(n) - op.weighted().into_owned() * lambda;
    let r = m.try_inverse().ok_or(LabError::Singular)?;
    let measured = spectral_norm(&r);
    let bound = lambda.norm() / lambda.im.abs();
    Ok(BoundCheck {
        measured,
        bound,
        holds: measured <= bound * (1.0 + 1e-10),
    })
}

/// Max entry of `R_λ - (I + λ T|λ)` where `R_λ = (I - λA)^{-1}` is formed independently.
pub fn identity_24_residual(eval: &ResolventEvaluation) -> Result<f64> {
    let op = eval.operator();
    let n = op.len();
    let m = identity(n) - op.weighted().into_owned() * eval.lambda;
    let r = m.try_inverse().ok_or(LabError::Singular)?;
    Ok(max_abs_diff(&r, &eval.resolvent_operator()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile, TruncationLadder};
    use crate::quadrature::{build_rule, discretize};

    fn op_for(spec: KernelSpec, n: usize) -> DiscreteOperator {
        let rule = build_rule(&TruncationLadder::linear2(), n, 1, 10).unwrap();
        discretize(Arc::new(spec), Arc::new(rule)).unwrap()
    }

    fn rank1(amp: f64) -> (KernelSpec, Profile, Profile, f64) {
        let a = Profile::Gaussian {
            center: 0.0,
            width: 1.0,
            amp,
        };
        let b = Profile::gaussian(0.3, 1.2);
        let spec = KernelSpec::rank1(a, b).unwrap();
        // ∫ab for two Gaussians: amp·√(π w₁²w₂²/(w₁²+w₂²))·exp(-(c₁-c₂)²/(w₁²+w₂²))
        let (w1, w2, d) = (1.0f64, 1.2f64, 0.3f64);
        let s = w1 * w1 + w2 * w2;
        let cab = amp * (std::f64::consts::PI * w1 * w1 * w2 * w2 / s).sqrt() * (-d * d / s).exp();
        (spec, a, b, cab)
    }

    #[test]
    fn iterants() {
        let (spec, a, b, cab) = rank1(1.0);
        let op = op_for(spec, 5);
        let one = iterant(&op, 1).unwrap();
        assert_eq!(one.matrix(), op.matrix());
        let two = iterant(&op, 2).unwrap();
        let x = &op.rule().nodes;
        for i in (0..op.len()).step_by(11) {
            for j in (0..op.len()).step_by(13) {
                let expect = cab * a.eval(x[i]) * b.eval(x[j]);
                assert!((two.matrix()[(i, j)].re - expect).abs() < 1e-12);
            }
        }
        let off = two.source().eval(0.37, -0.21).unwrap().re;
        assert!((off - cab * a.eval(0.37) * b.eval(-0.21)).abs() < 1e-12);
        let three = iterant(&op, 3).unwrap();
        let composed = two.kw() * op.matrix();
        assert!(max_abs_diff(three.matrix(), &composed) < 1e-12);
    }

    #[test]
    fn radius() {
        let (spec, _, _, cab) = rank1(1.0);
        let op = op_for(spec, 5);
        assert!((spectral_radius_reciprocal(&op, 16).unwrap() - 1.0 / cab).abs() < 1e-10);
        let frh = op_for(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        assert!((spectral_radius_reciprocal(&frh, 16).unwrap() - 1.25).abs() < 1e-9);
        let zero = op_for(KernelSpec::zero(), 2);
        assert_eq!(spectral_radius_reciprocal(&zero, 16).unwrap(), f64::INFINITY);
        assert!(spectral_radius_reciprocal(&zero, 3).is_err());
    }

    #[test]
    fn neumann_geometric() {
        // c = 0.8 exactly: rescale a so that ∫ab = 0.8
        let (_, _, _, c1) = rank1(1.0);
        let (spec, a, b, cab) = rank1(0.8 / c1);
        assert!((cab - 0.8).abs() < 1e-14);
        let op = op_for(spec, 5);
        let lambda = c(0.5);
        let first = neumann_resolvent(&op, lambda, 1).unwrap();
        assert!((first.eval(0.2, 0.4).unwrap() - op.source().eval(0.2, 0.4).unwrap()).norm() < 1e-15);
        let r = neumann_resolvent(&op, lambda, 40).unwrap();
        assert_eq!(r.converges, Some(true));
        for (s, t) in [(0.0, 0.0), (0.5, -1.0), (-1.3, 0.7)] {
            let expect = a.eval(s) * b.eval(t) / 0.6;
            assert!((r.eval(s, t).unwrap().re - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_residuals_and_identities() {
        let (spec, _, _, _) = rank1(1.0);
        let op = op_for(spec, 5);
        let lambda = c(0.5);
        let grid: Vec<f64> = (0..15).map(|i| -3.5 + 0.5 * i as f64).collect();
        for method in [ResolventMethod::FredholmRatio, ResolventMethod::NystromDirect] {
            let r = resolvent(&op, lambda, method).unwrap();
            let rep = resolvent_residuals(&r, &op, &grid).unwrap();
            assert!(rep.res31 < 1e-10 && rep.res32 < 1e-10, "{rep:?}");
            assert!(identity_24_residual(&r).unwrap() < 1e-12);
            let rebuilt = reconstruct_from_columns(&r, &grid, &grid).unwrap();
            assert!(max_abs_diff(&rebuilt, &r.eval_grid(&grid, &grid).unwrap()) < 1e-12);
            let rebuilt = reconstruct_from_rows(&r, &grid, &grid).unwrap();
            assert!(max_abs_diff(&rebuilt, &r.eval_grid(&grid, &grid).unwrap()) < 1e-12);
        }
        // λ = 0 gives back the kernel
        let r0 = resolvent(&op, c(0.0), ResolventMethod::FredholmRatio).unwrap();
        let rep = resolvent_residuals(&r0, &op, &grid).unwrap();
        assert!(rep.res31 < 1e-14 && rep.res32 < 1e-14);
        let carl = resolvent_carleman(&r0);
        assert!(max_abs_diff(&carl.t_prime, op.matrix()) == 0.0);
    }

    #[test]
    fn bound_29() {
        let frh = op_for(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        let chk = selfadjoint_resolvent_bound_check(&frh, Complex64::new(1.25, 0.1)).unwrap();
        assert!(chk.holds && chk.measured <= 12.53 && (chk.bound - 12.539936).abs() < 1e-5, "{chk:?}");
        let chk = selfadjoint_resolvent_bound_check(&frh, Complex64::new(0.0, 1.0)).unwrap();
        assert!(chk.bound == 1.0 && chk.measured <= 1.0 + 1e-10);
        let zero = op_for(KernelSpec::zero(), 1);
        let chk = selfadjoint_resolvent_bound_check(&zero, Complex64::new(0.3, 2.0)).unwrap();
        assert!((chk.measured - 1.0).abs() < 1e-15);
        assert!(selfadjoint_resolvent_bound_check(&frh, c(0.5)).is_err());
        let ex = op_for(KernelSpec::example1(1.0).unwrap(), 1);
        assert!(matches!(
            selfadjoint_resolvent_bound_check(&ex, Complex64::new(0.0, 1.0)),
            Err(LabError::NonHermitian)
        ));
    }
}
