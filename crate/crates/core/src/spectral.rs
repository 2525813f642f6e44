//! Spectral projections of Hermitian kernels: interval windows by
//! eigendecomposition, single points as limits of scaled resolvents.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::{
    decreasing_to_floor, BoundConstants, ConvergenceReport, ConvergenceRow, StudyResolution, Verdict, Workspace,
    NOISE_FLOOR,
};
use crate::error::{LabError, Result};
use crate::fredholm::{fredholm_resolvent, is_characteristic};
use crate::kernel::{Kernel, KernelSpec, SubkernelKind, TruncationLadder};
use crate::linalg::{hermitian_eigen, max_abs, max_abs_diff, mm, CMatrix};
use crate::quadrature::{build_rule_with_breaks, discretize, sample_kernel, DiscreteOperator};
use crate::resolvent::ResolventEvaluation;

/// Eigenvalues this close to a window end trigger a warning.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default threshold on the limit of `μ‖T̃_{m|λ+iμ}‖` separating
/// characteristic values from the rest.
pub const CLASSIFY_THRESHOLD: f64 = 1e-3;

/// Open interval `(a, b)` whose closure avoids 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub a: f64,
    pub b: f64,
}

impl SpectralWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(LabError::InvalidParams(format!("window needs finite a < b, got ({a}, {b})")));
        }
        if a <= 0.0 && b >= 0.0 {
            return Err(LabError::InvalidParams(format!("window [{a}, {b}] contains 0")));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }

    /// `sup_{θ∈ω} 1/|θ|`.
    pub fn inverse_sup(&self) -> f64 {
        1.0 / self.a.abs().min(self.b.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Eigen,
    ResolventLimit,
}

#[derive(Clone)]
enum Source {
    /// `E(s,t) = Σ_k ψ̂_k(s) conj ψ̂_k(t)` with `ψ̂_k(s) = Σ_j T(s,x_j) c_{jk}`.
    Eigen { op: DiscreteOperator, coeff: CMatrix },
    Resolvent { eval: ResolventEvaluation, scale: Complex64 },
}

/// Projection kernel `E(s,t)` with its provenance.
#[derive(Clone)]
pub struct SpectralProjectionKernel {
    pub window: Option<SpectralWindow>,
    pub point: Option<f64>,
    pub n: Option<usize>,
    pub method: ProjectionMethod,
    /// Discrete eigenvalues captured by the window.
    pub eigenvalues: Vec<f64>,
    pub warning: Option<String>,
    source: Source,
}

impl std::fmt::Debug for SpectralProjectionKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralProjectionKernel")
            .field("window", &self.window)
            .field("point", &self.point)
            .field("n", &self.n)
            .field("method", &self.method)
            .field("eigenvalues", &self.eigenvalues)
            .field("warning", &self.warning)
            .finish()
    }
}

impl SpectralProjectionKernel {
    pub fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        Ok(self.eval_grid(&[s], &[t])?[(0, 0)])
    }

    pub fn eval_grid(&self, s: &[f64], t: &[f64]) -> Result<CMatrix> {
        match &self.source {
            Source::Eigen { op, coeff } => {
                let fs = mm(&op.rows_at(s)?, coeff);
                let ft = mm(&op.rows_at(t)?, coeff);
                Ok(mm(&fs, &ft.adjoint()))
            }
            Source::Resolvent { eval, scale } => Ok(eval.eval_grid(s, t)? * *scale),
        }
    }

    /// `e(s) = conj E(s, ·)` sampled at `x`, one row per `s`.
    pub fn e_samples(&self, s: &[f64], x: &[f64]) -> Result<CMatrix> {
        Ok(self.eval_grid(s, x)?.map(|z| z.conj()))
    }

    /// `max |E(s,t) - conj E(t,s)|` over `grid²`.
    pub fn hermitian_defect(&self, grid: &[f64]) -> Result<f64> {
        let e = self.eval_grid(grid, grid)?;
        Ok(max_abs_diff(&e, &e.adjoint()))
    }

    /// `max |E(s,t) - Σ_j w_j E(s,x_j) E(x_j,t)|` over `grid²`, composed on
    /// the given rule.
    pub fn idempotency_defect(&self, grid: &[f64], nodes: &[f64], weights: &[f64]) -> Result<f64> {
        let left = self.eval_grid(grid, nodes)?;
        let right = self.eval_grid(nodes, grid)?;
        let lw = CMatrix::from_fn(left.nrows(), left.ncols(), |a, j| left[(a, j)] * weights[j]);
        Ok(max_abs_diff(&mm(&lw, &right), &self.eval_grid(grid, grid)?))
    }

    /// `Σ_j w_j E(x_j, x_j)`.
    pub fn trace(&self, nodes: &[f64], weights: &[f64]) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in nodes.iter().zip(weights) {
            acc += self.eval(*x, *x)? * *w;
        }
        Ok(acc)
    }

    /// Grid export with header `s,t,re,im`, `t` varying fastest.
    pub fn write_csv(&self, mut out: impl Write, s: &[f64], t: &[f64]) -> Result<()> {
        let e = self.eval_grid(s, t)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["s", "t", "re", "im"])?;
        for (a, sa) in s.iter().enumerate() {
            for (b, tb) in t.iter().enumerate() {
                let z = e[(a, b)];
                w.write_record(&[sa.to_string(), tb.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `E_{|ω}` of a Hermitian discrete operator from the eigenpairs of
/// `W^{1/2} K W^{1/2}` inside the window.
pub fn interval_projection(op: &DiscreteOperator, window: SpectralWindow) -> Result<SpectralProjectionKernel> {
    if !op.is_hermitian() {
        return Err(LabError::NonHermitian);
    }
    let (theta, v) = hermitian_eigen(&op.weighted().into_owned());
    let sw = op.rule().sqrt_weights();
    let keep: Vec<usize> = (0..theta.len()).filter(|&k| window.contains(theta[k])).collect();
    // c_{jk} = w_j ψ_k(x_j) / θ_k with ψ_k(x_j) = v_{jk} / √w_j
    let coeff = CMatrix::from_fn(op.len(), keep.len(), |j, k| v[(j, keep[k])] * (sw[j] / theta[keep[k]]));
    let near = theta
        .iter()
        .filter(|&&t| (t - window.a).abs() < BOUNDARY_TOL || (t - window.b).abs() < BOUNDARY_TOL)
        .count();
    Ok(SpectralProjectionKernel {
        window: Some(window),
        point: None,
        n: op.rule().n,
        method: ProjectionMethod::Eigen,
        eigenvalues: keep.iter().map(|&k| theta[k]).collect(),
        warning: (near > 0).then(|| format!("{near} eigenvalue(s) within {BOUNDARY_TOL:e} of the window ends")),
        source: Source::Eigen { op: op.clone(), coeff },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStep {
    pub mu: f64,
    /// Selected ladder index `mₙ`, or `None` when the ladder prefix ran out.
    pub m: Option<usize>,
    /// Tail functional at the selected (or last tried) index.
    pub eps: f64,
    /// `μ sup |T̃_{m|λ+iμ}|` on the test grid.
    pub scaled_sup: Option<f64>,
    /// Sup distance to the previous kernel of the sequence.
    pub distance: Option<f64>,
}

/// Sequence `-iμₙ T̃_{mₙ|λ+iμₙ}` approximating `E_{|{1/λ}}`.
#[derive(Debug, Clone)]
pub struct PointProjection {
    pub lambda: f64,
    pub steps: Vec<PointStep>,
    pub kernels: Vec<SpectralProjectionKernel>,
    /// The ladder prefix was exhausted before some `εₙ ≤ 1/n`.
    pub exhausted: bool,
    pub grid: Vec<f64>,
}

impl PointProjection {
    /// The last kernel of the sequence, the estimate of `E_{|{1/λ}}`.
    pub fn estimate(&self) -> Option<&SpectralProjectionKernel> {
        self.kernels.last()
    }
}

fn validate_point(spec: &KernelSpec, lambda: f64, mu: &[f64]) -> Result<()> {
    if !spec.is_hermitian() {
        return Err(LabError::NonHermitian);
    }
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(LabError::Precondition(format!("λ must be a non-zero real number, got {lambda}")));
    }
    if mu.is_empty() || mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(LabError::Precondition("μ sequence must be positive".into()));
    }
    if mu.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::Precondition("μ sequence must be strictly decreasing".into()));
    }
    Ok(())
}

/// `sup_{s∈I_m} ( ∫_{Î_m} |∫_{I_m} T(t,x) conj R(s,x) dx|² dt )^{1/2}` with
/// `R = T̃_{m|λ}`, on the given nodes (`Î_m` is cut off at the rule's edge).
fn tail_functional(
    eval: &ResolventEvaluation,
    t_full: &CMatrix,
    nodes: &[f64],
    weights: &[f64],
    grid_in: &[f64],
    inside: &[bool],
) -> Result<f64> {
    let r = eval.eval_grid(grid_in, nodes)?;
    // inner[a, i] = Σ_j T(x_i, x_j) w_j conj R(s_a, x_j), x_j inside
    let rw = CMatrix::from_fn(r.nrows(), r.ncols(), |a, j| {
        if inside[j] {
            r[(a, j)].conj() * weights[j]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let inner = mm(&rw, &t_full.transpose());
    let mut sup = 0.0f64;
    for a in 0..inner.nrows() {
        let mut acc = 0.0;
        for i in 0..nodes.len() {
            if !inside[i] {
                acc += weights[i] * inner[(a, i)].norm_sqr();
            }
        }
        sup = sup.max(acc.sqrt());
    }
    Ok(sup)
}

/// Greedy index rule: `mₙ` is the smallest index above `m_{n-1}` (at most
/// `m_max`) whose tail functional is at most `1/n`.
pub fn point_projection_limit(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    lambda: f64,
    mu: &[f64],
    m_max: usize,
    res: StudyResolution,
) -> Result<PointProjection> {
    validate_point(spec, lambda, mu)?;
    if m_max == 0 {
        return Err(LabError::InvalidParams("m_max must be at least 1".into()));
    }
    // one extra ladder step beyond m_max so that Î_m is never empty
    let top = m_max + 1;
    let tau_top = ladder.tau(top)?;
    let rule = Arc::new(build_rule_with_breaks(
        ladder,
        top,
        res.panels_per_unit,
        res.points_per_panel,
        &spec.panel_breaks(tau_top),
    )?);
    let nodes = &rule.nodes;
    let grid = rule.test_grid();
    let t_full = sample_kernel(spec, nodes, nodes)?;
    let ops: Vec<DiscreteOperator> = (1..=m_max)
        .map(|m| {
            let sub = crate::kernel::make_subkernel(spec, ladder, m, SubkernelKind::TwoSided)?;
            discretize(Arc::new(sub), rule.clone())
        })
        .collect::<Result<_>>()?;

    let mut steps = Vec::new();
    let mut kernels: Vec<SpectralProjectionKernel> = Vec::new();
    let mut prev_grid: Option<CMatrix> = None;
    let mut m_prev = 0usize;
    let mut exhausted = false;
    for (i, &mu_n) in mu.iter().enumerate() {
        let n = i + 1;
        let lambda_n = Complex64::new(lambda, mu_n);
        let mut chosen = None;
        let mut eps = f64::INFINITY;
        for m in m_prev + 1..=m_max {
            let op = &ops[m - 1];
            let eval = match fredholm_resolvent(op, lambda_n) {
                Ok(e) => e,
                Err(LabError::CharacteristicValue { .. }) => continue,
                Err(e) => return Err(e),
            };
            let inside: Vec<bool> = nodes.iter().map(|&x| ladder.indicator(m, x).map(|c| c > 0.0)).collect::<Result<_>>()?;
            let grid_in: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&x| ladder.indicator(m, x).map(|c| c > 0.0).unwrap_or(false))
                .collect();
            eps = tail_functional(&eval, &t_full, nodes, &rule.weights, &grid_in, &inside)?;
            if eps <= 1.0 / n as f64 {
                chosen = Some((m, eval));
                break;
            }
        }
        let Some((m, eval)) = chosen else {
            exhausted = true;
            steps.push(PointStep {
                mu: mu_n,
                m: None,
                eps,
                scaled_sup: None,
                distance: None,
            });
            break;
        };
        m_prev = m;
        let kernel = SpectralProjectionKernel {
            window: None,
            point: Some(1.0 / lambda),
            n: Some(m),
            method: ProjectionMethod::ResolventLimit,
            eigenvalues: Vec::new(),
            warning: None,
            source: Source::Resolvent {
                eval,
                scale: Complex64::new(0.0, -mu_n),
            },
        };
        let g = kernel.eval_grid(&grid, &grid)?;
        let distance = prev_grid.as_ref().map(|p| max_abs_diff(p, &g));
        steps.push(PointStep {
            mu: mu_n,
            m: Some(m),
            eps,
            scaled_sup: Some(max_abs(&g)),
            distance,
        });
        prev_grid = Some(g);
        kernels.push(kernel);
    }
    Ok(PointProjection {
        lambda,
        steps,
        kernels,
        exhausted,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Characteristic,
    RegularOrContinuous,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub lambda: f64,
    pub verdict: PointClass,
    /// Extrapolated limit of `μₙ sup|T̃_{mₙ|λ+iμₙ}|`.
    pub limit: Option<f64>,
    /// Raw `(μₙ, μₙ sup|T̃|)` pairs.
    pub sequence: Vec<(f64, f64)>,
    pub threshold: f64,
    /// Change of the extrapolated limit over the last step.
    pub settle: Option<f64>,
}

/// Richardson estimates assuming `aₙ = L + c μₙ`.
fn linear_extrapolations(seq: &[(f64, f64)]) -> Vec<f64> {
    seq.windows(2)
        .map(|w| {
            let ((m0, a0), (m1, a1)) = (w[0], w[1]);
            (m0 * a1 - m1 * a0) / (m0 - m1)
        })
        .collect()
}

/// Decides whether `λ` is characteristic from the limit of the scaled
/// resolvent norms. The limit counts as settled when the last two
/// extrapolations differ by less than `max(threshold/2, 10% of the limit)`.
pub fn classify_point(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    lambda: f64,
    mu: &[f64],
    m_max: usize,
    threshold: f64,
    res: StudyResolution,
) -> Result<Classification> {
    let pp = point_projection_limit(spec, ladder, lambda, mu, m_max, res)?;
    let sequence: Vec<(f64, f64)> = pp
        .steps
        .iter()
        .filter_map(|s| s.scaled_sup.map(|v| (s.mu, v)))
        .collect();
    let ex = linear_extrapolations(&sequence);
    let limit = ex.last().map(|l| l.max(0.0));
    let settle = (ex.len() >= 2).then(|| (ex[ex.len() - 1] - ex[ex.len() - 2]).abs());
    let verdict = match (limit, settle) {
        (Some(l), Some(d)) if d <= (0.5 * threshold).max(0.1 * l) => {
            if l > threshold {
                PointClass::Characteristic
            } else {
                PointClass::RegularOrContinuous
            }
        }
        _ => PointClass::Inconclusive,
    };
    Ok(Classification {
        lambda,
        verdict,
        limit,
        sequence,
        threshold,
        settle,
    })
}

/// Convergence of `E_{n|ω}` (two-sided subkernels) to the projection of the
/// reference subkernel on the refined rule. Row fields: `err_kernel` is the
/// sup error of `E`, `err_t` and `err_tprime` those of `e` and `e′`;
/// `sup_kernel` is `sup|E_{n|ω}|` and `bound_4_6` carries `M²‖τ‖²`.
pub fn interval_convergence_study(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    window: SpectralWindow,
    n_list: &[usize],
    res: StudyResolution,
    tolerance: f64,
) -> Result<(ConvergenceReport, Vec<String>)> {
    if !spec.is_hermitian() {
        return Err(LabError::NonHermitian);
    }
    if n_list.contains(&0) || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidParams("n list must be strictly increasing from 1".into()));
    }
    let n_top = n_list.iter().copied().chain([res.reference_n]).max().unwrap();
    let ws = Workspace::new(spec, ladder, n_top, res)?;
    let ref_op = ws.sub_op(res.reference_n, SubkernelKind::TwoSided, true)?;
    let mut warnings = Vec::new();
    for end in [window.a, window.b] {
        if is_characteristic(&ref_op, Complex64::new(1.0 / end, 0.0)) {
            warnings.push(format!("1/{end} is a characteristic value of the reference subkernel"));
        }
    }
    let reference = interval_projection(&ref_op, window)?;
    let x = &ws.fine.nodes;
    let w = &ws.fine.weights;
    let g = &ws.grid;
    let r_gg = reference.eval_grid(g, g)?;
    let r_gx = reference.eval_grid(g, x)?;
    let (tau, tau_p, t_sup) = ws.kernel_constants()?;
    let m = window.inverse_sup();
    let bound = m * m * tau * tau;

    let rows: Vec<ConvergenceRow> = n_list
        .par_iter()
        .map(|&n| {
            let op = ws.sub_op(n, SubkernelKind::TwoSided, false)?;
            let e = interval_projection(&op, window)?;
            let gg = e.eval_grid(g, g)?;
            let gx = e.eval_grid(g, x)?;
            let d = &gx - &r_gx;
            let err_e = (0..d.nrows())
                .map(|a| (0..d.ncols()).map(|j| w[j] * d[(a, j)].norm_sqr()).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let sup = max_abs(&gg);
            let mut row = ConvergenceRow {
                n,
                lambda: Complex64::new(0.0, 0.0),
                lambda_n: Complex64::new(0.0, 0.0),
                err_kernel: Some(max_abs_diff(&gg, &r_gg)),
                err_t: Some(err_e),
                // Hermitian: e′(t) = conj e(t)
                err_tprime: Some(err_e),
                err_kernel_tilde: None,
                err_t_tilde: None,
                err_tprime_tilde: None,
                scaffold_excess: None,
                resolvent_norm: None,
                sup_t: None,
                sup_tprime: None,
                sup_kernel: Some(sup),
                bound_4_3: None,
                bound_4_6: Some(bound),
                flag: "ok".into(),
            };
            if sup > bound * (1.0 + 1e-9) + 1e-14 {
                row.flag = "bound_4_73".into();
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let floor = NOISE_FLOOR * (1.0 + max_abs(&r_gg));
    let seqs: [Vec<f64>; 2] = [
        rows.iter().map(|r| r.err_kernel.unwrap()).collect(),
        rows.iter().map(|r| r.err_t.unwrap()).collect(),
    ];
    let tail_decreasing = seqs.iter().all(|s| decreasing_to_floor(s, floor));
    let final_error = rows.last().map(|r| r.err_kernel.unwrap().max(r.err_t.unwrap()));
    let report = ConvergenceReport {
        study: "interval_convergence".into(),
        kernel: spec.label(),
        lambdas: Vec::new(),
        n_list: n_list.to_vec(),
        beta: vec![0.0; n_list.len()],
        rows,
        constants: Some(BoundConstants {
            c: 0.0,
            m,
            tau_sup: tau,
            tau_prime_sup: tau_p,
            kernel_sup: t_sup,
        }),
        grid: ws.record(),
        verdict: Verdict {
            tail_decreasing,
            final_error,
            tolerance,
            floor,
            passed: tail_decreasing && final_error.is_some_and(|e| e < tolerance),
        },
    };
    Ok((report, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::hermite_functions;
    use crate::quadrature::build_rule;

    fn frh_op(n: usize) -> DiscreteOperator {
        let spec = KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap();
        let rule = build_rule(&TruncationLadder::linear2(), n, 1, 10).unwrap();
        discretize(Arc::new(spec), Arc::new(rule)).unwrap()
    }

    fn phi_outer(k: usize, grid: &[f64]) -> CMatrix {
        let h: Vec<f64> = grid.iter().map(|&x| hermite_functions(k + 1, x)[k]).collect();
        CMatrix::from_fn(grid.len(), grid.len(), |a, b| Complex64::new(h[a] * h[b], 0.0))
    }

    #[test]
    fn window_validation() {
        assert!(SpectralWindow::new(-1.0, 1.0).is_err());
        assert!(SpectralWindow::new(1.0, 0.5).is_err());
        assert_eq!(SpectralWindow::new(0.5, 1.0).unwrap().inverse_sup(), 2.0);
    }

    #[test]
    fn isolating_window_gives_rank_one_projection() {
        let op = frh_op(5);
        let e = interval_projection(&op, SpectralWindow::new(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(e.eigenvalues.len(), 1);
        let grid = op.rule().test_grid();
        let err = max_abs_diff(&e.eval_grid(&grid, &grid).unwrap(), &phi_outer(0, &grid));
        assert!(err < 1e-7, "{err}");
        assert!(e.hermitian_defect(&grid).unwrap() < 1e-10);
        let r = op.rule();
        assert!(e.idempotency_defect(&grid, &r.nodes, &r.weights).unwrap() < 1e-8);
    }

    #[test]
    fn window_with_both_eigenvalues() {
        let op = frh_op(5);
        let e = interval_projection(&op, SpectralWindow::new(0.1, 1.0).unwrap()).unwrap();
        let r = op.rule();
        let tr = e.trace(&r.nodes, &r.weights).unwrap();
        assert!((tr.re - 2.0).abs() < 1e-7 && tr.im.abs() < 1e-12);
        let grid = r.test_grid();
        let want = phi_outer(0, &grid) + phi_outer(1, &grid);
        assert!(max_abs_diff(&e.eval_grid(&grid, &grid).unwrap(), &want) < 1e-7);
    }

    #[test]
    fn empty_window_is_zero() {
        let op = frh_op(3);
        let e = interval_projection(&op, SpectralWindow::new(10.0, 20.0).unwrap()).unwrap();
        assert_eq!(e.eval(0.3, -0.2).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn non_hermitian_rejected() {
        let spec = KernelSpec::example1(1.0).unwrap();
        let rule = build_rule(&TruncationLadder::linear2(), 1, 1, 6).unwrap();
        let op = discretize(Arc::new(spec), Arc::new(rule)).unwrap();
        let err = interval_projection(&op, SpectralWindow::new(0.5, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, LabError::NonHermitian));
    }

    fn quick() -> StudyResolution {
        StudyResolution {
            panels_per_unit: 1,
            points_per_panel: 8,
            reference_n: 4,
        }
    }

    #[test]
    fn point_limit_at_characteristic_value() {
        let spec = KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap();
        let mu: Vec<f64> = (1..=8).map(|n| 0.5f64.powi(n)).collect();
        let pp = point_projection_limit(&spec, &TruncationLadder::linear2(), 1.25, &mu, 9, quick()).unwrap();
        assert!(!pp.exhausted);
        for (n, s) in pp.steps.iter().enumerate() {
            assert!(s.eps <= 1.0 / (n + 1) as f64);
        }
        let est = pp.estimate().unwrap().eval_grid(&pp.grid, &pp.grid).unwrap();
        let err = max_abs_diff(&est, &phi_outer(0, &pp.grid));
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn constant_mu_rejected() {
        let spec = KernelSpec::finite_rank_hermitian(&[0.8]).unwrap();
        let err = point_projection_limit(&spec, &TruncationLadder::linear2(), 1.25, &[0.1, 0.1], 3, quick());
        assert!(matches!(err, Err(LabError::Precondition(_))));
    }

    #[test]
    fn classification() {
        let spec = KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap();
        let ladder = TruncationLadder::linear2();
        let mu: Vec<f64> = (1..=8).map(|n| 0.5f64.powi(n)).collect();
        let c = classify_point(&spec, &ladder, 1.25, &mu, 9, CLASSIFY_THRESHOLD, quick()).unwrap();
        assert_eq!(c.verdict, PointClass::Characteristic, "{c:?}");
        let peak = 1.0 / std::f64::consts::PI.sqrt();
        assert!((c.limit.unwrap() - peak).abs() < 1e-2);
        for lambda in [2.0, 100.0] {
            let c = classify_point(&spec, &ladder, lambda, &mu, 9, CLASSIFY_THRESHOLD, quick()).unwrap();
            assert_eq!(c.verdict, PointClass::RegularOrContinuous, "{c:?}");
            assert!(c.limit.unwrap() < 1e-3);
        }
    }

    #[test]
    fn interval_study_converges_and_respects_bound() {
        let spec = KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap();
        let w = SpectralWindow::new(0.5, 1.0).unwrap();
        let (rep, warn) =
            interval_convergence_study(&spec, &TruncationLadder::linear2(), w, &[1, 2, 3, 4], quick(), 1e-6).unwrap();
        assert!(warn.is_empty());
        assert!(rep.verdict.passed, "{:?}", rep.verdict);
        assert!(rep.rows.iter().all(|r| r.flag == "ok"));
        let empty = SpectralWindow::new(5.0, 6.0).unwrap();
        let (rep, _) =
            interval_convergence_study(&spec, &TruncationLadder::linear2(), empty, &[1, 2], quick(), 1e-6).unwrap();
        assert!(rep.rows.iter().all(|r| r.err_kernel == Some(0.0) && r.sup_kernel == Some(0.0)));
    }
}
