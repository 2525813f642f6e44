//! Second-kind equation `f - λTf = g` on a Nyström discretization.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fredholm::{characteristic_check, fredholm_resolvent};
use crate::kernel::Profile;
use crate::linalg::{c, identity, log_det, min_singular_value, mm, spectral_norm, CVector};
use crate::quadrature::{sample_kernel, DiscreteOperator};
use crate::resolvent::ResolventEvaluation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveRoute {
    /// `f = g + λ ∫ R(·,t) g(t) dt` with `R` the Fredholm resolvent.
    ResolventFormula,
    /// `(I - λKW) f = g` by LU.
    DirectLinear,
}

/// Right-hand side `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum RightHandSide {
    /// Values at the operator's nodes.
    Samples(Vec<Complex64>),
    Profile(Profile),
    /// Piecewise linear through `(s_i, g_i)`; undefined outside the hull.
    Tabulated { s: Vec<f64>, values: Vec<Complex64> },
}

impl RightHandSide {
    /// Reads CSV `s,value` (real) or `s,re,im`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let complex = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["s", "value"] => false,
            ["s", "re", "im"] => true,
            _ => {
                return Err(LabError::InvalidParams(format!(
                    "right-hand side header must be `s,value` or `s,re,im`, found `{}`",
                    headers.join(",")
                )))
            }
        };
        let num = |x: &str| -> Result<f64> {
            x.trim()
                .parse()
                .map_err(|e| LabError::InvalidParams(format!("bad number `{x}`: {e}")))
        };
        let mut s = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            s.push(num(&rec[0])?);
            let im = if complex { num(&rec[2])? } else { 0.0 };
            values.push(Complex64::new(num(&rec[1])?, im));
        }
        if s.len() < 2 || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidParams(
                "right-hand side abscissae must be strictly increasing, at least two".into(),
            ));
        }
        Ok(RightHandSide::Tabulated { s, values })
    }

    /// Off-node evaluation, if the representation allows it.
    pub fn eval(&self, x: f64) -> Option<Result<Complex64>> {
        match self {
            RightHandSide::Samples(_) => None,
            RightHandSide::Profile(p) => Some(Ok(c(p.eval(x)))),
            RightHandSide::Tabulated { s, values } => {
                let n = s.len();
                if !(x >= s[0] && x <= s[n - 1]) {
                    return Some(Err(LabError::OutOfDomain { s: x, t: f64::NAN }));
                }
                let k = s.partition_point(|&a| a <= x).clamp(1, n - 1) - 1;
                let f = (x - s[k]) / (s[k + 1] - s[k]);
                Some(Ok(values[k] * (1.0 - f) + values[k + 1] * f))
            }
        }
    }

    pub fn is_evaluable(&self) -> bool {
        !matches!(self, RightHandSide::Samples(_))
    }

    /// Values at `nodes`; samples must already match the node count.
    pub fn on(&self, nodes: &[f64]) -> Result<Vec<Complex64>> {
        match self {
            RightHandSide::Samples(v) => {
                if v.len() != nodes.len() {
                    return Err(LabError::LengthMismatch {
                        expected: nodes.len(),
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
            _ => nodes.iter().map(|&x| self.eval(x).unwrap()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub lambda: Complex64,
    pub route: SolveRoute,
    /// Solution at the rule nodes.
    pub f: Vec<Complex64>,
    /// `max_i |f_i - λ(KWf)_i - g_i|` on the nodes.
    pub residual: f64,
    /// Residual over nodes and panel midpoints with `f` extended by Nyström
    /// and the integral taken on the refined rule; needs an evaluable `g`.
    pub residual_refined: Option<f64>,
    /// 2-norm condition number of `I - λ W^{1/2} K W^{1/2}`.
    pub condition: f64,
}

/// Solves `f - λTf = g`; characteristic `λ` (Fredholm alternative) is an error.
pub fn solve_second_kind(
    op: &DiscreteOperator,
    lambda: Complex64,
    g: &RightHandSide,
    route: SolveRoute,
) -> Result<SolveReport> {
    let nodes = &op.rule().nodes;
    let gv = g.on(nodes)?;
    let n = op.len();
    let m = identity(n) - op.kw() * lambda;
    let (log_abs, _) = log_det(m.clone());
    characteristic_check(op, lambda, log_abs.exp())?;

    let f: Vec<Complex64> = match route {
        SolveRoute::DirectLinear => {
            let rhs = CVector::from_vec(gv.clone());
            m.lu().solve(&rhs).ok_or(LabError::Singular)?.iter().copied().collect()
        }
        SolveRoute::ResolventFormula => {
            let r = fredholm_resolvent(op, lambda)?;
            apply_resolvent_formula(&r, &gv)
        }
    };
    let residual = node_residual(op, lambda, &f, &gv);
    let residual_refined = if g.is_evaluable() {
        Some(refined_residual(op, lambda, &f, g)?)
    } else {
        None
    };
    let a = identity(n) - op.weighted().into_owned() * lambda;
    let condition = spectral_norm(&a) / min_singular_value(&a);
    Ok(SolveReport {
        lambda,
        route,
        f,
        residual,
        residual_refined,
        condition,
    })
}

/// `f = g + λ R W g` on the nodes of the resolvent's rule.
pub fn apply_resolvent_formula(r: &ResolventEvaluation, g: &[Complex64]) -> Vec<Complex64> {
    let w = &r.operator().rule().weights;
    let wg = CVector::from_iterator(g.len(), g.iter().zip(w).map(|(v, w)| v * *w));
    let h = r.node_matrix() * wg;
    g.iter().zip(h.iter()).map(|(gi, hi)| gi + r.lambda * hi).collect()
}

fn node_residual(op: &DiscreteOperator, lambda: Complex64, f: &[Complex64], g: &[Complex64]) -> f64 {
    let fv = CVector::from_vec(f.to_vec());
    let tf = op.kw() * &fv;
    (0..f.len())
        .map(|i| (f[i] - lambda * tf[i] - g[i]).norm())
        .fold(0.0, f64::max)
}

/// Nyström extension `f(s) = g(s) + λ Σ_j w_j T(s, x_j) f_j`.
pub fn extend_solution(
    op: &DiscreteOperator,
    lambda: Complex64,
    f: &[Complex64],
    g: &RightHandSide,
    s: &[f64],
) -> Result<Vec<Complex64>> {
    let w = &op.rule().weights;
    let rows = op.rows_at(s)?;
    let wf = CVector::from_iterator(f.len(), f.iter().zip(w).map(|(v, w)| v * *w));
    let tf = rows * wf;
    s.iter()
        .enumerate()
        .map(|(a, &x)| {
            let gx = g
                .eval(x)
                .ok_or_else(|| LabError::Precondition("off-node extension needs an evaluable g".into()))??;
            Ok(gx + lambda * tf[a])
        })
        .collect()
}

fn refined_residual(op: &DiscreteOperator, lambda: Complex64, f: &[Complex64], g: &RightHandSide) -> Result<f64> {
    let fine = op.rule().refined();
    let test = op.rule().test_grid();
    let f_fine = extend_solution(op, lambda, f, g, &fine.nodes)?;
    let f_test = extend_solution(op, lambda, f, g, &test)?;
    let t = sample_kernel(op.source(), &test, &fine.nodes)?;
    let wf = CVector::from_iterator(f_fine.len(), f_fine.iter().zip(&fine.weights).map(|(v, w)| v * *w));
    let tf = t * wf;
    let mut worst = 0.0f64;
    for (a, &x) in test.iter().enumerate() {
        let gx = g.eval(x).unwrap()?;
        worst = worst.max((f_test[a] - lambda * tf[a] - gx).norm());
    }
    Ok(worst)
}

/// Solves again with the rows of the system taken in reverse order (a
/// different elimination sequence) and returns the max node difference.
pub fn uniqueness_replay(op: &DiscreteOperator, lambda: Complex64, g: &RightHandSide) -> Result<f64> {
    let gv = g.on(&op.rule().nodes)?;
    let n = op.len();
    let m = identity(n) - op.kw() * lambda;
    let rhs = CVector::from_vec(gv);
    let f1 = m.clone().lu().solve(&rhs).ok_or(LabError::Singular)?;
    let pm = m.select_rows((0..n).rev().collect::<Vec<_>>().iter());
    let prhs = DVector::from_iterator(n, (0..n).rev().map(|i| rhs[i]));
    let f2 = pm.lu().solve(&prhs).ok_or(LabError::Singular)?;
    Ok((f1 - f2).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityResiduals {
    /// `∫ |∫ R(s,t) g(t) dt|² ds` on the rule.
    pub r413: f64,
    /// Change of `r413` when the rule is refined.
    pub r413_growth: f64,
    /// `sup_s |∫T(s,x)∫R(x,t)g(t)dt dx - ∫g(t)∫T(s,x)R(x,t)dx dt|`.
    pub r414: f64,
}

/// Discrete replay of the two solvability relations for a resolvent-like
/// evaluator `R` against the kernel of `op_full`.
pub fn solvability_residuals(
    r_limit: &ResolventEvaluation,
    op_full: &DiscreteOperator,
    g: &RightHandSide,
) -> Result<SolvabilityResiduals> {
    let r413_on = |rule: &crate::quadrature::QuadratureRule| -> Result<(f64, CVector)> {
        let gv = g.on(&rule.nodes)?;
        let wg = CVector::from_iterator(gv.len(), gv.iter().zip(&rule.weights).map(|(v, w)| v * *w));
        let h = r_limit.eval_grid(&rule.nodes, &rule.nodes)? * wg;
        let val = h.iter().zip(&rule.weights).map(|(z, w)| w * z.norm_sqr()).sum();
        Ok((val, h))
    };
    let rule = op_full.rule();
    let (r413, h) = r413_on(rule)?;
    let r413_growth = if g.is_evaluable() {
        (r413_on(&rule.refined())?.0 - r413).abs()
    } else {
        0.0
    };

    let x = &rule.nodes;
    let w = &rule.weights;
    let gv = g.on(x)?;
    let test = rule.test_grid();
    let t_sx = sample_kernel(op_full.source(), &test, x)?;
    let t_sx_w = t_sx.map_with_location(|_, j, v| v * w[j]);
    // left: ∫T(s,x) h(x) dx
    let left = &t_sx_w * &h;
    // right: ∫ g(t) [∫T(s,x)R(x,t)dx] dt
    let r_xx = r_limit.eval_grid(x, x)?;
    let tr = mm(&t_sx_w, &r_xx);
    let wg = CVector::from_iterator(gv.len(), gv.iter().zip(w).map(|(v, w)| v * *w));
    let right = tr * wg;
    let r414 = (left - right).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SolvabilityResiduals {
        r413,
        r413_growth,
        r414,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fredholm::fredholm_resolvent;
    use crate::kernel::{KernelSpec, TruncationLadder};
    use crate::quadrature::{build_rule, discretize, nystrom_apply};
    use std::sync::Arc;

    fn op_for(spec: KernelSpec, n: usize) -> DiscreteOperator {
        let rule = build_rule(&TruncationLadder::linear2(), n, 1, 10).unwrap();
        discretize(Arc::new(spec), Arc::new(rule)).unwrap()
    }

    fn rank1_op() -> DiscreteOperator {
        op_for(
            KernelSpec::rank1(Profile::gaussian(0.0, 1.0), Profile::gaussian(0.3, 1.2)).unwrap(),
            5,
        )
    }

    #[test]
    fn lambda_zero_returns_g() {
        let op = rank1_op();
        let g = RightHandSide::Profile(Profile::gaussian(1.0, 0.5));
        for route in [SolveRoute::DirectLinear, SolveRoute::ResolventFormula] {
            let rep = solve_second_kind(&op, c(0.0), &g, route).unwrap();
            let gv = g.on(&op.rule().nodes).unwrap();
            assert!(rep.f.iter().zip(&gv).all(|(a, b)| (a - b).norm() < 1e-15));
        }
    }

    #[test]
    fn manufactured_solution() {
        let op = rank1_op();
        let lambda = Complex64::new(0.7, 0.2);
        let f0: Vec<Complex64> = op.rule().nodes.iter().map(|&x| c((-x * x / 3.0).exp())).collect();
        let tf0 = nystrom_apply(&op, &f0).unwrap();
        let g: Vec<Complex64> = f0.iter().zip(&tf0).map(|(a, b)| a - lambda * b).collect();
        let g = RightHandSide::Samples(g);
        let a = solve_second_kind(&op, lambda, &g, SolveRoute::DirectLinear).unwrap();
        let b = solve_second_kind(&op, lambda, &g, SolveRoute::ResolventFormula).unwrap();
        for k in 0..f0.len() {
            assert!((a.f[k] - f0[k]).norm() < 1e-9);
            assert!((a.f[k] - b.f[k]).norm() < 1e-8);
        }
        assert!(a.residual < 1e-12 && a.residual_refined.is_none());
        assert!(uniqueness_replay(&op, lambda, &g).unwrap() < 1e-10);

        let r = fredholm_resolvent(&op, lambda).unwrap();
        let rec = apply_resolvent_formula(&r, &g.on(&op.rule().nodes).unwrap());
        assert!(rec.iter().zip(&f0).all(|(x, y)| (x - y).norm() < 1e-8));
        let sol = solvability_residuals(&r, &op, &g).unwrap();
        assert!(sol.r414 < 1e-8, "{sol:?}");
    }

    #[test]
    fn profile_rhs_refined_residual() {
        let op = op_for(KernelSpec::gauss_bump(1.0).unwrap(), 4);
        let g = RightHandSide::Profile(Profile::gaussian(0.5, 1.0));
        let rep = solve_second_kind(&op, c(0.3), &g, SolveRoute::DirectLinear).unwrap();
        assert!(rep.residual_refined.unwrap() < 1e-10, "{rep:?}");
        assert!(rep.condition >= 1.0);
    }

    #[test]
    fn characteristic_lambda_is_refused() {
        let op = op_for(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        let g = RightHandSide::Profile(Profile::gaussian(0.0, 1.0));
        for route in [SolveRoute::DirectLinear, SolveRoute::ResolventFormula] {
            let err = solve_second_kind(&op, c(1.25), &g, route).unwrap_err();
            assert!(matches!(err, LabError::CharacteristicValue { .. }), "{err:?}");
        }
    }

    #[test]
    fn zero_rhs_solvability() {
        let op = op_for(KernelSpec::gauss_bump(1.0).unwrap(), 3);
        let r = fredholm_resolvent(&op, c(0.3)).unwrap();
        let g = RightHandSide::Samples(vec![c(0.0); op.len()]);
        let s = solvability_residuals(&r, &op, &g).unwrap();
        assert_eq!((s.r413, s.r414), (0.0, 0.0));
    }

    #[test]
    fn csv_rhs() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s,value\n-1,0\n1,2").unwrap();
        let g = RightHandSide::from_csv(f.path()).unwrap();
        assert_eq!(g.eval(0.0).unwrap().unwrap(), c(1.0));
        assert!(g.eval(2.0).unwrap().is_err());
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s,re,im\n0,1,2\n1,3,4").unwrap();
        let g = RightHandSide::from_csv(f.path()).unwrap();
        assert_eq!(g.eval(0.5).unwrap().unwrap(), Complex64::new(2.0, 3.0));
    }
}
