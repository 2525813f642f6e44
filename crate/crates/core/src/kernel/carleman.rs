use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Kernel;
use crate::error::Result;
use crate::quadrature::{integrate_section, QuadratureRule};

const REL_TOL: f64 = 1e-12;
const ABS_TOL: f64 = 1e-300;

/// `τ(s) = ‖T(s,·)‖₂` and `τ′(s) = ‖T(·,s)‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanNorms {
    pub tau: f64,
    pub tau_prime: f64,
    /// Combined absolute error estimate of both norms.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlemanDirection {
    /// `t(s) = conj T(s, ·)`.
    Row,
    /// `t′(s) = T(·, s)`.
    Column,
}

/// Carleman norm-functions at `s` by adaptive quadrature over the real line.
pub fn carleman_norms(kernel: &dyn Kernel, s: f64) -> Result<CarlemanNorms> {
    let row = integrate_section(
        |x| Ok(kernel.eval(s, x)?.norm_sqr()),
        &kernel.row_section(s),
        REL_TOL,
        ABS_TOL,
    )?;
    let col = integrate_section(
        |x| Ok(kernel.eval(x, s)?.norm_sqr()),
        &kernel.column_section(s),
        REL_TOL,
        ABS_TOL,
    )?;
    let tau = row.value.max(0.0).sqrt();
    let tau_prime = col.value.max(0.0).sqrt();
    let err = |v: f64, e: f64| if v > 0.0 { e / (2.0 * v) } else { e.sqrt() };
    Ok(CarlemanNorms {
        tau,
        tau_prime,
        error: err(tau, row.error) + err(tau_prime, col.error),
    })
}

/// Node samples of the Carleman functions, one vector per point of `s_grid`:
/// `t(s)(x_j) = conj T(s, x_j)` or `t′(s)(x_j) = T(x_j, s)`.
pub fn carleman_function_samples(
    kernel: &dyn Kernel,
    rule: &QuadratureRule,
    s_grid: &[f64],
    direction: CarlemanDirection,
) -> Result<Vec<Vec<Complex64>>> {
    s_grid
        .iter()
        .map(|&s| {
            rule.nodes
                .iter()
                .map(|&x| match direction {
                    CarlemanDirection::Row => kernel.eval(s, x).map(|v| v.conj()),
                    CarlemanDirection::Column => kernel.eval(x, s),
                })
                .collect()
        })
        .collect()
}

/// `⟨f, g⟩ = Σ_j w_j f_j conj(g_j)`.
pub fn weighted_inner(rule: &QuadratureRule, f: &[Complex64], g: &[Complex64]) -> Complex64 {
    rule.weights
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| a * b.conj() * *w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile, TruncationLadder};
    use crate::quadrature::build_rule;

    #[test]
    fn example1_norms_match_closed_form() {
        for eps in [0.5, 1.0, 2.0] {
            let k = KernelSpec::example1(eps).unwrap();
            let (_, c) = k.example1_eps().unwrap();
            let expected = c * c * eps.powi(3) / 3.0 + (-2.0 * eps).exp() / 2.0;
            for s in [-7.0, -1.3, 0.0, 0.4, 3.0, 25.0] {
                let n = carleman_norms(&k, s).unwrap();
                assert!((n.tau * n.tau - expected).abs() < 1e-10 * expected, "eps={eps} s={s}");
            }
        }
        // ε = 1: (5/6)e^{-2} = 0.1127794...
        let n = carleman_norms(&KernelSpec::example1(1.0).unwrap(), 0.0).unwrap();
        assert!((n.tau * n.tau - 5.0 / 6.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((n.tau * n.tau - 0.1127794).abs() < 1e-7);
    }

    #[test]
    fn example1_column_norm_closed_form() {
        let eps = 1.0;
        let k = KernelSpec::example1(eps).unwrap();
        let c = (-eps).exp() / eps;
        for t in [0.3, 1.0, 1.7, 4.0] {
            // |s| ≤ t: -c(|s|-t) when t-ε ≤ |s|, e^{|s|-t} when |s| < t-ε
            let te = (t - eps).max(0.0);
            let lin = 2.0 * c * c * (t - te).powi(3) / 3.0;
            let tail = if t >= eps { (-2.0 * eps).exp() - (-2.0 * t).exp() } else { 0.0 };
            let n = carleman_norms(&k, t).unwrap();
            assert!((n.tau_prime.powi(2) - (lin + tail)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn rank1_and_zero() {
        let a = Profile::gaussian(0.2, 0.9);
        let b = Profile::poly_bump(0.0, 1.5);
        let k = KernelSpec::rank1(a, b).unwrap();
        for s in [-1.0, 0.0, 0.7] {
            let n = carleman_norms(&k, s).unwrap();
            assert!((n.tau - a.eval(s).abs() * b.norm_sq().sqrt()).abs() < 1e-12);
            assert!((n.tau_prime - b.eval(s).abs() * a.norm_sq().sqrt()).abs() < 1e-12);
        }
        let z = carleman_norms(&KernelSpec::zero(), 3.0).unwrap();
        assert_eq!((z.tau, z.tau_prime), (0.0, 0.0));
    }

    #[test]
    fn samples_reproduce_operator_action() {
        let a = Profile::gaussian(0.0, 1.0);
        let b = Profile::gaussian(0.5, 0.7);
        let k = KernelSpec::rank1(a, b).unwrap();
        let rule = build_rule(&TruncationLadder::linear2(), 5, 1, 10).unwrap();
        let f: Vec<Complex64> = rule.nodes.iter().map(|&x| Complex64::new((-x * x / 2.0).exp(), 0.0)).collect();
        let t0 = &carleman_function_samples(&k, &rule, &[0.0], CarlemanDirection::Row).unwrap()[0];
        let via_inner = weighted_inner(&rule, &f, t0);
        let direct = rule.integrate(|t| k.eval(0.0, t).unwrap().re * (-t * t / 2.0).exp());
        assert!((via_inner.re - direct).abs() < 1e-10 && via_inner.im.abs() < 1e-15);

        let z = carleman_function_samples(&KernelSpec::zero(), &rule, &[0.0, 1.0], CarlemanDirection::Column).unwrap();
        assert!(z.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sampled_norm_matches_adaptive_for_example1() {
        let k = KernelSpec::example1(1.0).unwrap();
        let ladder = TruncationLadder::linear2();
        // panels aligned with the kinks of the row through s = 0.5
        let rule = crate::quadrature::build_rule_with_breaks(&ladder, 10, 4, 12, &[0.5, 1.5]).unwrap();
        let s = 0.5;
        let row = &carleman_function_samples(&k, &rule, &[s], CarlemanDirection::Row).unwrap()[0];
        let sampled = weighted_inner(&rule, row, row).re.sqrt();
        let exact = carleman_norms(&k, s).unwrap().tau;
        assert!((sampled - exact).abs() < 1e-6, "{sampled} vs {exact}");
    }
}
