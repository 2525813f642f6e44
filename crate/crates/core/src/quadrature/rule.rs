use serde::{Deserialize, Serialize};

use super::gauss_legendre;
use crate::error::{LabError, Result};
use crate::kernel::TruncationLadder;

/// Boundaries closer than this are merged.
const BREAK_MERGE: f64 = 1e-12;

/// Composite Gauss–Legendre rule on `[-half_width, half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel boundaries, ascending, from `-half_width` to `half_width`.
    pub panels: Vec<f64>,
    /// Mandatory boundaries the panels were built from (before uniform subdivision).
    pub breaks: Vec<f64>,
    pub half_width: f64,
    pub panels_per_unit: usize,
    pub points_per_panel: usize,
    /// Ladder index the rule was built for, if any.
    pub n: Option<usize>,
}

/// Rule on `[-τₙ, τₙ]` with panel boundaries at every `±τ_k`, `k ≤ n`.
pub fn build_rule(
    ladder: &TruncationLadder,
    n: usize,
    panels_per_unit: usize,
    points_per_panel: usize,
) -> Result<QuadratureRule> {
    build_rule_with_breaks(ladder, n, panels_per_unit, points_per_panel, &[])
}

/// As [`build_rule`], with additional mandatory panel boundaries.
pub fn build_rule_with_breaks(
    ladder: &TruncationLadder,
    n: usize,
    panels_per_unit: usize,
    points_per_panel: usize,
    extra: &[f64],
) -> Result<QuadratureRule> {
    let taus = ladder.prefix(n)?;
    let half_width = *taus.last().unwrap();
    let mut breaks: Vec<f64> = taus.iter().flat_map(|&t| [-t, t]).collect();
    breaks.extend_from_slice(extra);
    let mut rule = build_rule_on(half_width, &breaks, panels_per_unit, points_per_panel)?;
    rule.n = Some(n);
    Ok(rule)
}

/// Rule on `[-half_width, half_width]`; each gap between consecutive
/// breaks is split into `⌈length · panels_per_unit⌉` equal panels.
pub fn build_rule_on(
    half_width: f64,
    breaks: &[f64],
    panels_per_unit: usize,
    points_per_panel: usize,
) -> Result<QuadratureRule> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(LabError::InvalidParams(format!("half width must be positive, got {half_width}")));
    }
    if panels_per_unit == 0 || points_per_panel == 0 {
        return Err(LabError::InvalidParams(
            "panels_per_unit and points_per_panel must be positive".into(),
        ));
    }
    let mut b: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && x.abs() <= half_width)
        .chain([-half_width, half_width])
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= BREAK_MERGE * half_width.max(1.0));
    *b.first_mut().unwrap() = -half_width;
    *b.last_mut().unwrap() = half_width;

    let mut panels = vec![-half_width];
    for w in b.windows(2) {
        let len = w[1] - w[0];
        let m = ((len * panels_per_unit as f64) - 1e-9).ceil().max(1.0) as usize;
        let h = len / m as f64;
        for k in 1..m {
            panels.push(w[0] + h * k as f64);
        }
        panels.push(w[1]);
    }

    let (x, w) = gauss_legendre(points_per_panel);
    let mut nodes = Vec::with_capacity((panels.len() - 1) * points_per_panel);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for p in panels.windows(2) {
        let half = 0.5 * (p[1] - p[0]);
        let mid = 0.5 * (p[1] + p[0]);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        panels,
        breaks: b,
        half_width,
        panels_per_unit,
        points_per_panel,
        n: None,
    })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same breaks, twice as many panels per unit length.
    pub fn refined(&self) -> QuadratureRule {
        let mut r = build_rule_on(
            self.half_width,
            &self.breaks,
            2 * self.panels_per_unit,
            self.points_per_panel,
        )
        .expect("refining a valid rule");
        r.n = self.n;
        r
    }

    pub fn panel_midpoints(&self) -> Vec<f64> {
        self.panels.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    /// Nodes and panel midpoints merged in ascending order.
    pub fn test_grid(&self) -> Vec<f64> {
        let mut g = self.nodes.clone();
        g.extend(self.panel_midpoints());
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_sum_and_constant() {
        let r = build_rule_on(2.0, &[], 3, 5).unwrap();
        assert!((r.integrate(|_| 1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let ladder = TruncationLadder::linear2();
        let r = build_rule(&ladder, 4, 1, 10).unwrap();
        assert_eq!(r.half_width, 8.0);
        let v = r.integrate(|x| (-x * x).exp());
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn polynomial_exactness_on_one_panel() {
        let p = 6;
        let r = build_rule_on(1.0, &[], 1, p).unwrap();
        assert_eq!(r.panels.len(), 3);
        // one panel [0,1]: integrate x^(2p-1)
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, w)| w * x.powi(2 * p as i32 - 1))
            .sum();
        assert!((v - 1.0 / (2 * p) as f64).abs() < 1e-13);
    }

    #[test]
    fn ladder_breaks_are_panel_boundaries() {
        let ladder = TruncationLadder::QuarticSums;
        let r = build_rule(&ladder, 3, 1, 4).unwrap();
        for t in ladder.prefix(3).unwrap() {
            assert!(r.panels.contains(&t) && r.panels.contains(&-t));
        }
        let refined = r.refined();
        assert_eq!(refined.len(), 2 * r.len());
        for t in ladder.prefix(3).unwrap() {
            assert!(refined.panels.contains(&t));
        }
    }

    proptest! {
        #[test]
        fn rule_invariants(n in 1usize..5, ppu in 1usize..4, ppp in 1usize..12, step in 0.3f64..3.0) {
            let ladder = TruncationLadder::linear(step).unwrap();
            let r = build_rule(&ladder, n, ppu, ppp).unwrap();
            let tau = ladder.tau(n).unwrap();
            let sum: f64 = r.weights.iter().sum();
            prop_assert!((sum - 2.0 * tau).abs() < 1e-12 * tau.max(1.0));
            prop_assert!(r.weights.iter().all(|&w| w > 0.0));
            prop_assert!(r.nodes.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(r.nodes.iter().all(|x| x.abs() < tau));
            for k in 1..=n {
                let t = ladder.tau(k).unwrap();
                prop_assert!(r.panels.iter().any(|p| (p - t).abs() < 1e-12));
                prop_assert!(r.panels.iter().any(|p| (p + t).abs() < 1e-12));
            }
        }
    }
}
