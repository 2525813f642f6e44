//! Composite Gauss–Legendre rules and Nyström discretizations.

mod adaptive;
mod operator;
mod rule;

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

pub use adaptive::{integrate_section, AdaptiveResult, ADAPTIVE_BUDGET};
pub use operator::{discretize, nystrom_apply, operator_norm_estimate, sample_kernel, DiscreteOperator};
pub use rule::{build_rule, build_rule_on, build_rule_with_breaks, QuadratureRule};

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let p = NonZeroUsize::new(points.max(1)).unwrap();
    let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(p).as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
