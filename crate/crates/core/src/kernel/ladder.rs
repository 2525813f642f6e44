use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Strictly increasing positive truncation radii `τ₁ < τ₂ < ⋯`.
/// Indices are 1-based, as in `Iₙ = (-τₙ, τₙ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TruncationLadder {
    /// `τₙ = 1⁴ + 2⁴ + ⋯ + n⁴`.
    QuarticSums,
    /// `τₙ = step · n`.
    Linear { step: f64 },
    /// An explicit finite prefix.
    Explicit { values: Vec<f64> },
}

impl Default for TruncationLadder {
    fn default() -> Self {
        TruncationLadder::QuarticSums
    }
}

impl TruncationLadder {
    /// The study ladder `τₙ = 2n`.
    pub fn linear2() -> Self {
        TruncationLadder::Linear { step: 2.0 }
    }

    pub fn linear(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(LabError::InvalidParams(format!("ladder step must be positive, got {step}")));
        }
        Ok(TruncationLadder::Linear { step })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::InvalidParams("explicit ladder is empty".into()));
        }
        if !values[0].is_finite() || values[0] <= 0.0 {
            return Err(LabError::InvalidParams("ladder values must be positive".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(LabError::InvalidParams("ladder values must be strictly increasing".into()));
        }
        Ok(TruncationLadder::Explicit { values })
    }

    /// Appends values to an explicit prefix, keeping it strictly increasing.
    pub fn extend(&mut self, more: &[f64]) -> Result<()> {
        match self {
            TruncationLadder::Explicit { values } => {
                let mut all = values.clone();
                all.extend_from_slice(more);
                *self = Self::explicit(all)?;
                Ok(())
            }
            _ => Err(LabError::InvalidParams("only explicit ladders can be extended".into())),
        }
    }

    /// Number of available indices (`None` = unbounded).
    pub fn len(&self) -> Option<usize> {
        match self {
            TruncationLadder::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= 1 && self.len().is_none_or(|len| n <= len)
    }

    /// `τₙ`.
    pub fn tau(&self, n: usize) -> Result<f64> {
        if !self.contains(n) {
            return Err(LabError::InvalidParams(format!("ladder index {n} outside the prefix")));
        }
        let nf = n as f64;
        Ok(match self {
            TruncationLadder::QuarticSums => {
                nf * (nf + 1.0) * (2.0 * nf + 1.0) * (3.0 * nf * nf + 3.0 * nf - 1.0) / 30.0
            }
            TruncationLadder::Linear { step } => step * nf,
            TruncationLadder::Explicit { values } => values[n - 1],
        })
    }

    /// `τ₁, …, τₙ`.
    pub fn prefix(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|k| self.tau(k)).collect()
    }

    /// `χₙ(x)`: indicator of the half-open `[-τₙ, τₙ)`.
    pub fn indicator(&self, n: usize, x: f64) -> Result<f64> {
        let tau = self.tau(n)?;
        Ok(if x >= -tau && x < tau { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_sums_match_direct_sum() {
        let l = TruncationLadder::QuarticSums;
        for n in 1..=12usize {
            let direct: f64 = (1..=n).map(|k| (k as f64).powi(4)).sum();
            assert_eq!(l.tau(n).unwrap(), direct);
        }
        assert!(l.tau(0).is_err());
    }

    #[test]
    fn explicit_validation() {
        assert!(TruncationLadder::explicit(vec![1.0, 1.0]).is_err());
        assert!(TruncationLadder::explicit(vec![-1.0, 1.0]).is_err());
        let mut l = TruncationLadder::explicit(vec![1.0, 3.0]).unwrap();
        assert!(l.tau(3).is_err());
        l.extend(&[4.5]).unwrap();
        assert_eq!(l.tau(3).unwrap(), 4.5);
        assert!(l.extend(&[4.0]).is_err());
    }

    #[test]
    fn indicator_is_half_open() {
        let l = TruncationLadder::linear2();
        assert_eq!(l.indicator(1, -2.0).unwrap(), 1.0);
        assert_eq!(l.indicator(1, 2.0).unwrap(), 0.0);
        assert_eq!(l.indicator(1, 1.999).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn builtin_ladders_strictly_increase(step in 0.1f64..10.0, n in 1usize..40) {
            for l in [TruncationLadder::QuarticSums, TruncationLadder::linear(step).unwrap()] {
                let a = l.tau(n).unwrap();
                let b = l.tau(n + 1).unwrap();
                prop_assert!(a > 0.0 && b > a);
            }
        }
    }
}
