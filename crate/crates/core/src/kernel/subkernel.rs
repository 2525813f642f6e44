use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Kernel, KernelSpec, Section, TruncationLadder};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubkernelKind {
    /// `Tₙ(s,t) = χₙ(s) T(s,t)`.
    OneSided,
    /// `T̃ₙ(s,t) = χₙ(s) T(s,t) χₙ(t)`.
    TwoSided,
}

/// Truncation of a kernel to the `n`-th ladder interval.
#[derive(Debug, Clone)]
pub struct SubkernelSpec {
    pub base: KernelSpec,
    pub n: usize,
    pub tau: f64,
    pub kind: SubkernelKind,
}

pub fn make_subkernel(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    n: usize,
    kind: SubkernelKind,
) -> Result<SubkernelSpec> {
    Ok(SubkernelSpec {
        base: spec.clone(),
        n,
        tau: ladder.tau(n)?,
        kind,
    })
}

impl SubkernelSpec {
    /// `χₙ(x)` on `[-τₙ, τₙ)`.
    pub fn chi(&self, x: f64) -> f64 {
        if x >= -self.tau && x < self.tau {
            1.0
        } else {
            0.0
        }
    }
}

impl Kernel for SubkernelSpec {
    fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        if self.chi(s) == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.kind == SubkernelKind::TwoSided && self.chi(t) == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.base.eval(s, t)
    }

    fn is_hermitian(&self) -> bool {
        self.kind == SubkernelKind::TwoSided && self.base.is_hermitian()
    }

    fn row_section(&self, s: f64) -> Section {
        if self.chi(s) == 0.0 {
            return Section::empty();
        }
        let sec = self.base.row_section(s);
        match self.kind {
            SubkernelKind::OneSided => sec,
            SubkernelKind::TwoSided => sec.clip(-self.tau, self.tau),
        }
    }

    fn column_section(&self, t: f64) -> Section {
        if self.kind == SubkernelKind::TwoSided && self.chi(t) == 0.0 {
            return Section::empty();
        }
        self.base.column_section(t).clip(-self.tau, self.tau)
    }

    fn panel_breaks(&self, half_width: f64) -> Vec<f64> {
        let mut b = self.base.panel_breaks(half_width);
        b.extend([-self.tau, self.tau].into_iter().filter(|x| x.abs() < half_width));
        b
    }

    fn label(&self) -> String {
        let kind = match self.kind {
            SubkernelKind::OneSided => "T",
            SubkernelKind::TwoSided => "T~",
        };
        format!("{kind}_{}[tau={}] of {}", self.n, self.tau, self.base.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sup_diff(sub: &SubkernelSpec, grid: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for &s in grid {
            for &t in grid {
                m = m.max((sub.eval(s, t).unwrap() - sub.base.eval(s, t).unwrap()).norm());
            }
        }
        m
    }

    #[test]
    fn masks() {
        let spec = KernelSpec::gauss_bump(1.0).unwrap();
        let ladder = TruncationLadder::linear2();
        let one = make_subkernel(&spec, &ladder, 1, SubkernelKind::OneSided).unwrap();
        let two = make_subkernel(&spec, &ladder, 1, SubkernelKind::TwoSided).unwrap();
        assert_eq!(one.eval(2.0, 0.0).unwrap().norm(), 0.0);
        assert_eq!(one.eval(-2.5, 0.0).unwrap().norm(), 0.0);
        assert_eq!(one.eval(0.5, 3.0).unwrap(), spec.eval(0.5, 3.0).unwrap());
        assert_eq!(two.eval(0.5, 3.0).unwrap().norm(), 0.0);
        assert_eq!(two.eval(0.5, -1.5).unwrap(), spec.eval(0.5, -1.5).unwrap());
        assert!(two.is_hermitian() && !one.is_hermitian());
    }

    #[test]
    fn sup_error_decreases_along_ladder_for_example1() {
        // 101 x 101 grid on [-10, 10]
        let grid: Vec<f64> = (0..101).map(|i| -10.0 + 0.2 * i as f64).collect();
        let spec = KernelSpec::example1(1.0).unwrap();
        let ladder = TruncationLadder::linear2();
        let errs: Vec<f64> = (1..=6)
            .map(|n| sup_diff(&make_subkernel(&spec, &ladder, n, SubkernelKind::OneSided).unwrap(), &grid))
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0], "{errs:?}");
        }
        assert!(errs[0] > 0.0);
        // τ₆ = 12 covers the grid radius
        assert!(errs[5] < 1e-12);
    }

    proptest! {
        #[test]
        fn subkernels_are_dominated(s in -30.0f64..30.0, t in -30.0f64..30.0, n in 1usize..6) {
            let ladder = TruncationLadder::linear2();
            for spec in [KernelSpec::example1(0.7).unwrap(), KernelSpec::gauss_bump(2.0).unwrap()] {
                let full = spec.eval(s, t).unwrap().norm();
                for kind in [SubkernelKind::OneSided, SubkernelKind::TwoSided] {
                    let sub = make_subkernel(&spec, &ladder, n, kind).unwrap();
                    let v = sub.eval(s, t).unwrap().norm();
                    prop_assert!(v <= full);
                    if sub.chi(s) == 0.0 {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }
}
