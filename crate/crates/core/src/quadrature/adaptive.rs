use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::gauss_legendre;
use crate::error::{LabError, Result};
use crate::kernel::Section;

/// Maximum number of subintervals before an adaptive integral gives up.
pub const ADAPTIVE_BUDGET: usize = 20_000;
const ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
}

/// Interval in the integration variable `u`; `map` sends `u` to `x`.
#[derive(Clone, Copy)]
enum Map {
    Identity,
    /// `x = a + u/(1-u)`, `u ∈ [0,1)`.
    Right(f64),
    /// `x = b - u/(1-u)`, `u ∈ [0,1)`.
    Left(f64),
}

impl Map {
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            Map::Identity => (u, 1.0),
            Map::Right(a) => {
                let v = 1.0 - u;
                (a + u / v, 1.0 / (v * v))
            }
            Map::Left(b) => {
                let v = 1.0 - u;
                (b - u / v, 1.0 / (v * v))
            }
        }
    }
}

struct Piece {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Legendre integration of `f` over a section's
/// support, split at its break points; infinite ends are mapped to `[0,1)`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_section<F>(f: F, section: &Section, rel_tol: f64, abs_tol: f64) -> Result<AdaptiveResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if section.is_empty() {
        return Ok(AdaptiveResult {
            value: 0.0,
            error: 0.0,
        });
    }
    let (x, w) = gauss_legendre(ORDER);
    let rule = |lo: f64, hi: f64, map: Map| -> Result<f64> {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let (t, jac) = map.apply(mid + half * xi);
            acc += wi * jac * f(t)?;
        }
        Ok(half * acc)
    };
    let piece = |lo: f64, hi: f64, map: Map| -> Result<Piece> {
        let whole = rule(lo, hi, map)?;
        let m = 0.5 * (lo + hi);
        let halves = rule(lo, m, map)? + rule(m, hi, map)?;
        Ok(Piece {
            lo,
            hi,
            map,
            value: halves,
            error: (whole - halves).abs(),
        })
    };

    let (a, b) = section.support;
    let mut cuts: Vec<f64> = section.breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut heap = BinaryHeap::new();
    let (left_end, right_end) = match (a.is_finite(), b.is_finite()) {
        (true, true) => (a, b),
        (false, true) => (cuts.first().copied().unwrap_or(b.min(0.0)), b),
        (true, false) => (a, cuts.last().copied().unwrap_or(a.max(0.0))),
        (false, false) => (
            cuts.first().copied().unwrap_or(0.0),
            cuts.last().copied().unwrap_or(0.0),
        ),
    };
    if !a.is_finite() {
        heap.push(piece(0.0, 1.0, Map::Left(left_end))?);
    }
    if !b.is_finite() {
        heap.push(piece(0.0, 1.0, Map::Right(right_end))?);
    }
    let mut pts = vec![left_end];
    pts.extend(cuts.iter().copied().filter(|&p| p > left_end && p < right_end));
    pts.push(right_end);
    for seg in pts.windows(2) {
        if seg[1] > seg[0] {
            heap.push(piece(seg[0], seg[1], Map::Identity)?);
        }
    }

    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let tol = abs_tol.max(rel_tol * value.abs());
        if !(value.is_finite() && error.is_finite()) {
            return Err(LabError::Accuracy {
                context: "adaptive quadrature (non-finite integrand)".into(),
                achieved: error,
                requested: tol,
            });
        }
        if error <= tol {
            return Ok(AdaptiveResult { value, error });
        }
        if heap.len() >= ADAPTIVE_BUDGET {
            return Err(LabError::Accuracy {
                context: "adaptive quadrature".into(),
                achieved: error,
                requested: tol,
            });
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.lo + worst.hi);
        if !(m > worst.lo && m < worst.hi) {
            // cannot split further in floating point
            return Err(LabError::Accuracy {
                context: "adaptive quadrature".into(),
                achieved: error,
                requested: tol,
            });
        }
        heap.push(piece(worst.lo, m, worst.map)?);
        heap.push(piece(m, worst.hi, worst.map)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_over_the_line() {
        let r = integrate_section(|x| Ok((-x * x).exp()), &Section::whole_line(), 1e-13, 1e-300).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail_with_kink() {
        let sec = Section {
            support: (1.0, f64::INFINITY),
            breaks: vec![2.0],
        };
        let f = |x: f64| Ok(if x < 2.0 { x - 1.0 } else { (2.0 - x).exp() });
        let r = integrate_section(f, &sec, 1e-13, 1e-300).unwrap();
        assert!((r.value - 1.5).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_reports_accuracy() {
        let sec = Section {
            support: (0.0, 1.0),
            breaks: vec![],
        };
        let err = integrate_section(|x| Ok(1.0 / x), &sec, 1e-12, 0.0).unwrap_err();
        assert!(matches!(err, LabError::Accuracy { .. }));
    }
}
