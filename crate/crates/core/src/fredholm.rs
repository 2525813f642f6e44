//! Fredholm determinants, first minors, the determinant-ratio resolvent and
//! characteristic values of discretized subkernels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{c, identity, inverse_with_det, log_det, mm, CMatrix};
use crate::quadrature::DiscreteOperator;
use crate::resolvent::{ResolventEvaluation, ResolventMethod};

/// Relative size of `|D(λ)|` below which `λ` counts as characteristic.
pub const CHARACTERISTIC_TOL: f64 = 1e-8;
/// Largest order of the direct minor series.
pub const MINOR_SERIES_MAX: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeterminantMethod {
    DiscreteDet,
    NewtonSeries { m_max: usize },
}

/// `D(λ)` for a discretized (sub)kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmData {
    pub lambda: Complex64,
    pub determinant: Complex64,
    pub log_abs_det: f64,
    pub n: Option<usize>,
    pub nodes: usize,
    pub half_width: f64,
    pub panels_per_unit: usize,
    pub points_per_panel: usize,
    pub method: DeterminantMethod,
    /// `|D - D_refined|` with the rule's panel density doubled.
    pub error_estimate: f64,
}

/// `(D(λ), log|D(λ)|)` from a pivoted LU of `I - λ W^{1/2} K W^{1/2}`.
pub fn determinant_value(op: &DiscreteOperator, lambda: Complex64) -> (Complex64, f64) {
    if lambda == c(0.0) {
        return (c(1.0), 0.0);
    }
    let m = identity(op.len()) - op.weighted().into_owned() * lambda;
    let (log_abs, phase) = log_det(m);
    (phase * log_abs.exp(), log_abs)
}

pub fn determinant(op: &DiscreteOperator, lambda: Complex64) -> Result<FredholmData> {
    let (d, log_abs) = determinant_value(op, lambda);
    let refined = op.refined()?;
    let (d2, _) = determinant_value(&refined, lambda);
    let rule = op.rule();
    Ok(FredholmData {
        lambda,
        determinant: d,
        log_abs_det: log_abs,
        n: rule.n,
        nodes: rule.len(),
        half_width: rule.half_width,
        panels_per_unit: rule.panels_per_unit,
        points_per_panel: rule.points_per_panel,
        method: DeterminantMethod::DiscreteDet,
        error_estimate: (d - d2).norm(),
    })
}

/// Power sums `p_k = tr(A^k) = Σ μ_i^k`, `k = 1..=m`.
fn power_sums(op: &DiscreteOperator, m: usize) -> Vec<Complex64> {
    match op.spectrum() {
        Some(ev) => (1..=m)
            .map(|k| ev.iter().map(|z| z.powu(k as u32)).sum())
            .collect(),
        None => {
            let a = op.weighted().into_owned();
            let mut p = a.clone();
            let mut out = Vec::with_capacity(m);
            for k in 1..=m {
                if k > 1 {
                    p = mm(&p, &a);
                }
                out.push(p.trace());
            }
            out
        }
    }
}

/// Coefficients `d_j` of `D(λ) = Σ_j d_j λ^j`, `j = 0..=m_max`, from the
/// elementary symmetric functions `e_j` (Newton's identities): `d_j = (-1)^j e_j`.
pub fn fredholm_coefficients(op: &DiscreteOperator, m_max: usize) -> Vec<Complex64> {
    let p = power_sums(op, m_max);
    let mut e = vec![c(1.0)];
    for k in 1..=m_max {
        let mut acc = c(0.0);
        for i in 1..=k {
            let term = e[k - i] * p[i - 1];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e.push(acc / k as f64);
    }
    e.iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect()
}

/// Partial sum of the Fredholm series up to order `m_max`.
pub fn determinant_series_oracle(op: &DiscreteOperator, lambda: Complex64, m_max: usize) -> Result<Complex64> {
    if m_max > op.len() {
        return Err(LabError::Precondition(format!(
            "series order {m_max} exceeds the matrix size {}",
            op.len()
        )));
    }
    let d = fredholm_coefficients(op, m_max);
    // Horner in λ
    Ok(d.iter().rev().fold(c(0.0), |acc, dj| acc * lambda + dj))
}

/// Scale for the characteristic test: `exp(Σ_i max(0, log|1 - λ μ_i|))`.
pub fn characteristic_scale(op: &DiscreteOperator, lambda: Complex64) -> f64 {
    match op.spectrum() {
        Some(ev) => ev
            .iter()
            .map(|mu| (c(1.0) - lambda * mu).norm().ln().max(0.0))
            .sum::<f64>()
            .exp(),
        None => 1.0,
    }
}

/// Errors with [`LabError::CharacteristicValue`] when `|D(λ)|` is below
/// `CHARACTERISTIC_TOL` times the characteristic scale.
pub fn characteristic_check(op: &DiscreteOperator, lambda: Complex64, abs_det: f64) -> Result<()> {
    if !(abs_det >= CHARACTERISTIC_TOL * characteristic_scale(op, lambda)) {
        return Err(LabError::CharacteristicValue { lambda, abs_det });
    }
    Ok(())
}

pub fn is_characteristic(op: &DiscreteOperator, lambda: Complex64) -> bool {
    let (d, _) = determinant_value(op, lambda);
    characteristic_check(op, lambda, d.norm()).is_err()
}

/// `T|λ = D(s,t|λ) / D(λ)` realized by one LU of `I - λKW`.
pub fn fredholm_resolvent(op: &DiscreteOperator, lambda: Complex64) -> Result<ResolventEvaluation> {
    let m = identity(op.len()) - op.kw() * lambda;
    let (q, log_abs, phase) = match inverse_with_det(m) {
        Ok(v) => v,
        Err(LabError::Singular) => {
            return Err(LabError::CharacteristicValue {
                lambda,
                abs_det: 0.0,
            })
        }
        Err(e) => return Err(e),
    };
    let det = phase * log_abs.exp();
    characteristic_check(op, lambda, det.norm())?;
    let mut eval = ResolventEvaluation::from_inverse(op, lambda, ResolventMethod::FredholmRatio, q);
    eval.determinant = Some(det);
    Ok(eval)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinorRoute {
    Ratio,
    Series { m_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorValue {
    pub value: Complex64,
    pub route: MinorRoute,
    pub warning: Option<String>,
}

/// Values `T^{[k]}(s,t)` for `k = 1..=k_max` by Nyström composition on the rule.
fn iterant_values(op: &DiscreteOperator, s: f64, t: f64, k_max: usize) -> Result<Vec<Complex64>> {
    let src = op.source();
    let x = &op.rule().nodes;
    let w = &op.rule().weights;
    let mut out = vec![src.eval(s, t)?];
    if k_max < 2 {
        return Ok(out);
    }
    let col: Vec<Complex64> = x.iter().map(|&xj| src.eval(xj, t)).collect::<Result<_>>()?;
    // v = k(s)ᵀ W, then v ← v K W
    let mut v = CMatrix::from_fn(1, x.len(), |_, j| src.eval(s, x[j]).unwrap_or(c(0.0)) * w[j]);
    for k in 2..=k_max {
        if k > 2 {
            v *= op.kw();
        }
        out.push((0..x.len()).map(|j| v[(0, j)] * col[j]).sum());
    }
    Ok(out)
}

/// Low-order minor series `Σ_{m ≤ m_max} λ^m Σ_{j ≤ m} d_j T^{[m+1-j]}(s,t)`.
pub fn first_minor_series(
    op: &DiscreteOperator,
    lambda: Complex64,
    s: f64,
    t: f64,
    m_max: usize,
) -> Result<Complex64> {
    if m_max > MINOR_SERIES_MAX {
        return Err(LabError::Precondition(format!(
            "minor series is limited to order {MINOR_SERIES_MAX}"
        )));
    }
    // row is validated here so the unwrap_or in iterant_values never fires on errors
    op.rows_at(&[s])?;
    let d = fredholm_coefficients(op, m_max.min(op.len()));
    let it = iterant_values(op, s, t, m_max + 1)?;
    let mut total = c(0.0);
    let mut pow = c(1.0);
    for m in 0..=m_max {
        let mut cm = c(0.0);
        for (j, dj) in d.iter().enumerate().take(m + 1) {
            cm += dj * it[m - j];
        }
        total += pow * cm;
        pow *= lambda;
    }
    Ok(total)
}

/// First Fredholm minor `D(s,t|λ) = D(λ) · T|λ(s,t)`; near characteristic
/// values the order-3 series is used instead and a warning is attached.
pub fn first_minor(op: &DiscreteOperator, lambda: Complex64, s: f64, t: f64) -> Result<MinorValue> {
    match fredholm_resolvent(op, lambda) {
        Ok(r) => Ok(MinorValue {
            value: r.determinant.unwrap() * r.eval(s, t)?,
            route: MinorRoute::Ratio,
            warning: None,
        }),
        Err(LabError::CharacteristicValue { abs_det, .. }) => Ok(MinorValue {
            value: first_minor_series(op, lambda, s, t, MINOR_SERIES_MAX)?,
            route: MinorRoute::Series {
                m_max: MINOR_SERIES_MAX,
            },
            warning: Some(format!(
                "|D(λ)| = {abs_det:e} below the characteristic threshold; truncated series of order {MINOR_SERIES_MAX} used"
            )),
        }),
        Err(e) => Err(e),
    }
}

/// Closed rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl SearchBox {
    /// `nre × nim` lattice including the corners, real part varying fastest.
    /// A degenerate side gets a single point.
    pub fn lattice(&self, nre: usize, nim: usize) -> Vec<Complex64> {
        let axis = |(a, b): (f64, f64), k: usize| -> Vec<f64> {
            if k <= 1 || b == a {
                vec![a]
            } else {
                (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
            }
        };
        let im = axis(self.im, nim);
        let re = axis(self.re, nre);
        im.iter().flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y))).collect()
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re.0 - slack && z.re <= self.re.1 + slack && z.im >= self.im.0 - slack && z.im <= self.im.1 + slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicValue {
    pub lambda: Complex64,
    pub abs_det: f64,
    /// Rounded `|h · D′/D(λ* + h)|`, a crude multiplicity estimate.
    pub multiplicity: usize,
    /// `false` when Newton did not converge.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicValueSet {
    pub values: Vec<CharacteristicValue>,
    pub search_box: SearchBox,
    pub grid: usize,
    pub tol: f64,
}

/// `tr((I - λKW)^{-1} KW) = -D′(λ)/D(λ)`, as `Σ μ_i/(1 - λμ_i)` when the
/// spectrum is cached, else through an LU solve.
fn log_derivative_trace(op: &DiscreteOperator, lambda: Complex64) -> Option<Complex64> {
    if let Some(ev) = op.spectrum() {
        let mut acc = c(0.0);
        for mu in ev {
            let d = c(1.0) - lambda * mu;
            if d.norm() == 0.0 {
                return None;
            }
            acc += mu / d;
        }
        return Some(acc);
    }
    let kw = op.kw();
    let m = identity(op.len()) - &kw * lambda;
    let lu = m.lu();
    let x = lu.solve(&kw)?;
    Some(x.trace())
}

/// Zeros of `D(λ)` inside a box: coarse `|D|` scan (eigenvalue product when
/// the spectrum is available), Newton refinement with
/// `λ ← λ + 1 / tr((I - λKW)^{-1}KW)`, de-duplication and verification
/// `|D(λ*)| ≤ tol`.
pub fn characteristic_values(
    op: &DiscreteOperator,
    search_box: SearchBox,
    grid: usize,
    tol: f64,
) -> Result<CharacteristicValueSet> {
    if grid < 2 || !(search_box.re.1 >= search_box.re.0) || !(search_box.im.1 >= search_box.im.0) {
        return Err(LabError::InvalidParams("search box needs grid ≥ 2 and ordered bounds".into()));
    }
    let nre = grid;
    let nim = if search_box.im.1 > search_box.im.0 { grid } else { 1 };
    let at = |i: usize, j: usize| {
        let fr = if nre > 1 { i as f64 / (nre - 1) as f64 } else { 0.0 };
        let fi = if nim > 1 { j as f64 / (nim - 1) as f64 } else { 0.0 };
        Complex64::new(
            search_box.re.0 + fr * (search_box.re.1 - search_box.re.0),
            search_box.im.0 + fi * (search_box.im.1 - search_box.im.0),
        )
    };
    let log_abs_det = |z: Complex64| match op.spectrum() {
        Some(ev) => ev.iter().map(|mu| (c(1.0) - z * mu).norm().ln()).sum(),
        None => determinant_value(op, z).1,
    };
    let mut logd = vec![0.0; nre * nim];
    for i in 0..nre {
        for j in 0..nim {
            logd[i * nim + j] = log_abs_det(at(i, j));
        }
    }
    let mut candidates = Vec::new();
    for i in 0..nre {
        for j in 0..nim {
            let v = logd[i * nim + j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nre as i64 || jj >= nim as i64 {
                        continue;
                    }
                    // ties (conjugate-symmetric rows) go to the earlier cell
                    let k = ii as usize * nim + jj as usize;
                    if logd[k] < v || (logd[k] == v && k < i * nim + j) {
                        is_min = false;
                    }
                }
            }
            if is_min {
                candidates.push(at(i, j));
            }
        }
    }

    let diag = Complex64::new(search_box.re.1 - search_box.re.0, search_box.im.1 - search_box.im.0).norm();
    let slack = diag / grid as f64;
    let mut found: Vec<CharacteristicValue> = Vec::new();
    for start in candidates {
        let mut z = start;
        let mut converged = false;
        for _ in 0..60 {
            let Some(tr) = log_derivative_trace(op, z) else {
                // exactly singular: already on a zero
                converged = true;
                break;
            };
            if tr.norm() == 0.0 {
                break;
            }
            let step = c(1.0) / tr;
            z += step;
            if !z.re.is_finite() || !z.im.is_finite() || !search_box.contains(z, 2.0 * slack) {
                break;
            }
            if step.norm() <= 1e-13 * z.norm().max(1.0) {
                converged = true;
                break;
            }
        }
        if !z.re.is_finite() || !search_box.contains(z, slack) {
            continue;
        }
        let abs_det = determinant_value(op, z).0.norm();
        let refined = converged && abs_det <= tol;
        if !refined && abs_det > tol.sqrt() {
            continue;
        }
        if found
            .iter()
            .any(|f| (f.lambda - z).norm() <= 1e-6 * z.norm().max(1.0))
        {
            continue;
        }
        let h = 1e-4 * z.norm().max(1e-3);
        let multiplicity = log_derivative_trace(op, z + h)
            .map(|tr| (tr * h).norm().round().max(1.0) as usize)
            .unwrap_or(1);
        found.push(CharacteristicValue {
            lambda: z,
            abs_det,
            multiplicity,
            refined,
        });
    }
    found.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
    Ok(CharacteristicValueSet {
        values: found,
        search_box,
        grid,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelSpec, Profile, TruncationLadder};
    use crate::quadrature::{build_rule, discretize};
    use std::sync::Arc;

    fn op_for(spec: KernelSpec, n: usize) -> DiscreteOperator {
        let rule = build_rule(&TruncationLadder::linear2(), n, 1, 10).unwrap();
        discretize(Arc::new(spec), Arc::new(rule)).unwrap()
    }

    fn rank1() -> (KernelSpec, Profile, Profile, f64) {
        let a = Profile::gaussian(0.0, 1.0);
        let b = Profile::gaussian(0.3, 1.2);
        let s = 1.0 + 1.44;
        let cab = (std::f64::consts::PI * 1.44 / s).sqrt() * (-0.09 / s).exp();
        (KernelSpec::rank1(a, b).unwrap(), a, b, cab)
    }

    #[test]
    fn determinant_basics() {
        let (spec, _, _, cab) = rank1();
        let op = op_for(spec, 5);
        assert_eq!(determinant(&op, c(0.0)).unwrap().determinant, c(1.0));
        for l in [0.3, -1.1, 0.9 / cab] {
            let d = determinant(&op, c(l)).unwrap();
            assert!((d.determinant - c(1.0 - l * cab)).norm() < 1e-12);
            assert!(d.error_estimate < 1e-12);
        }
        let frh = op_for(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        for l in [0.2, 1.0, Complex64::new(0.5, 0.5).re] {
            let d = determinant(&frh, c(l)).unwrap().determinant;
            assert!((d - c((1.0 - 0.8 * l) * (1.0 - 0.3 * l))).norm() < 1e-8);
        }
    }

    #[test]
    fn series_oracle() {
        let (spec, _, _, cab) = rank1();
        let op = op_for(spec, 5);
        assert_eq!(determinant_series_oracle(&op, c(0.7), 0).unwrap(), c(1.0));
        let one = determinant_series_oracle(&op, c(0.7), 1).unwrap();
        assert!((one - c(1.0 - 0.7 * cab)).norm() < 1e-12);
        let g = op_for(KernelSpec::gauss_bump(1.0).unwrap(), 5);
        let full = determinant_series_oracle(&g, c(0.2), g.len()).unwrap();
        let det = determinant_value(&g, c(0.2)).0;
        assert!((full - det).norm() < 1e-9);
        assert!(determinant_series_oracle(&g, c(0.2), g.len() + 1).is_err());
    }

    #[test]
    fn minors() {
        let (spec, a, b, _) = rank1();
        let op = op_for(spec, 5);
        for l in [0.0, 0.4, 1.3] {
            let m = first_minor(&op, c(l), 0.3, -0.5).unwrap();
            assert_eq!(m.route, MinorRoute::Ratio);
            assert!((m.value.re - a.eval(0.3) * b.eval(-0.5)).abs() < 1e-12);
            let s = first_minor_series(&op, c(l), 0.3, -0.5, 3).unwrap();
            assert!((s.re - a.eval(0.3) * b.eval(-0.5)).abs() < 1e-12);
        }
        let g = op_for(KernelSpec::gauss_bump(1.0).unwrap(), 5);
        let ratio = first_minor(&g, c(0.1), 0.2, 0.4).unwrap().value;
        let series = first_minor_series(&g, c(0.1), 0.2, 0.4, 3).unwrap();
        assert!((ratio - series).norm() < 1e-7);
    }

    #[test]
    fn resolvent_rank1_closed_form() {
        let (spec, a, b, cab) = rank1();
        let op = op_for(spec, 5);
        let r = fredholm_resolvent(&op, c(0.5)).unwrap();
        for (s, t) in [(0.0, 0.0), (1.0, -2.0), (-3.0, 0.5), (11.0, 0.0)] {
            let chi = if (-10.0..10.0).contains(&s) { 1.0 } else { 0.0 };
            let expect = chi * a.eval(s) * b.eval(t) / (1.0 - 0.5 * cab);
            assert!((r.eval(s, t).unwrap().re - expect).abs() < 1e-12);
        }
        let err = fredholm_resolvent(&op, c(1.0 / cab)).unwrap_err();
        assert!(matches!(err, LabError::CharacteristicValue { .. }));
    }

    #[test]
    fn characteristic_values_of_finite_rank() {
        let frh = op_for(KernelSpec::finite_rank_hermitian(&[0.8, 0.3]).unwrap(), 6);
        let bx = SearchBox {
            re: (0.5, 4.0),
            im: (-0.5, 0.5),
        };
        let set = characteristic_values(&frh, bx, 25, 1e-8).unwrap();
        let roots: Vec<f64> = set.values.iter().map(|v| v.lambda.re).collect();
        assert_eq!(roots.len(), 2, "{set:?}");
        assert!((roots[0] - 1.25).abs() < 1e-6);
        assert!((roots[1] - 10.0 / 3.0).abs() < 1e-6);
        assert!(set.values.iter().all(|v| v.refined && v.multiplicity == 1 && v.lambda.im.abs() < 1e-9));
        for v in &set.values {
            assert!(fredholm_resolvent(&frh, v.lambda).is_err());
        }
        // even grid: the real axis falls between two rows with equal |D|
        let even = characteristic_values(&frh, bx, 30, 1e-8).unwrap();
        assert_eq!(even.values.len(), 2, "{even:?}");

        let zero = op_for(KernelSpec::zero(), 2);
        assert!(characteristic_values(&zero, bx, 11, 1e-8).unwrap().values.is_empty());
        // disjoint supports: ∫ab = 0, so D ≡ 1
        let orth = KernelSpec::rank1(Profile::poly_bump(-2.0, 1.0), Profile::poly_bump(2.0, 1.0)).unwrap();
        let op = op_for(orth, 3);
        assert!(characteristic_values(&op, bx, 11, 1e-8).unwrap().values.is_empty());
    }
}
