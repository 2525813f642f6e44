//! Boundedness regions, tail products and the compactness bounds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    col_norms, decreasing_to_floor, fmax, row_norms, validate_n_list, BoundConstants, GridRecord, StudyResolution,
    Workspace, NOISE_FLOOR,
};
use crate::error::{LabError, Result};
use crate::fredholm::{fredholm_resolvent, is_characteristic, SearchBox};
use crate::kernel::{Kernel, KernelSpec, SubkernelKind, TruncationLadder};
use crate::linalg::{max_abs, mm, spectral_norm, CMatrix};
use crate::quadrature::sample_kernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub lambda: Complex64,
    /// `max_n ‖Tₙ|λ‖` over the probe set; `None` when `λ` is characteristic
    /// for some probed `n` (unbounded).
    pub max_norm: Option<f64>,
    pub bounded: bool,
    /// Regular for the largest probed subkernel by the determinant test.
    pub regular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProbe {
    pub kernel: String,
    pub search_box: SearchBox,
    pub grid: (usize, usize),
    pub probe_set: Vec<usize>,
    pub threshold: f64,
    pub points: Vec<RegionPoint>,
    pub rule: GridRecord,
}

impl RegionProbe {
    /// Points where the bounded classification and the determinant's
    /// regular classification disagree.
    pub fn mismatches(&self) -> Vec<&RegionPoint> {
        self.points.iter().filter(|p| p.bounded != p.regular).collect()
    }
}

/// Classifies a `λ` lattice by `max_n ‖Tₙ|λ‖ ≤ threshold` over the probe set.
pub fn boundedness_region_probe(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    search_box: SearchBox,
    grid: (usize, usize),
    probe_set: &[usize],
    threshold: f64,
    res: StudyResolution,
) -> Result<RegionProbe> {
    validate_n_list(probe_set)?;
    let Some(&n_top) = probe_set.last() else {
        return Err(LabError::InvalidParams("probe set is empty".into()));
    };
    let ws = Workspace::new(spec, ladder, n_top, res)?;
    let ops = probe_set
        .iter()
        .map(|&n| ws.sub_op(n, SubkernelKind::OneSided, false))
        .collect::<Result<Vec<_>>>()?;
    // spectra are cached on first use; warm them before the parallel sweep
    ops.par_iter().for_each(|op| {
        op.spectrum();
    });
    let lattice = search_box.lattice(grid.0, grid.1);
    let points = lattice
        .par_iter()
        .map(|&lambda| {
            let mut max_norm = Some(0.0f64);
            for op in &ops {
                match fredholm_resolvent(op, lambda) {
                    Ok(r) => max_norm = max_norm.map(|m| m.max(spectral_norm(&r.weighted()))),
                    Err(LabError::CharacteristicValue { .. }) => max_norm = None,
                    Err(e) => return Err(e),
                }
                if max_norm.is_none() {
                    break;
                }
            }
            Ok(RegionPoint {
                lambda,
                max_norm,
                bounded: max_norm.is_some_and(|m| m <= threshold),
                regular: !is_characteristic(ops.last().unwrap(), lambda),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionProbe {
        kernel: spec.label(),
        search_box,
        grid,
        probe_set: probe_set.to_vec(),
        threshold,
        points,
        rule: ws.record(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProducts {
    pub n_list: Vec<usize>,
    pub m: usize,
    /// `‖(T - Tₙ) Tₙᵐ‖`.
    pub one_sided: Vec<f64>,
    /// `‖(T - T̃ₙ) T̃ₙᵐ‖`.
    pub two_sided: Vec<f64>,
    /// `‖Tₙ‖` and `‖T̃ₙ‖`.
    pub norms_one_sided: Vec<f64>,
    pub norms_two_sided: Vec<f64>,
    pub floor: f64,
    pub decreasing: bool,
    pub rule: GridRecord,
}

/// Operator norms of the tail products on the common refined rule.
pub fn tail_product_norms(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    n_list: &[usize],
    m: usize,
    res: StudyResolution,
) -> Result<TailProducts> {
    if m == 0 {
        return Err(LabError::Precondition("tail product power m must be at least 1".into()));
    }
    validate_n_list(n_list)?;
    let n_top = n_list.iter().copied().chain([res.reference_n]).max().unwrap();
    let ws = Workspace::new(spec, ladder, n_top, res)?;
    let x = &ws.fine.nodes;
    let sw = ws.fine.sqrt_weights();
    let k = sample_kernel(spec, x, x)?;
    let a = CMatrix::from_fn(x.len(), x.len(), |i, j| k[(i, j)] * (sw[i] * sw[j]));
    let full_norm = spectral_norm(&a);

    let one_pass = |n: usize, two_sided: bool| -> Result<(f64, f64)> {
        let chi: Vec<f64> = x.iter().map(|&v| ws.chi(n, v)).collect::<Result<_>>()?;
        let an = CMatrix::from_fn(x.len(), x.len(), |i, j| {
            let mask = if two_sided { chi[i] * chi[j] } else { chi[i] };
            a[(i, j)] * mask
        });
        let mut prod = &a - &an;
        for _ in 0..m {
            prod = mm(&prod, &an);
        }
        Ok((spectral_norm(&prod), spectral_norm(&an)))
    };
    let results = n_list
        .par_iter()
        .map(|&n| Ok((one_pass(n, false)?, one_pass(n, true)?)))
        .collect::<Result<Vec<_>>>()?;
    let floor = NOISE_FLOOR * (1.0 + full_norm).powi(m as i32 + 1);
    let one_sided: Vec<f64> = results.iter().map(|r| r.0 .0).collect();
    let two_sided: Vec<f64> = results.iter().map(|r| r.1 .0).collect();
    Ok(TailProducts {
        n_list: n_list.to_vec(),
        m,
        decreasing: decreasing_to_floor(&one_sided, floor) && decreasing_to_floor(&two_sided, floor),
        one_sided,
        two_sided,
        norms_one_sided: results.iter().map(|r| r.0 .1).collect(),
        norms_two_sided: results.iter().map(|r| r.1 .1).collect(),
        floor,
        rule: ws.record(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessRow {
    pub n: usize,
    pub lambda_n: Complex64,
    /// `λₙ` is characteristic for `Tₙ`; no measurements.
    pub excluded: bool,
    pub resolvent_norm: Option<f64>,
    pub sup_t: Option<f64>,
    pub sup_tprime: Option<f64>,
    pub sup_kernel: Option<f64>,
    /// `bound - measured` for the row bound of `t` and the kernel bound.
    pub margin_4_3: Option<f64>,
    pub margin_4_6: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub s: f64,
    pub t: f64,
    /// `Tₙ|λₙ(s,t)` per `n`, `None` for excluded `n`.
    pub values: Vec<Option<Complex64>>,
    /// Largest pairwise distance among the available values.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessRecord {
    pub kernel: String,
    pub n_list: Vec<usize>,
    pub constants: Option<BoundConstants>,
    pub rows: Vec<CompactnessRow>,
    pub probes: Vec<ProbeValue>,
    /// Both bounds hold at every computed `n` (the `t′` row bound included).
    pub bounds_hold: bool,
    pub rule: GridRecord,
}

/// Measures the constants `C`, `M` and checks the row and kernel bounds of
/// the compactness argument for `λₙ` along `n_list`; also tabulates
/// `Tₙ|λₙ(s,t)` at fixed probe points.
pub fn compactness_diagnostics(
    spec: &KernelSpec,
    ladder: &TruncationLadder,
    lambdas: &[Complex64],
    n_list: &[usize],
    probe_points: &[(f64, f64)],
    res: StudyResolution,
) -> Result<CompactnessRecord> {
    validate_n_list(n_list)?;
    if lambdas.len() != n_list.len() {
        return Err(LabError::LengthMismatch {
            expected: n_list.len(),
            got: lambdas.len(),
        });
    }
    let Some(&n_top) = n_list.last() else {
        return Err(LabError::InvalidParams("n list is empty".into()));
    };
    let ws = Workspace::new(spec, ladder, n_top, res)?;
    let ps: Vec<f64> = probe_points.iter().map(|p| p.0).collect();
    let pt: Vec<f64> = probe_points.iter().map(|p| p.1).collect();
    let w = &ws.fine.weights;

    type Measured = Option<(f64, [f64; 3], Vec<Complex64>)>;
    let measured: Vec<Measured> = n_list
        .par_iter()
        .zip(lambdas)
        .map(|(&n, &lambda)| {
            let op = ws.sub_op(n, SubkernelKind::OneSided, false)?;
            let r = match fredholm_resolvent(&op, lambda) {
                Ok(r) => r,
                Err(LabError::CharacteristicValue { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let s = ws.samples(&r)?;
            let probes = (0..ps.len())
                .map(|k| r.eval(ps[k], pt[k]))
                .collect::<Result<Vec<_>>>()?;
            Ok(Some((
                spectral_norm(&r.resolvent_operator()),
                [fmax(&row_norms(&s.gx, w)), fmax(&col_norms(&s.xg, w)), max_abs(&s.gg)],
                probes,
            )))
        })
        .collect::<Result<_>>()?;

    let any = measured.iter().any(Option::is_some);
    let constants = if any {
        let (tau, tau_p, t) = ws.kernel_constants()?;
        Some(BoundConstants {
            c: n_list
                .iter()
                .zip(lambdas)
                .zip(&measured)
                .filter(|(_, m)| m.is_some())
                .map(|((_, l), _)| l.norm())
                .fold(0.0, f64::max),
            m: measured.iter().flatten().map(|m| m.0).fold(0.0, f64::max),
            tau_sup: tau,
            tau_prime_sup: tau_p,
            kernel_sup: t,
        })
    } else {
        None
    };

    let mut bounds_hold = true;
    let rows: Vec<CompactnessRow> = n_list
        .iter()
        .zip(lambdas)
        .zip(&measured)
        .map(|((&n, &lambda_n), m)| match (m, constants) {
            (Some((norm, sups, _)), Some(k)) => {
                let m43 = k.bound_4_3() - sups[0];
                let m43p = k.bound_4_3_prime() - sups[1];
                let m46 = k.bound_4_6() - sups[2];
                let slack = 1e-9 * k.bound_4_6() + 1e-14;
                if m43 < -slack || m43p < -slack || m46 < -slack {
                    bounds_hold = false;
                }
                CompactnessRow {
                    n,
                    lambda_n,
                    excluded: false,
                    resolvent_norm: Some(*norm),
                    sup_t: Some(sups[0]),
                    sup_tprime: Some(sups[1]),
                    sup_kernel: Some(sups[2]),
                    margin_4_3: Some(m43.min(m43p)),
                    margin_4_6: Some(m46),
                }
            }
            _ => CompactnessRow {
                n,
                lambda_n,
                excluded: true,
                resolvent_norm: None,
                sup_t: None,
                sup_tprime: None,
                sup_kernel: None,
                margin_4_3: None,
                margin_4_6: None,
            },
        })
        .collect();

    let probes = (0..probe_points.len())
        .map(|k| {
            let values: Vec<Option<Complex64>> = measured.iter().map(|m| m.as_ref().map(|m| m.2[k])).collect();
            let present: Vec<Complex64> = values.iter().flatten().copied().collect();
            let mut spread = 0.0f64;
            for i in 0..present.len() {
                for j in i + 1..present.len() {
                    spread = spread.max((present[i] - present[j]).norm());
                }
            }
            ProbeValue {
                s: ps[k],
                t: pt[k],
                values,
                spread,
            }
        })
        .collect();

    Ok(CompactnessRecord {
        kernel: spec.label(),
        n_list: n_list.to_vec(),
        constants,
        rows,
        probes,
        bounds_hold,
        rule: ws.record(),
    })
}
