//! Python bindings: `import rkl`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use rkl_core::cli::{run, RunConfig};
use rkl_core::convergence::{resolvent_convergence_study, moebius_uniform_study, StudyResolution};
use rkl_core::fredholm::{characteristic_values, determinant, SearchBox};
use rkl_core::kernel::{carleman_norms, make_subkernel, Kernel as _, TabulatedKernel};
use rkl_core::quadrature::{build_rule_with_breaks, discretize};
use rkl_core::resolvent::resolvent;
use rkl_core::solver::{solve_second_kind, RightHandSide};
use rkl_core::spectral::{classify_point, interval_projection, CLASSIFY_THRESHOLD};
use rkl_core::{
    catalog_kernel, DiscreteOperator, KernelSpec, LabError, ResolventEvaluation, ResolventMethod,
    SolveRoute, SpectralProjectionKernel, SpectralWindow, SubkernelKind, TruncationLadder,
};

create_exception!(rkl, CharacteristicValueError, PyException);
create_exception!(rkl, AccuracyError, PyException);

fn err(e: LabError) -> PyErr {
    match e {
        LabError::CharacteristicValue { lambda, abs_det } => {
            CharacteristicValueError::new_err(format!("characteristic value at {lambda} (|D| = {abs_det:e})"))
        }
        LabError::Accuracy { .. } => AccuracyError::new_err(e.to_string()),
        LabError::Io(_) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py_json(py: Python<'_>, text: serde_json::Result<String>) -> PyResult<Py<PyAny>> {
    let text = text.map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn ladder(step: f64) -> PyResult<TruncationLadder> {
    TruncationLadder::linear(step).map_err(err)
}

fn resolution(panels_per_unit: usize, points_per_panel: usize, reference_n: usize) -> StudyResolution {
    StudyResolution {
        panels_per_unit,
        points_per_panel,
        reference_n,
    }
}

/// A catalog or tabulated kernel `T(s, t)`.
#[pyclass(frozen, module = "rkl")]
struct Kernel {
    spec: KernelSpec,
}

#[pymethods]
impl Kernel {
    #[new]
    #[pyo3(signature = (id, params = None))]
    fn new(id: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let spec = catalog_kernel(id, &params.unwrap_or_default()).map_err(err)?;
        Ok(Self { spec })
    }

    /// Kernel from a CSV grid `s,t,re,im`.
    #[staticmethod]
    #[pyo3(signature = (path, hermitian = false))]
    fn tabulated(path: &str, hermitian: bool) -> PyResult<Self> {
        let table = TabulatedKernel::from_csv(path).map_err(err)?;
        Ok(Self {
            spec: KernelSpec::tabulated(table, hermitian).map_err(err)?,
        })
    }

    fn __call__(&self, s: f64, t: f64) -> PyResult<Complex64> {
        self.spec.eval(s, t).map_err(err)
    }

    /// `(τ(s), τ′(s))`.
    fn carleman_norms(&self, s: f64) -> PyResult<(f64, f64)> {
        let c = carleman_norms(&self.spec, s).map_err(err)?;
        Ok((c.tau, c.tau_prime))
    }

    #[getter]
    fn hermitian(&self) -> bool {
        self.spec.is_hermitian()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", self.spec.label())
    }
}

/// Nyström discretization of a kernel (or one of its subkernels) on the
/// composite rule over `[-τₙ, τₙ]` of the ladder `τₖ = k · ladder_step`.
#[pyclass(frozen, module = "rkl")]
struct Operator {
    op: DiscreteOperator,
}

#[pymethods]
impl Operator {
    #[new]
    #[pyo3(signature = (kernel, n = 3, panels_per_unit = 1, points_per_panel = 10, ladder_step = 2.0, subkernel = None))]
    fn new(
        kernel: &Kernel,
        n: usize,
        panels_per_unit: usize,
        points_per_panel: usize,
        ladder_step: f64,
        subkernel: Option<&str>,
    ) -> PyResult<Self> {
        let ladder = ladder(ladder_step)?;
        let tau = ladder.tau(n).map_err(err)?;
        let rule = build_rule_with_breaks(
            &ladder,
            n,
            panels_per_unit,
            points_per_panel,
            &kernel.spec.panel_breaks(tau),
        )
        .map_err(err)?;
        let source: Arc<dyn rkl_core::kernel::Kernel> = match subkernel {
            None => Arc::new(kernel.spec.clone()),
            Some(kind) => {
                let kind = match kind {
                    "one_sided" => SubkernelKind::OneSided,
                    "two_sided" => SubkernelKind::TwoSided,
                    other => return Err(PyValueError::new_err(format!("unknown subkernel `{other}`"))),
                };
                Arc::new(make_subkernel(&kernel.spec, &ladder, n, kind).map_err(err)?)
            }
        };
        Ok(Self {
            op: discretize(source, Arc::new(rule)).map_err(err)?,
        })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.op.rule().nodes.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.op.rule().weights.clone()
    }

    fn __len__(&self) -> usize {
        self.op.len()
    }

    /// Fredholm determinant `D(λ)`.
    fn determinant(&self, lam: Complex64) -> PyResult<Complex64> {
        Ok(determinant(&self.op, lam).map_err(err)?.determinant)
    }

    /// Zeros of `D` in the box `re × im`.
    #[pyo3(signature = (re, im = (0.0, 0.0), grid = 40, tol = 1e-8))]
    fn characteristic_values(&self, re: (f64, f64), im: (f64, f64), grid: usize, tol: f64) -> PyResult<Vec<Complex64>> {
        let set = characteristic_values(&self.op, SearchBox { re, im }, grid, tol).map_err(err)?;
        Ok(set.values.iter().map(|v| v.lambda).collect())
    }

    /// Resolvent kernel at `λ`; `method` is `fredholm_ratio`, `neumann` or `nystrom_direct`.
    #[pyo3(signature = (lam, method = "fredholm_ratio", terms = 60))]
    fn resolvent(&self, lam: Complex64, method: &str, terms: usize) -> PyResult<Resolvent> {
        let method = match method {
            "fredholm_ratio" => ResolventMethod::FredholmRatio,
            "neumann" => ResolventMethod::Neumann { terms },
            "nystrom_direct" => ResolventMethod::NystromDirect,
            other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
        };
        Ok(Resolvent {
            eval: resolvent(&self.op, lam, method).map_err(err)?,
        })
    }

    /// Solves `f - λTf = g` for `g` sampled on the nodes.
    #[pyo3(signature = (lam, g, route = "direct_linear"))]
    fn solve(&self, lam: Complex64, g: Vec<Complex64>, route: &str) -> PyResult<Vec<Complex64>> {
        let route = match route {
            "direct_linear" => SolveRoute::DirectLinear,
            "resolvent_formula" => SolveRoute::ResolventFormula,
            other => return Err(PyValueError::new_err(format!("unknown route `{other}`"))),
        };
        let rep = solve_second_kind(&self.op, lam, &RightHandSide::Samples(g), route).map_err(err)?;
        Ok(rep.f)
    }

    /// Spectral projection kernel of a Hermitian operator for the window `(a, b)`.
    fn spectral_projection(&self, a: f64, b: f64) -> PyResult<Projection> {
        let window = SpectralWindow::new(a, b).map_err(err)?;
        Ok(Projection {
            e: interval_projection(&self.op, window).map_err(err)?,
        })
    }
}

#[pyclass(frozen, module = "rkl")]
struct Resolvent {
    eval: ResolventEvaluation,
}

#[pymethods]
impl Resolvent {
    fn __call__(&self, s: f64, t: f64) -> PyResult<Complex64> {
        self.eval.eval(s, t).map_err(err)
    }

    /// Values on `s × t` as a list of rows.
    fn grid(&self, s: Vec<f64>, t: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        let m = self.eval.eval_grid(&s, &t).map_err(err)?;
        Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    #[getter]
    fn determinant(&self) -> Option<Complex64> {
        self.eval.determinant
    }
}

#[pyclass(frozen, module = "rkl")]
struct Projection {
    e: SpectralProjectionKernel,
}

#[pymethods]
impl Projection {
    fn __call__(&self, s: f64, t: f64) -> PyResult<Complex64> {
        self.e.eval(s, t).map_err(err)
    }

    /// Eigenvalues of the discretized operator inside the window.
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.e.eigenvalues.clone()
    }
}

/// Subkernel resolvent convergence study; returns the report as a dict.
/// With `beta` the Möbius sequence `λₙ = λ/(1 - βₙλ)` is used.
#[pyfunction]
#[pyo3(signature = (kernel, lam, n_list, beta = None, ladder_step = 2.0, panels_per_unit = 1, points_per_panel = 10, reference_n = 6, tolerance = 1e-5))]
#[allow(clippy::too_many_arguments)]
fn convergence_study(
    py: Python<'_>,
    kernel: &Kernel,
    lam: Complex64,
    n_list: Vec<usize>,
    beta: Option<Vec<f64>>,
    ladder_step: f64,
    panels_per_unit: usize,
    points_per_panel: usize,
    reference_n: usize,
    tolerance: f64,
) -> PyResult<Py<PyAny>> {
    let ladder = ladder(ladder_step)?;
    let res = resolution(panels_per_unit, points_per_panel, reference_n);
    let report = py
        .detach(|| match &beta {
            None => resolvent_convergence_study(&kernel.spec, &ladder, lam, &n_list, res, tolerance),
            Some(b) => moebius_uniform_study(&kernel.spec, &ladder, b, &[lam], &n_list, res, tolerance),
        })
        .map_err(err)?;
    to_py_json(py, serde_json::to_string(&report))
}

/// Classifies a real `λ` from the scaled resolvent norms `μ‖T̃_{m|λ+iμ}‖`.
#[pyfunction]
#[pyo3(signature = (kernel, lam, mu = None, m_max = None, threshold = CLASSIFY_THRESHOLD, ladder_step = 2.0))]
fn classify(
    py: Python<'_>,
    kernel: &Kernel,
    lam: f64,
    mu: Option<Vec<f64>>,
    m_max: Option<usize>,
    threshold: f64,
    ladder_step: f64,
) -> PyResult<Py<PyAny>> {
    let ladder = ladder(ladder_step)?;
    let mu = mu.unwrap_or_else(|| (1..=8).map(|n| 0.5f64.powi(n)).collect());
    let m_max = m_max.unwrap_or(mu.len() + 1);
    let c = py
        .detach(|| classify_point(&kernel.spec, &ladder, lam, &mu, m_max, threshold, StudyResolution::default()))
        .map_err(err)?;
    to_py_json(py, serde_json::to_string(&c))
}

/// Runs a TOML config like the `rkl` binary; returns the written paths.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn run_config(py: Python<'_>, config: &str, overrides: Vec<String>) -> PyResult<Vec<String>> {
    let cfg = RunConfig::from_toml(config, &overrides).map_err(err)?;
    let out = py.detach(|| run(&cfg)).map_err(err)?;
    Ok(out.files.iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn rkl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Operator>()?;
    m.add_class::<Resolvent>()?;
    m.add_class::<Projection>()?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("CharacteristicValueError", m.py().get_type::<CharacteristicValueError>())?;
    m.add("AccuracyError", m.py().get_type::<AccuracyError>())?;
    Ok(())
}
