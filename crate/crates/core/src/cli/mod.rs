//! Config-driven batch runner.
//!
//! A run is described by one TOML document; any leaf can be overridden with
//! `--set dotted.key=value`. Outputs go to `output.dir` as
//! `<stem>.json` (result, resolved config and its SHA-256), `<stem>.csv`
//! and, where a plot applies, `<stem>.svg`.

mod plot;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convergence::{
    boundedness_region_probe, compactness_diagnostics, moebius_uniform_study, resolvent_convergence_study,
    tail_product_norms, ConvergenceReport, StudyResolution,
};
use crate::error::{LabError, Result};
use crate::fredholm::{characteristic_values, determinant, determinant_value, SearchBox};
use crate::kernel::{
    carleman_norms, catalog_kernel, make_subkernel, Kernel, KernelSpec, Profile, SubkernelKind, TabulatedKernel,
    TruncationLadder,
};
use crate::linalg::max_abs;
use crate::quadrature::{build_rule_with_breaks, discretize, nystrom_apply, sample_kernel, DiscreteOperator};
use crate::resolvent::{resolvent, resolvent_residuals, ResidualReport, ResolventMethod};
use crate::solver::{solve_second_kind, uniqueness_replay, RightHandSide, SolveReport, SolveRoute};
use crate::spectral::{
    classify_point, interval_convergence_study, interval_projection, Classification, SpectralWindow,
    CLASSIFY_THRESHOLD,
};

pub use plot::{abs_det_plot, error_plot, line_plot, region_plot, PlotKind, Series};
pub use report::{write_json, write_report_csv, write_table, Envelope, REPORT_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Eval,
    Determinant,
    Resolvent,
    Solve,
    Converge,
    Region,
    Spectral,
    Classify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Determinant => "determinant",
            Command::Resolvent => "resolvent",
            Command::Solve => "solve",
            Command::Converge => "converge",
            Command::Region => "region",
            Command::Spectral => "spectral",
            Command::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// CSV grid for `id = "tabulated"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Hermitian claim for tabulated kernels, checked on the grid.
    #[serde(default)]
    pub hermitian: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureBlock {
    pub panels_per_unit: usize,
    pub points_per_panel: usize,
    /// Ladder index of the operator for single-operator commands.
    pub n: usize,
    pub reference_n: usize,
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        Self {
            panels_per_unit: 1,
            points_per_panel: 10,
            n: 3,
            reference_n: 6,
        }
    }
}

/// A complex parameter written as a number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cplx {
    Real(f64),
    Pair([f64; 2]),
}

impl Cplx {
    pub fn value(&self) -> Complex64 {
        match *self {
            Cplx::Real(x) => Complex64::new(x, 0.0),
            Cplx::Pair([a, b]) => Complex64::new(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub re: [f64; 2],
    #[serde(default)]
    pub im: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBlock {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Resolvent,
    Moebius,
    Tail,
    Compactness,
}

/// Command parameters; each command reads the subset it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub lambda: Option<Cplx>,
    pub lambdas: Option<Vec<Cplx>>,
    pub n_list: Option<Vec<usize>>,
    /// `fredholm_ratio`, `neumann` or `nystrom_direct`.
    pub method: Option<String>,
    pub terms: Option<usize>,
    /// Evaluation points; default is the rule's test grid.
    pub s: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    /// Evaluate a subkernel instead of the full kernel.
    pub subkernel: Option<SubkernelKind>,
    pub lambda_scan: Option<ScanBlock>,
    pub search_box: Option<BoxBlock>,
    pub grid: Option<[usize; 2]>,
    pub probe_set: Option<Vec<usize>>,
    pub threshold: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub mu: Option<Vec<f64>>,
    pub m_max: Option<usize>,
    pub beta: Option<Vec<f64>>,
    /// `βₙ = n^{-beta_power}` when `beta` is not given.
    pub beta_power: Option<f64>,
    pub g: Option<Profile>,
    pub g_path: Option<PathBuf>,
    /// Known solution `f₀`; the right side becomes `f₀ - λTf₀` on the nodes.
    pub manufactured: Option<Profile>,
    pub route: Option<SolveRoute>,
    pub study: Option<Study>,
    pub tail_m: Option<usize>,
    pub probe_points: Option<Vec<[f64; 2]>>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// File stem; defaults to the command name.
    pub stem: Option<String>,
    pub svg: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stem: None,
            svg: true,
        }
    }
}

fn default_ladder() -> TruncationLadder {
    TruncationLadder::linear2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub kernel: KernelBlock,
    #[serde(default = "default_ladder")]
    pub ladder: TruncationLadder,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Sets `dotted.key` in a TOML table; the value is parsed as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| LabError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(LabError::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| LabError::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| LabError::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?, overrides)
    }

    /// Structural checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let q = &self.quadrature;
        if q.panels_per_unit == 0 || q.points_per_panel == 0 || q.n == 0 || q.reference_n == 0 {
            return Err(LabError::Config("quadrature sizes and ladder indices must be positive".into()));
        }
        let p = &self.params;
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(LabError::Config(format!("`{}` needs params.{what}", self.command.as_str())))
            }
        };
        match self.command {
            Command::Eval | Command::Determinant => {}
            Command::Resolvent => need(p.lambda.is_some(), "lambda")?,
            Command::Solve => {
                need(p.lambda.is_some(), "lambda")?;
                let sources = [p.g.is_some(), p.g_path.is_some(), p.manufactured.is_some()];
                need(sources.iter().filter(|&&b| b).count() == 1, "exactly one of g, g_path, manufactured")?;
            }
            Command::Converge => match p.study.unwrap_or(Study::Resolvent) {
                Study::Resolvent => need(p.lambda.is_some() && p.n_list.is_some(), "lambda and n_list")?,
                Study::Moebius => need(
                    (p.lambda.is_some() || p.lambdas.is_some()) && p.n_list.is_some(),
                    "lambda or lambdas, and n_list",
                )?,
                Study::Tail => need(p.n_list.is_some(), "n_list")?,
                Study::Compactness => need(p.lambda.is_some() && p.n_list.is_some(), "lambda and n_list")?,
            },
            Command::Region => need(p.search_box.is_some() && p.probe_set.is_some(), "search_box and probe_set")?,
            Command::Spectral => need(p.window.is_some(), "window")?,
            Command::Classify => need(p.lambda.is_some(), "lambda")?,
        }
        if let Some(m) = &p.method {
            if !matches!(m.as_str(), "fredholm_ratio" | "neumann" | "nystrom_direct") {
                return Err(LabError::Config(format!("unknown resolvent method `{m}`")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn resolution(&self) -> StudyResolution {
        StudyResolution {
            panels_per_unit: self.quadrature.panels_per_unit,
            points_per_panel: self.quadrature.points_per_panel,
            reference_n: self.quadrature.reference_n,
        }
    }

    fn lambda(&self) -> Complex64 {
        self.params.lambda.map(|l| l.value()).unwrap_or_default()
    }
}

/// Exit status for an error: 2 schema/parameter problems, 3 characteristic
/// value, 4 accuracy budget, 1 anything else (I/O).
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::CharacteristicValue { .. } => 3,
        LabError::Accuracy { .. } => 4,
        LabError::Io(_) | LabError::Json(_) | LabError::Csv(_) => 1,
        _ => 2,
    }
}

pub fn build_kernel(block: &KernelBlock) -> Result<KernelSpec> {
    if block.id == "tabulated" {
        let path = block
            .path
            .as_ref()
            .ok_or_else(|| LabError::Config("tabulated kernel needs kernel.path".into()))?;
        return KernelSpec::tabulated(TabulatedKernel::from_csv(path)?, block.hermitian);
    }
    if block.path.is_some() {
        return Err(LabError::Config("kernel.path is only used with id = \"tabulated\"".into()));
    }
    catalog_kernel(&block.id, &block.params)
}

/// `{re, im}` pair for single complex values in JSON outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Files written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config_hash: String,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    hash: String,
    dir: PathBuf,
    stem: String,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output.dir)?;
        Ok(Self {
            cfg,
            hash: cfg.hash(),
            dir: cfg.output.dir.clone(),
            stem: cfg.output.stem.clone().unwrap_or_else(|| cfg.command.as_str().to_string()),
            files: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn csv(&mut self, suffix: &str, f: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        let p = self.path(suffix);
        f(fs::File::create(&p)?)?;
        self.files.push(p);
        Ok(())
    }

    fn svg(&mut self, suffix: &str, svg: Result<String>) -> Result<()> {
        if !self.cfg.output.svg {
            return Ok(());
        }
        let p = self.path(suffix);
        fs::write(&p, svg?)?;
        self.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(mut self, result: T) -> Result<RunOutcome> {
        let p = self.path(".json");
        let mut artifacts: Vec<String> = self
            .files
            .iter()
            .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        artifacts.sort();
        let env = Envelope {
            command: self.cfg.command.as_str().to_string(),
            config_hash: self.hash.clone(),
            config: self.cfg.clone(),
            artifacts,
            result,
        };
        write_json(&env, fs::File::create(&p)?)?;
        self.files.push(p);
        Ok(RunOutcome {
            config_hash: self.hash,
            files: self.files,
        })
    }
}

fn operator(cfg: &RunConfig, spec: &KernelSpec, kind: Option<SubkernelKind>) -> Result<DiscreteOperator> {
    let n = cfg.quadrature.n;
    let tau = cfg.ladder.tau(n)?;
    let rule = build_rule_with_breaks(
        &cfg.ladder,
        n,
        cfg.quadrature.panels_per_unit,
        cfg.quadrature.points_per_panel,
        &spec.panel_breaks(tau),
    )?;
    let source: Arc<dyn Kernel> = match kind {
        Some(k) => Arc::new(make_subkernel(spec, &cfg.ladder, n, k)?),
        None => Arc::new(spec.clone()),
    };
    discretize(source, Arc::new(rule))
}

fn points(given: &Option<Vec<f64>>, op: &DiscreteOperator) -> Vec<f64> {
    given.clone().unwrap_or_else(|| op.rule().test_grid())
}

fn grid_rows(s: &[f64], t: &[f64], v: &crate::linalg::CMatrix) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(s.len() * t.len());
    for (a, sa) in s.iter().enumerate() {
        for (b, tb) in t.iter().enumerate() {
            let z = v[(a, b)];
            rows.push(vec![sa.to_string(), tb.to_string(), z.re.to_string(), z.im.to_string()]);
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub kernel: String,
    pub points: usize,
    pub sup_abs: f64,
    pub carleman: Vec<CarlemanPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanPoint {
    pub s: f64,
    pub tau: f64,
    pub tau_prime: f64,
}

fn run_eval(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<EvalOutput> {
    let op = operator(cfg, spec, cfg.params.subkernel)?;
    let s = points(&cfg.params.s, &op);
    let t = points(&cfg.params.t, &op);
    let v = sample_kernel(op.source(), &s, &t)?;
    w.csv(".csv", |f| write_table(f, &["s", "t", "re", "im"], grid_rows(&s, &t, &v)))?;
    let carleman = s
        .iter()
        .map(|&x| {
            carleman_norms(op.source(), x).map(|c| CarlemanPoint {
                s: x,
                tau: c.tau,
                tau_prime: c.tau_prime,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalOutput {
        kernel: op.source().label(),
        points: s.len() * t.len(),
        sup_abs: max_abs(&v),
        carleman,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantOutput {
    pub lambda: Cx,
    pub determinant: Cx,
    pub abs_det: f64,
    pub log_abs_det: f64,
    pub error_estimate: f64,
    pub nodes: usize,
    pub characteristic_values: Option<crate::fredholm::CharacteristicValueSet>,
}

fn run_determinant(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<DeterminantOutput> {
    let op = operator(cfg, spec, cfg.params.subkernel)?;
    let data = determinant(&op, cfg.lambda())?;
    if let Some(scan) = cfg.params.lambda_scan {
        if scan.count < 2 {
            return Err(LabError::Config("lambda_scan.count must be at least 2".into()));
        }
        let pts: Vec<(f64, f64, f64)> = (0..scan.count)
            .map(|k| {
                let re = scan.re[0] + (scan.re[1] - scan.re[0]) * k as f64 / (scan.count - 1) as f64;
                let (d, l) = determinant_value(&op, Complex64::new(re, scan.im));
                (re, d.norm(), l)
            })
            .collect();
        w.csv("-scan.csv", |f| {
            write_table(
                f,
                &["lambda_re", "lambda_im", "abs_det", "log_abs_det"],
                pts.iter()
                    .map(|p| vec![p.0.to_string(), scan.im.to_string(), p.1.to_string(), p.2.to_string()]),
            )
        })?;
        let hash = w.hash.clone();
        w.svg(".svg", abs_det_plot(&pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), &hash))?;
    }
    let characteristic_values = match cfg.params.search_box {
        Some(b) => Some(characteristic_values(
            &op,
            SearchBox {
                re: (b.re[0], b.re[1]),
                im: (b.im[0], b.im[1]),
            },
            cfg.params.grid.map(|g| g[0]).unwrap_or(40),
            cfg.params.tolerance.unwrap_or(1e-8),
        )?),
        None => None,
    };
    Ok(DeterminantOutput {
        lambda: data.lambda.into(),
        determinant: data.determinant.into(),
        abs_det: data.determinant.norm(),
        log_abs_det: data.log_abs_det,
        error_estimate: data.error_estimate,
        nodes: data.nodes,
        characteristic_values,
    })
}

fn method(cfg: &RunConfig) -> ResolventMethod {
    match cfg.params.method.as_deref() {
        Some("neumann") => ResolventMethod::Neumann {
            terms: cfg.params.terms.unwrap_or(60),
        },
        Some("nystrom_direct") => ResolventMethod::NystromDirect,
        _ => ResolventMethod::FredholmRatio,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventOutput {
    pub lambda: Cx,
    pub method: ResolventMethod,
    pub determinant: Option<Cx>,
    pub radius: Option<f64>,
    pub converges: Option<bool>,
    pub sup_abs: f64,
    pub residuals: ResidualReport,
}

fn run_resolvent(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<ResolventOutput> {
    let op = operator(cfg, spec, cfg.params.subkernel)?;
    let eval = resolvent(&op, cfg.lambda(), method(cfg))?;
    let s = points(&cfg.params.s, &op);
    let t = points(&cfg.params.t, &op);
    let v = eval.eval_grid(&s, &t)?;
    w.csv(".csv", |f| write_table(f, &["s", "t", "re", "im"], grid_rows(&s, &t, &v)))?;
    let residuals = resolvent_residuals(&eval, &op, &op.rule().panel_midpoints())?;
    Ok(ResolventOutput {
        lambda: eval.lambda.into(),
        method: eval.method,
        determinant: eval.determinant.map(Cx::from),
        radius: eval.radius,
        converges: eval.converges,
        sup_abs: max_abs(&v),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    #[serde(flatten)]
    pub report: SolveReport,
    /// `max |f - f₀|` on the nodes for manufactured right sides.
    pub manufactured_error: Option<f64>,
    pub uniqueness_replay: f64,
}

fn run_solve(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<SolveOutput> {
    let op = operator(cfg, spec, cfg.params.subkernel)?;
    let lambda = cfg.lambda();
    let nodes = op.rule().nodes.clone();
    let mut f0 = None;
    let g = if let Some(p) = cfg.params.g {
        RightHandSide::Profile(p)
    } else if let Some(path) = &cfg.params.g_path {
        RightHandSide::from_csv(path)?
    } else {
        let prof = cfg.params.manufactured.unwrap();
        let f: Vec<Complex64> = nodes.iter().map(|&x| Complex64::new(prof.eval(x), 0.0)).collect();
        let tf = nystrom_apply(&op, &f)?;
        let g = f.iter().zip(&tf).map(|(a, b)| a - lambda * b).collect();
        f0 = Some(f);
        RightHandSide::Samples(g)
    };
    let report = solve_second_kind(&op, lambda, &g, cfg.params.route.unwrap_or(SolveRoute::DirectLinear))?;
    let replay = uniqueness_replay(&op, lambda, &g)?;
    w.csv(".csv", |file| {
        write_table(
            file,
            &["s", "re", "im"],
            nodes
                .iter()
                .zip(&report.f)
                .map(|(x, z)| vec![x.to_string(), z.re.to_string(), z.im.to_string()]),
        )
    })?;
    let manufactured_error = f0.map(|f0| {
        f0.iter()
            .zip(&report.f)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    });
    Ok(SolveOutput {
        report,
        manufactured_error,
        uniqueness_replay: replay,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConvergeOutput {
    Report(ConvergenceReport),
    Tail(crate::convergence::TailProducts),
    Compactness(crate::convergence::CompactnessRecord),
}

fn beta_sequence(cfg: &RunConfig, n_list: &[usize]) -> Vec<f64> {
    match (&cfg.params.beta, cfg.params.beta_power) {
        (Some(b), _) => b.clone(),
        (None, Some(p)) => n_list.iter().map(|&n| (n as f64).powf(-p)).collect(),
        (None, None) => vec![0.0; n_list.len()],
    }
}

fn run_converge(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<ConvergeOutput> {
    let n_list = cfg.params.n_list.clone().unwrap_or_default();
    let res = cfg.resolution();
    let tol = cfg.params.tolerance.unwrap_or(1e-5);
    let hash = w.hash.clone();
    match cfg.params.study.unwrap_or(Study::Resolvent) {
        study @ (Study::Resolvent | Study::Moebius) => {
            let report = if study == Study::Resolvent {
                resolvent_convergence_study(spec, &cfg.ladder, cfg.lambda(), &n_list, res, tol)?
            } else {
                let lambdas: Vec<Complex64> = match &cfg.params.lambdas {
                    Some(l) => l.iter().map(Cplx::value).collect(),
                    None => vec![cfg.lambda()],
                };
                moebius_uniform_study(spec, &cfg.ladder, &beta_sequence(cfg, &n_list), &lambdas, &n_list, res, tol)?
            };
            w.csv(".csv", |f| write_report_csv(&report, f))?;
            if !report.rows.is_empty() {
                w.svg(".svg", error_plot(&report, &hash))?;
            }
            Ok(ConvergeOutput::Report(report))
        }
        Study::Tail => {
            let tp = tail_product_norms(spec, &cfg.ladder, &n_list, cfg.params.tail_m.unwrap_or(1), res)?;
            w.csv(".csv", |f| {
                write_table(
                    f,
                    &["n", "one_sided", "two_sided", "norm_one_sided", "norm_two_sided"],
                    (0..tp.n_list.len()).map(|i| {
                        vec![
                            tp.n_list[i].to_string(),
                            tp.one_sided[i].to_string(),
                            tp.two_sided[i].to_string(),
                            tp.norms_one_sided[i].to_string(),
                            tp.norms_two_sided[i].to_string(),
                        ]
                    }),
                )
            })?;
            Ok(ConvergeOutput::Tail(tp))
        }
        Study::Compactness => {
            let beta = beta_sequence(cfg, &n_list);
            let l = cfg.lambda();
            let lambdas: Vec<Complex64> = beta.iter().map(|b| l / (Complex64::new(1.0, 0.0) - l * b)).collect();
            let probes: Vec<(f64, f64)> = cfg
                .params
                .probe_points
                .clone()
                .unwrap_or_else(|| vec![[0.0, 0.0]])
                .iter()
                .map(|p| (p[0], p[1]))
                .collect();
            let rec = compactness_diagnostics(spec, &cfg.ladder, &lambdas, &n_list, &probes, res)?;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            w.csv(".csv", |f| {
                write_table(
                    f,
                    &[
                        "n", "lambda_re", "lambda_im", "sup_t", "sup_tprime", "sup_kernel", "margin_4_3", "margin_4_6",
                        "excluded",
                    ],
                    rec.rows.iter().map(|r| {
                        vec![
                            r.n.to_string(),
                            r.lambda_n.re.to_string(),
                            r.lambda_n.im.to_string(),
                            opt(r.sup_t),
                            opt(r.sup_tprime),
                            opt(r.sup_kernel),
                            opt(r.margin_4_3),
                            opt(r.margin_4_6),
                            r.excluded.to_string(),
                        ]
                    }),
                )
            })?;
            Ok(ConvergeOutput::Compactness(rec))
        }
    }
}

fn run_region(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<crate::convergence::RegionProbe> {
    let b = cfg.params.search_box.unwrap();
    let grid = cfg.params.grid.unwrap_or([21, 11]);
    let probe = boundedness_region_probe(
        spec,
        &cfg.ladder,
        SearchBox {
            re: (b.re[0], b.re[1]),
            im: (b.im[0], b.im[1]),
        },
        (grid[0], grid[1]),
        cfg.params.probe_set.as_deref().unwrap(),
        cfg.params.threshold.unwrap_or(100.0),
        cfg.resolution(),
    )?;
    w.csv(".csv", |f| {
        write_table(
            f,
            &["lambda_re", "lambda_im", "max_norm", "bounded", "regular"],
            probe.points.iter().map(|p| {
                vec![
                    p.lambda.re.to_string(),
                    p.lambda.im.to_string(),
                    p.max_norm.map(|v| v.to_string()).unwrap_or_else(|| "inf".into()),
                    p.bounded.to_string(),
                    p.regular.to_string(),
                ]
            }),
        )
    })?;
    let hash = w.hash.clone();
    w.svg(".svg", region_plot(&probe, &hash))?;
    Ok(probe)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOutput {
    pub window: SpectralWindow,
    pub eigenvalues: Vec<f64>,
    pub warning: Option<String>,
    pub trace: Cx,
    pub hermitian_defect: f64,
    pub idempotency_defect: f64,
    pub study: Option<ConvergenceReport>,
    pub study_warnings: Vec<String>,
}

fn run_spectral(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<SpectralOutput> {
    let [a, b] = cfg.params.window.unwrap();
    let window = SpectralWindow::new(a, b)?;
    let op = operator(cfg, spec, None)?;
    let e = interval_projection(&op, window)?;
    let s = points(&cfg.params.s, &op);
    let t = points(&cfg.params.t, &op);
    w.csv(".csv", |f| e.write_csv(f, &s, &t))?;
    let rule = op.rule();
    let grid = rule.test_grid();
    let (study, study_warnings) = match &cfg.params.n_list {
        Some(n_list) => {
            let (rep, warn) = interval_convergence_study(
                spec,
                &cfg.ladder,
                window,
                n_list,
                cfg.resolution(),
                cfg.params.tolerance.unwrap_or(1e-6),
            )?;
            w.csv("-study.csv", |f| write_report_csv(&rep, f))?;
            let hash = w.hash.clone();
            if !rep.rows.is_empty() {
                w.svg(".svg", error_plot(&rep, &hash))?;
            }
            (Some(rep), warn)
        }
        None => (None, Vec::new()),
    };
    Ok(SpectralOutput {
        window,
        eigenvalues: e.eigenvalues.clone(),
        warning: e.warning.clone(),
        trace: e.trace(&rule.nodes, &rule.weights)?.into(),
        hermitian_defect: e.hermitian_defect(&grid)?,
        idempotency_defect: e.idempotency_defect(&grid, &rule.nodes, &rule.weights)?,
        study,
        study_warnings,
    })
}

fn run_classify(cfg: &RunConfig, spec: &KernelSpec, w: &mut Writer) -> Result<Classification> {
    let lambda = cfg.lambda();
    if lambda.im != 0.0 {
        return Err(LabError::Config("classify needs a real lambda".into()));
    }
    let mu = cfg
        .params
        .mu
        .clone()
        .unwrap_or_else(|| (1..=8).map(|n| 0.5f64.powi(n)).collect());
    let m_max = cfg.params.m_max.unwrap_or(mu.len() + 1);
    let c = classify_point(
        spec,
        &cfg.ladder,
        lambda.re,
        &mu,
        m_max,
        cfg.params.threshold.unwrap_or(CLASSIFY_THRESHOLD),
        cfg.resolution(),
    )?;
    w.csv(".csv", |f| {
        write_table(
            f,
            &["mu", "scaled_sup"],
            c.sequence.iter().map(|(m, v)| vec![m.to_string(), v.to_string()]),
        )
    })?;
    Ok(c)
}

/// Runs the configured command and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let spec = build_kernel(&cfg.kernel)?;
    let mut w = Writer::new(cfg)?;
    match cfg.command {
        Command::Eval => {
            let r = run_eval(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Determinant => {
            let r = run_determinant(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Resolvent => {
            let r = run_resolvent(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Solve => {
            let r = run_solve(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Converge => {
            let r = run_converge(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Region => {
            let r = run_region(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Spectral => {
            let r = run_spectral(cfg, &spec, &mut w)?;
            w.json(r)
        }
        Command::Classify => {
            let r = run_classify(cfg, &spec, &mut w)?;
            w.json(r)
        }
    }
}

/// Artifact name for a suffix under a config, e.g. `("converge", ".csv")`.
pub fn artifact_path(cfg: &RunConfig, suffix: &str) -> PathBuf {
    let stem = cfg.output.stem.clone().unwrap_or_else(|| cfg.command.as_str().to_string());
    cfg.output.dir.join(format!("{stem}{suffix}"))
}
