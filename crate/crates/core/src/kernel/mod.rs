//! K⁰-kernels, their Carleman functions, truncation ladders and subkernels.

mod carleman;
mod ladder;
mod profile;
mod subkernel;
mod tabulated;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::gauss_legendre;

pub use carleman::{
    carleman_function_samples, carleman_norms, weighted_inner, CarlemanDirection, CarlemanNorms,
};
pub use ladder::TruncationLadder;
pub use profile::{hermite_functions, Profile};
pub use subkernel::{make_subkernel, SubkernelKind, SubkernelSpec};
pub use tabulated::TabulatedKernel;

/// Tolerance for the Hermitian grid check, relative to `1 + |T(s,t)|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for the orthonormality certificate of the Hermite basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Support and non-smooth points of a one-variable section of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Closed interval outside of which the section vanishes; may be infinite.
    pub support: (f64, f64),
    /// Interior points where the section has a kink or jump.
    pub breaks: Vec<f64>,
}

impl Section {
    pub fn whole_line() -> Self {
        Self {
            support: (f64::NEG_INFINITY, f64::INFINITY),
            breaks: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        Self {
            support: (0.0, 0.0),
            breaks: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.support.1 > self.support.0)
    }

    pub(crate) fn clip(mut self, lo: f64, hi: f64) -> Self {
        self.support = (self.support.0.max(lo), self.support.1.min(hi));
        self.breaks
            .retain(|&b| b > self.support.0 && b < self.support.1);
        self
    }
}

/// A pointwise-evaluable kernel on `ℝ × ℝ`.
///
/// Implementations are immutable, so evaluation may be shared freely
/// between threads.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn eval(&self, s: f64, t: f64) -> Result<Complex64>;

    /// Whether the kernel is (claimed and checked to be) Hermitian.
    fn is_hermitian(&self) -> bool;

    /// Section `t ↦ T(s, t)`.
    fn row_section(&self, s: f64) -> Section;

    /// Section `s ↦ T(s, t)`.
    fn column_section(&self, t: f64) -> Section;

    /// Extra quadrature panel boundaries inside `[-half_width, half_width]`.
    fn panel_breaks(&self, half_width: f64) -> Vec<f64> {
        let _ = half_width;
        Vec::new()
    }

    fn label(&self) -> String;
}

/// Catalog family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    Zero,
    Example1,
    Rank1,
    FiniteRankHermitian,
    GaussBump,
    Tabulated,
}

impl KernelId {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelId::Zero => "zero",
            KernelId::Example1 => "example1",
            KernelId::Rank1 => "rank1",
            KernelId::FiniteRankHermitian => "finite_rank_hermitian",
            KernelId::GaussBump => "gauss_bump",
            KernelId::Tabulated => "tabulated",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        Ok(match id {
            "zero" => KernelId::Zero,
            "example1" => KernelId::Example1,
            "rank1" => KernelId::Rank1,
            "finite_rank_hermitian" => KernelId::FiniteRankHermitian,
            "gauss_bump" => KernelId::GaussBump,
            "tabulated" => KernelId::Tabulated,
            other => return Err(LabError::UnknownKernel(other.to_string())),
        })
    }
}

#[derive(Debug, Clone)]
enum Family {
    Zero,
    Example1 { eps: f64, c_eps: f64 },
    Rank1 { a: Profile, b: Profile },
    FiniteRankHermitian { mu: Vec<f64> },
    GaussBump { sigma: f64 },
    Tabulated(Arc<TabulatedKernel>),
}

/// A catalog kernel or a tabulated grid, with a Hermitian flag.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    id: KernelId,
    params: BTreeMap<String, f64>,
    hermitian: bool,
    family: Family,
}

impl KernelSpec {
    pub fn zero() -> Self {
        Self {
            id: KernelId::Zero,
            params: BTreeMap::new(),
            hermitian: true,
            family: Family::Zero,
        }
    }

    /// The bi-Carleman kernel of Example 1:
    /// `e^{|s|-t}` for `t > |s| + ε`, `-c_ε(|s| - t)` for `|s| ≤ t ≤ |s| + ε`,
    /// zero otherwise, with `c_ε = e^{-ε}/ε`.
    pub fn example1(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(LabError::InvalidParams(format!("example1 needs eps > 0, got {eps}")));
        }
        Ok(Self {
            id: KernelId::Example1,
            params: BTreeMap::from([("eps".to_string(), eps)]),
            hermitian: false,
            family: Family::Example1 {
                eps,
                c_eps: (-eps).exp() / eps,
            },
        })
    }

    /// Separable kernel `a(s) b(t)`; Hermitian exactly when `a == b`.
    pub fn rank1(a: Profile, b: Profile) -> Result<Self> {
        a.validate().map_err(LabError::InvalidParams)?;
        b.validate().map_err(LabError::InvalidParams)?;
        let mut params = BTreeMap::new();
        for (prefix, p) in [("a", a), ("b", b)] {
            let (shape, c, w, amp) = match p {
                Profile::Gaussian { center, width, amp } => (0.0, center, width, amp),
                Profile::PolyBump {
                    center,
                    radius,
                    amp,
                } => (1.0, center, radius, amp),
            };
            params.insert(format!("{prefix}_shape"), shape);
            params.insert(format!("{prefix}_center"), c);
            params.insert(format!("{prefix}_width"), w);
            params.insert(format!("{prefix}_amp"), amp);
        }
        Ok(Self {
            id: KernelId::Rank1,
            params,
            hermitian: a == b,
            family: Family::Rank1 { a, b },
        })
    }

    /// `Σ_k μ_k φ_k(s) φ_k(t)` with `φ_k` the orthonormal Hermite functions.
    /// The basis is certified orthonormal on a reference rule before use.
    pub fn finite_rank_hermitian(mu: &[f64]) -> Result<Self> {
        if mu.is_empty() || mu.iter().any(|m| !m.is_finite()) {
            return Err(LabError::InvalidParams(
                "finite_rank_hermitian needs at least one finite mu".into(),
            ));
        }
        let deviation = hermite_gram_deviation(mu.len());
        if deviation > ORTHONORMAL_TOL {
            return Err(LabError::NonOrthonormal { deviation });
        }
        let params = mu
            .iter()
            .enumerate()
            .map(|(k, &m)| (format!("mu{}", k + 1), m))
            .collect();
        Ok(Self {
            id: KernelId::FiniteRankHermitian,
            params,
            hermitian: true,
            family: Family::FiniteRankHermitian { mu: mu.to_vec() },
        })
    }

    /// `exp(-(s² + t²)/σ²)`.
    pub fn gauss_bump(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(LabError::InvalidParams(format!("gauss_bump needs sigma > 0, got {sigma}")));
        }
        Ok(Self {
            id: KernelId::GaussBump,
            params: BTreeMap::from([("sigma".to_string(), sigma)]),
            hermitian: true,
            family: Family::GaussBump { sigma },
        })
    }

    /// Wraps a tabulated grid. A Hermitian claim is checked on the grid nodes.
    pub fn tabulated(table: TabulatedKernel, hermitian: bool) -> Result<Self> {
        let spec = Self {
            id: KernelId::Tabulated,
            params: BTreeMap::new(),
            hermitian,
            family: Family::Tabulated(Arc::new(table)),
        };
        if hermitian {
            let Family::Tabulated(tab) = &spec.family else {
                unreachable!()
            };
            let mut grid: Vec<f64> = tab.s_nodes().iter().chain(tab.t_nodes()).copied().collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let ((s0, s1), (t0, t1)) = tab.hull();
            let (lo, hi) = (s0.max(t0), s1.min(t1));
            grid.retain(|&x| x >= lo && x <= hi);
            if hermitian_defect(&spec, &grid)? > HERMITIAN_TOL {
                return Err(LabError::NonHermitian);
            }
        }
        Ok(spec)
    }

    pub fn id(&self) -> KernelId {
        self.id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Eigen-data `μ_k` for `finite_rank_hermitian`, `None` for other families.
    pub fn finite_rank_mu(&self) -> Option<&[f64]> {
        match &self.family {
            Family::FiniteRankHermitian { mu } => Some(mu),
            _ => None,
        }
    }

    /// Profiles `(a, b)` for `rank1`.
    pub fn rank1_profiles(&self) -> Option<(Profile, Profile)> {
        match &self.family {
            Family::Rank1 { a, b } => Some((*a, *b)),
            _ => None,
        }
    }

    /// `(ε, c_ε)` for `example1`.
    pub fn example1_eps(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Example1 { eps, c_eps } => Some((eps, c_eps)),
            _ => None,
        }
    }
}

impl Kernel for KernelSpec {
    fn eval(&self, s: f64, t: f64) -> Result<Complex64> {
        let v = match &self.family {
            Family::Zero => 0.0,
            Family::Example1 { eps, c_eps } => {
                let a = s.abs();
                if t > a + eps {
                    (a - t).exp()
                } else if t >= a {
                    -c_eps * (a - t)
                } else {
                    0.0
                }
            }
            Family::Rank1 { a, b } => a.eval(s) * b.eval(t),
            Family::FiniteRankHermitian { mu } => {
                let ps = hermite_functions(mu.len(), s);
                let pt = hermite_functions(mu.len(), t);
                mu.iter().zip(ps.iter().zip(&pt)).map(|(m, (x, y))| m * x * y).sum()
            }
            Family::GaussBump { sigma } => (-(s * s + t * t) / (sigma * sigma)).exp(),
            Family::Tabulated(tab) => return tab.eval(s, t),
        };
        Ok(Complex64::new(v, 0.0))
    }

    fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn row_section(&self, s: f64) -> Section {
        match &self.family {
            Family::Zero => Section::empty(),
            Family::Example1 { eps, .. } => Section {
                support: (s.abs(), f64::INFINITY),
                breaks: vec![s.abs() + eps],
            },
            Family::Rank1 { a, b } => {
                if a.eval(s) == 0.0 {
                    Section::empty()
                } else {
                    profile_section(b)
                }
            }
            Family::FiniteRankHermitian { .. } | Family::GaussBump { .. } => Section::whole_line(),
            Family::Tabulated(tab) => {
                let ((s0, s1), (t0, t1)) = tab.hull();
                if s < s0 || s > s1 {
                    Section::empty()
                } else {
                    Section {
                        support: (t0, t1),
                        breaks: tab.t_nodes()[1..tab.t_nodes().len() - 1].to_vec(),
                    }
                }
            }
        }
    }

    fn column_section(&self, t: f64) -> Section {
        match &self.family {
            Family::Zero => Section::empty(),
            Family::Example1 { eps, .. } => {
                if t <= 0.0 {
                    return Section::empty();
                }
                let mut breaks = vec![0.0];
                if t > *eps {
                    breaks.extend([-(t - eps), t - eps]);
                }
                breaks.sort_by(f64::total_cmp);
                Section {
                    support: (-t, t),
                    breaks,
                }
            }
            Family::Rank1 { a, b } => {
                if b.eval(t) == 0.0 {
                    Section::empty()
                } else {
                    profile_section(a)
                }
            }
            Family::FiniteRankHermitian { .. } | Family::GaussBump { .. } => Section::whole_line(),
            Family::Tabulated(tab) => {
                let ((s0, s1), (t0, t1)) = tab.hull();
                if t < t0 || t > t1 {
                    Section::empty()
                } else {
                    Section {
                        support: (s0, s1),
                        breaks: tab.s_nodes()[1..tab.s_nodes().len() - 1].to_vec(),
                    }
                }
            }
        }
    }

    fn panel_breaks(&self, half_width: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.family {
            Family::Example1 { eps, .. } => {
                let m = (half_width / eps).floor() as i64;
                for k in -m..=m {
                    let x = k as f64 * eps;
                    if x.abs() < half_width {
                        out.push(x);
                    }
                }
            }
            Family::Rank1 { a, b } => {
                for p in [a, b] {
                    if let Some((lo, hi)) = p.support() {
                        out.extend([lo, hi].into_iter().filter(|x| x.abs() < half_width));
                    }
                }
            }
            _ => {}
        }
        out
    }

    fn label(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.id.as_str(), params.join(", "))
    }
}

fn profile_section(p: &Profile) -> Section {
    match p.support() {
        Some(support) => Section {
            support,
            breaks: Vec::new(),
        },
        None => Section::whole_line(),
    }
}

/// Builds a catalog kernel from a flat parameter map.
///
/// | id | params |
/// |----|--------|
/// | `zero` | none |
/// | `example1` | `eps` |
/// | `gauss_bump` | `sigma` |
/// | `finite_rank_hermitian` | `mu1`, `mu2`, … (consecutive) |
/// | `rank1` | optional `{a,b}_{shape,center,width,amp}`; shape 0 = Gaussian, 1 = polynomial bump |
pub fn catalog_kernel(id: &str, params: &BTreeMap<String, f64>) -> Result<KernelSpec> {
    let id = KernelId::parse(id)?;
    let require = |key: &str| -> Result<f64> {
        params
            .get(key)
            .copied()
            .ok_or_else(|| LabError::InvalidParams(format!("{} requires `{key}`", id.as_str())))
    };
    let reject_unknown = |allowed: &dyn Fn(&str) -> bool| -> Result<()> {
        match params.keys().find(|k| !allowed(k)) {
            Some(k) => Err(LabError::InvalidParams(format!(
                "unknown parameter `{k}` for {}",
                id.as_str()
            ))),
            None => Ok(()),
        }
    };
    match id {
        KernelId::Zero => {
            reject_unknown(&|_| false)?;
            Ok(KernelSpec::zero())
        }
        KernelId::Example1 => {
            reject_unknown(&|k| k == "eps")?;
            KernelSpec::example1(require("eps")?)
        }
        KernelId::GaussBump => {
            reject_unknown(&|k| k == "sigma")?;
            KernelSpec::gauss_bump(require("sigma")?)
        }
        KernelId::FiniteRankHermitian => {
            let mut mu = Vec::new();
            while let Some(&m) = params.get(&format!("mu{}", mu.len() + 1)) {
                mu.push(m);
            }
            if mu.len() != params.len() {
                return Err(LabError::InvalidParams(
                    "finite_rank_hermitian takes consecutive keys mu1, mu2, …".into(),
                ));
            }
            KernelSpec::finite_rank_hermitian(&mu)
        }
        KernelId::Rank1 => {
            const FIELDS: [&str; 4] = ["shape", "center", "width", "amp"];
            reject_unknown(&|k| {
                k.split_once('_')
                    .is_some_and(|(p, f)| (p == "a" || p == "b") && FIELDS.contains(&f))
            })?;
            let profile = |prefix: &str| -> Result<Profile> {
                let get = |f: &str, d: f64| params.get(&format!("{prefix}_{f}")).copied().unwrap_or(d);
                let (center, width, amp) = (get("center", 0.0), get("width", 1.0), get("amp", 1.0));
                match get("shape", 0.0) {
                    s if s == 0.0 => Ok(Profile::Gaussian { center, width, amp }),
                    s if s == 1.0 => Ok(Profile::PolyBump {
                        center,
                        radius: width,
                        amp,
                    }),
                    s => Err(LabError::InvalidParams(format!("unknown {prefix}_shape {s}"))),
                }
            };
            KernelSpec::rank1(profile("a")?, profile("b")?)
        }
        KernelId::Tabulated => Err(LabError::InvalidParams(
            "tabulated kernels are loaded from CSV, not built from parameters".into(),
        )),
    }
}

/// `max |T(s,t) - conj T(t,s)| / (1 + |T(s,t)|)` over `grid × grid`.
pub fn hermitian_defect(kernel: &dyn Kernel, grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in grid {
        for &t in grid {
            let a = kernel.eval(s, t)?;
            let b = kernel.eval(t, s)?.conj();
            worst = worst.max((a - b).norm() / (1.0 + a.norm()));
        }
    }
    Ok(worst)
}

/// Max-entry deviation of the Hermite Gram matrix from the identity on a
/// composite Gauss–Legendre rule over `[-12, 12]`.
fn hermite_gram_deviation(k: usize) -> f64 {
    let (x, w) = gauss_legendre(12);
    let panels = 48;
    let h = 24.0 / panels as f64;
    let mut gram = vec![0.0; k * k];
    for p in 0..panels {
        let a = -12.0 + h * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let s = a + 0.5 * h * (xi + 1.0);
            let phi = hermite_functions(k, s);
            for i in 0..k {
                for j in 0..k {
                    gram[i * k + j] += 0.5 * h * wi * phi[i] * phi[j];
                }
            }
        }
    }
    let mut dev = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let id = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[i * k + j] - id).abs());
        }
    }
    dev
}
