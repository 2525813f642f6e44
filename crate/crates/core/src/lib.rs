//! Numerical laboratory for linear integral equations of the second kind
//!
//! ```text
//! f(s) - λ ∫ T(s,t) f(t) dt = g(s),   s ∈ ℝ,
//! ```
//!
//! with continuous bi-Carleman kernels vanishing at infinity. Resolvent
//! kernels are built from Fredholm determinants, Neumann series and direct
//! Nyström solves of truncated subkernels, and the convergence of the
//! subkernel resolvents to the resolvent of the full kernel is measured in
//! sup-norms.
//!
//! Module map:
//! - [`kernel`]: kernels, Carleman functions and norms, truncation ladders, subkernels.
//! - [`quadrature`]: composite Gauss–Legendre rules and Nyström discretizations.
//! - [`fredholm`]: determinants, minors, the determinant-ratio resolvent, characteristic values.
//! - [`resolvent`]: iterants, Neumann series, resolvent Carleman functions, identity residuals.
//! - [`solver`]: second-kind equation solves and solvability residuals.
//! - [`convergence`]: subkernel convergence studies and reports.
//! - [`spectral`]: spectral projections of Hermitian kernels.
//! - [`cli`]: config-driven batch runner, report writers and SVG plots.

pub mod cli;
pub mod convergence;
pub mod error;
pub mod fredholm;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod resolvent;
pub mod solver;
pub mod spectral;

pub use error::{LabError, Result};
pub use num_complex::Complex64;

pub use convergence::{ConvergenceReport, ConvergenceRow, RegionProbe};
pub use fredholm::{CharacteristicValueSet, FredholmData};
pub use kernel::{
    catalog_kernel, KernelSpec, Profile, SubkernelKind, SubkernelSpec, TruncationLadder,
};
pub use quadrature::{DiscreteOperator, QuadratureRule};
pub use resolvent::{ResolventEvaluation, ResolventMethod};
pub use solver::{SolveReport, SolveRoute};
pub use spectral::{SpectralProjectionKernel, SpectralWindow};
