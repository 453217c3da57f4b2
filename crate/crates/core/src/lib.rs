//! Fully discretized differential Riccati equations.
//!
//! The crate solves the matrix-valued DRE that arises from a P1 finite
//! element discretization of an LQR problem for the periodic heat equation
//! on the unit square, advanced in time by Lie splitting:
//!
//! ```text
//! P' = Â P + P Âᵀ + Q̂ − P Ŝ P,    P(0) = P₀
//! ```
//!
//! Operators on the finite element space are stored as *kernels*: a
//! symmetric matrix `P` acting on coefficient vectors through `c ↦ P·M·c`,
//! where `M` is the mass matrix.
//!
//! Modules:
//! - [`linalg`]: dense symmetric linear algebra (matrix exponential, Van Loan
//!   integrals, Cholesky, spectral norms, Lyapunov solves).
//! - [`fem`]: periodic mesh and Galerkin assembly of the problem data.
//! - [`solver`]: Lie splitting, the shifted (change of variables) scheme,
//!   regularized initial data and reference integrators.
//! - [`lab`]: nested-grid injection, the relative sup-in-time error and
//!   observed-order fits for convergence studies.
//! - [`exec`]: sequential / rayon execution switch.

// NaN-rejecting guards read `!(x > 0.0)` on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod fem;
pub mod lab;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fem::{build_mesh, build_problem, FieldKind, FieldSpec, GalerkinDre, PeriodicMesh};
pub use lab::{
    build_injection, err_tau_h, observed_order, operator_norm_l2, run_study, ConvergenceReport, Coupling,
    InjectionOperator, StudyConfig,
};
pub use linalg::{CholeskyFactor, DenseMatrix, SymmetricKernel};
pub use solver::{
    lie_step, nonlinear_flow, precompute_lie_step, regularized_initial, solve, solve_transformed, LieStepPrecomp,
    LieStepper, StructureStats, Trajectory,
};
