//! Adapted θ-schemes.
//!
//! A θ-scheme approximates `∫ f` over one step by `[θ f(t_n) + (1-θ) f(t_{n+1})] h`.
//! The adapted variant picks θ separately for every subinterval from a forward
//! stencil of sampled values so that the leading truncation terms cancel,
//! raising the local error from `O(h³)` to `O(h^{q+2})`.
//!
//! The crate provides:
//!
//! - [`theta`]: exact Lagrange derivative stencils and the adapted θ decision.
//! - [`quad1d`]: the scheme applied to one-dimensional integrals.
//! - [`expectation`]: Gauss–Hermite conditional expectations of Brownian increments.
//! - [`grid`]: uniform space grids with local Lagrange interpolation.
//! - [`bsde`]: the backward solver for BSDEs with a z-independent generator.
//! - [`harness`]: reference problems, rate fitting, convergence studies and reports.

pub mod bsde;
pub mod error;
pub mod expectation;
pub mod grid;
pub mod harness;
pub mod quad1d;
pub mod theta;

pub use bsde::{
    solve_bsde, Bootstrap, BsdeProblem, BsdeSolver, ExactSolution, SchemeConfig, SchemeKind, SolutionField,
    SolveOutput,
};
pub use error::{Error, Result};
pub use expectation::{conditional_expectation, gauss_hermite, HermiteRule};
pub use grid::{interpolate, make_grid, GridFunction, SpaceGrid};
pub use harness::{
    builtin_problem, emit_report, fit_convergence_rate, run_convergence_study, ConvergenceReport,
    ReportFormat, SchemeSpec, StudySpec, StudyTarget,
};
pub use quad1d::{
    integrate_adapted, integrate_adapted_with, integrate_fixed_theta, reference_integrand, IntegralResult,
    PartitionSpec, TrailingPolicy,
};
pub use theta::{
    adapted_theta_exact, adapted_theta_sampled, lagrange_derivative_weights, theta_weights, StencilPoint,
    StencilWeights, ThetaDecision, ThetaLimits,
};
