//! Numerical core for degenerate reaction-diffusion equations under
//! multiplicative (bilinear) control.
//!
//! The model problem lives on the interval (-1, 1):
//!
//! ```text
//! u_t - (a(x) u_x)_x = α(t,x) u + f(t,x,u)     in (0,T) × (-1,1)
//! a(x) u_x |_{x = ±1} = 0
//! u(0,x) = u0(x)
//! ```
//!
//! The diffusion coefficient `a` is positive inside the interval and vanishes
//! at both endpoints, so the flux boundary condition is the natural (weighted
//! Neumann) one. The control `α` multiplies the state; controls of interest
//! are piecewise static: finitely many time segments, each with a fixed
//! spatial profile.
//!
//! The crate provides:
//! - a uniform finite-volume discretization with `a` sampled at cell faces,
//!   which makes the degenerate boundary condition exact ([`grid`], [`operator`]);
//! - weighted norms and embedding diagnostics for the associated function
//!   spaces ([`spaces`]);
//! - a full symmetric-tridiagonal eigensolver, the Legendre reference
//!   spectrum for `a = 1 - x²`, and the ground-state potential construction
//!   ([`eigen`], [`operator::alpha_star`]);
//! - three time integrators: IMEX stepping, exact per-segment spectral
//!   evolution, and a fixed-point (mild solution) iteration ([`solver`]);
//! - verification of the stability, positivity and nonlinear-gap estimates
//!   the solver is expected to satisfy ([`solver::estimates`]);
//! - a constructive three-stage control synthesizer that steers a nonnegative
//!   initial state to within a requested L² distance of a nonnegative target
//!   ([`synthesis`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature to use it in that configuration. All types are immutable
//! after construction and safe to share across threads.

#![cfg_attr(not(feature = "std"), no_std)]
// Negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coeff;
pub mod control;
pub mod eigen;
mod error;
pub(crate) mod float;
pub mod grid;
pub mod nonlin;
pub mod operator;
pub mod problem;
pub mod quad;
pub mod solver;
pub mod spaces;
pub mod synthesis;

pub use coeff::DiffusionCoefficient;
pub use control::PiecewiseStaticControl;
pub use eigen::{EigenBasis, GroundStateReport};
pub use error::Error;
pub use grid::{Field, Grid};
pub use nonlin::Nonlinearity;
pub use operator::OperatorMatrix;
pub use problem::{AssumptionReport, Degeneracy, ProblemSpec};
pub use solver::estimates::{GapConstants, GapSample};
pub use solver::{SolverConfig, SolverMode, Trajectory};
pub use spaces::{NormBundle, TrajectoryNorms};
pub use synthesis::{SynthesisOptions, SynthesisPlan, TargetSpec};

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
