//! Physics-regularized least squares over truncated Fourier Sobolev
//! classes, learned from dependent trajectory data.
//!
//! The crate is organised around the estimation pipeline:
//!
//! * [`fourier_space`]: the real trigonometric basis, coefficient fields,
//!   Sobolev norms and projections.
//! * [`pde_operator`]: linear differential operators, the physics
//!   regularizer and its Gram matrices.
//! * [`data_process`]: trajectory simulation, finite Markov chains and
//!   dependence diagnostics.
//! * [`estimator`]: the penalized least-squares fit, excess risk and the
//!   empirical martingale offset complexity.
//! * [`theory_bounds`]: closed-form rates, constants and burn-in times.
//! * [`harness`]: rate sweeps, slope fits, the unicycle experiment and
//!   report emission.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data_process;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod field;
pub mod fourier_space;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod pde_operator;
pub mod quadrature;
pub mod seeding;
pub mod theory_bounds;

pub use error::{Error, Result};
