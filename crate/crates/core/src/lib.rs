//! Regularized Newton-type solvers for nonlinear ill-posed operator equations
//! `F(x) = y` in discrete L^p spaces.
//!
//! The crate implements a two-stage Gauss-Newton-Halley outer iteration and its
//! first-order Gauss-Newton (IRGNM) special case. Each step minimizes a convex
//! Tikhonov functional
//!
//! ```text
//! (1/r) ||K (x - x_k) + r_k||_r^r  +  (kappa/p) ||x - x_ref||_p^p
//! ```
//!
//! over a weighted discrete L^p space, for misfit and penalty exponents
//! `r, p` in `[1, 2]`. The first stage linearizes with `K = F'(x_k)`; the
//! second stage augments the derivative with a curried second-derivative
//! term and a fresh regularization weight, reusing all factorizations built
//! at `x_k`.
//!
//! Alongside the solver the crate ships:
//!
//! * [`elliptic`] — a coefficient-identification testbed for
//!   `-Δu + Υ(c) u = f` on the unit square with one banded Cholesky
//!   factorization per coefficient, shared by state, first- and
//!   second-derivative solves;
//! * [`rates`] — benchmark problems and δ-sweep studies that fit observed
//!   convergence rates against the predicted `O(δ^{1/p})`;
//! * [`certificates`] — executable numerical checks for the recursion and
//!   implication bounds underlying the convergence analysis;
//! * [`noise`] — seeded impulsive/Gaussian/uniform data perturbations;
//! * a batch CLI (`irgn-halley`) driving forward solves, inversions, rate
//!   studies, misfit-norm comparisons and certificate runs from a single
//!   config file.

pub mod banach;
pub mod certificates;
pub mod cli;
pub mod config;
pub mod elliptic;
pub mod iteration;
pub mod linop;
pub mod noise;
pub mod rates;
pub mod report;
pub mod subproblem;

pub use banach::{ExponentConfig, GridFunction, Regime, Space};
pub use linop::LinearMap;

/// Errors shared across modules; solver-specific failures live next to
/// their solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
