//! Quasithermodynamic representation of the Pauli master equation.
//!
//! A finite-state Pauli master equation `dp/dt = G p` conserves total
//! probability `H = Σ p_i`. This crate rewrites its vector field as
//! `(n·P + K)·∇S` with a quadratic "entropy" `S(p) = ½ pᵀΣp` that never
//! decreases along trajectories, where `P = I − J/n` and `K` is
//! antisymmetric with `K·1 = 0`.
//!
//! Modules:
//! - [`model`]: rate matrices, generators and the other shared value types
//! - [`pme`]: stationary states, spectra and structural properties of the rates
//! - [`integrate`]: exact (spectral) and RK4 time evolution with monitors
//! - [`qt`]: the (Σ, K) decomposition for 2, 3 and N states
//! - [`monotonicity`]: monotonic vs. oscillatory relaxation of 3-state systems
//! - [`yd`]: the three-state Yerkes–Dodson learning model
//! - [`cli`]: the command-line front end

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod integrate;
mod linalg;
pub mod model;
pub mod monotonicity;
pub mod pme;
pub mod qt;
pub mod yd;

pub use error::{Error, Result};
pub use model::{
    Generator, Param, ProbabilityVector, QtDecomposition, QuadraticEntropy, RateMatrix,
    RelaxationClass, RelaxationKind, SpectralInfo, UvwCoordinates,
};
