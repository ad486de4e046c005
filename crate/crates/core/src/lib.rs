//! Monte Carlo unravelings of qubit master equations by diffusive stochastic
//! Schrödinger equations (SSEs).
//!
//! The crate covers
//!
//! * a qubit SSE whose ensemble average obeys the Pauli master equation with
//!   signed rates `c = (1, 1, -1)`, which is positive but not completely
//!   positive ([`sse::NonCpQubitModel`], [`master`]);
//! * the general diffusive SSE driven by an isometric noise matrix `u`
//!   ([`sse::GeneralDiffusiveModel`]);
//! * the algebra relating `u` to the complex symmetric correlation matrix `s`
//!   and its orthogonal redundancy ([`param`]);
//! * a command-line front end emitting reproducible CSV/JSON reports ([`cli`]).
//!
//! Ensemble averages are reduced by a fixed pairwise tree over trajectory
//! index and all noise is drawn from counter-based streams, so results are
//! bit-identical for any thread count. With the default `parallel` feature
//! trajectories run on rayon; without it everything runs sequentially.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod exec;
pub mod master;
pub mod param;
pub mod rng;
pub mod sse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
