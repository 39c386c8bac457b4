//! Hyperspectral image denoising by unfolded half-quadratic splitting with
//! explicit Gaussian and sparse noise terms.
//!
//! The observation model is `Y = X + N + S` with Gaussian noise `N` and
//! sparse noise `S`. [`solver::run`] alternates closed-form updates of `X`,
//! `S` and `N` with a pluggable denoiser step, under per-iteration
//! parameters that are either supplied or produced by [`estimator`].

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cube;
pub mod degradation;
pub mod error;
pub mod estimator;
pub mod io;
pub mod layers;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod ulnsa;
pub mod weights;

pub use cube::{axpy_combine, HsiCube};
pub use error::{Error, Result};
pub use metrics::MetricReport;
