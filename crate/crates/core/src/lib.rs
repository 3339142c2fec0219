//! Spectral laboratory for products of independent rectangular random matrices.
//!
//! The crate samples chains `X(1)···X(m)` of independent entry matrices,
//! computes the squared-singular-value distribution of the normalized product,
//! solves the algebraic equation satisfied by the Stieltjes transform of the
//! limiting law, and measures how close the two are.
//!
//! Module map:
//!
//! * [`ensemble`]: dimension profiles, entry laws, sampling, truncation and
//!   the Lindeberg functional.
//! * [`hermitization`]: the normalized product `W`, its Hermitian block
//!   embedding and the eigen/singular-value routines.
//! * [`spectral`]: empirical distributions, Stieltjes transforms, Kolmogorov
//!   distance and the equation residual.
//! * [`limitlaw`]: the limiting law (polynomial, root finding, branch
//!   tracking, density and CDF, support edges).
//! * [`moments`]: exact limit moments.
//! * [`export`]: CSV writers.
//! * [`experiment`]: Monte Carlo orchestration used by the CLI.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod export;
pub mod hermitization;
pub mod limitlaw;
pub mod moments;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
