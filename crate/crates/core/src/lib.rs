//! Regularisation paths of ridge regression, gradient descent/flow and
//! penalised conjugate gradients for the linear model, with exact error
//! decompositions and comparison bounds evaluated along the paths, plus a
//! Monte Carlo simulation harness.
//!
//! The crate is organised around an eigenbasis representation of the
//! penalised empirical covariance (`spectral`); the estimator families
//! (`estimators`, `cg`) and the loss/risk machinery (`risk`, `comparison`)
//! operate on coordinates in that basis. `experiments` provides seeded data
//! generation, the replicate harness and CSV serialisation.

// Guards of the form `!(x >= 0.0)` are used throughout to reject NaN along
// with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod comparison;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod ingest;
pub mod risk;
pub mod rng;
pub mod spectral;
pub mod util;
pub mod verify;

pub use data::{Dataset, ModelTruth};
pub use error::{Error, Result};
pub use spectral::{decompose, PenalisedSpectrum};
pub use util::Parallelism;
