//! Semi-supervised sparse representation classification.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod classifier;
pub mod commands;
pub mod dataio;
pub mod dictionaries;
pub mod error;
pub mod l1solver;
pub mod matrixcore;
pub mod rectifier;
pub mod ssgmm;

pub use error::{Error, Result};
