//! Constant conditional correlation (CCC) tests of the simplifying
//! assumption for D-vine copulas.

// NaN-aware comparisons like `!(x > 0.0)` are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivcop;
pub mod ccc;
pub mod cli;
pub mod dvine;
pub mod error;
pub mod harness;
pub mod hier;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
