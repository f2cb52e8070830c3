//! Micro-macro acceleration of stiff moment models for the 1D BGK equation.

// `!(x > 0.0)` rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod models;
pub mod schemes;

pub use error::{Error, Phase, Result};
