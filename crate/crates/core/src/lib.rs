//! Modelling, simulation and decoding of two-trace touch sequence patterns.
//!
//! A passive attachment routes two conductive traces to two footprints on a
//! capacitive panel. The reference trace provides timing, the input trace
//! carries either a command code ([`aligned`]) or a shifted copy of the
//! reference from which direction and distance follow ([`phase`]).

// `!(a > b)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aligned;
pub mod codebook;
pub mod error;
pub mod export;
pub mod pattern;
pub mod phase;
pub mod rules;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
