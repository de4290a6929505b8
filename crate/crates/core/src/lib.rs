// `!(x > 0.0)` is used on purpose: it rejects NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod exact;
pub mod grid;
pub mod harness;
pub mod params;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use params::{derive_exponents, Exponents};
