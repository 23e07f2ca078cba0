//! Transportation event detection for short messages.

// NaN must fail the `!(x > 0.0)` checks; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod corpus;
pub mod eval;
pub mod error;
pub mod features;
pub mod geocode;
pub mod hash;
pub mod linalg;
pub mod pipeline;
pub mod pool;
pub mod preprocess;
pub mod reduce;
pub mod synthetic;

pub use error::{Error, Result};
