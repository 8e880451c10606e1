#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod groundstate;
pub mod levy;
pub mod oracles;
pub mod potential;
pub mod sampler;
pub mod specfun;
pub mod stopping;

pub use error::{Error, Result};
