#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod appearance;
pub mod codec;
pub mod domain;
pub mod error;
pub mod flow_score;
pub(crate) mod fsio;
pub mod fusion;
pub mod harness;
pub mod lang;
pub mod retrieval;
pub mod sim;

pub use error::{Error, Result};
pub use fsio::write_atomic;
