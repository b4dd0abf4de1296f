// `!(x > 0.0)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod imm;
pub mod metrics;
pub mod observer;
pub mod observers;
pub mod sim;

pub use error::{Error, Result};
