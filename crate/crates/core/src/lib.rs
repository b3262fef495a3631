#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fdist;
pub mod gauge;
pub mod hybrid;
pub mod inference;
pub mod linalg;
pub mod plot;
pub mod report;
pub mod validate;

pub use error::{Error, Result};
