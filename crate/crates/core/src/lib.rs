// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccp;
pub mod cdo;
pub mod config;
pub mod elliptical;
pub mod error;
pub mod loss;
pub mod orchestrator;
pub mod output;
pub mod properties;
pub mod risk;
pub mod rng;
pub mod special;
pub mod stats;
pub mod supermodular;

pub use error::{Error, Result};
