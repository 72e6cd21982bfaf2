//! Classical simulation and inference for measurement-based quantum phase
//! estimation.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fast;
pub mod infotheory;
pub mod kitaev;
pub mod phase;
pub mod resources;
pub mod sparse;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
