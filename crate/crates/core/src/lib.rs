// Guards of the form `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birman_schwinger;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod potentials;
pub mod quad;
pub mod resonance;
pub mod roots;
pub mod special;
pub mod transverse;

pub use error::{Error, Result};
