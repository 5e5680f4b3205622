//! Region-restricted scale spaces for segmentation: masked heat and Poisson
//! solvers, a brute-force oracle, the coarse-to-fine region gradient, a
//! multi-label descent and a motion data term.

// `!(x > 0.0)` is how parameter checks reject NaN along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod descent;
pub mod error;
pub mod fixtures;
pub mod gradient;
pub mod grid;
pub mod init;
pub mod io;
pub mod motion;
pub mod oracle;
pub mod solvers;
pub mod validation;

pub use error::{Error, Result};
