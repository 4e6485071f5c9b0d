//! Numerical checks for curvature estimates of submanifolds with
//! nonpositive extrinsic curvature.

pub mod error;
pub mod forms;
pub mod grassmann;
pub mod harness;
pub mod immersions;
pub mod principles;
pub mod spaces;
pub(crate) mod linalg;

pub use error::{Error, Result};
