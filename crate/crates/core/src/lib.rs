//! Vitali total variation trend filtering for d-dimensional tensors.

pub mod diff;
pub mod anova;
pub mod certify;
pub mod dictionary;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
