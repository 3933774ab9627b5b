//! Amplitude estimation under unknown circuit noise with orthogonalized
//! nuisance parameters.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod ortho;
pub mod sampling;

pub use error::{Error, Result};
