//! Learned visual saliency: per-pixel feature extraction, fixation ground
//! truth, sampling, five classifiers and their evaluation.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod pipeline;
pub mod sampling;
pub mod seed;
pub mod semantic;
pub mod sift;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
