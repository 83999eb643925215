//! Mapping-distortion dataset construction and verification.
//!
//! The library builds "modified" image datasets whose stored labels contradict
//! visual appearance: each stored image looks like a randomly chosen *selected*
//! image but is nudged (by projected gradient descent within a small pixel
//! budget) until its deep features match a *target* image of the stored label.
//! The crate also provides everything needed to verify the construction at
//! desk scale: a small deterministic CNN family, SSIM invisibility metrics,
//! utility/transfer/leak evaluations, and a reproducible experiment pipeline.

pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod forge;
pub mod model;
pub mod par;
pub mod pipeline;

mod format;
mod nn;

pub use error::{Error, Result};
