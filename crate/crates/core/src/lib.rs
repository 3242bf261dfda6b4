//! Hand gesture recognition from depth frames.
//!
//! The pipeline segments the hand from a depth map, classifies the 50x50
//! mask with a small CNN, and can deploy that CNN with binary weights (one
//! sign bit per weight plus a per-kernel scale).

pub mod bench;
pub mod binarize;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod segmentation;
pub mod tensor;
pub mod train;

pub use error::{Error, Result, SegmentationStage};
pub use tensor::{Scalar, Tensor};
