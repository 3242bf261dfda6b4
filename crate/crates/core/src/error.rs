use std::fmt;

use thiserror::Error;

/// Pipeline stage that rejected a depth frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentationStage {
    Threshold,
    Morphology,
    Component,
    Resize,
}

impl fmt::Display for SegmentationStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SegmentationStage::Threshold => "threshold",
            SegmentationStage::Morphology => "morphology",
            SegmentationStage::Component => "component selection",
            SegmentationStage::Resize => "resize",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called without a cached forward pass")]
    MissingForwardState,

    #[error("segmentation failed at {stage} stage: {reason}")]
    Segmentation {
        stage: SegmentationStage,
        reason: String,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("manifest row {row}: {reason}")]
    Manifest { row: usize, reason: String },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn segmentation(stage: SegmentationStage, reason: impl Into<String>) -> Self {
        Error::Segmentation {
            stage,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
