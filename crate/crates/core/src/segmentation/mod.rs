//! Hand segmentation from a depth frame: minimum-depth threshold, dilation,
//! hole filling, seed component selection and resize to the network input.

pub mod image;
pub mod morphology;
pub mod pnm;
pub mod resize;

pub use image::{BinaryMask, DepthMap};
pub use morphology::{
    component_count, dilate, dilate_square, fill_holes, label_components, largest_component_containing,
    threshold_depth, Connectivity, Thresholded,
};
pub use resize::{resize_mask, resize_mask_to, MASK_SIZE};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentationParams {
    /// Depth tolerance above the closest pixel.
    pub depth_alpha: u16,
    /// Side of the square dilation element; must be odd.
    pub dilation_side: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            depth_alpha: 3,
            dilation_side: 3,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.dilation_side % 2 == 0 {
            return Err(Error::invalid(format!(
                "dilation side {} must be odd",
                self.dilation_side
            )));
        }
        Ok(())
    }
}

/// Segmented hand at the source resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandRegion {
    pub mask: BinaryMask,
    pub min_depth: u16,
    pub seed: (usize, usize),
}

/// Every stage except the final resize.
pub fn segment_full_resolution(depth: &DepthMap, params: &SegmentationParams) -> Result<HandRegion> {
    params.validate()?;
    let t = threshold_depth(depth, params.depth_alpha)?;
    let grown = fill_holes(&dilate_square(&t.mask, params.dilation_side));
    let mask = largest_component_containing(&grown, t.seed)?;
    Ok(HandRegion {
        mask,
        min_depth: t.min_depth,
        seed: t.seed,
    })
}

/// Full pipeline: a 50x50 hand mask.
pub fn segment_hand(depth: &DepthMap, params: &SegmentationParams) -> Result<BinaryMask> {
    Ok(resize_mask(&segment_full_resolution(depth, params)?.mask))
}
