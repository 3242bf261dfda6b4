//! Dataset manifests, rotation augmentation, person-disjoint folds and the
//! synthetic gesture generator.

pub mod augment;
pub mod folds;
pub mod manifest;
pub mod synth;

pub use augment::{augment_rotations, augment_samples, rotate_mask, ROTATION_ANGLES};
pub use folds::{make_folds, FoldPlan, FOLD_COUNT};
pub use manifest::{load_manifest, write_manifest, Sample};
pub use synth::{synth_generate, HandPose, SynthConfig};
