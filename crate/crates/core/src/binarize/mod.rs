//! Binary-weight approximation `W ~ alpha * B` per kernel, bit packing,
//! multiplication-free convolution, the `.hgb` deployment format, and
//! training with per-iteration binarization.

pub mod conv;
pub mod kernel;
pub mod model;
pub mod pack;
pub mod train;

pub use conv::{binarized_conv_forward, binarized_fc_forward, BinarizedLayer};
pub use kernel::{binarization_objective, binarize_kernel, binary_approximation, sign, BinarizedKernel};
pub use model::{
    binarize_model, binarized_model_bytes, load_binarized_model, read_binarized_model, save_binarized_model,
    write_binarized_model, BinarizedModel, StorageReport,
};
pub use pack::{pack_bits, unpack_bits};
pub use train::{binarized_training_step, load_binarized_weights, shadow_gradients, GradientRule};
