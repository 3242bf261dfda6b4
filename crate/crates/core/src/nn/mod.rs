//! From-scratch CNN engine: layer kernels, backpropagation, SGD with
//! momentum, Xavier initialisation and the float model format.

pub mod init;
pub mod io;
pub mod layer;
pub mod network;
pub mod ops;
pub mod sgd;

pub use init::{xavier_bound, xavier_init};
pub use layer::{canonical_layers, LayerSpec, INPUT_SIZE, NUM_CLASSES};
pub use network::{ForwardCache, Gradients, LayerGradients, LayerParams, Network};
pub use ops::{conv2d_forward, fc_forward, maxpool_forward, softmax, softmax_cross_entropy};
pub use sgd::Sgd;
