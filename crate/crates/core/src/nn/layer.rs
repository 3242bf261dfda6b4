use crate::error::{Error, Result};

/// One stage of a feed-forward network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    /// Valid (unpadded) cross-correlation with `kernels` filters of size
    /// `kernel_h x kernel_w x in_channels`.
    Conv {
        kernels: usize,
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Dense layer over the flattened input.
    FullyConnected {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Softmax,
}

impl LayerSpec {
    pub fn conv(kernels: usize, kernel_h: usize, kernel_w: usize, in_channels: usize) -> Self {
        LayerSpec::Conv {
            kernels,
            kernel_h,
            kernel_w,
            in_channels,
        }
    }

    pub fn max_pool(window: usize, stride: usize) -> Self {
        LayerSpec::MaxPool { window, stride }
    }

    pub fn fully_connected(inputs: usize, outputs: usize) -> Self {
        LayerSpec::FullyConnected { inputs, outputs }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. })
    }

    /// Shape of the weight tensor, if the layer has parameters. Each
    /// kernel (or FC neuron) occupies a contiguous run of the data.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                kernels,
                kernel_h,
                kernel_w,
                in_channels,
            } => Some(vec![kernels, kernel_h, kernel_w, in_channels]),
            LayerSpec::FullyConnected { inputs, outputs } => Some(vec![outputs, inputs]),
            _ => None,
        }
    }

    /// Number of kernels (conv filters or FC neurons).
    pub fn kernel_count(&self) -> usize {
        match *self {
            LayerSpec::Conv { kernels, .. } => kernels,
            LayerSpec::FullyConnected { outputs, .. } => outputs,
            _ => 0,
        }
    }

    /// Weights per kernel.
    pub fn kernel_len(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                kernel_h,
                kernel_w,
                in_channels,
                ..
            } => kernel_h * kernel_w * in_channels,
            LayerSpec::FullyConnected { inputs, .. } => inputs,
            _ => 0,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.kernel_count() * self.kernel_len()
    }

    /// Xavier fan-in and fan-out.
    pub fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv {
                kernels,
                kernel_h,
                kernel_w,
                in_channels,
            } => (
                kernel_h * kernel_w * in_channels,
                kernel_h * kernel_w * kernels,
            ),
            LayerSpec::FullyConnected { inputs, outputs } => (inputs, outputs),
            _ => (0, 0),
        }
    }

    /// Output shape for a given input shape, rejecting incompatible inputs.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                kernels,
                kernel_h,
                kernel_w,
                in_channels,
            } => {
                let (h, w, c) = spatial(input)?;
                if c != in_channels {
                    return Err(Error::shape(format!(
                        "conv expects {in_channels} input channels, got {c}"
                    )));
                }
                if h < kernel_h || w < kernel_w {
                    return Err(Error::shape(format!(
                        "conv kernel {kernel_h}x{kernel_w} larger than input {h}x{w}"
                    )));
                }
                Ok(vec![h - kernel_h + 1, w - kernel_w + 1, kernels])
            }
            LayerSpec::MaxPool { window, stride } => {
                let (h, w, c) = spatial(input)?;
                if window == 0 || stride == 0 {
                    return Err(Error::shape("pool window and stride must be positive"));
                }
                if h < window || w < window {
                    return Err(Error::shape(format!(
                        "pool window {window} larger than input {h}x{w}"
                    )));
                }
                if (h - window) % stride != 0 || (w - window) % stride != 0 {
                    return Err(Error::shape(format!(
                        "input {h}x{w} is not tiled by pool window {window} at stride {stride}"
                    )));
                }
                Ok(vec![(h - window) / stride + 1, (w - window) / stride + 1, c])
            }
            LayerSpec::FullyConnected { inputs, outputs } => {
                let len: usize = input.iter().product();
                if len != inputs {
                    return Err(Error::shape(format!(
                        "fully connected layer expects {inputs} inputs, got {len} ({input:?})"
                    )));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input.to_vec()),
        }
    }
}

fn spatial(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w, c] => Ok((h, w, c)),
        [h, w] => Ok((h, w, 1)),
        _ => Err(Error::shape(format!(
            "expected a height x width x channels feature map, got {shape:?}"
        ))),
    }
}

/// Input side length of the canonical gesture network.
pub const INPUT_SIZE: usize = 50;
/// Number of gesture classes.
pub const NUM_CLASSES: usize = 10;

/// Conv1, ReLU, Pool1, Conv2, ReLU, Pool2, FC1, ReLU, FC2, softmax.
pub fn canonical_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(50, 5, 5, 1),
        LayerSpec::Relu,
        LayerSpec::max_pool(2, 2),
        LayerSpec::conv(20, 3, 3, 50),
        LayerSpec::Relu,
        LayerSpec::max_pool(3, 3),
        LayerSpec::fully_connected(7 * 7 * 20, 50),
        LayerSpec::Relu,
        LayerSpec::fully_connected(50, NUM_CLASSES),
        LayerSpec::Softmax,
    ]
}
