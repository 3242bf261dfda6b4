//! Multiplication-free convolution with binarized kernels.
//!
//! Each weight is `+alpha` or `-alpha`, so a window response is
//! `alpha * (sum of inputs under +1 bits - sum under -1 bits) + bias`. The
//! inner accumulation only adds or subtracts inputs (the sign is applied by
//! flipping the float sign bit); `alpha` is applied once per window.

use crate::binarize::kernel::BinarizedKernel;
use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::ops::im2col;
use crate::tensor::Tensor;

const SIGN_BIT: u32 = 0x8000_0000;

/// Binarized kernels of one conv or FC layer plus its float biases.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedLayer {
    pub kernels: Vec<BinarizedKernel>,
    pub biases: Vec<f32>,
}

impl BinarizedLayer {
    pub(crate) fn check(&self, spec: &LayerSpec) -> Result<()> {
        if self.kernels.len() != spec.kernel_count() || self.biases.len() != spec.kernel_count() {
            return Err(Error::shape(format!(
                "{} kernels and {} biases for a layer with {} kernels",
                self.kernels.len(),
                self.biases.len(),
                spec.kernel_count()
            )));
        }
        if let Some(k) = self.kernels.iter().find(|k| k.len() != spec.kernel_len()) {
            return Err(Error::shape(format!(
                "kernel of {} weights in a layer expecting {}",
                k.len(),
                spec.kernel_len()
            )));
        }
        Ok(())
    }

    /// Per-kernel XOR masks: `0` keeps an input, the sign bit negates it.
    fn sign_masks(&self) -> Vec<Vec<u32>> {
        self.kernels
            .iter()
            .map(|k| {
                k.signs()
                    .into_iter()
                    .map(|b| if b > 0 { 0 } else { SIGN_BIT })
                    .collect()
            })
            .collect()
    }
}

#[inline]
fn signed_sum(window: &[f32], masks: &[u32]) -> f32 {
    window
        .iter()
        .zip(masks)
        .fold(0.0f32, |acc, (&x, &m)| acc + f32::from_bits(x.to_bits() ^ m))
}

/// Valid convolution of an `h x w x c` map with a binarized conv layer.
pub fn binarized_conv_forward(
    input: &Tensor<f32>,
    spec: &LayerSpec,
    layer: &BinarizedLayer,
) -> Result<Tensor<f32>> {
    let LayerSpec::Conv {
        kernel_h, kernel_w, ..
    } = *spec
    else {
        return Err(Error::invalid(format!("{spec:?} is not a conv layer")));
    };
    layer.check(spec)?;
    let dims = input.dims3()?;
    let out_shape = spec.output_shape(&[dims.0, dims.1, dims.2])?;
    let k = spec.kernel_len();
    let masks = layer.sign_masks();
    let cols = im2col(input.data(), dims, kernel_h, kernel_w);
    let mut out = Vec::with_capacity(out_shape.iter().product());
    for window in cols.chunks_exact(k) {
        for ((kernel, mask), &bias) in layer.kernels.iter().zip(&masks).zip(&layer.biases) {
            out.push(kernel.scale() * signed_sum(window, mask) + bias);
        }
    }
    Tensor::new(out_shape, out)
}

/// Fully connected layer with binarized neurons: each neuron is a kernel
/// spanning the whole input.
pub fn binarized_fc_forward(input: &[f32], spec: &LayerSpec, layer: &BinarizedLayer) -> Result<Vec<f32>> {
    let LayerSpec::FullyConnected { inputs, .. } = *spec else {
        return Err(Error::invalid(format!("{spec:?} is not a fully connected layer")));
    };
    layer.check(spec)?;
    if input.len() != inputs {
        return Err(Error::shape(format!(
            "fully connected layer expects {inputs} inputs, got {}",
            input.len()
        )));
    }
    Ok(layer
        .sign_masks()
        .iter()
        .zip(&layer.kernels)
        .zip(&layer.biases)
        .map(|((mask, kernel), &bias)| kernel.scale() * signed_sum(input, mask) + bias)
        .collect())
}
