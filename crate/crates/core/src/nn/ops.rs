//! Layer kernels: forward passes and the backward pieces the network
//! composes into full backpropagation.

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::tensor::{matmul, Mat, Scalar, Tensor};

/// Unrolls every `kh x kw` window of an `h x w x c` map into one row.
/// Row `p` is the window at output position `p`, laid out `(ky, kx, c)`,
/// matching the kernel layout.
pub(crate) fn im2col<T: Scalar>(
    input: &[T],
    (h, w, c): (usize, usize, usize),
    kh: usize,
    kw: usize,
) -> Vec<T> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let row_len = kh * kw * c;
    let run = kw * c;
    let mut cols = Vec::with_capacity(oh * ow * row_len);
    for oy in 0..oh {
        for ox in 0..ow {
            for ky in 0..kh {
                let src = ((oy + ky) * w + ox) * c;
                cols.extend_from_slice(&input[src..src + run]);
            }
        }
    }
    cols
}

/// Scatter-adds unrolled windows back onto an `h x w x c` map.
fn col2im<T: Scalar>(
    cols: &[T],
    (h, w, c): (usize, usize, usize),
    kh: usize,
    kw: usize,
) -> Vec<T> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let row_len = kh * kw * c;
    let run = kw * c;
    let mut out = vec![T::zero(); h * w * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * row_len..][..row_len];
            for ky in 0..kh {
                let dst = ((oy + ky) * w + ox) * c;
                for (o, &v) in out[dst..dst + run].iter_mut().zip(&row[ky * run..(ky + 1) * run]) {
                    *o = *o + v;
                }
            }
        }
    }
    out
}

fn conv_geometry<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    biases: &[T],
) -> Result<(LayerSpec, (usize, usize, usize))> {
    let dims = input.dims3()?;
    let spec = match *weights.shape() {
        [kernels, kernel_h, kernel_w, in_channels] => {
            LayerSpec::conv(kernels, kernel_h, kernel_w, in_channels)
        }
        _ => {
            return Err(Error::shape(format!(
                "conv weights must be kernels x height x width x channels, got {:?}",
                weights.shape()
            )))
        }
    };
    if biases.len() != spec.kernel_count() {
        return Err(Error::shape(format!(
            "{} biases for {} kernels",
            biases.len(),
            spec.kernel_count()
        )));
    }
    spec.output_shape(&[dims.0, dims.1, dims.2])?;
    Ok((spec, dims))
}

/// Valid cross-correlation of `input` (`h x w x c`) with `weights`
/// (`kernels x kh x kw x c`) plus per-kernel bias.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    biases: &[T],
) -> Result<Tensor<T>> {
    let (spec, dims) = conv_geometry(input, weights, biases)?;
    let (out, _) = conv_forward_unchecked(input.data(), dims, &spec, weights.data(), biases);
    let out_shape = spec.output_shape(&[dims.0, dims.1, dims.2])?;
    Tensor::new(out_shape, out)
}

/// Returns the output map and the unrolled input windows.
pub(crate) fn conv_forward_unchecked<T: Scalar>(
    input: &[T],
    dims: (usize, usize, usize),
    spec: &LayerSpec,
    weights: &[T],
    biases: &[T],
) -> (Vec<T>, Vec<T>) {
    let LayerSpec::Conv {
        kernels,
        kernel_h,
        kernel_w,
        ..
    } = *spec
    else {
        unreachable!("conv_forward_unchecked on a non-conv layer")
    };
    let positions = (dims.0 - kernel_h + 1) * (dims.1 - kernel_w + 1);
    let k = spec.kernel_len();
    let cols = im2col(input, dims, kernel_h, kernel_w);
    let mut out = Vec::with_capacity(positions * kernels);
    for _ in 0..positions {
        out.extend_from_slice(biases);
    }
    matmul(
        Mat::new(&cols, positions, k),
        Mat::new(weights, kernels, k).t(),
        &mut out,
        true,
    );
    (out, cols)
}

/// Gradients of a conv layer given the upstream gradient of its output
/// (`positions x kernels`). The input gradient is skipped when `need_input`
/// is false.
pub(crate) fn conv_backward<T: Scalar>(
    upstream: &[T],
    cols: &[T],
    dims: (usize, usize, usize),
    spec: &LayerSpec,
    weights: &[T],
    need_input: bool,
) -> (Vec<T>, Vec<T>, Option<Vec<T>>) {
    let LayerSpec::Conv {
        kernels,
        kernel_h,
        kernel_w,
        ..
    } = *spec
    else {
        unreachable!("conv_backward on a non-conv layer")
    };
    let k = spec.kernel_len();
    let positions = upstream.len() / kernels;

    let mut grad_b = vec![T::zero(); kernels];
    for row in upstream.chunks_exact(kernels) {
        for (g, &u) in grad_b.iter_mut().zip(row) {
            *g = *g + u;
        }
    }

    let mut grad_w = vec![T::zero(); kernels * k];
    matmul(
        Mat::new(upstream, positions, kernels).t(),
        Mat::new(cols, positions, k),
        &mut grad_w,
        false,
    );

    let grad_in = need_input.then(|| {
        let mut grad_cols = vec![T::zero(); positions * k];
        matmul(
            Mat::new(upstream, positions, kernels),
            Mat::new(weights, kernels, k),
            &mut grad_cols,
            false,
        );
        col2im(&grad_cols, dims, kernel_h, kernel_w)
    });
    (grad_w, grad_b, grad_in)
}

/// Per-channel max pooling. Windows must tile the input exactly.
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>, window: usize, stride: usize) -> Result<Tensor<T>> {
    let dims = input.dims3()?;
    let spec = LayerSpec::max_pool(window, stride);
    let out_shape = spec.output_shape(&[dims.0, dims.1, dims.2])?;
    let (out, _) = maxpool_unchecked(input.data(), dims, window, stride);
    Tensor::new(out_shape, out)
}

/// Returns pooled values and, for each, the flat input index it came from
/// (first maximum in scan order).
pub(crate) fn maxpool_unchecked<T: Scalar>(
    input: &[T],
    (h, w, c): (usize, usize, usize),
    window: usize,
    stride: usize,
) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let mut out = vec![T::zero(); oh * ow * c];
    let mut argmax = vec![0usize; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let o = (oy * ow + ox) * c;
            let (vals, idxs) = (&mut out[o..o + c], &mut argmax[o..o + c]);
            let first = (oy * stride * w + ox * stride) * c;
            vals.copy_from_slice(&input[first..first + c]);
            for (ch, idx) in idxs.iter_mut().enumerate() {
                *idx = first + ch;
            }
            for ky in 0..window {
                for kx in 0..window {
                    if ky == 0 && kx == 0 {
                        continue;
                    }
                    let base = ((oy * stride + ky) * w + ox * stride + kx) * c;
                    for (ch, (v, idx)) in vals.iter_mut().zip(idxs.iter_mut()).enumerate() {
                        let x = input[base + ch];
                        if x > *v {
                            *v = x;
                            *idx = base + ch;
                        }
                    }
                }
            }
        }
    }
    (out, argmax)
}

/// Dense layer: `out[j] = sum_i input[i] * weights[j][i] + biases[j]`,
/// with `weights` shaped `outputs x inputs`.
pub fn fc_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, biases: &[T]) -> Result<Vec<T>> {
    let (outputs, inputs) = match *weights.shape() {
        [o, i] => (o, i),
        _ => {
            return Err(Error::shape(format!(
                "fully connected weights must be outputs x inputs, got {:?}",
                weights.shape()
            )))
        }
    };
    if input.len() != inputs {
        return Err(Error::shape(format!(
            "fully connected layer expects {inputs} inputs, got {}",
            input.len()
        )));
    }
    if biases.len() != outputs {
        return Err(Error::shape(format!("{} biases for {outputs} outputs", biases.len())));
    }
    Ok(fc_unchecked(input.data(), weights.data(), biases))
}

pub(crate) fn fc_unchecked<T: Scalar>(input: &[T], weights: &[T], biases: &[T]) -> Vec<T> {
    weights
        .chunks_exact(input.len())
        .zip(biases)
        .map(|(row, &b)| dot(row, input) + b)
        .collect()
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn relu_in_place<T: Scalar>(values: &mut [T]) {
    for v in values {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax cross-entropy loss `-ln p[label]` and the probabilities.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let shifted: Vec<T> = logits.iter().map(|&z| z - max).collect();
    let log_total = shifted.iter().map(|&s| s.exp()).sum::<T>().ln();
    let probs = shifted.iter().map(|&s| (s - log_total).exp()).collect();
    Ok((log_total - shifted[label], probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    /// Direct nested-loop cross-correlation.
    fn naive_conv(input: &Tensor<f64>, weights: &Tensor<f64>, biases: &[f64]) -> Vec<f64> {
        let (h, w, c) = input.dims3().unwrap();
        let [n, kh, kw, _] = *weights.shape() else { panic!() };
        let mut out = vec![];
        for oy in 0..=h - kh {
            for ox in 0..=w - kw {
                for k in 0..n {
                    let mut acc = biases[k];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            for ch in 0..c {
                                acc += input.data()[((oy + ky) * w + ox + kx) * c + ch]
                                    * weights.data()[((k * kh + ky) * kw + kx) * c + ch];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_hand_example() {
        let input = t(&[2, 2, 1], &[1.0, 2.0, 3.0, 4.0]);
        let kernel = t(&[1, 2, 2, 1], &[1.0, -1.0, -1.0, 1.0]);
        let out = conv2d_forward(&input, &kernel, &[0.0]).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[0.0]);
    }

    #[test]
    fn conv_zero_kernel_gives_bias() {
        let input = Tensor::from_fn(&[7, 6, 3], |i| (i as f64).sin());
        let kernel = Tensor::zeros(&[2, 3, 2, 3]);
        let out = conv2d_forward(&input, &kernel, &[0.25, -1.5]).unwrap();
        assert_eq!(out.shape(), &[5, 5, 2]);
        for px in out.data().chunks(2) {
            assert_eq!(px, &[0.25, -1.5]);
        }
    }

    #[test]
    fn conv_matches_nested_loops() {
        let input = Tensor::from_fn(&[9, 8, 3], |i| ((i * 7919) % 13) as f64 - 6.0);
        let weights = Tensor::from_fn(&[4, 3, 2, 3], |i| ((i * 104729) % 11) as f64 / 5.0 - 1.0);
        let biases = [0.5, -0.5, 1.0, 0.0];
        let out = conv2d_forward(&input, &weights, &biases).unwrap();
        let expected = naive_conv(&input, &weights, &biases);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_canonical_shape_and_errors() {
        let input = Tensor::<f32>::zeros(&[50, 50, 1]);
        let weights = Tensor::zeros(&[50, 5, 5, 1]);
        let out = conv2d_forward(&input, &weights, &[0.0; 50]).unwrap();
        assert_eq!(out.shape(), &[46, 46, 50]);
        assert!(conv2d_forward(&input, &weights, &[0.0; 49]).is_err());
        let wrong_channels = Tensor::zeros(&[50, 5, 5, 2]);
        assert!(conv2d_forward(&input, &wrong_channels, &[0.0; 50]).is_err());
    }

    #[test]
    fn maxpool_shapes_and_values() {
        let input = Tensor::<f32>::zeros(&[46, 46, 50]);
        assert_eq!(maxpool_forward(&input, 2, 2).unwrap().shape(), &[23, 23, 50]);
        let input = Tensor::<f32>::filled(&[21, 21, 20], 3.5);
        let out = maxpool_forward(&input, 3, 3).unwrap();
        assert_eq!(out.shape(), &[7, 7, 20]);
        assert!(out.data().iter().all(|&v| v == 3.5));
        assert!(maxpool_forward(&Tensor::<f32>::zeros(&[5, 4, 1]), 2, 2).is_err());

        let input = t(&[2, 4, 2], &[1., 8., 2., 7., 3., 6., 4., 5., 5., 4., 6., 3., 7., 2., 8., 1.]);
        let out = maxpool_forward(&input, 2, 2).unwrap();
        assert_eq!(out.data(), &[6., 8., 8., 6.]);
    }

    #[test]
    fn fc_examples() {
        let x = t(&[3], &[1.0, -2.0, 3.0]);
        let eye = t(&[3, 3], &[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        assert_eq!(fc_forward(&x, &eye, &[0.0; 3]).unwrap(), vec![1.0, -2.0, 3.0]);
        let zero = Tensor::zeros(&[3]);
        assert_eq!(fc_forward(&zero, &eye, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(fc_forward(&t(&[2], &[1., 1.]), &eye, &[0.0; 3]).is_err());

        let pooled = Tensor::<f32>::zeros(&[7, 7, 20]);
        let w = Tensor::zeros(&[50, 980]);
        assert_eq!(fc_forward(&pooled, &w, &[0.0; 50]).unwrap().len(), 50);
    }

    #[test]
    fn softmax_cross_entropy_examples() {
        let (loss, p) = softmax_cross_entropy(&[0.7f64; 10], 4).unwrap();
        assert!(p.iter().all(|&q| (q - 0.1).abs() < 1e-12));
        assert!((loss - 10f64.ln()).abs() < 1e-12);

        let mut logits = vec![0.0f64; 10];
        logits[0] = 1000.0;
        let (loss, p) = softmax_cross_entropy(&logits, 0).unwrap();
        assert!(loss.abs() < 1e-12 && loss.is_finite());
        assert!(p.iter().all(|q| q.is_finite()));

        let (loss, p) = softmax_cross_entropy(&[1.0f64, 2.0, 3.0], 2).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        assert!((loss - -(3f64.exp() / z).ln()).abs() < 1e-12);
        assert!((p[0] - 1f64.exp() / z).abs() < 1e-12);

        assert!(softmax_cross_entropy(&[0.0f64; 10], 10).is_err());
    }
}
