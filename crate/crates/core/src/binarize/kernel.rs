//! Binary approximation of a single kernel: `W ~ alpha * B` with
//! `B` in {-1, +1}^n minimising `||W - alpha B||^2`.
//!
//! For fixed `B` the best scale is `(B . W) / n`; it is largest, and the
//! residual smallest, when every `b_i` agrees in sign with `w_i`. Hence
//! `B* = sign(W)` and `alpha* = mean(|W|)`.

use crate::binarize::pack::{pack_bits, unpack_bits};
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Sign with the convention `sign(0) = +1`.
#[inline]
pub fn sign<T: Scalar>(w: T) -> i8 {
    if w >= T::zero() {
        1
    } else {
        -1
    }
}

/// Optimal `(alpha, B)` for a kernel, computed at the kernel's precision.
pub fn binary_approximation<T: Scalar>(weights: &[T]) -> Result<(T, Vec<i8>)> {
    if weights.is_empty() {
        return Err(Error::invalid("cannot binarize an empty kernel"));
    }
    let l1 = weights.iter().fold(T::zero(), |acc, w| acc + w.abs());
    let n = T::from_usize(weights.len()).expect("kernel length fits the scalar type");
    Ok((l1 / n, weights.iter().map(|&w| sign(w)).collect()))
}

/// `J(B, alpha) = sum_i (w_i - alpha * b_i)^2`.
pub fn binarization_objective<T: Scalar>(weights: &[T], alpha: T, signs: &[i8]) -> Result<T> {
    if weights.len() != signs.len() {
        return Err(Error::shape(format!(
            "{} weights but {} signs",
            weights.len(),
            signs.len()
        )));
    }
    Ok(weights
        .iter()
        .zip(signs)
        .map(|(&w, &b)| {
            let r = w - alpha * T::from_i8(b).expect("sign converts");
            r * r
        })
        .fold(T::zero(), |acc, v| acc + v))
}

/// One kernel (conv filter or FC neuron) in deployment form.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedKernel {
    bits: Vec<u8>,
    scale: f32,
    len: usize,
}

impl BinarizedKernel {
    /// Validates packed bits against the weight count.
    pub fn new(bits: Vec<u8>, scale: f32, len: usize) -> Result<Self> {
        unpack_bits(&bits, len)?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid(format!("kernel scale {scale} must be finite and non-negative")));
        }
        Ok(BinarizedKernel { bits, scale, len })
    }

    /// Packed sign bits, MSB first, `1` meaning `+1`.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    /// Number of weights.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn signs(&self) -> Vec<i8> {
        unpack_bits(&self.bits, self.len).expect("validated on construction")
    }

    /// `alpha * B` as float weights.
    pub fn materialize(&self) -> Vec<f32> {
        self.signs()
            .into_iter()
            .map(|b| if b > 0 { self.scale } else { -self.scale })
            .collect()
    }
}

/// Binarizes one float kernel; the scale is accumulated in double
/// precision and rounded once.
pub fn binarize_kernel(weights: &[f32]) -> Result<BinarizedKernel> {
    if weights.is_empty() {
        return Err(Error::invalid("cannot binarize an empty kernel"));
    }
    let l1: f64 = weights.iter().map(|&w| (w as f64).abs()).sum();
    let scale = (l1 / weights.len() as f64) as f32;
    let signs: Vec<i8> = weights.iter().map(|&w| sign(w)).collect();
    Ok(BinarizedKernel {
        bits: pack_bits(&signs)?,
        scale,
        len: weights.len(),
    })
}
