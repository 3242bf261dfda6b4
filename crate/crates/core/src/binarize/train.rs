//! Training with binarized weights.
//!
//! A float "shadow" copy of every weight is kept for the duration of
//! training. Each iteration starts by binarizing the shadow into the working
//! network (`alpha * B` per kernel), runs forward and backward on those
//! binary weights, and applies the resulting gradients to the shadow.
//! Biases stay float throughout. Once training ends only the binarized
//! model is kept.

use crate::binarize::kernel::{binary_approximation, sign};
use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};
use crate::nn::sgd::Sgd;
use crate::train::{batch_gradients, BatchStats, Example};

/// How gradients with respect to the binarized weights reach the shadow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientRule {
    /// The gradient of `alpha * B` is applied to the shadow unchanged.
    #[default]
    StraightThrough,
    /// Chain rule through `alpha = mean|W|` and a clipped sign:
    /// `dW_j = B_j * (sum_i g_i B_i) / n + alpha * g_j * [|W_j| <= 1]`.
    ScaleAware,
}

impl std::str::FromStr for GradientRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight-through" => Ok(GradientRule::StraightThrough),
            "scale-aware" => Ok(GradientRule::ScaleAware),
            other => Err(Error::invalid(format!(
                "unknown gradient rule {other:?} (straight-through | scale-aware)"
            ))),
        }
    }
}

impl std::fmt::Display for GradientRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradientRule::StraightThrough => "straight-through",
            GradientRule::ScaleAware => "scale-aware",
        })
    }
}

/// Overwrites `net`'s weights with the binarized shadow weights and copies
/// the shadow biases.
pub fn load_binarized_weights(shadow: &Network<f32>, net: &mut Network<f32>) -> Result<()> {
    check_same_shape(shadow, net)?;
    let layers = shadow.layers().to_vec();
    for ((layer, src), dst) in layers.iter().zip(shadow.params()).zip(net.params_mut()) {
        let (Some(src), Some(dst)) = (src, dst.as_mut()) else { continue };
        let k = layer.kernel_len();
        for (w, out) in src.weights.data().chunks_exact(k).zip(dst.weights.data_mut().chunks_exact_mut(k)) {
            let l1: f64 = w.iter().map(|&v| (v as f64).abs()).sum();
            let scale = (l1 / k as f64) as f32;
            for (o, &v) in out.iter_mut().zip(w) {
                *o = if sign(v) > 0 { scale } else { -scale };
            }
        }
        dst.biases.copy_from_slice(&src.biases);
    }
    Ok(())
}

/// Maps gradients taken at the binarized weights to shadow gradients.
pub fn shadow_gradients(
    shadow: &Network<f32>,
    binarized_grads: &Gradients<f32>,
    rule: GradientRule,
) -> Result<Gradients<f32>> {
    let mut out = binarized_grads.clone();
    if rule == GradientRule::StraightThrough {
        return Ok(out);
    }
    if out.layers.len() != shadow.layers().len() {
        return Err(Error::shape("gradient layer count does not match the shadow network"));
    }
    for ((layer, p), g) in shadow.layers().iter().zip(shadow.params()).zip(out.layers.iter_mut()) {
        let (Some(p), Some(g)) = (p, g.as_mut()) else { continue };
        if g.weights.len() != p.weights.len() {
            return Err(Error::shape("gradient shapes do not match the shadow network"));
        }
        let k = layer.kernel_len();
        for (w, gk) in p.weights.data().chunks_exact(k).zip(g.weights.chunks_exact_mut(k)) {
            let (alpha, b) = binary_approximation(w)?;
            let projected: f32 = gk.iter().zip(&b).map(|(&gi, &bi)| gi * bi as f32).sum::<f32>() / k as f32;
            for ((gj, &wj), &bj) in gk.iter_mut().zip(w).zip(&b) {
                let pass = if wj.abs() <= 1.0 { alpha * *gj } else { 0.0 };
                *gj = bj as f32 * projected + pass;
            }
        }
    }
    Ok(out)
}

fn check_same_shape(a: &Network<f32>, b: &Network<f32>) -> Result<()> {
    let same = a.layers() == b.layers()
        && a.params().iter().zip(b.params()).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x.weights.shape() == y.weights.shape() && x.biases.len() == y.biases.len(),
            (None, None) => true,
            _ => false,
        });
    if same {
        Ok(())
    } else {
        Err(Error::shape("working network and float shadow have different shapes"))
    }
}

/// One iteration: binarize `shadow` into `net`, compute batch gradients on
/// `net`, and update `shadow` (weights and biases) with SGD.
pub fn binarized_training_step(
    net: &mut Network<f32>,
    shadow: &mut Network<f32>,
    sgd: &mut Sgd<f32>,
    batch: &[&Example],
    rule: GradientRule,
) -> Result<BatchStats> {
    load_binarized_weights(shadow, net)?;
    let (stats, grads) = batch_gradients(net, batch)?;
    let grads = shadow_gradients(shadow, &grads, rule)?;
    sgd.step(shadow, &grads)?;
    Ok(stats)
}
