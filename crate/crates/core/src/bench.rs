//! Float versus binarized convolution timing on the canonical layer shapes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::binarize::conv::{binarized_conv_forward, BinarizedLayer};
use crate::binarize::kernel::binarize_kernel;
use crate::binarize::model::{binarize_model, StorageReport};
use crate::error::{Error, Result};
use crate::nn::init::xavier_init;
use crate::nn::layer::LayerSpec;
use crate::nn::network::Network;
use crate::nn::ops::conv2d_forward;
use crate::tensor::Tensor;

/// Largest allowed difference between the two convolutions before timing.
pub const EQUIVALENCE_TOLERANCE: f32 = 1e-5;
pub const MIN_REPETITIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: MIN_REPETITIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerTiming {
    pub layer: String,
    pub input_shape: Vec<usize>,
    pub kernel_shape: Vec<usize>,
    /// Multiply-accumulates per forward pass.
    pub macs: usize,
    pub max_abs_diff: f32,
    pub float_median_us: f64,
    pub binarized_median_us: f64,
    pub float_macs_per_sec: f64,
    pub binarized_ops_per_sec: f64,
    /// Float time over binarized time.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub layers: Vec<LayerTiming>,
    pub storage: StorageReport,
    pub memory_ratio: f64,
}

fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort_unstable();
    samples[samples.len() / 2]
}

fn time_runs(reps: usize, mut f: impl FnMut() -> Result<Tensor<f32>>) -> Result<Duration> {
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        std::hint::black_box(f()?);
        samples.push(start.elapsed());
    }
    Ok(median(samples))
}

fn bench_layer(name: &str, spec: LayerSpec, input: Tensor<f32>, reps: usize, rng: &mut ChaCha8Rng) -> Result<LayerTiming> {
    let shape = spec.weight_shape().expect("conv layer has weights");
    let weights = Tensor::from_fn(&shape, |_| rng.gen_range(-0.1f32..0.1));
    let biases: Vec<f32> = (0..spec.kernel_count()).map(|_| rng.gen_range(-0.1f32..0.1)).collect();
    let kernels = weights
        .data()
        .chunks_exact(spec.kernel_len())
        .map(binarize_kernel)
        .collect::<Result<Vec<_>>>()?;
    let materialized = Tensor::new(shape.clone(), kernels.iter().flat_map(|k| k.materialize()).collect())?;
    let layer = BinarizedLayer {
        kernels,
        biases: biases.clone(),
    };

    let reference = conv2d_forward(&input, &materialized, &biases)?;
    let binarized = binarized_conv_forward(&input, &spec, &layer)?;
    let max_abs_diff = reference
        .data()
        .iter()
        .zip(binarized.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    if max_abs_diff > EQUIVALENCE_TOLERANCE {
        return Err(Error::invalid(format!(
            "{name}: binarized convolution differs from the float reference by {max_abs_diff}"
        )));
    }

    let float = time_runs(reps, || conv2d_forward(&input, &materialized, &biases))?;
    let binary = time_runs(reps, || binarized_conv_forward(&input, &spec, &layer))?;
    let macs = reference.len() * spec.kernel_len();
    let per_sec = |d: Duration| macs as f64 / d.as_secs_f64().max(1e-12);
    Ok(LayerTiming {
        layer: name.to_string(),
        input_shape: input.shape().to_vec(),
        kernel_shape: shape,
        macs,
        max_abs_diff,
        float_median_us: float.as_secs_f64() * 1e6,
        binarized_median_us: binary.as_secs_f64() * 1e6,
        float_macs_per_sec: per_sec(float),
        binarized_ops_per_sec: per_sec(binary),
        speedup: float.as_secs_f64() / binary.as_secs_f64().max(1e-12),
    })
}

/// Times both convolution paths on the Conv1 (50x50x1, 50 kernels 5x5) and
/// Conv2 (23x23x50, 20 kernels 3x3) shapes after checking they agree, and
/// reports the canonical model's weight storage.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.repetitions < MIN_REPETITIONS {
        return Err(Error::invalid(format!(
            "at least {MIN_REPETITIONS} repetitions are required, got {}",
            config.repetitions
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mask = Tensor::from_fn(&[50, 50, 1], |_| rng.gen_bool(0.3) as u8 as f32);
    let features = Tensor::from_fn(&[23, 23, 50], |_| rng.gen_range(0.0f32..1.0));
    let layers = vec![
        bench_layer("conv1", LayerSpec::conv(50, 5, 5, 1), mask, config.repetitions, &mut rng)?,
        bench_layer("conv2", LayerSpec::conv(20, 3, 3, 50), features, config.repetitions, &mut rng)?,
    ];
    let mut net = Network::<f32>::canonical();
    xavier_init(&mut net, &mut rng);
    let storage = binarize_model(&net).storage();
    Ok(BenchReport {
        repetitions: config.repetitions,
        layers,
        memory_ratio: storage.ratio(),
        storage,
    })
}
