//! Mini-batch training of the gesture network in float or binarized mode.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use std::path::Path;

use crate::binarize::model::{binarize_model, binarized_model_bytes, read_binarized_model, BinarizedModel, BINARY_MAGIC};
use crate::binarize::train::{binarized_training_step, GradientRule};
use crate::error::{Error, Result};
use crate::nn::init::xavier_init;
use crate::nn::io::{float_model_bytes, read_float_model, FLOAT_MAGIC};
use crate::nn::network::{Gradients, Network};
use crate::nn::sgd::Sgd;
use crate::tensor::Tensor;

/// A network input with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Tensor<f32>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Float,
    /// Binarize the weights at the start of every iteration and update a
    /// float shadow copy.
    Binarized,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float" => Ok(Mode::Float),
            "binarized" => Ok(Mode::Binarized),
            other => Err(Error::invalid(format!("unknown mode {other:?} (float | binarized)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Float => "float",
            Mode::Binarized => "binarized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f32,
    /// Learning-rate factor applied after every epoch.
    pub lr_decay: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
    pub gradient_rule: GradientRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            lr: 0.01,
            lr_decay: 1.0,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
            mode: Mode::Float,
            gradient_rule: GradientRule::StraightThrough,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "learning rate {} must be >= 0 and momentum {} in [0, 1)",
                self.lr, self.momentum
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid(format!("lr decay {} must be in (0, 1]", self.lr_decay)));
        }
        Ok(())
    }
}

/// Loss and accuracy over one batch or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchStats {
    pub samples: usize,
    pub loss_sum: f64,
    pub correct: usize,
}

impl BatchStats {
    fn empty() -> Self {
        BatchStats {
            samples: 0,
            loss_sum: 0.0,
            correct: 0,
        }
    }

    fn merge(&mut self, other: &BatchStats) {
        self.samples += other.samples;
        self.loss_sum += other.loss_sum;
        self.correct += other.correct;
    }

    pub fn mean_loss(&self) -> f64 {
        self.loss_sum / self.samples.max(1) as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.samples.max(1) as f64
    }
}

pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean loss gradient over a batch. Per-sample gradients may be computed in
/// parallel; they are summed in batch order so the result does not depend on
/// the thread count.
pub fn batch_gradients(net: &Network<f32>, batch: &[&Example]) -> Result<(BatchStats, Gradients<f32>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let per_sample: Vec<Result<(f32, bool, Gradients<f32>)>> = batch
        .par_iter()
        .map(|ex| {
            let cache = net.forward_cached(&ex.input)?;
            let correct = argmax(cache.output()) == ex.label;
            let (loss, grads) = net.backward(&cache, ex.label)?;
            Ok((loss, correct, grads))
        })
        .collect();
    let mut stats = BatchStats::empty();
    let mut total = Gradients::zeros_like(net);
    for item in per_sample {
        let (loss, correct, grads) = item?;
        stats.merge(&BatchStats {
            samples: 1,
            loss_sum: loss as f64,
            correct: correct as usize,
        });
        total.add_assign(&grads)?;
    }
    total.scale(1.0 / batch.len() as f32);
    Ok((stats, total))
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub seed: u64,
    pub mode: Mode,
    pub samples: usize,
    pub epochs: Vec<EpochLog>,
}

/// A trained classifier in either deployment form.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Float(Network<f32>),
    Binarized(BinarizedModel),
}

impl TrainedModel {
    pub fn forward(&self, input: &Tensor<f32>) -> Result<Vec<f32>> {
        match self {
            TrainedModel::Float(net) => net.forward(input),
            TrainedModel::Binarized(model) => model.forward(input),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            TrainedModel::Float(net) => float_model_bytes(net),
            TrainedModel::Binarized(model) => binarized_model_bytes(model),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a float or binarized model file, chosen by its magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        match bytes.get(..4) {
            Some(m) if m == FLOAT_MAGIC => Ok(TrainedModel::Float(read_float_model(&mut bytes.as_slice())?)),
            Some(m) if m == BINARY_MAGIC => Ok(TrainedModel::Binarized(read_binarized_model(&mut bytes.as_slice())?)),
            _ => Err(Error::format("model file", "unknown magic")),
        }
    }
}

/// Trains the canonical gesture network.
pub fn train(examples: &[&Example], config: &TrainConfig) -> Result<(TrainedModel, TrainLog)> {
    train_network(Network::canonical(), examples, config)
}

/// Xavier-initialises `net` from the config seed and trains it with SGD,
/// reshuffling every epoch. In binarized mode the returned model holds only
/// the binarized weights.
pub fn train_network(
    mut net: Network<f32>,
    examples: &[&Example],
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainLog)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    xavier_init(&mut net, &mut rng);
    let mut sgd = Sgd::new(config.lr, config.momentum);
    let mut working = net.clone();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = TrainLog {
        seed: config.seed,
        mode: config.mode,
        samples: examples.len(),
        epochs: Vec::with_capacity(config.epochs),
    };

    for epoch in 1..=config.epochs {
        sgd.lr = config.lr * config.lr_decay.powi(epoch as i32 - 1);
        order.shuffle(&mut rng);
        let mut stats = BatchStats::empty();
        let mut batch = Vec::with_capacity(config.batch_size);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i]));
            let batch_stats = match config.mode {
                Mode::Float => {
                    let (s, grads) = batch_gradients(&net, &batch)?;
                    sgd.step(&mut net, &grads)?;
                    s
                }
                Mode::Binarized => {
                    binarized_training_step(&mut working, &mut net, &mut sgd, &batch, config.gradient_rule)?
                }
            };
            if !batch_stats.loss_sum.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss in epoch {epoch}")));
            }
            stats.merge(&batch_stats);
        }
        let mut params_finite = net.params().iter().flatten().all(|p| p.weights.all_finite());
        params_finite &= net.params().iter().flatten().all(|p| p.biases.iter().all(|b| b.is_finite()));
        if !params_finite {
            return Err(Error::Divergence(format!("non-finite parameters after epoch {epoch}")));
        }
        debug!(
            "epoch {epoch}: loss {:.5} accuracy {:.4}",
            stats.mean_loss(),
            stats.accuracy()
        );
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: stats.mean_loss(),
            accuracy: stats.accuracy(),
        });
    }

    let model = match config.mode {
        Mode::Float => TrainedModel::Float(net),
        Mode::Binarized => TrainedModel::Binarized(binarize_model(&net)),
    };
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerSpec;

    fn small_net() -> Network<f32> {
        Network::new(vec![
            LayerSpec::conv(3, 3, 3, 1),
            LayerSpec::Relu,
            LayerSpec::max_pool(2, 2),
            LayerSpec::fully_connected(3 * 3 * 3, 2),
            LayerSpec::Softmax,
        ])
        .unwrap()
    }

    /// Vertical versus horizontal bars.
    fn bars() -> Vec<Example> {
        (0..20)
            .map(|i| {
                let label = i % 2;
                let offset = 1 + (i / 2) % 6;
                let input = Tensor::from_fn(&[8, 8, 1], |p| {
                    let (y, x) = (p / 8, p % 8);
                    let on = if label == 0 { x == offset } else { y == offset };
                    on as u8 as f32
                });
                Example { input, label }
            })
            .collect()
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = bars();
        let refs: Vec<&Example> = data.iter().collect();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_network(small_net(), &refs, &config).unwrap();
        let b = train_network(small_net(), &refs, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learns_separable_bars() {
        let data = bars();
        let refs: Vec<&Example> = data.iter().collect();
        for mode in [Mode::Float, Mode::Binarized] {
            let config = TrainConfig {
                epochs: 40,
                batch_size: 4,
                lr: 0.05,
                seed: 1,
                mode,
                ..TrainConfig::default()
            };
            let (model, log) = train_network(small_net(), &refs, &config).unwrap();
            assert!(log.epochs.last().unwrap().mean_loss < log.epochs[0].mean_loss);
            let correct = data
                .iter()
                .filter(|ex| argmax(&model.forward(&ex.input).unwrap()) == ex.label)
                .count();
            assert!(correct >= 18, "{mode}: {correct}/20");
            if mode == Mode::Binarized {
                assert!(matches!(model, TrainedModel::Binarized(_)));
            }
        }
    }

    #[test]
    fn zero_lr_binarized_keeps_shadow() {
        let data = bars();
        let refs: Vec<&Example> = data.iter().collect();
        let mut shadow = small_net();
        xavier_init(&mut shadow, &mut ChaCha8Rng::seed_from_u64(2));
        let before = shadow.clone();
        let mut working = small_net();
        let mut sgd = Sgd::new(0.0, 0.9);
        binarized_training_step(&mut working, &mut shadow, &mut sgd, &refs[..4], GradientRule::StraightThrough).unwrap();
        assert_eq!(shadow, before);
        assert_eq!(binarize_model(&shadow).materialize(), working);
    }

    #[test]
    fn model_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = small_net();
        xavier_init(&mut net, &mut ChaCha8Rng::seed_from_u64(4));
        for model in [TrainedModel::Float(net.clone()), TrainedModel::Binarized(binarize_model(&net))] {
            let path = dir.path().join("m");
            model.save(&path).unwrap();
            assert_eq!(TrainedModel::load(&path).unwrap(), model);
        }
        std::fs::write(dir.path().join("junk"), b"XXXX").unwrap();
        assert!(TrainedModel::load(dir.path().join("junk")).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let data = bars();
        let refs: Vec<&Example> = data.iter().collect();
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train_network(small_net(), &refs, &bad).is_err());
        assert!(train_network(small_net(), &[], &TrainConfig::default()).is_err());
    }
}
