use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{augment_rotations, FoldPlan, Sample};
use crate::error::{Error, Result};
use crate::eval::confusion::{summary_stats, ConfusionMatrix, SummaryStats};
use crate::eval::vote::{vote_classify, Classifier};
use crate::nn::layer::NUM_CLASSES;
use crate::segmentation::pnm::load_depth;
use crate::segmentation::{resize_mask, segment_full_resolution, SegmentationParams};
use crate::tensor::Tensor;
use crate::train::{train, Example, TrainConfig, TrainLog, TrainedModel};

/// An original frame with its nine rotated, resized views.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub sample: Sample,
    /// In `ROTATION_ANGLES` order, labelled with the sample's gesture.
    pub views: Vec<Example>,
}

impl PreparedSample {
    pub fn inputs(&self) -> Vec<Tensor<f32>> {
        self.views.iter().map(|e| e.input.clone()).collect()
    }
}

/// Segments a frame, rotates the full-resolution mask and resizes each view.
pub fn prepare_views(depth: &crate::segmentation::DepthMap, params: &SegmentationParams) -> Result<Vec<Tensor<f32>>> {
    let region = segment_full_resolution(depth, params)?;
    Ok(augment_rotations(&region.mask)
        .iter()
        .map(|m| resize_mask(m).to_tensor())
        .collect())
}

/// Loads and prepares every original sample, in parallel. Errors name the
/// offending file.
pub fn prepare_dataset(samples: &[Sample], params: &SegmentationParams) -> Result<Vec<PreparedSample>> {
    samples
        .par_iter()
        .map(|s| {
            let with_path = |e: Error| match e {
                Error::Segmentation { stage, reason } => Error::Segmentation {
                    stage,
                    reason: format!("{}: {reason}", s.depth_path.display()),
                },
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("{}: {io}", s.depth_path.display()),
                )),
                other => other,
            };
            let depth = load_depth(&s.depth_path).map_err(with_path)?;
            let views = prepare_views(&depth, params).map_err(with_path)?;
            Ok(PreparedSample {
                sample: s.clone(),
                views: views
                    .into_iter()
                    .map(|input| Example {
                        input,
                        label: s.gesture,
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Votes on every prepared sample and tallies the results.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &[&PreparedSample]) -> Result<ConfusionMatrix> {
    let predictions = test
        .par_iter()
        .map(|p| {
            vote_classify(model, &p.inputs()).map(|v| v.class)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cm = ConfusionMatrix::new(NUM_CLASSES);
    for (p, class) in test.iter().zip(predictions) {
        cm.record(p.sample.gesture, class)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FoldResult {
    Ok {
        matrix: ConfusionMatrix,
        stats: Option<SummaryStats>,
        #[serde(skip_serializing_if = "Option::is_none")]
        train_log: Option<TrainLog>,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_persons: Vec<u32>,
    pub train_samples: usize,
    pub test_samples: usize,
    #[serde(flatten)]
    pub result: FoldResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidationReport {
    pub folds: Vec<FoldReport>,
    /// Sum of the successful folds.
    pub merged: ConfusionMatrix,
    pub stats: Option<SummaryStats>,
}

impl CrossValidationReport {
    pub fn failed_folds(&self) -> Vec<usize> {
        self.folds
            .iter()
            .filter(|f| matches!(f.result, FoldResult::Failed { .. }))
            .map(|f| f.fold)
            .collect()
    }
}

/// Cross-validation with a caller-supplied trainer. `train_fold` gets the
/// fold index and all rotated views of the training originals. A fold whose
/// training fails is reported as failed and left out of the merged matrix.
pub fn run_cross_validation_with<M, F>(
    data: &[PreparedSample],
    plan: &FoldPlan,
    train_fold: F,
) -> Result<CrossValidationReport>
where
    M: Classifier,
    F: Fn(usize, &[&Example]) -> Result<(M, Option<TrainLog>)> + Sync,
{
    let samples: Vec<Sample> = data.iter().map(|p| p.sample.clone()).collect();
    let folds = (0..plan.groups().len())
        .into_par_iter()
        .map(|fold| -> Result<FoldReport> {
            let (train_idx, test_idx) = plan.split(&samples, fold)?;
            let examples: Vec<&Example> = train_idx.iter().flat_map(|&i| &data[i].views).collect();
            let test: Vec<&PreparedSample> = test_idx.iter().map(|&i| &data[i]).collect();
            info!("fold {fold}: {} training views, {} test frames", examples.len(), test.len());
            let result = match train_fold(fold, &examples) {
                Ok((model, train_log)) => {
                    let matrix = evaluate(&model, &test)?;
                    FoldResult::Ok {
                        stats: summary_stats(&matrix).ok(),
                        matrix,
                        train_log,
                    }
                }
                Err(e @ (Error::Divergence(_) | Error::InvalidArgument(_))) => {
                    warn!("fold {fold} failed: {e}");
                    FoldResult::Failed { reason: e.to_string() }
                }
                Err(e) => return Err(e),
            };
            Ok(FoldReport {
                fold,
                test_persons: plan.groups()[fold].clone(),
                train_samples: examples.len(),
                test_samples: test.len(),
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut merged = ConfusionMatrix::new(NUM_CLASSES);
    for f in &folds {
        if let FoldResult::Ok { matrix, .. } = &f.result {
            merged.add(matrix)?;
        }
    }
    let stats = summary_stats(&merged).ok();
    Ok(CrossValidationReport { folds, merged, stats })
}

/// Trains the canonical network on each fold. Fold `k` uses seed
/// `config.seed + k`.
pub fn run_cross_validation(
    data: &[PreparedSample],
    plan: &FoldPlan,
    config: &TrainConfig,
) -> Result<CrossValidationReport> {
    run_cross_validation_with(data, plan, |fold, examples| -> Result<(TrainedModel, Option<TrainLog>)> {
        let fold_config = TrainConfig {
            seed: config.seed.wrapping_add(fold as u64),
            ..*config
        };
        let (model, log) = train(examples, &fold_config)?;
        Ok((model, Some(log)))
    })
}
