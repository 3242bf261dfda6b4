//! Rotation voting, confusion matrices and cross-validation.

pub mod confusion;
pub mod cv;
pub mod vote;

pub use confusion::{summary_stats, ConfusionMatrix, SummaryStats};
pub use cv::{
    evaluate, prepare_dataset, prepare_views, run_cross_validation, run_cross_validation_with,
    CrossValidationReport, FoldReport, FoldResult, PreparedSample,
};
pub use vote::{vote_classify, vote_from_probabilities, Classifier, Vote};
