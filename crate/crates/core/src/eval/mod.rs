//! Corpus manifests, cross-validation folds, the classifier contract with a
//! kernel reference implementation, scoring, and the end-to-end experiment.

mod classifier;
mod experiment;
mod folds;
mod manifest;
mod metrics;

pub use classifier::{Classifier, KernelRidge, KernelRidgeModel};
pub use experiment::{
    evaluate_predictions, read_predictions_csv, run_experiment, run_experiment_with, sample_features,
    write_predictions_csv, ExperimentConfig, ExperimentReport, FoldAverage, FoldReport, Prediction, SampleFailure,
    SampleInfo, AGGREGATION_NOTE,
};
pub use folds::{make_folds, Fold, Protocol};
pub use manifest::{CorpusManifest, ManifestEntry};
pub use metrics::{score, ClassMetrics, Confusion, MetricsReport};
