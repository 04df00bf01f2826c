//! Failure prediction: stratified splits, ratio-controlled undersampling, the
//! two-cohort ensemble and threshold selection.

mod data;
mod ensemble;
mod metrics;
mod models;
mod rebalance;
pub mod tree;

pub use data::{stratified_counts, stratified_folds, stratified_split, LabeledDataset, SplitTag, DEFAULT_SPLIT};
pub use ensemble::{
    cross_validate, evaluate_classifier, geometric_mean, train_ensemble, train_ensemble_with_specs, CohortMember,
    EnsembleConfig, EnsembleModel, FoldResult, MemberReport, StabilityReport, TrainingReport, MODELS_PER_COHORT,
    MODEL_FORMAT, MODEL_VERSION,
};
pub use metrics::{
    coefficient_of_variation, f1_score, metrics_at, optimize_threshold, threshold_grid, threshold_score, Confusion,
    GridPoint, Metrics, ThresholdSearch, GRID_SIZE,
};
pub use models::{sigmoid, train_base, BaseClassifierConfig, BoostedTrees, Classifier, Family, Forest, LogisticModel};
pub use rebalance::{cohort_specs, majority_target, rebalance, Objective, RebalanceSpec};
