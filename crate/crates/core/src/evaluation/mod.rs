//! Experiment orchestration, resampling and metrics.

pub mod bins;
pub mod experiment;
pub mod grid;
pub mod labelfile;
pub mod metrics;
pub mod resample;

pub use bins::{bin_by_noise, NoiseBin, NOISE_EDGES};
pub use experiment::{
    class_f1, run_sim_real, run_sim_sim, simulate_windows, BinReport, ClassifierFamily, ClassifierReport, DatasetReport,
    EvaluationReport, ExperimentConfig, ExperimentMode,
};
pub use grid::{grid_search, CvRow, GridResult};
pub use labelfile::{LabelEntry, LabelFile};
pub use metrics::{accuracy, ClassScore, ConfusionMatrix};
pub use resample::{effective_folds, rebalance, stratified_folds, stratified_split, RebalanceMode};
