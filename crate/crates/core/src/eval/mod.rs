//! Cross-validation, confusion matrices and demand-side summaries.

mod confusion;
mod cv;
mod demand;
mod folds;

pub use confusion::{percent, precision_recall, ConfusionMatrix, PrecisionRecall};
pub use cv::{cross_validate, grid_search, CellMetrics, CvConfig, CvReport, Learner, ModelSpec};
pub use demand::{
    distribution_report, histogram, mode_shares, read_reference, DemandSummary, DistributionReport, Metric,
    ModeHistogram, ReferenceBin, TripRecord,
};
pub use folds::{make_folds, FoldPlan};

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot split {n} samples into {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("seed {seed}, fold {fold}: {source}")]
    Cell { seed: u64, fold: usize, source: ModelError },
    #[error("no trips to summarise")]
    Empty,
    #[error("bin edges must be strictly increasing with at least two entries")]
    BadEdges,
    #[error("reference bin [{lo}, {hi}) for {mode} does not match the report edges")]
    ReferenceMismatch { mode: String, lo: f64, hi: f64 },
    #[error("{0}")]
    InvalidConfig(String),
    #[error("{file}, record {record}: {reason}")]
    Parse { file: String, record: usize, reason: String },
}
