//! The jointly trained wide-and-deep mode classifier.
//!
//! Per class `y` the model produces
//!
//! ```text
//! logit_y = w_wide * (beta_y . x + b_y) + w_deep * deep_y(x)
//! ```
//!
//! where `deep_y` is the linear output projection of a RELU network, and the
//! class distribution is the softmax of the four logits. Both components and
//! the two combination weights are trained together on one cross-entropy
//! loss.

mod optim;
mod persist;
mod train;
mod wide_deep;

pub use optim::{Optimizer, OptimizerKind, OptimizerSettings};
pub use persist::{from_json, load_model, save_model, to_json, SavedModel, MODEL_FORMAT, MODEL_VERSION};
pub use train::{fit, train, Architecture, EpochStat, TrainConfig};
pub use wide_deep::{
    deep_forward, joint_predict, wide_logits, DeepCache, DeepParams, DenseLayer, Gradients, WideDeepModel,
    WideParams,
};

use crate::mode::N_MODES;

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite activation in layer {layer}")]
    NumericOverflow { layer: usize },
    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error("training diverged at epoch {epoch}")]
    TrainingFailed { epoch: usize },
    #[error("training data needs at least two classes, found {0}")]
    InsufficientClasses(usize),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("model file: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
}

/// Something that maps a feature vector to a class distribution in
/// [`Mode`](crate::Mode) order.
pub trait ModeClassifier: Send + Sync {
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError>;
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; N_MODES]) -> [f64; N_MODES] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_MODES];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// `-ln p[label]`, with `p` floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64; N_MODES], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Sum and mean of per-sample cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    pub total: f64,
    pub average: f64,
}

pub fn loss_summary(per_sample: &[f64]) -> LossSummary {
    let total: f64 = per_sample.iter().sum();
    let average = if per_sample.is_empty() { 0.0 } else { total / per_sample.len() as f64 };
    LossSummary { total, average }
}

/// Mean cross-entropy of a batch of predictions.
pub fn batch_loss(probs: &[[f64; N_MODES]], labels: &[usize]) -> f64 {
    let per: Vec<f64> = probs.iter().zip(labels).map(|(p, &y)| cross_entropy(p, y)).collect();
    loss_summary(&per).average
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prediction_loss() {
        let u = [0.25; 4];
        for y in 0..4 {
            assert!((cross_entropy(&u, y) - 1.3862943611198906).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0, 0.0], 1), 0.0);
    }

    #[test]
    fn zero_probability_is_floored() {
        assert!((cross_entropy(&[1.0, 0.0, 0.0, 0.0], 1) - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn total_and_average() {
        let s = loss_summary(&[0.2, 0.4]);
        assert!((s.total - 0.6).abs() < 1e-15);
        assert!((s.average - 0.3).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[1.0, 0.0, 0.0, 0.0]);
        // e / (e + 3), 1 / (e + 3)
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 3.0)).abs() < 1e-15);
        assert!((p[0] - 0.4754).abs() < 5e-5 && (p[1] - 0.1749).abs() < 5e-5);
        let q = softmax(&[1.0, 2.0, 3.0, 4.0]);
        for (a, b) in q.iter().zip([0.0321, 0.0871, 0.2369, 0.6439]) {
            assert!((a - b).abs() < 5e-5, "{a} {b}");
        }
        let big = softmax(&[1000.0, 0.0, -1000.0, 999.0]);
        assert!(big.iter().all(|v| v.is_finite()));
    }
}
