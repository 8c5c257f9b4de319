//! Comparison classifiers: multinomial logit, CART and tree ensembles.
//!
//! All of them take raw feature rows and implement
//! [`ModeClassifier`](crate::model::ModeClassifier).

mod forest;
mod tree;

pub use forest::{train_bagging, train_random_forest, ForestConfig, ForestModel};
pub use tree::{gini, train_tree, DecisionTree, Node, TreeConfig};

use crate::model::{train, Architecture, ModelError, TrainConfig, WideDeepModel};
use crate::Mode;

/// Standalone multinomial logit: the wide component alone, trained by the
/// same code path as the joint model with the combination weight fixed at 1.
pub fn train_glm(rows: &[Vec<f64>], labels: &[Mode], cfg: &TrainConfig) -> Result<WideDeepModel, ModelError> {
    train(rows, labels, &glm_config(cfg))
}

/// `cfg` restricted to the wide part with its combination weight fixed at 1.
pub fn glm_config(cfg: &TrainConfig) -> TrainConfig {
    TrainConfig {
        architecture: Architecture::Wide,
        combine_weights: [1.0, 0.0],
        learn_combine_weights: false,
        ..cfg.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSelection;
    use crate::model::{softmax, wide_logits, ModeClassifier};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glm_separates_two_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        while rows.len() < 200 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if (x + y).abs() < 0.1 {
                continue;
            }
            rows.push(vec![x, y]);
            labels.push(if x + y > 0.0 { Mode::Metro } else { Mode::Bus });
        }
        let cfg = TrainConfig { learning_rate: Some(0.05), features: FeatureSelection::trajectory_only(), ..Default::default() };
        let m = train_glm(&rows, &labels, &cfg).unwrap();
        assert!(m.deep.is_none());
        assert_eq!(m.combine, [1.0, 0.0]);
        let hits = rows
            .iter()
            .zip(&labels)
            .filter(|(r, l)| crate::mode::argmax(&m.predict_proba(r).unwrap()) == l.index())
            .count();
        assert!(hits as f64 / rows.len() as f64 >= 0.99);
        let x = m.scaler.apply(&rows[0]).unwrap();
        let direct = softmax(&wide_logits(&x, m.wide.as_ref().unwrap()).unwrap());
        assert_eq!(direct, m.predict_proba(&rows[0]).unwrap());
    }

    #[test]
    fn glm_rejects_empty_features() {
        let rows = vec![vec![], vec![]];
        assert!(matches!(
            train_glm(&rows, &[Mode::Car, Mode::Walk], &TrainConfig::default()),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }
}
