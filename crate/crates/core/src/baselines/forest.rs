use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{check_rows, Builder, DecisionTree, TreeConfig};
use crate::mode::{Mode, N_MODES};
use crate::model::{ModeClassifier, ModelError};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Train each tree on a size-n sample drawn with replacement.
    pub bootstrap: bool,
    /// Candidate features per split for the random forest; `None` means
    /// `ceil(sqrt(d))`. Bagging always uses every feature.
    pub m_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, tree: TreeConfig::default(), bootstrap: true, m_features: None, seed: 0 }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.m_features == Some(0) {
            return Err(ModelError::InvalidConfig("m_features must be at least 1".into()));
        }
        self.tree.validate()
    }
}

/// Majority-vote tree ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    /// Features considered per split; `None` for all (bagging).
    pub m_features: Option<usize>,
    pub config: ForestConfig,
}

fn grow_forest(
    rows: &[Vec<f64>],
    labels: &[Mode],
    cfg: &ForestConfig,
    m_features: Option<usize>,
) -> Result<ForestModel, ModelError> {
    cfg.validate()?;
    let y = check_rows(rows, labels)?;
    let n = rows.len();
    let trees = par::map_range(cfg.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);
        let idx: Vec<usize> = if cfg.bootstrap {
            let mut s: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        Builder::new(rows, &y, cfg.tree, m_features).build(idx, &mut rng)
    });
    Ok(ForestModel { trees, m_features, config: *cfg })
}

/// Bootstrap-aggregated trees over the full feature set.
pub fn train_bagging(rows: &[Vec<f64>], labels: &[Mode], cfg: &ForestConfig) -> Result<ForestModel, ModelError> {
    grow_forest(rows, labels, cfg, None)
}

/// Bagging plus a random subset of candidate features at every split.
pub fn train_random_forest(rows: &[Vec<f64>], labels: &[Mode], cfg: &ForestConfig) -> Result<ForestModel, ModelError> {
    let d = rows.first().map_or(0, |r| r.len());
    let m = cfg.m_features.unwrap_or((d as f64).sqrt().ceil() as usize).max(1);
    grow_forest(rows, labels, cfg, Some(m))
}

/// Index of the most voted class; ties go to the lowest index.
pub(crate) fn majority(votes: &[usize; N_MODES]) -> usize {
    let mut best = 0;
    for c in 1..N_MODES {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best
}

impl ForestModel {
    pub fn votes(&self, x: &[f64]) -> Result<[usize; N_MODES], ModelError> {
        let mut v = [0usize; N_MODES];
        for t in &self.trees {
            v[t.predict(x)?.index()] += 1;
        }
        Ok(v)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Mode, ModelError> {
        Ok(Mode::ALL[majority(&self.votes(x)?)])
    }
}

impl ModeClassifier for ForestModel {
    /// Vote fractions.
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        let v = self.votes(x)?;
        Ok(v.map(|c| c as f64 / self.trees.len() as f64))
    }
}
