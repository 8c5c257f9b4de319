use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mode::{argmax, Mode, N_MODES};
use crate::model::{ModeClassifier, ModelError};

/// Gini impurity `1 - sum p_k^2` of a class-count vector; 0 for an empty node.
pub fn gini(counts: &[u64; N_MODES]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 12, min_samples_leaf: 1 }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_samples_leaf == 0 {
            return Err(ModelError::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tree node. Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf { counts: [u64; N_MODES] },
    Split { feature: usize, threshold: f64, left: usize, right: usize, counts: [u64; N_MODES] },
}

/// CART classifier over raw feature rows. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub dim: usize,
    pub config: TreeConfig,
    pub nodes: Vec<Node>,
}

pub(crate) struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    cfg: TreeConfig,
    /// Candidate features per split; `None` means all of them.
    m_features: Option<usize>,
    nodes: Vec<Node>,
}

fn class_counts(labels: &[usize], idx: &[usize]) -> [u64; N_MODES] {
    let mut c = [0u64; N_MODES];
    idx.iter().for_each(|&i| c[labels[i]] += 1);
    c
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<'a> Builder<'a> {
    pub(crate) fn new(rows: &'a [Vec<f64>], labels: &'a [usize], cfg: TreeConfig, m_features: Option<usize>) -> Self {
        Builder { rows, labels, cfg, m_features, nodes: Vec::new() }
    }

    pub(crate) fn build(mut self, idx: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let dim = self.rows[0].len();
        self.grow(idx, 0, rng);
        DecisionTree { dim, config: self.cfg, nodes: self.nodes }
    }

    fn candidates(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let d = self.rows[0].len();
        match self.m_features {
            Some(m) if m < d => {
                let mut all: Vec<usize> = (0..d).collect();
                for i in 0..m {
                    let j = rng.random_range(i..d);
                    all.swap(i, j);
                }
                let mut picked = all[..m].to_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&self, idx: &[usize], features: &[usize], total: &[u64; N_MODES]) -> Option<BestSplit> {
        let min_leaf = self.cfg.min_samples_leaf;
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.rows[i][f], self.labels[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0u64; N_MODES];
            for k in 0..n - 1 {
                left[pairs[k].1] += 1;
                let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let mut right = *total;
                for c in 0..N_MODES {
                    right[c] -= left[c];
                }
                let score = n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature: f, threshold, score });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = class_counts(self.labels, &idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_samples_leaf {
            return id;
        }
        let features = self.candidates(rng);
        let Some(split) = self.best_split(&idx, &features, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right, counts };
        id
    }
}

pub(crate) fn check_rows(rows: &[Vec<f64>], labels: &[Mode]) -> Result<Vec<usize>, ModelError> {
    let first = rows.first().ok_or(ModelError::EmptyTrainingSet)?;
    if first.is_empty() {
        return Err(ModelError::DimensionMismatch { expected: 1, found: 0 });
    }
    if rows.len() != labels.len() {
        return Err(ModelError::InvalidConfig(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != first.len()) {
        return Err(ModelError::DimensionMismatch { expected: first.len(), found: r.len() });
    }
    Ok(labels.iter().map(|m| m.index()).collect())
}

/// Greedy CART on Gini impurity with midpoint thresholds.
pub fn train_tree(rows: &[Vec<f64>], labels: &[Mode], cfg: &TreeConfig) -> Result<DecisionTree, ModelError> {
    cfg.validate()?;
    let y = check_rows(rows, labels)?;
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    Ok(Builder::new(rows, &y, *cfg, None).build((0..rows.len()).collect(), &mut rng))
}

impl DecisionTree {
    /// Class counts of the leaf `x` is routed to.
    pub fn leaf_counts(&self, x: &[f64]) -> Result<[u64; N_MODES], ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return Ok(*counts),
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Mode, ModelError> {
        let c = self.leaf_counts(x)?;
        let c: Vec<f64> = c.iter().map(|&v| v as f64).collect();
        Ok(Mode::ALL[argmax(&c)])
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

impl ModeClassifier for DecisionTree {
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        let c = self.leaf_counts(x)?;
        let n: u64 = c.iter().sum();
        Ok(c.map(|v| v as f64 / n as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[2, 2, 0, 0]), 0.5);
        assert_eq!(gini(&[5, 0, 0, 0]), 0.0);
        assert!((gini(&[1, 1, 1, 1]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let t = train_tree(&rows, &[Mode::Bus; 3], &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[100.0]).unwrap(), Mode::Bus);
    }

    #[test]
    fn one_dimensional_split() {
        let rows = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let labels = [Mode::Car, Mode::Car, Mode::Metro, Mode::Metro];
        let t = train_tree(&rows, &labels, &TreeConfig::default()).unwrap();
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 1.0 && *threshold < 10.0);
                assert_eq!(*threshold, 5.5);
            }
            n => panic!("expected split, got {n:?}"),
        }
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(t.predict(r).unwrap(), *l);
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let labels = [Mode::Car, Mode::Walk, Mode::Car, Mode::Walk];
        let t = train_tree(&rows, &labels, &TreeConfig::default()).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict(&[1.0, 2.0]).unwrap(), Mode::Car);
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let labels: Vec<Mode> = (0..64).map(|i| Mode::ALL[i % 4]).collect();
        let t = train_tree(&rows, &labels, &TreeConfig { max_depth: 3, min_samples_leaf: 1 }).unwrap();
        assert!(t.depth() <= 3);
        let t = train_tree(&rows, &labels, &TreeConfig { max_depth: 30, min_samples_leaf: 5 }).unwrap();
        for n in &t.nodes {
            if let Node::Leaf { counts } = n {
                assert!(counts.iter().sum::<u64>() >= 5);
            }
        }
    }

    #[test]
    fn rejects_empty_and_zero_width() {
        assert_eq!(train_tree(&[], &[], &TreeConfig::default()).unwrap_err(), ModelError::EmptyTrainingSet);
        assert!(train_tree(&[vec![]], &[Mode::Car], &TreeConfig::default()).is_err());
    }

    fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Mode>)> {
        prop::collection::vec((prop::collection::vec(-100.0f64..100.0, 3), 0usize..4), 2..60)
            .prop_map(|v| v.into_iter().map(|(r, l)| (r, Mode::ALL[l])).unzip())
    }

    proptest! {
        #[test]
        fn every_sample_reaches_one_leaf((rows, labels) in dataset()) {
            let t = train_tree(&rows, &labels, &TreeConfig::default()).unwrap();
            let leaves: u64 = t.nodes.iter().map(|n| match n {
                Node::Leaf { counts } => counts.iter().sum(),
                _ => 0,
            }).sum();
            prop_assert_eq!(leaves as usize, rows.len());
        }

        #[test]
        fn monotone_transform_keeps_training_routes((rows, labels) in dataset()) {
            let t = train_tree(&rows, &labels, &TreeConfig::default()).unwrap();
            let warped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.powi(3) + 2.0 * v).collect()).collect();
            let tw = train_tree(&warped, &labels, &TreeConfig::default()).unwrap();
            for (r, w) in rows.iter().zip(&warped) {
                prop_assert_eq!(t.leaf_counts(r).unwrap(), tw.leaf_counts(w).unwrap());
            }
        }
    }
}
