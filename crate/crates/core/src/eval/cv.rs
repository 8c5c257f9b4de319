use std::time::Instant;

use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{make_folds, ConfusionMatrix, EvalError};
use crate::baselines::{train_bagging, train_glm, train_random_forest, train_tree, ForestConfig, TreeConfig};
use crate::mode::{argmax, Mode};
use crate::model::{cross_entropy, train, ModeClassifier, ModelError, SavedModel, TrainConfig};
use crate::par;

/// Anything that can be fitted on raw rows for one CV cell.
pub trait Learner: Sync {
    fn fit(&self, rows: &[Vec<f64>], labels: &[Mode], seed: u64) -> Result<Box<dyn ModeClassifier>, ModelError>;
}

/// Model family plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    WideDeep(TrainConfig),
    Glm(TrainConfig),
    Tree(TreeConfig),
    Bagging(ForestConfig),
    RandomForest(ForestConfig),
}

impl ModelSpec {
    /// Fits with `seed` replacing the configured seed.
    pub fn fit_saved(&self, rows: &[Vec<f64>], labels: &[Mode], seed: u64) -> Result<SavedModel, ModelError> {
        Ok(match self {
            ModelSpec::WideDeep(c) => SavedModel::WideDeep(train(rows, labels, &TrainConfig { seed, ..c.clone() })?),
            ModelSpec::Glm(c) => SavedModel::Glm(train_glm(rows, labels, &TrainConfig { seed, ..c.clone() })?),
            ModelSpec::Tree(c) => SavedModel::Tree(train_tree(rows, labels, c)?),
            ModelSpec::Bagging(c) => SavedModel::Forest(train_bagging(rows, labels, &ForestConfig { seed, ..*c })?),
            ModelSpec::RandomForest(c) => {
                SavedModel::Forest(train_random_forest(rows, labels, &ForestConfig { seed, ..*c })?)
            }
        })
    }

    pub fn configured_seed(&self) -> u64 {
        match self {
            ModelSpec::WideDeep(c) | ModelSpec::Glm(c) => c.seed,
            ModelSpec::Bagging(c) | ModelSpec::RandomForest(c) => c.seed,
            ModelSpec::Tree(_) => 0,
        }
    }
}

impl Learner for ModelSpec {
    fn fit(&self, rows: &[Vec<f64>], labels: &[Mode], seed: u64) -> Result<Box<dyn ModeClassifier>, ModelError> {
        Ok(Box::new(self.fit_saved(rows, labels, seed)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    /// Number of repetitions; repetition `r` uses seed `base_seed + r`.
    pub seeds: usize,
    pub base_seed: u64,
    /// Fraction of samples drawn (without replacement) per repetition.
    pub subsample: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, seeds: 10, base_seed: 0, subsample: 1.0 }
    }
}

/// Held-out metrics of one (seed, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub seed: u64,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub total_loss: f64,
    pub average_loss: f64,
    pub confusion: ConfusionMatrix,
    /// Wall-clock fit time; not deterministic, kept out of written outputs.
    #[serde(skip)]
    pub fit_seconds: f64,
}

/// Pooled results. `total_loss` sums the cross-entropy of every held-out
/// prediction over all seeds and folds; `average_loss` divides by their count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub cells: Vec<CellMetrics>,
    pub confusion: ConfusionMatrix,
    pub n_predictions: usize,
    pub accuracy: f64,
    pub total_loss: f64,
    pub average_loss: f64,
}

impl CvReport {
    pub fn max_fit_seconds(&self) -> f64 {
        self.cells.iter().map(|c| c.fit_seconds).fold(0.0, f64::max)
    }
}

fn cell_seed(seed: u64, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64 + 1);
    rng.next_u64()
}

fn run_cell(
    rows: &[Vec<f64>],
    labels: &[Mode],
    learner: &dyn Learner,
    subset: &[usize],
    assignments: &[usize],
    seed: u64,
    fold: usize,
) -> Result<CellMetrics, EvalError> {
    let cell_err = |source| EvalError::Cell { seed, fold, source };
    let (mut train_x, mut train_y, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (pos, &i) in subset.iter().enumerate() {
        if assignments[pos] == fold {
            test.push(i);
        } else {
            train_x.push(rows[i].clone());
            train_y.push(labels[i]);
        }
    }
    let started = Instant::now();
    let model = learner.fit(&train_x, &train_y, cell_seed(seed, fold)).map_err(cell_err)?;
    let fit_seconds = started.elapsed().as_secs_f64();
    let mut confusion = ConfusionMatrix::default();
    let mut total_loss = 0.0;
    for &i in &test {
        let p = model.predict_proba(&rows[i]).map_err(cell_err)?;
        total_loss += cross_entropy(&p, labels[i].index());
        confusion.record(labels[i], Mode::ALL[argmax(&p)]);
    }
    let correct = confusion.trace() as usize;
    Ok(CellMetrics {
        seed,
        fold,
        n_train: train_y.len(),
        n_test: test.len(),
        correct,
        accuracy: correct as f64 / test.len() as f64,
        total_loss,
        average_loss: total_loss / test.len() as f64,
        confusion,
        fit_seconds,
    })
}

/// k-fold cross-validation repeated over `cfg.seeds` seeds. Every (seed, fold)
/// cell fits a fresh model on the training folds (any scaling happens inside
/// the learner) and scores the held-out fold. Cells run in parallel; results
/// are reduced in (seed, fold) order.
pub fn cross_validate(
    rows: &[Vec<f64>],
    labels: &[Mode],
    learner: &dyn Learner,
    cfg: &CvConfig,
) -> Result<CvReport, EvalError> {
    if rows.len() != labels.len() {
        return Err(EvalError::InvalidConfig(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    if cfg.seeds == 0 {
        return Err(EvalError::InvalidConfig("seeds must be at least 1".into()));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(EvalError::InvalidConfig("subsample must lie in (0, 1]".into()));
    }
    let n = rows.len();
    let take = ((n as f64 * cfg.subsample).round() as usize).min(n);
    let mut plans = Vec::with_capacity(cfg.seeds);
    for r in 0..cfg.seeds {
        let seed = cfg.base_seed + r as u64;
        let subset: Vec<usize> = if take == n {
            (0..n).collect()
        } else {
            let mut s = sample(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), n, take).into_vec();
            s.sort_unstable();
            s
        };
        let plan = make_folds(subset.len(), cfg.folds, seed)?;
        plans.push((seed, subset, plan));
    }
    let cells = par::try_map_range(cfg.seeds * cfg.folds, |c| {
        let (seed, subset, plan) = &plans[c / cfg.folds];
        run_cell(rows, labels, learner, subset, &plan.assignments, *seed, c % cfg.folds)
    })?;
    let mut confusion = ConfusionMatrix::default();
    let mut total_loss = 0.0;
    for c in &cells {
        confusion.merge(&c.confusion);
        total_loss += c.total_loss;
    }
    let n_predictions = confusion.total() as usize;
    Ok(CvReport {
        accuracy: confusion.trace() as f64 / n_predictions as f64,
        average_loss: total_loss / n_predictions as f64,
        total_loss,
        n_predictions,
        confusion,
        cells,
    })
}

/// Cross-validates every candidate and returns the index of the most accurate
/// one (first on ties) with all reports.
pub fn grid_search(
    rows: &[Vec<f64>],
    labels: &[Mode],
    candidates: &[ModelSpec],
    cfg: &CvConfig,
) -> Result<(usize, Vec<CvReport>), EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::InvalidConfig("no grid-search candidates".into()));
    }
    let reports = candidates
        .iter()
        .map(|c| cross_validate(rows, labels, c, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.accuracy > reports[best].accuracy {
            best = i;
        }
    }
    Ok((best, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::N_MODES;
    use rand::Rng;

    /// Predicts the label encoded in the first feature.
    struct Oracle;
    struct OracleModel;
    impl ModeClassifier for OracleModel {
        fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
            let mut p = [0.0; N_MODES];
            p[x[0] as usize] = 1.0;
            Ok(p)
        }
    }
    impl Learner for Oracle {
        fn fit(&self, _: &[Vec<f64>], _: &[Mode], _: u64) -> Result<Box<dyn ModeClassifier>, ModelError> {
            Ok(Box::new(OracleModel))
        }
    }

    /// One-hot on a class drawn from the input's hash-like second feature.
    struct Coin;
    struct CoinModel;
    impl ModeClassifier for CoinModel {
        fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
            let mut p = [0.0; N_MODES];
            p[x[1] as usize] = 1.0;
            Ok(p)
        }
    }
    impl Learner for Coin {
        fn fit(&self, _: &[Vec<f64>], _: &[Mode], _: u64) -> Result<Box<dyn ModeClassifier>, ModelError> {
            Ok(Box::new(CoinModel))
        }
    }

    struct Failing;
    impl Learner for Failing {
        fn fit(&self, _: &[Vec<f64>], _: &[Mode], _: u64) -> Result<Box<dyn ModeClassifier>, ModelError> {
            Err(ModelError::TrainingFailed { epoch: 3 })
        }
    }

    fn balanced(n: usize) -> (Vec<Vec<f64>>, Vec<Mode>) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        (0..n)
            .map(|i| (vec![(i % 4) as f64, rng.random_range(0..4) as f64], Mode::ALL[i % 4]))
            .unzip()
    }

    #[test]
    fn perfect_classifier() {
        let (rows, labels) = balanced(100);
        let r = cross_validate(&rows, &labels, &Oracle, &CvConfig { seeds: 2, ..Default::default() }).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.total_loss, 0.0);
        assert_eq!(r.n_predictions, 200);
        assert_eq!(r.cells.len(), 20);
    }

    #[test]
    fn random_classifier_near_chance() {
        let (rows, labels) = balanced(2000);
        let r = cross_validate(&rows, &labels, &Coin, &CvConfig { seeds: 1, ..Default::default() }).unwrap();
        assert!((r.accuracy - 0.25).abs() <= 0.05, "{}", r.accuracy);
        assert_eq!(r.confusion.trace() as f64 / r.confusion.total() as f64, r.accuracy);
        for i in 0..4 {
            assert_eq!(r.confusion.row_sum(i), 500);
        }
    }

    #[test]
    fn errors_carry_cell() {
        let (rows, labels) = balanced(40);
        let err = cross_validate(&rows, &labels, &Failing, &CvConfig { seeds: 1, base_seed: 4, ..Default::default() })
            .unwrap_err();
        assert_eq!(err, EvalError::Cell { seed: 4, fold: 0, source: ModelError::TrainingFailed { epoch: 3 } });
    }

    #[test]
    fn subsample_fraction() {
        let (rows, labels) = balanced(200);
        let cfg = CvConfig { seeds: 3, subsample: 0.5, ..Default::default() };
        let r = cross_validate(&rows, &labels, &Oracle, &cfg).unwrap();
        assert_eq!(r.n_predictions, 300);
    }

    #[test]
    fn grid_search_picks_best() {
        let (rows, labels) = balanced(80);
        let tree = ModelSpec::Tree(TreeConfig { max_depth: 0, min_samples_leaf: 1 });
        let deep = ModelSpec::Tree(TreeConfig::default());
        let (best, reports) = grid_search(&rows, &labels, &[tree, deep], &CvConfig { seeds: 1, ..Default::default() }).unwrap();
        assert_eq!(best, 1);
        assert!(reports[1].accuracy > reports[0].accuracy);
    }

    #[test]
    fn model_spec_parses_from_toml() {
        let spec: ModelSpec = toml::from_str("kind = \"random_forest\"\nn_trees = 7").unwrap();
        assert_eq!(spec, ModelSpec::RandomForest(ForestConfig { n_trees: 7, ..Default::default() }));
        assert!(toml::from_str::<ModelSpec>("kind = \"tree\"\nmax_dpth = 3").is_err());
    }
}
