use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wide_deep::{DeepParams, Gradients, WideDeepModel, WideParams};
use super::{ModelError, Optimizer, OptimizerKind, OptimizerSettings};
use crate::features::{FeatureScaler, FeatureSelection};
use crate::mode::{Mode, N_MODES};

/// Which components the model has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    WideDeep,
    /// Multinomial logit only.
    Wide,
    /// RELU network only.
    Deep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub optimizer: OptimizerKind,
    /// `None` picks the optimizer's default (0.01 AdaGrad/RMSProp, 0.001 Adam).
    pub learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub rmsprop_decay: f64,
    pub adam_betas: (f64, f64),
    pub epsilon: f64,
    pub hidden_widths: Vec<usize>,
    /// Initial `[w_wide, w_deep]`.
    pub combine_weights: [f64; 2],
    pub learn_combine_weights: bool,
    /// Per-class weights of the cross-entropy objective, in mode order.
    pub class_weights: Option<[f64; N_MODES]>,
    pub features: FeatureSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::WideDeep,
            optimizer: OptimizerKind::RmsProp,
            learning_rate: None,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            rmsprop_decay: 0.9,
            adam_betas: (0.9, 0.999),
            epsilon: 1e-8,
            hidden_widths: vec![400, 100, 50],
            combine_weights: [1.0, 1.0],
            learn_combine_weights: true,
            class_weights: None,
            features: FeatureSelection::default(),
        }
    }
}

impl TrainConfig {
    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            kind: self.optimizer,
            learning_rate: self.learning_rate.unwrap_or(self.optimizer.default_learning_rate()),
            rho: self.rmsprop_decay,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        let lr = self.optimizer_settings().learning_rate;
        if !(lr.is_finite() && lr > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay)
            || !(0.0..1.0).contains(&self.adam_betas.0)
            || !(0.0..1.0).contains(&self.adam_betas.1)
        {
            return bad("decay rates must lie in [0, 1)");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be non-negative");
        }
        if self.architecture != Architecture::Wide && self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("class weights must be finite and non-negative");
            }
        }
        Ok(())
    }
}

/// Mean training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
}

fn uniform_fill(rng: &mut ChaCha8Rng, buf: &mut [f64], limit: f64) {
    for v in buf {
        *v = rng.random_range(-limit..limit);
    }
}

/// Zero wide weights and biases; He-uniform hidden layers; Glorot-uniform
/// output projection.
fn initialize(dim: usize, cfg: &TrainConfig, scaler: FeatureScaler, rng: &mut ChaCha8Rng) -> WideDeepModel {
    let wide = matches!(cfg.architecture, Architecture::WideDeep | Architecture::Wide).then(|| WideParams::zeros(dim));
    let deep = matches!(cfg.architecture, Architecture::WideDeep | Architecture::Deep).then(|| {
        let mut deep = DeepParams::zeros(dim, &cfg.hidden_widths);
        let n = deep.layers.len();
        for (i, layer) in deep.layers.iter_mut().enumerate() {
            let limit = if i + 1 < n {
                (6.0 / layer.inputs as f64).sqrt()
            } else {
                (6.0 / (layer.inputs + layer.outputs) as f64).sqrt()
            };
            uniform_fill(rng, &mut layer.weights, limit);
        }
        deep
    });
    let combine = match cfg.architecture {
        Architecture::WideDeep => cfg.combine_weights,
        Architecture::Wide => [cfg.combine_weights[0], 0.0],
        Architecture::Deep => [0.0, cfg.combine_weights[1]],
    };
    WideDeepModel {
        wide,
        deep,
        combine,
        scaler,
        features: cfg.features.clone(),
        class_order: Mode::ALL,
        metadata: serde_json::json!({ "train_config": cfg, "seed": cfg.seed }),
    }
}

/// Trains on raw (unscaled) feature rows; returns the model and the per-epoch
/// mean training loss.
///
/// The scaler is fitted on `rows`. Initialization and shuffling are driven
/// by `cfg.seed`, so the result is a pure function of the inputs.
pub fn fit(rows: &[Vec<f64>], labels: &[Mode], cfg: &TrainConfig) -> Result<(WideDeepModel, Vec<EpochStat>), ModelError> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(ModelError::InvalidConfig(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let mut present = [false; N_MODES];
    labels.iter().for_each(|m| present[m.index()] = true);
    let n_classes = present.iter().filter(|&&p| p).count();
    if n_classes < 2 {
        return Err(ModelError::InsufficientClasses(n_classes));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(ModelError::DimensionMismatch { expected: 1, found: 0 });
    }
    let scaler = FeatureScaler::fit(rows).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| scaler.apply(r).expect("dimension checked by fit")).collect();
    let ys: Vec<usize> = labels.iter().map(|m| m.index()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = initialize(dim, cfg, scaler, &mut rng);
    let mut opt = Optimizer::new(cfg.optimizer_settings(), &model.tensor_lens());
    let combine_tensor = model.tensor_lens().len() - 1;
    let class_weight = |y: usize| cfg.class_weights.map_or(1.0, |w| w[y]);

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grads: Gradients = model.zero_gradients();
    let mut cache = model.new_cache();
    let mut deltas = [Vec::new(), Vec::new()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.tensors.iter_mut().for_each(|t| t.iter_mut().for_each(|v| *v = 0.0));
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let loss = model
                    .accumulate_gradients(&xs[i], ys[i], class_weight(ys[i]) * scale, &mut cache, &mut deltas, &mut grads)
                    .map_err(|_| ModelError::TrainingFailed { epoch })?;
                epoch_loss += loss / scale;
            }
            if !cfg.learn_combine_weights {
                grads.tensors[combine_tensor].iter_mut().for_each(|v| *v = 0.0);
            }
            let mut params = model.tensors_mut();
            opt.step(&mut params, &grads.tensors).map_err(|_| ModelError::TrainingFailed { epoch })?;
        }
        let loss = epoch_loss / xs.len() as f64;
        if !loss.is_finite() {
            return Err(ModelError::TrainingFailed { epoch });
        }
        history.push(EpochStat { epoch, loss });
    }
    Ok((model, history))
}

/// [`fit`] without the loss history.
pub fn train(rows: &[Vec<f64>], labels: &[Mode], cfg: &TrainConfig) -> Result<WideDeepModel, ModelError> {
    fit(rows, labels, cfg).map(|(m, _)| m)
}
