use serde::{Deserialize, Serialize};

use super::{softmax, ModeClassifier, ModelError, PROB_FLOOR};
use crate::features::{FeatureScaler, FeatureSelection};
use crate::mode::{Mode, N_MODES};

/// Multinomial-logit component: one weight row and one bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideParams {
    pub dim: usize,
    /// `N_MODES x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl WideParams {
    pub fn zeros(dim: usize) -> Self {
        WideParams { dim, weights: vec![0.0; N_MODES * dim], bias: vec![0.0; N_MODES] }
    }

    fn scores_unchecked(&self, x: &[f64]) -> [f64; N_MODES] {
        let mut s = [0.0; N_MODES];
        for (y, out) in s.iter_mut().enumerate() {
            let row = &self.weights[y * self.dim..(y + 1) * self.dim];
            *out = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[y];
        }
        s
    }
}

/// Per-class wide scores `beta_y . x + b_y`. Their softmax is the
/// stand-alone multinomial logit prediction.
pub fn wide_logits(x: &[f64], wide: &WideParams) -> Result<[f64; N_MODES], ModelError> {
    if x.len() != wide.dim {
        return Err(ModelError::DimensionMismatch { expected: wide.dim, found: x.len() });
    }
    Ok(wide.scores_unchecked(x))
}

/// Fully connected layer, `weights` is `outputs x inputs` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    #[inline]
    fn forward_into(&self, input: &[f64], out: &mut [f64], relu: bool) {
        for (o, z) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, a) in row.iter().zip(input) {
                acc += w * a;
            }
            *z = if relu { acc.max(0.0) } else { acc };
        }
    }
}

/// RELU hidden layers followed by a linear projection to `N_MODES` scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepParams {
    pub layers: Vec<DenseLayer>,
}

impl DeepParams {
    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            layers.push(DenseLayer::zeros(prev, h));
            prev = h;
        }
        layers.push(DenseLayer::zeros(prev, N_MODES));
        DeepParams { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.layers.is_empty() {
            return bad("deep component has no layers".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return bad(format!("layer {i} has inconsistent shapes"));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return bad(format!("layer {i} input width does not match layer {}", i - 1));
            }
        }
        if self.layers[self.layers.len() - 1].outputs != N_MODES {
            return bad("output projection must have one unit per mode".into());
        }
        Ok(())
    }
}

/// Activations kept for back-propagation: `activations[0]` is the input,
/// `activations[l]` the RELU output of hidden layer `l`.
#[derive(Debug, Clone, Default)]
pub struct DeepCache {
    pub activations: Vec<Vec<f64>>,
}

impl DeepCache {
    fn for_params(deep: &DeepParams) -> Self {
        let mut activations = vec![vec![0.0; deep.input_dim()]];
        for l in &deep.layers[..deep.layers.len() - 1] {
            activations.push(vec![0.0; l.outputs]);
        }
        DeepCache { activations }
    }
}

fn deep_forward_into(x: &[f64], deep: &DeepParams, cache: &mut DeepCache) -> Result<[f64; N_MODES], ModelError> {
    cache.activations[0].copy_from_slice(x);
    let n_hidden = deep.layers.len() - 1;
    for l in 0..n_hidden {
        let (before, after) = cache.activations.split_at_mut(l + 1);
        deep.layers[l].forward_into(&before[l], &mut after[0], true);
        if after[0].iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NumericOverflow { layer: l + 1 });
        }
    }
    let mut scores = [0.0; N_MODES];
    deep.layers[n_hidden].forward_into(&cache.activations[n_hidden], &mut scores, false);
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NumericOverflow { layer: n_hidden + 1 });
    }
    Ok(scores)
}

/// Forward pass of the deep component. Layers are numbered from 1 in
/// overflow errors; the last number is the output projection.
pub fn deep_forward(x: &[f64], deep: &DeepParams) -> Result<([f64; N_MODES], DeepCache), ModelError> {
    deep.validate()?;
    if x.len() != deep.input_dim() {
        return Err(ModelError::DimensionMismatch { expected: deep.input_dim(), found: x.len() });
    }
    let mut cache = DeepCache::for_params(deep);
    let scores = deep_forward_into(x, deep, &mut cache)?;
    Ok((scores, cache))
}

/// Trained joint model. `combine = [w_wide, w_deep]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideDeepModel {
    pub wide: Option<WideParams>,
    pub deep: Option<DeepParams>,
    pub combine: [f64; 2],
    pub scaler: FeatureScaler,
    pub features: FeatureSelection,
    pub class_order: [Mode; N_MODES],
    pub metadata: serde_json::Value,
}

/// Gradient buffers laid out like [`WideDeepModel::tensors_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl WideDeepModel {
    pub fn input_dim(&self) -> usize {
        self.scaler.dim()
    }

    /// Parameter tensors in a fixed order: wide weights, wide bias, each deep
    /// layer's weights then bias, then the two combination weights.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if let Some(w) = self.wide.as_mut() {
            out.push(&mut w.weights);
            out.push(&mut w.bias);
        }
        if let Some(d) = self.deep.as_mut() {
            for l in &mut d.layers {
                out.push(&mut l.weights);
                out.push(&mut l.bias);
            }
        }
        out.push(&mut self.combine);
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(w) = &self.wide {
            out.extend([w.weights.len(), w.bias.len()]);
        }
        if let Some(d) = &self.deep {
            for l in &d.layers {
                out.extend([l.weights.len(), l.bias.len()]);
            }
        }
        out.push(2);
        out
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { tensors: self.tensor_lens().into_iter().map(|n| vec![0.0; n]).collect() }
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        let d = self
            .wide
            .as_ref()
            .map(|w| w.dim)
            .or(self.deep.as_ref().map(|d| d.input_dim()))
            .unwrap_or(0);
        if x.len() == d {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch { expected: d, found: x.len() })
        }
    }

    fn logits_with(&self, x: &[f64], cache: &mut Option<DeepCache>) -> Result<JointParts, ModelError> {
        let wide = self.wide.as_ref().map(|w| w.scores_unchecked(x)).unwrap_or([0.0; N_MODES]);
        let deep = match (&self.deep, cache.as_mut()) {
            (Some(d), Some(c)) => deep_forward_into(x, d, c)?,
            _ => [0.0; N_MODES],
        };
        let mut logits = [0.0; N_MODES];
        for y in 0..N_MODES {
            logits[y] = self.combine[0] * wide[y] + self.combine[1] * deep[y];
        }
        Ok(JointParts { wide, deep, logits })
    }

    pub(crate) fn new_cache(&self) -> Option<DeepCache> {
        self.deep.as_ref().map(DeepCache::for_params)
    }

    /// Combined per-class logits for a normalized input.
    pub fn joint_logits(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        self.check_dim(x)?;
        Ok(self.logits_with(x, &mut self.new_cache())?.logits)
    }

    /// Class probabilities for a raw (unscaled) input in the model's feature
    /// selection.
    pub fn predict_raw(&self, raw: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        let x = self
            .scaler
            .apply(raw)
            .map_err(|_| ModelError::DimensionMismatch { expected: self.scaler.dim(), found: raw.len() })?;
        joint_predict(&x, self)
    }

    /// Cross-entropy of one normalized sample and its gradient with respect to
    /// every parameter tensor, laid out like [`tensors_mut`](Self::tensors_mut).
    pub fn loss_and_gradients(&self, x: &[f64], label: usize) -> Result<(f64, Gradients), ModelError> {
        self.check_dim(x)?;
        if label >= N_MODES {
            return Err(ModelError::InvalidConfig(format!("label index {label} out of range")));
        }
        let mut grads = self.zero_gradients();
        let mut cache = self.new_cache();
        let mut buf = [Vec::new(), Vec::new()];
        let loss = self.accumulate_gradients(x, label, 1.0, &mut cache, &mut buf, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds the gradient of `weight * CE(x, label)` into `grads` and returns
    /// that weighted loss. `cache` must come from [`new_cache`](Self::new_cache).
    pub(crate) fn accumulate_gradients(
        &self,
        x: &[f64],
        label: usize,
        weight: f64,
        cache: &mut Option<DeepCache>,
        delta_buf: &mut [Vec<f64>; 2],
        grads: &mut Gradients,
    ) -> Result<f64, ModelError> {
        let parts = self.logits_with(x, cache)?;
        let p = softmax(&parts.logits);
        let loss = -weight * p[label].max(PROB_FLOOR).ln();
        let mut g = p;
        g[label] -= 1.0;
        for v in &mut g {
            *v *= weight;
        }

        let mut t = 0;
        if let Some(w) = &self.wide {
            let (gw, rest) = grads.tensors.split_at_mut(t + 1);
            let gb = &mut rest[0];
            for y in 0..N_MODES {
                let gy = g[y] * self.combine[0];
                let row = &mut gw[t][y * w.dim..(y + 1) * w.dim];
                for (r, xv) in row.iter_mut().zip(x) {
                    *r += gy * xv;
                }
                gb[y] += gy;
            }
            t += 2;
        }
        if let (Some(d), Some(c)) = (&self.deep, cache.as_ref()) {
            let n_layers = d.layers.len();
            let [delta, prev] = delta_buf;
            delta.clear();
            delta.extend(g.iter().map(|gy| gy * self.combine[1]));
            for l in (0..n_layers).rev() {
                let layer = &d.layers[l];
                let input = &c.activations[l];
                let (gw, rest) = grads.tensors.split_at_mut(t + 2 * l + 1);
                let gw = &mut gw[t + 2 * l];
                let gb = &mut rest[0];
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (r, a) in row.iter_mut().zip(input) {
                        *r += dz * a;
                    }
                    gb[o] += dz;
                }
                if l > 0 {
                    prev.clear();
                    prev.resize(layer.inputs, 0.0);
                    for (o, &dz) in delta.iter().enumerate() {
                        if dz == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (pv, w) in prev.iter_mut().zip(row) {
                            *pv += w * dz;
                        }
                    }
                    // RELU gate: the activation is positive iff its pre-activation was.
                    for (pv, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *pv = 0.0;
                        }
                    }
                    std::mem::swap(delta, prev);
                }
            }
            t += 2 * n_layers;
        }
        let gc = &mut grads.tensors[t];
        for ((gy, w), d) in g.iter().zip(&parts.wide).zip(&parts.deep) {
            gc[0] += gy * w;
            gc[1] += gy * d;
        }
        Ok(loss)
    }
}

struct JointParts {
    wide: [f64; N_MODES],
    deep: [f64; N_MODES],
    logits: [f64; N_MODES],
}

/// Class probabilities for an input already normalized with the model's
/// scaler: softmax over `w_wide * wide_y + w_deep * deep_y`.
pub fn joint_predict(x: &[f64], model: &WideDeepModel) -> Result<[f64; N_MODES], ModelError> {
    Ok(softmax(&model.joint_logits(x)?))
}

impl ModeClassifier for WideDeepModel {
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        self.predict_raw(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::softmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_with(wide: Option<WideParams>, deep: Option<DeepParams>, combine: [f64; 2], d: usize) -> WideDeepModel {
        WideDeepModel {
            wide,
            deep,
            combine,
            scaler: FeatureScaler { min: vec![0.0; d], max: vec![1.0; d] },
            features: FeatureSelection::default(),
            class_order: Mode::ALL,
            metadata: serde_json::Value::Null,
        }
    }

    #[test]
    fn zero_wide_is_uniform() {
        let w = WideParams::zeros(3);
        let s = wide_logits(&[0.1, 0.5, 0.9], &w).unwrap();
        assert_eq!(softmax(&s), [0.25; 4]);
        assert!(wide_logits(&[0.1], &w).is_err());
    }

    #[test]
    fn softmax_shift_invariance() {
        let s = [0.3, -1.2, 2.5, 0.0];
        let p = softmax(&s);
        let q = softmax(&s.map(|v| v + 17.25));
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_output_bias_passthrough() {
        let mut deep = DeepParams::zeros(3, &[5, 4]);
        deep.layers.last_mut().unwrap().bias = vec![1.0, 2.0, 3.0, 4.0];
        let (scores, cache) = deep_forward(&[0.2, 0.4, 0.6], &deep).unwrap();
        assert_eq!(scores, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cache.activations.len(), 3);
    }

    #[test]
    fn relu_clips_negative() {
        let mut deep = DeepParams::zeros(1, &[1]);
        deep.layers[0].weights = vec![-1.0];
        deep.layers[1].weights = vec![1.0; 4];
        let (scores, cache) = deep_forward(&[1.0], &deep).unwrap();
        assert_eq!(cache.activations[1], vec![0.0]);
        assert_eq!(scores, [0.0; 4]);
    }

    #[test]
    fn overflow_names_layer() {
        let mut deep = DeepParams::zeros(1, &[1, 1]);
        deep.layers[0].weights = vec![f64::MAX];
        deep.layers[1].weights = vec![f64::MAX];
        assert_eq!(deep_forward(&[1.0], &deep).unwrap_err(), ModelError::NumericOverflow { layer: 2 });
    }

    #[test]
    fn deep_only_joint_prediction() {
        let mut deep = DeepParams::zeros(2, &[3]);
        deep.layers[1].bias = vec![1.0, 2.0, 3.0, 4.0];
        let m = model_with(Some(WideParams::zeros(2)), Some(deep), [0.0, 1.0], 2);
        let p = joint_predict(&[0.5, 0.5], &m).unwrap();
        for (a, b) in p.iter().zip([0.0321, 0.0871, 0.2369, 0.6439]) {
            assert!((a - b).abs() < 5e-5);
        }
    }

    #[test]
    fn tensor_layout_matches_gradients() {
        let mut m = model_with(Some(WideParams::zeros(3)), Some(DeepParams::zeros(3, &[4, 2])), [1.0, 1.0], 3);
        let lens = m.tensor_lens();
        assert_eq!(lens, vec![12, 4, 12, 4, 8, 2, 8, 4, 2]);
        assert_eq!(m.tensors_mut().iter().map(|t| t.len()).collect::<Vec<_>>(), lens);
    }

    fn random_model(rng: &mut ChaCha8Rng) -> WideDeepModel {
        let d = rng.random_range(1..=6);
        let depth = rng.random_range(1..=3);
        let widths: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
        let mut m = model_with(Some(WideParams::zeros(d)), Some(DeepParams::zeros(d, &widths)), [1.0, 1.0], d);
        for t in m.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        m
    }

    fn sample_loss(m: &WideDeepModel, x: &[f64], label: usize) -> f64 {
        let p = joint_predict(x, m).unwrap();
        -p[label].max(crate::model::PROB_FLOOR).ln()
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-5;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = random_model(&mut rng);
            let x: Vec<f64> = (0..m.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            let label = rng.random_range(0..N_MODES);
            let (_, g) = m.loss_and_gradients(&x, label).unwrap();
            let lens = m.tensor_lens();
            for (t, &len) in lens.iter().enumerate() {
                for i in 0..len {
                    let orig = m.tensors_mut()[t][i];
                    m.tensors_mut()[t][i] = orig + h;
                    let up = sample_loss(&m, &x, label);
                    m.tensors_mut()[t][i] = orig - h;
                    let down = sample_loss(&m, &x, label);
                    m.tensors_mut()[t][i] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = g.tensors[t][i];
                    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(rel < 1e-5, "seed {seed} tensor {t} entry {i}: {analytic} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn zero_deep_weight_is_the_glm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = random_model(&mut rng);
        m.combine = [1.0, 0.0];
        for _ in 0..1000 {
            let x: Vec<f64> = (0..m.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            let glm = softmax(&wide_logits(&x, m.wide.as_ref().unwrap()).unwrap());
            assert_eq!(joint_predict(&x, &m).unwrap(), glm);
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let m = random_model(&mut rng);
            let x: Vec<f64> = (0..m.input_dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = joint_predict(&x, &m).unwrap();
            assert!(p.iter().all(|v| *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
