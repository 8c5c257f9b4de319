//! Versioned JSON model files.
//!
//! ```json
//! { "format": "modeforge-model", "version": 1, "model": { "kind": "wide_deep", ... } }
//! ```
//!
//! `kind` is one of `wide_deep`, `glm`, `tree`, `forest`. Weight matrices are
//! row-major `outputs x inputs` arrays; the class order is always
//! `[car, metro, bus, walk]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModeClassifier, ModelError, WideDeepModel};
use crate::baselines::{DecisionTree, ForestModel};
use crate::mode::N_MODES;

pub const MODEL_FORMAT: &str = "modeforge-model";
pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    WideDeep(WideDeepModel),
    Glm(WideDeepModel),
    Tree(DecisionTree),
    Forest(ForestModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::WideDeep(_) => "wide_deep",
            SavedModel::Glm(_) => "glm",
            SavedModel::Tree(_) => "tree",
            SavedModel::Forest(_) => "forest",
        }
    }

    /// Length of the feature rows the model expects.
    pub fn input_dim(&self) -> usize {
        match self {
            SavedModel::WideDeep(m) | SavedModel::Glm(m) => m.scaler.dim(),
            SavedModel::Tree(t) => t.dim,
            SavedModel::Forest(f) => f.trees.first().map_or(0, |t| t.dim),
        }
    }

    pub fn classifier(&self) -> &dyn ModeClassifier {
        match self {
            SavedModel::WideDeep(m) | SavedModel::Glm(m) => m,
            SavedModel::Tree(t) => t,
            SavedModel::Forest(f) => f,
        }
    }
}

impl ModeClassifier for SavedModel {
    fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_MODES], ModelError> {
        self.classifier().predict_proba(x)
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'a str,
    version: u64,
    model: &'a SavedModel,
}

pub fn to_json(model: &SavedModel) -> Result<String, ModelError> {
    let env = Envelope { format: MODEL_FORMAT, version: MODEL_VERSION, model };
    serde_json::to_string_pretty(&env).map_err(|e| ModelError::Parse(e.to_string()))
}

pub fn from_json(text: &str) -> Result<SavedModel, ModelError> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let format = value.get("format").and_then(|v| v.as_str());
    if format != Some(MODEL_FORMAT) {
        return Err(ModelError::Parse(format!("not a {MODEL_FORMAT} file")));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ModelError::Parse("missing version".into()))?;
    if version != MODEL_VERSION {
        return Err(ModelError::Version { found: version, expected: MODEL_VERSION });
    }
    let model = value
        .get_mut("model")
        .map(serde_json::Value::take)
        .ok_or_else(|| ModelError::Parse("missing model".into()))?;
    serde_json::from_value(model).map_err(|e| ModelError::Parse(e.to_string()))
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn save_model(model: &SavedModel, path: &Path) -> Result<(), ModelError> {
    let text = to_json(model)?;
    crate::io::write_atomic(path, text.as_bytes()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{train_random_forest, ForestConfig};
    use crate::features::FeatureSelection;
    use crate::model::{train, TrainConfig};
    use crate::Mode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data() -> (Vec<Vec<f64>>, Vec<Mode>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..80)
            .map(|i| {
                let c = i % 4;
                (vec![c as f64 + rng.random_range(-0.7..0.7), rng.random_range(0.0..3.0)], Mode::ALL[c])
            })
            .unzip()
    }

    fn probe() -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (0..100).map(|_| vec![rng.random_range(-1.0..5.0), rng.random_range(-1.0..4.0)]).collect()
    }

    #[test]
    fn round_trip_predictions_identical() {
        let (rows, labels) = data();
        let cfg = TrainConfig {
            epochs: 10,
            hidden_widths: vec![8, 4, 4],
            features: FeatureSelection::trajectory_only(),
            ..Default::default()
        };
        let wd = SavedModel::WideDeep(train(&rows, &labels, &cfg).unwrap());
        let rf = SavedModel::Forest(
            train_random_forest(&rows, &labels, &ForestConfig { n_trees: 5, ..Default::default() }).unwrap(),
        );
        let dir = tempfile::tempdir().unwrap();
        for m in [wd, rf] {
            let path = dir.path().join(format!("{}.json", m.kind()));
            save_model(&m, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back, m);
            for x in probe() {
                assert_eq!(m.predict_proba(&x).unwrap(), back.predict_proba(&x).unwrap());
            }
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let text = r#"{"format":"modeforge-model","version":7,"model":{"kind":"tree"}}"#;
        assert_eq!(from_json(text).unwrap_err(), ModelError::Version { found: 7, expected: 1 });
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let (rows, labels) = data();
        let t = crate::baselines::train_tree(&rows, &labels, &Default::default()).unwrap();
        let text = to_json(&SavedModel::Tree(t)).unwrap();
        for cut in [0, 1, text.len() / 3, text.len() - 2] {
            assert!(matches!(from_json(&text[..cut]), Err(ModelError::Parse(_))));
        }
    }

    #[test]
    fn wrong_format_tag() {
        assert!(matches!(from_json(r#"{"format":"x","version":1}"#), Err(ModelError::Parse(_))));
    }
}
