//! The TOML file that drives every pipeline stage.
//!
//! Unknown keys are rejected in every section. Relative paths are resolved
//! against the directory holding the config file. The top-level `seed` is the
//! only seed: it replaces the seeds of the synthetic generator, the trained
//! model and the cross-validation repetitions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::{CvConfig, ModelSpec};
use crate::features::{FeatureSelection, NetworkKind, DEFAULT_CELL_DEG};
use crate::model::TrainConfig;
use crate::synth::SyntheticSpec;
use crate::trips::{FilterConfig, StayRegionConfig, TripSplitConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{file}: {reason}")]
    Read { file: String, reason: String },
    #[error("{file}: {reason}")]
    Parse { file: String, reason: String },
    #[error("invalid [{section}]: {reason}")]
    Invalid { section: &'static str, reason: String },
}

fn invalid(section: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { section, reason: reason.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw location points.
    pub points: PathBuf,
    /// Ground-truth trip spans; trips overlapping one take its mode as label.
    pub ground_truth: Option<PathBuf>,
    /// Network geometry: `.geojson`/`.json` or GTFS `shapes.txt`-style CSV.
    pub rail: PathBuf,
    pub bus: PathBuf,
    pub highway: PathBuf,
    pub output_dir: PathBuf,
    /// Saved model; defaults to `model.json` in the output directory.
    pub model: Option<PathBuf>,
    /// Reference histograms (`mode,bin_lo,bin_hi,proportion`).
    pub reference_time: Option<PathBuf>,
    pub reference_length: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            points: "points.csv".into(),
            ground_truth: None,
            rail: "rail.geojson".into(),
            bus: "bus_shapes.txt".into(),
            highway: "highway.geojson".into(),
            output_dir: "out".into(),
            model: None,
            reference_time: None,
            reference_length: None,
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.points, &mut self.rail, &mut self.bus, &mut self.highway, &mut self.output_dir] {
            join(p);
        }
        for p in [&mut self.ground_truth, &mut self.model, &mut self.reference_time, &mut self.reference_length]
            .into_iter()
            .flatten()
        {
            join(p);
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    pub fn network(&self, kind: NetworkKind) -> &Path {
        match kind {
            NetworkKind::Rail => &self.rail,
            NetworkKind::Bus => &self.bus,
            NetworkKind::Highway => &self.highway,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    #[default]
    StayRegion,
    Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub method: SplitMethod,
    #[serde(flatten)]
    pub thresholds: TripSplitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Network distances fed to the trained model.
    pub network: Vec<NetworkKind>,
    /// Side of the spatial-index cells, degrees.
    pub cell_deg: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { network: FeatureSelection::default().network, cell_deg: DEFAULT_CELL_DEG }
    }
}

impl FeatureConfig {
    pub fn selection(&self) -> FeatureSelection {
        FeatureSelection { network: self.network.clone() }
    }
}

/// One cross-validated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalModel {
    pub name: String,
    /// Network distances used by this model.
    #[serde(default)]
    pub network: Vec<NetworkKind>,
    pub model: ModelSpec,
}

impl EvalModel {
    pub fn selection(&self) -> FeatureSelection {
        FeatureSelection { network: self.network.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub folds: usize,
    pub seeds: usize,
    pub subsample: f64,
    pub models: Vec<EvalModel>,
}

/// A wide-deep network small enough to refit a hundred times.
pub fn cv_wide_deep() -> TrainConfig {
    TrainConfig { hidden_widths: vec![64, 32, 16], epochs: 60, ..TrainConfig::default() }
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        let all = FeatureSelection::default().network;
        let rf = ModelSpec::RandomForest(Default::default());
        EvaluateConfig {
            folds: 10,
            seeds: 10,
            subsample: 1.0,
            models: vec![
                EvalModel { name: "wide_deep_network".into(), network: all.clone(), model: ModelSpec::WideDeep(cv_wide_deep()) },
                EvalModel { name: "wide_deep_trajectory".into(), network: vec![], model: ModelSpec::WideDeep(cv_wide_deep()) },
                EvalModel { name: "random_forest_network".into(), network: all, model: rf.clone() },
                EvalModel { name: "random_forest_trajectory".into(), network: vec![], model: rf },
            ],
        }
    }
}

impl EvaluateConfig {
    pub fn cv(&self, seed: u64) -> CvConfig {
        CvConfig { folds: self.folds, seeds: self.seeds, base_seed: seed, subsample: self.subsample }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    /// Keep the ground-truth mode of labelled trips instead of predicting it.
    pub keep_ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Trip-time bin edges, seconds.
    pub time_edges: Vec<f64>,
    /// Trip-length bin edges, meters.
    pub length_edges: Vec<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            time_edges: vec![0.0, 300.0, 600.0, 900.0, 1200.0, 1800.0, 2700.0, 3600.0, 5400.0, 7200.0],
            length_edges: vec![0.0, 1_000.0, 2_000.0, 5_000.0, 10_000.0, 15_000.0, 20_000.0, 30_000.0, 50_000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub filter: FilterConfig,
    pub stay_region: StayRegionConfig,
    pub trip_split: SegmentConfig,
    pub features: FeatureConfig,
    pub train: ModelSpec,
    pub evaluate: EvaluateConfig,
    pub impute: ImputeConfig,
    pub report: ReportConfig,
    pub synth: SyntheticSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            paths: Paths::default(),
            filter: FilterConfig::default(),
            stay_region: StayRegionConfig::default(),
            trip_split: SegmentConfig::default(),
            features: FeatureConfig::default(),
            train: ModelSpec::WideDeep(TrainConfig::default()),
            evaluate: EvaluateConfig::default(),
            impute: ImputeConfig::default(),
            report: ReportConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

fn check_edges(section: &'static str, name: &str, edges: &[f64]) -> Result<(), ConfigError> {
    if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(section, format!("{name} must be at least two strictly increasing finite values")));
    }
    Ok(())
}

fn validate_spec(spec: &ModelSpec) -> Result<(), String> {
    match spec {
        ModelSpec::WideDeep(c) | ModelSpec::Glm(c) => c.validate().map_err(|e| e.to_string()),
        ModelSpec::Tree(t) => t.validate().map_err(|e| e.to_string()),
        ModelSpec::Bagging(f) | ModelSpec::RandomForest(f) => f.validate().map_err(|e| e.to_string()),
    }
}

impl PipelineConfig {
    /// Parses TOML text; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path, file: &str) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { file: file.to_string(), reason: e.to_string() })?;
        cfg.paths.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { file: file.clone(), reason: e.to_string() })?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_toml(&text, base, &file)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.filter.validate().map_err(|e| invalid("filter", e))?;
        self.stay_region.validate().map_err(|e| invalid("stay_region", e))?;
        self.trip_split.thresholds.validate().map_err(|e| invalid("trip_split", e))?;
        if !(self.features.cell_deg.is_finite() && self.features.cell_deg > 0.0) {
            return Err(invalid("features", "cell_deg must be positive"));
        }
        validate_spec(&self.train).map_err(|e| invalid("train", e))?;
        let ev = &self.evaluate;
        if ev.folds < 2 || ev.seeds == 0 || !(ev.subsample > 0.0 && ev.subsample <= 1.0) {
            return Err(invalid("evaluate", "need folds >= 2, seeds >= 1 and subsample in (0, 1]"));
        }
        let mut names = std::collections::HashSet::new();
        for m in &ev.models {
            let ok = !m.name.is_empty() && m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(invalid("evaluate", format!("model name `{}` must be non-empty [A-Za-z0-9_-]", m.name)));
            }
            if !names.insert(m.name.as_str()) {
                return Err(invalid("evaluate", format!("duplicate model name `{}`", m.name)));
            }
            validate_spec(&m.model).map_err(|e| invalid("evaluate", format!("{}: {e}", m.name)))?;
        }
        check_edges("report", "time_edges", &self.report.time_edges)?;
        check_edges("report", "length_edges", &self.report.length_edges)?;
        self.synth.validate().map_err(|e| invalid("synth", e))?;
        Ok(())
    }

    /// The synthetic spec with the global seed applied.
    pub fn synth_spec(&self) -> SyntheticSpec {
        SyntheticSpec { seed: self.seed, ..self.synth.clone() }
    }
}
