//! File-based pipeline stages.
//!
//! Each stage reads the files written by the one before it from the output
//! directory and writes its own, atomically. Nothing time- or
//! scheduling-dependent is written, so reruns with the same inputs and seed
//! reproduce every byte.
//!
//! | stage | reads | writes |
//! |-------|-------|--------|
//! | synth | | points, ground truth, networks |
//! | filter | points | `filtered_points.csv` |
//! | segment | `filtered_points.csv` | `trips.csv`, `trip_points.csv` |
//! | features | `trip_points.csv`, networks, ground truth | `features.csv` |
//! | train | `features.csv` | model, `training_log.csv` |
//! | evaluate | `features.csv` | `metrics.csv`, `confusion_<model>.csv`, `summary.json` |
//! | impute | `features.csv`, `trip_points.csv`, model | `labeled_trips.csv` |
//! | report | `labeled_trips.csv`, reference histograms | `mode_shares.csv`, `distribution_<metric>.csv`, `report.json` |

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::baselines::glm_config;
use crate::config::{ConfigError, PipelineConfig, SplitMethod};
use crate::eval::{
    cross_validate, distribution_report, mode_shares, percent, precision_recall, read_reference, ConfusionMatrix,
    DistributionReport, EvalError, Metric, ModelSpec, TripRecord,
};
use crate::features::{
    extract_all, load_networks, normalize_all, write_geojson, write_gtfs_shapes, FeatureError, FeatureSelection,
    FeatureVector, NetworkKind, FEATURE_NAMES,
};
use crate::geo::{group_by_device, GeoError};
use crate::io::{self, IoError, LabelledTrip};
use crate::mode::{argmax, Mode, ModeLabel, Provenance};
use crate::model::{fit, load_model, save_model, ModeClassifier, ModelError, SavedModel, TrainConfig};
use crate::par;
use crate::synth::{generate_networks, generate_synthetic, label_by_overlap, SynthError};
use crate::trips::{detect_stay_regions, filter_points, split_by_stay_regions, split_by_thresholds, Trip};

pub const FILTERED_POINTS: &str = "filtered_points.csv";
pub const TRIPS: &str = "trips.csv";
pub const TRIP_POINTS: &str = "trip_points.csv";
pub const FEATURES: &str = "features.csv";
pub const TRAINING_LOG: &str = "training_log.csv";
pub const METRICS: &str = "metrics.csv";
pub const SUMMARY: &str = "summary.json";
pub const LABELED_TRIPS: &str = "labeled_trips.csv";
pub const MODE_SHARES: &str = "mode_shares.csv";
pub const REPORT: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Filter,
    Segment,
    Features,
    Train,
    Evaluate,
    Impute,
    Report,
}

impl Stage {
    /// The stages of an end-to-end run, in order. Synthesis is not included.
    pub const RUN: [Stage; 7] =
        [Stage::Filter, Stage::Segment, Stage::Features, Stage::Train, Stage::Evaluate, Stage::Impute, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Filter => "filter",
            Stage::Segment => "segment",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Impute => "impute",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stage failure with the offending file and record when known.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub stage: Stage,
    pub file: Option<String>,
    /// 1-based data record (or feature index for network files).
    pub record: Option<usize>,
    pub message: String,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}", self.stage)?;
        if let Some(file) = &self.file {
            write!(f, ", file {file}")?;
        }
        if let Some(r) = self.record {
            write!(f, ", record {r}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for PipelineError {}

/// Error detail before the stage is attached.
pub struct Failure {
    file: Option<String>,
    record: Option<usize>,
    message: String,
}

impl Failure {
    fn msg(message: impl Into<String>) -> Self {
        Failure { file: None, record: None, message: message.into() }
    }

    fn in_file(mut self, path: &Path) -> Self {
        self.file.get_or_insert_with(|| path.display().to_string());
        self
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { file, reason } => Failure { file: Some(file), record: None, message: reason },
            IoError::Parse { file, record, reason } => Failure { file: Some(file), record: Some(record), message: reason },
        }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io { file, reason } => Failure { file: Some(file), record: None, message: reason },
            FeatureError::Parse { file, index, reason } => Failure { file: Some(file), record: Some(index), message: reason },
            other => Failure::msg(other.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Parse { file, record, reason } => Failure { file: Some(file), record: Some(record), message: reason },
            other => Failure::msg(other.to_string()),
        }
    }
}

macro_rules! failure_from_display {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::msg(e.to_string())
            }
        })*
    };
}

failure_from_display!(ModelError, ConfigError, SynthError, GeoError, String);

fn at<E: Into<Failure>>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| {
        let f = e.into();
        PipelineError { stage, file: f.file, record: f.record, message: f.message }
    }
}

fn in_file<E: Into<Failure>>(stage: Stage, path: &Path) -> impl Fn(E) -> PipelineError + '_ {
    move |e| at(stage)(e.into().in_file(path))
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

fn ensure_dir(stage: Stage, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| in_file(stage, dir)(e.to_string()))
}

fn require(stage: Stage, path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(in_file(stage, path)("input not found".to_string()))
    }
}

/// Runs one stage and returns the files it wrote.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    log::info!("stage {stage}");
    match stage {
        Stage::Synth => synth(cfg),
        Stage::Filter => filter(cfg),
        Stage::Segment => segment(cfg),
        Stage::Features => features(cfg),
        Stage::Train => train(cfg),
        Stage::Evaluate => evaluate(cfg),
        Stage::Impute => impute(cfg),
        Stage::Report => report(cfg),
    }
}

/// Filter through report.
pub fn run(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = Vec::new();
    for stage in Stage::RUN {
        written.extend(run_stage(stage, cfg)?);
    }
    Ok(written)
}

/// Writes synthetic points, ground truth and the three networks.
pub fn synth(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Synth;
    let spec = cfg.synth_spec();
    let gt_path = cfg.paths.ground_truth.clone().ok_or_else(|| {
        at(s)("paths.ground_truth must be set to write synthetic ground truth".to_string())
    })?;
    let nets = generate_networks(&spec);
    let data = generate_synthetic(&spec, &nets).map_err(at(s))?;
    let mut written = Vec::new();
    for kind in NetworkKind::ALL {
        let path = cfg.paths.network(kind);
        if let Some(dir) = path.parent() {
            ensure_dir(s, dir)?;
        }
        let gtfs = matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "csv"));
        let result =
            if gtfs { write_gtfs_shapes(path, nets.get(kind)) } else { write_geojson(path, kind, nets.get(kind)) };
        result.map_err(|e| in_file(s, path)(e.to_string()))?;
        written.push(path.to_path_buf());
    }
    for path in [&cfg.paths.points, &gt_path] {
        if let Some(dir) = path.parent() {
            ensure_dir(s, dir)?;
        }
    }
    io::write_points(&cfg.paths.points, &data.points).map_err(at(s))?;
    io::write_ground_truth(&gt_path, &data.trips).map_err(at(s))?;
    log::info!("synth: {} points, {} trips", data.points.len(), data.trips.len());
    written.push(cfg.paths.points.clone());
    written.push(gt_path);
    Ok(written)
}

/// Drops inaccurate fixes and implausible jumps, per device.
pub fn filter(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Filter;
    require(s, &cfg.paths.points)?;
    ensure_dir(s, &cfg.paths.output_dir)?;
    let points = io::read_points(&cfg.paths.points).map_err(at(s))?;
    let n_in = points.len();
    let seqs = group_by_device(points).map_err(in_file(s, &cfg.paths.points))?;
    let kept = par::map(&seqs, |seq| filter_points(seq, &cfg.filter).into_points());
    let kept: Vec<_> = kept.into_iter().flatten().collect();
    log::info!("filter: kept {} of {n_in} points from {} devices", kept.len(), seqs.len());
    let path = out(cfg, FILTERED_POINTS);
    io::write_points(&path, &kept).map_err(at(s))?;
    Ok(vec![path])
}

/// Cuts each device's filtered points into trips.
pub fn segment(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Segment;
    let input = out(cfg, FILTERED_POINTS);
    require(s, &input)?;
    let points = io::read_points(&input).map_err(at(s))?;
    let seqs = group_by_device(points).map_err(in_file(s, &input))?;
    let per_device = par::map(&seqs, |seq| match cfg.trip_split.method {
        SplitMethod::StayRegion => split_by_stay_regions(seq, &detect_stay_regions(seq, &cfg.stay_region)),
        SplitMethod::Thresholds => split_by_thresholds(seq, &cfg.trip_split.thresholds),
    });
    let trips: Vec<Trip> = per_device.into_iter().flatten().collect();
    log::info!("segment: {} trips from {} devices", trips.len(), seqs.len());
    let (tp, pp) = (out(cfg, TRIPS), out(cfg, TRIP_POINTS));
    io::write_trips(&tp, &pp, &trips).map_err(at(s))?;
    Ok(vec![tp, pp])
}

/// Computes all 14 features per trip, attaching ground-truth modes by overlap.
pub fn features(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Features;
    let input = out(cfg, TRIP_POINTS);
    require(s, &input)?;
    for kind in NetworkKind::ALL {
        require(s, cfg.paths.network(kind))?;
    }
    let trips = io::read_trip_points(&input).map_err(at(s))?;
    let nets = load_networks(&cfg.paths.rail, &cfg.paths.bus, &cfg.paths.highway, cfg.features.cell_deg).map_err(at(s))?;
    let mut vectors = extract_all(&trips, &nets).map_err(in_file(s, &input))?;
    if let Some(gt) = &cfg.paths.ground_truth {
        require(s, gt)?;
        let truth = io::read_ground_truth(gt).map_err(at(s))?;
        for (v, t) in vectors.iter_mut().zip(&trips) {
            v.label = label_by_overlap(&truth, &t.device_id, (t.start_time(), t.end_time()));
        }
    }
    if !vectors.is_empty() {
        normalize_all(&mut vectors).map_err(at(s))?;
    }
    let labelled = vectors.iter().filter(|v| v.label.is_some()).count();
    log::info!("features: {} trips, {labelled} with ground truth", vectors.len());
    let path = out(cfg, FEATURES);
    io::write_features(&path, &vectors).map_err(at(s))?;
    Ok(vec![path])
}

fn labelled_rows(vectors: &[FeatureVector], selection: &FeatureSelection) -> (Vec<Vec<f64>>, Vec<Mode>) {
    vectors.iter().filter_map(|v| v.label.map(|m| (selection.select(&v.raw), m))).unzip()
}

fn read_feature_file(s: Stage, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>, PipelineError> {
    let input = out(cfg, FEATURES);
    require(s, &input)?;
    io::read_features(&input).map_err(at(s))
}

/// Fits the configured model on every labelled trip.
pub fn train(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Train;
    let vectors = read_feature_file(s, cfg)?;
    let selection = cfg.features.selection();
    let (rows, labels) = labelled_rows(&vectors, &selection);
    log::info!("train: {} labelled trips, {} features", rows.len(), selection.columns().len());
    let with_run = |c: &TrainConfig| TrainConfig { seed: cfg.seed, features: selection.clone(), ..c.clone() };
    let (model, log_rows) = match &cfg.train {
        ModelSpec::WideDeep(c) => {
            let (m, stats) = fit(&rows, &labels, &with_run(c)).map_err(at(s))?;
            (SavedModel::WideDeep(m), stats)
        }
        ModelSpec::Glm(c) => {
            let (m, stats) = fit(&rows, &labels, &glm_config(&with_run(c))).map_err(at(s))?;
            (SavedModel::Glm(m), stats)
        }
        spec => (spec.fit_saved(&rows, &labels, cfg.seed).map_err(at(s))?, Vec::new()),
    };
    let model_path = cfg.paths.model_path();
    if let Some(dir) = model_path.parent() {
        ensure_dir(s, dir)?;
    }
    ensure_dir(s, &cfg.paths.output_dir)?;
    save_model(&model, &model_path).map_err(in_file(s, &model_path))?;
    let log_path = out(cfg, TRAINING_LOG);
    io::write_csv(&log_path, &["epoch", "loss"], log_rows.iter().map(|e| vec![e.epoch.to_string(), e.loss.to_string()]))
        .map_err(at(s))?;
    Ok(vec![model_path, log_path])
}

fn confusion_rows(cm: &ConfusionMatrix) -> Vec<Vec<String>> {
    Mode::ALL
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut row = vec![m.to_string()];
            row.extend(cm.counts[i].iter().map(|c| c.to_string()));
            row
        })
        .collect()
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    name: &'a str,
    kind: &'a str,
    features: Vec<&'static str>,
    n_predictions: usize,
    accuracy: f64,
    accuracy_pct: Option<f64>,
    total_loss: f64,
    average_loss: f64,
    recall_pct: [Option<f64>; 4],
    precision_pct: [Option<f64>; 4],
    confusion: &'a ConfusionMatrix,
}

fn spec_kind(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::WideDeep(_) => "wide_deep",
        ModelSpec::Glm(_) => "glm",
        ModelSpec::Tree(_) => "tree",
        ModelSpec::Bagging(_) => "bagging",
        ModelSpec::RandomForest(_) => "random_forest",
    }
}

/// Repeated k-fold cross-validation of every configured model.
pub fn evaluate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Evaluate;
    let vectors = read_feature_file(s, cfg)?;
    let cv = cfg.evaluate.cv(cfg.seed);
    let mut metric_rows = Vec::new();
    let mut written = Vec::new();
    let mut reports = Vec::new();
    for m in &cfg.evaluate.models {
        let selection = m.selection();
        let (rows, labels) = labelled_rows(&vectors, &selection);
        let report = cross_validate(&rows, &labels, &m.model, &cv)
            .map_err(|e| at(s)(Failure::msg(format!("model {}: {e}", m.name))))?;
        log::info!(
            "evaluate {}: accuracy {:.4}, average loss {:.4}, slowest fit {:.2} s",
            m.name,
            report.accuracy,
            report.average_loss,
            report.max_fit_seconds()
        );
        for c in &report.cells {
            metric_rows.push(vec![
                m.name.clone(),
                c.seed.to_string(),
                c.fold.to_string(),
                c.n_train.to_string(),
                c.n_test.to_string(),
                c.correct.to_string(),
                c.accuracy.to_string(),
                c.total_loss.to_string(),
                c.average_loss.to_string(),
            ]);
        }
        let path = out(cfg, &format!("confusion_{}.csv", m.name));
        io::write_csv(&path, &["true_mode", "car", "metro", "bus", "walk"], confusion_rows(&report.confusion))
            .map_err(at(s))?;
        written.push(path);
        reports.push((m, selection, report));
    }
    let summaries: Vec<ModelSummary> = reports
        .iter()
        .map(|(m, sel, r)| {
            let pr = precision_recall(&r.confusion);
            ModelSummary {
                name: &m.name,
                kind: spec_kind(&m.model),
                features: sel.names(),
                n_predictions: r.n_predictions,
                accuracy: r.accuracy,
                accuracy_pct: pr.accuracy.map(|a| percent(a, 1)),
                total_loss: r.total_loss,
                average_loss: r.average_loss,
                recall_pct: pr.recall.map(|v| v.map(|x| percent(x, 1))),
                precision_pct: pr.precision.map(|v| v.map(|x| percent(x, 1))),
                confusion: &r.confusion,
            }
        })
        .collect();
    let metrics = out(cfg, METRICS);
    io::write_csv(
        &metrics,
        &["model", "seed", "fold", "n_train", "n_test", "correct", "accuracy", "total_loss", "average_loss"],
        metric_rows,
    )
    .map_err(at(s))?;
    let summary = json!({
        "folds": cv.folds,
        "seeds": cv.seeds,
        "base_seed": cv.base_seed,
        "subsample": cv.subsample,
        "total_loss_scope": "sum over every held-out prediction of every seed and fold",
        "models": summaries,
    });
    let summary_path = out(cfg, SUMMARY);
    write_json(s, &summary_path, &summary)?;
    written.insert(0, metrics);
    written.push(summary_path);
    Ok(written)
}

fn write_json(s: Stage, path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| in_file(s, path)(e.to_string()))?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes()).map_err(|e| in_file(s, path)(e.to_string()))
}

fn feature_index(name: &str) -> usize {
    FEATURE_NAMES.iter().position(|n| *n == name).expect("known feature")
}

/// Labels every trip with the saved model.
pub fn impute(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Impute;
    let vectors = read_feature_file(s, cfg)?;
    let trip_path = out(cfg, TRIP_POINTS);
    require(s, &trip_path)?;
    let trips = io::read_trip_points(&trip_path).map_err(at(s))?;
    let spans: HashMap<&str, &Trip> = trips.iter().map(|t| (t.trip_id.as_str(), t)).collect();
    let model_path = cfg.paths.model_path();
    require(s, &model_path)?;
    let model = load_model(&model_path).map_err(in_file(s, &model_path))?;
    let selection = match &model {
        SavedModel::WideDeep(m) | SavedModel::Glm(m) => m.features.clone(),
        _ => cfg.features.selection(),
    };
    let want = selection.columns().len();
    if model.input_dim() != want {
        return Err(in_file(s, &model_path)(format!(
            "model expects {} features but the selection has {want}",
            model.input_dim()
        )));
    }
    let (time_col, length_col) = (feature_index("trip_time"), feature_index("trip_distance"));
    let keep = cfg.impute.keep_ground_truth;
    let labelled = par::try_map(&vectors, |v| -> Result<LabelledTrip, Failure> {
        let trip = spans
            .get(v.trip_id.as_str())
            .ok_or_else(|| Failure::msg(format!("trip `{}` is missing from {TRIP_POINTS}", v.trip_id)))?;
        let (label, probabilities) = match v.label {
            Some(mode) if keep => (ModeLabel { mode, provenance: Provenance::GroundTruth }, None),
            _ => {
                let p = model.predict_proba(&selection.select(&v.raw))?;
                (ModeLabel { mode: Mode::ALL[argmax(&p)], provenance: Provenance::Imputed }, Some(p))
            }
        };
        Ok(LabelledTrip {
            trip_id: v.trip_id.clone(),
            device_id: trip.device_id.clone(),
            start_time: trip.start_time(),
            end_time: trip.end_time(),
            trip_time: v.raw[time_col],
            trip_length: v.raw[length_col],
            label,
            probabilities,
        })
    })
    .map_err(at(s))?;
    log::info!("impute: labelled {} trips", labelled.len());
    let path = out(cfg, LABELED_TRIPS);
    io::write_labelled_trips(&path, &labelled).map_err(at(s))?;
    Ok(vec![path])
}

fn distribution_rows(r: &DistributionReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for h in &r.modes {
        for (b, &count) in h.counts.iter().enumerate() {
            let cell = |v: Option<&Vec<f64>>| v.map(|p| p[b].to_string()).unwrap_or_default();
            let diff = match (&h.proportions, &h.reference) {
                (Some(p), Some(q)) => (p[b] - q[b]).abs().to_string(),
                _ => String::new(),
            };
            rows.push(vec![
                h.mode.to_string(),
                r.edges[b].to_string(),
                r.edges[b + 1].to_string(),
                count.to_string(),
                cell(h.proportions.as_ref()),
                cell(h.reference.as_ref()),
                diff,
            ]);
        }
    }
    rows
}

/// Mode shares and per-mode trip time and length distributions.
pub fn report(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let s = Stage::Report;
    let input = out(cfg, LABELED_TRIPS);
    require(s, &input)?;
    let trips = io::read_labelled_trips(&input).map_err(at(s))?;
    let shares = mode_shares(trips.iter().map(|t| t.label.mode)).map_err(in_file(s, &input))?;
    let shares_path = out(cfg, MODE_SHARES);
    io::write_csv(
        &shares_path,
        &["mode", "count", "share", "share_pct"],
        Mode::ALL.iter().map(|m| {
            let i = m.index();
            vec![
                m.to_string(),
                shares.counts[i].to_string(),
                shares.shares[i].to_string(),
                percent(shares.shares[i], 1).to_string(),
            ]
        }),
    )
    .map_err(at(s))?;
    let records: Vec<TripRecord> = trips
        .iter()
        .map(|t| TripRecord { mode: t.label.mode, trip_time: t.trip_time, trip_length: t.trip_length })
        .collect();
    let mut written = vec![shares_path];
    let mut distributions = serde_json::Map::new();
    for (metric, edges, reference) in [
        (Metric::TripTime, &cfg.report.time_edges, &cfg.paths.reference_time),
        (Metric::TripLength, &cfg.report.length_edges, &cfg.paths.reference_length),
    ] {
        let reference = match reference {
            Some(p) => {
                require(s, p)?;
                Some(read_reference(p).map_err(at(s))?)
            }
            None => None,
        };
        let r = distribution_report(&records, metric, edges, reference.as_deref()).map_err(at(s))?;
        let path = out(cfg, &format!("distribution_{}.csv", metric.as_str()));
        io::write_csv(
            &path,
            &["mode", "bin_lo", "bin_hi", "count", "proportion", "reference", "abs_diff"],
            distribution_rows(&r),
        )
        .map_err(at(s))?;
        written.push(path);
        let tv: serde_json::Map<String, serde_json::Value> =
            r.modes.iter().map(|h| (h.mode.to_string(), json!(h.total_variation))).collect();
        distributions.insert(metric.as_str().to_string(), json!({ "total_variation": tv }));
    }
    let imputed = trips.iter().filter(|t| t.label.provenance == Provenance::Imputed).count();
    let by_mode = |v: &dyn Fn(usize) -> serde_json::Value| -> serde_json::Map<String, serde_json::Value> {
        Mode::ALL.iter().map(|m| (m.to_string(), v(m.index()))).collect()
    };
    let doc = json!({
        "n_trips": shares.total,
        "imputed_trips": imputed,
        "ground_truth_trips": trips.len() - imputed,
        "counts": by_mode(&|i| json!(shares.counts[i])),
        "shares": by_mode(&|i| json!(shares.shares[i])),
        "shares_pct": by_mode(&|i| json!(percent(shares.shares[i], 1))),
        "distributions": distributions,
    });
    let path = out(cfg, REPORT);
    write_json(s, &path, &doc)?;
    written.push(path);
    log::info!("report: {} trips", shares.total);
    Ok(written)
}
