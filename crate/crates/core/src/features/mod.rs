//! Per-trip features: trajectory statistics and proximity to modal networks.
//!
//! Raw feature column order (fixed, also used for CSV output):
//!
//! | # | name               | unit     |
//! |---|--------------------|----------|
//! | 0 | `trip_distance`    | m        |
//! | 1 | `trip_time`        | s        |
//! | 2 | `od_euclidean`     | m        |
//! | 3 | `avg_speed`        | m/s      |
//! | 4 | `max_instant_speed`| m/s      |
//! | 5 | `speed_q05`        | m/s      |
//! | 6 | `speed_q25`        | m/s      |
//! | 7 | `speed_q50`        | m/s      |
//! | 8 | `speed_q75`        | m/s      |
//! | 9 | `speed_q95`        | m/s      |
//! |10 | `avg_record_rate`  | points/s |
//! |11 | `avg_dist_rail`    | m        |
//! |12 | `avg_dist_bus`     | m        |
//! |13 | `avg_dist_highway` | m        |

mod network;
mod network_io;
mod scaler;

pub use network::{ModalNetwork, NetworkKind, NetworkSet, DEFAULT_CELL_DEG};
pub use network_io::{load_network, load_networks, write_geojson, write_gtfs_shapes};
pub use scaler::FeatureScaler;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, pairwise_speed};
use crate::mode::Mode;
use crate::trips::Trip;

pub const N_TRAJECTORY_FEATURES: usize = 11;
pub const N_FEATURES: usize = 14;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "trip_distance",
    "trip_time",
    "od_euclidean",
    "avg_speed",
    "max_instant_speed",
    "speed_q05",
    "speed_q25",
    "speed_q50",
    "speed_q75",
    "speed_q95",
    "avg_record_rate",
    "avg_dist_rail",
    "avg_dist_bus",
    "avg_dist_highway",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("trip `{0}` has zero duration")]
    DegenerateTrip(String),
    #[error("{0} network has no segments")]
    EmptyNetwork(NetworkKind),
    #[error("cannot fit a scaler on an empty matrix")]
    EmptyMatrix,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{file}: feature {index}: {reason}")]
    Parse { file: String, index: usize, reason: String },
    #[error("{file}: {reason}")]
    Io { file: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFeatures {
    pub trip_distance: f64,
    pub trip_time: f64,
    pub od_euclidean: f64,
    pub avg_speed: f64,
    pub max_instant_speed: f64,
    pub speed_q05: f64,
    pub speed_q25: f64,
    pub speed_q50: f64,
    pub speed_q75: f64,
    pub speed_q95: f64,
    pub avg_record_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkFeatures {
    pub avg_dist_rail: f64,
    pub avg_dist_bus: f64,
    pub avg_dist_highway: f64,
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Speeds the max/quantile features are drawn from: reported instantaneous
/// speeds when every point has one, otherwise speeds between successive
/// points.
fn speed_sample(trip: &Trip) -> Vec<f64> {
    if trip.points.iter().all(|p| p.speed.is_some()) {
        trip.points.iter().filter_map(|p| p.speed).collect()
    } else {
        trip.points
            .windows(2)
            .map(|w| pairwise_speed(&w[0], &w[1]).unwrap_or(0.0))
            .collect()
    }
}

pub fn trajectory_features(trip: &Trip) -> Result<TrajectoryFeatures, FeatureError> {
    let trip_time = trip.duration();
    if trip.points.len() < 2 || !(trip_time > 0.0) {
        return Err(FeatureError::DegenerateTrip(trip.trip_id.clone()));
    }
    let trip_distance: f64 = trip
        .points
        .windows(2)
        .map(|w| haversine_m(w[0].position(), w[1].position()))
        .sum();
    // The chord can exceed the path only by rounding.
    let od_euclidean = haversine_m(trip.origin(), trip.destination()).min(trip_distance);
    let mut speeds = speed_sample(trip);
    speeds.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&speeds, p);
    Ok(TrajectoryFeatures {
        trip_distance,
        trip_time,
        od_euclidean,
        avg_speed: trip_distance / trip_time,
        max_instant_speed: speeds[speeds.len() - 1],
        speed_q05: q(0.05),
        speed_q25: q(0.25),
        speed_q50: q(0.50),
        speed_q75: q(0.75),
        speed_q95: q(0.95),
        avg_record_rate: trip.points.len() as f64 / trip_time,
    })
}

/// Mean nearest-line distance over the trip's points, per network.
pub fn network_features(trip: &Trip, networks: &NetworkSet) -> Result<NetworkFeatures, FeatureError> {
    let mean = |net: &ModalNetwork| -> Result<f64, FeatureError> {
        let mut sum = 0.0;
        for p in &trip.points {
            sum += net.nearest_line_distance(p.position())?;
        }
        Ok(sum / trip.points.len() as f64)
    };
    Ok(NetworkFeatures {
        avg_dist_rail: mean(&networks.rail)?,
        avg_dist_bus: mean(&networks.bus)?,
        avg_dist_highway: mean(&networks.highway)?,
    })
}

/// Which columns enter the classifiers: all trajectory features plus the
/// listed network distances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSelection {
    pub network: Vec<NetworkKind>,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        FeatureSelection { network: vec![NetworkKind::Rail, NetworkKind::Bus, NetworkKind::Highway] }
    }
}

impl FeatureSelection {
    pub fn trajectory_only() -> Self {
        FeatureSelection { network: Vec::new() }
    }

    pub fn columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..N_TRAJECTORY_FEATURES).collect();
        for kind in NetworkKind::ALL {
            if self.network.contains(&kind) {
                cols.push(N_TRAJECTORY_FEATURES + kind.index());
            }
        }
        cols
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.columns().into_iter().map(|c| FEATURE_NAMES[c]).collect()
    }

    pub fn select(&self, raw: &[f64; N_FEATURES]) -> Vec<f64> {
        self.columns().into_iter().map(|c| raw[c]).collect()
    }
}

/// One trip's features in the fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub trip_id: String,
    pub raw: [f64; N_FEATURES],
    pub normalized: Option<[f64; N_FEATURES]>,
    pub label: Option<Mode>,
}

impl FeatureVector {
    pub fn from_parts(trip_id: impl Into<String>, t: &TrajectoryFeatures, n: &NetworkFeatures, label: Option<Mode>) -> Self {
        FeatureVector {
            trip_id: trip_id.into(),
            raw: [
                t.trip_distance,
                t.trip_time,
                t.od_euclidean,
                t.avg_speed,
                t.max_instant_speed,
                t.speed_q05,
                t.speed_q25,
                t.speed_q50,
                t.speed_q75,
                t.speed_q95,
                t.avg_record_rate,
                n.avg_dist_rail,
                n.avg_dist_bus,
                n.avg_dist_highway,
            ],
            normalized: None,
            label,
        }
    }
}

/// Trajectory and network features for one trip; the label is carried over.
pub fn extract(trip: &Trip, networks: &NetworkSet) -> Result<FeatureVector, FeatureError> {
    let t = trajectory_features(trip)?;
    let n = network_features(trip, networks)?;
    Ok(FeatureVector::from_parts(trip.trip_id.clone(), &t, &n, trip.label.map(|l| l.mode)))
}

/// [`extract`] over a batch, parallel per trip.
pub fn extract_all(trips: &[Trip], networks: &NetworkSet) -> Result<Vec<FeatureVector>, FeatureError> {
    crate::par::try_map(trips, |t| extract(t, networks))
}

/// Fits a scaler on all rows and fills in `normalized`.
pub fn normalize_all(vectors: &mut [FeatureVector]) -> Result<FeatureScaler, FeatureError> {
    let rows: Vec<&[f64]> = vectors.iter().map(|v| &v.raw[..]).collect();
    let scaler = FeatureScaler::fit(&rows)?;
    for v in vectors.iter_mut() {
        let scaled = scaler.apply(&v.raw)?;
        let mut out = [0.0; N_FEATURES];
        out.copy_from_slice(&scaled);
        v.normalized = Some(out);
    }
    Ok(scaler)
}
