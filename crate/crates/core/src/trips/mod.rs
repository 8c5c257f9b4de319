//! Cleaning location streams and cutting them into trips.

mod filter;
mod split;
mod stay;

pub use filter::filter_points;
pub use split::{split_by_stay_regions, split_by_thresholds};
pub use stay::{detect_stay_regions, point_speeds, StayRegion};

use serde::{Deserialize, Serialize};

use crate::geo::{LatLon, LocationPoint};
use crate::mode::ModeLabel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TripError {
    #[error("invalid {config}: {reason}")]
    InvalidConfig { config: &'static str, reason: String },
    #[error("a trip needs at least two points with increasing timestamps")]
    Degenerate,
}

fn check_positive(config: &'static str, name: &str, v: f64) -> Result<(), TripError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(TripError::InvalidConfig { config, reason: format!("{name} must be positive and finite, got {v}") })
    }
}

/// Accuracy and jump-speed filter thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Records reporting an accuracy radius larger than this (m) are dropped.
    pub min_accuracy: f64,
    /// Points implying a faster move from the last kept point (m/s) are dropped.
    pub max_jump_speed: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { min_accuracy: 100.0, max_jump_speed: 150.0 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), TripError> {
        check_positive("filter", "min_accuracy", self.min_accuracy)?;
        check_positive("filter", "max_jump_speed", self.max_jump_speed)
    }
}

/// Stay-region thresholds: roam distance `D`, dwell time `T`, speed cap `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StayRegionConfig {
    pub max_roam_distance: f64,
    pub min_dwell_time: f64,
    pub max_speed: f64,
}

impl Default for StayRegionConfig {
    fn default() -> Self {
        StayRegionConfig { max_roam_distance: 100.0, min_dwell_time: 300.0, max_speed: 1.5 }
    }
}

impl StayRegionConfig {
    pub fn validate(&self) -> Result<(), TripError> {
        check_positive("stay_region", "max_roam_distance", self.max_roam_distance)?;
        check_positive("stay_region", "min_dwell_time", self.min_dwell_time)?;
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return Err(TripError::InvalidConfig {
                config: "stay_region",
                reason: format!("max_speed must be finite and non-negative, got {}", self.max_speed),
            });
        }
        Ok(())
    }
}

/// Thresholds of the consecutive-observation splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripSplitConfig {
    pub max_distance_from: f64,
    pub max_speed_from: f64,
    pub max_time_from: f64,
}

impl Default for TripSplitConfig {
    fn default() -> Self {
        TripSplitConfig { max_distance_from: 2_000.0, max_speed_from: 69.4, max_time_from: 1_800.0 }
    }
}

impl TripSplitConfig {
    pub fn validate(&self) -> Result<(), TripError> {
        check_positive("trip_split", "max_distance_from", self.max_distance_from)?;
        check_positive("trip_split", "max_speed_from", self.max_speed_from)?;
        check_positive("trip_split", "max_time_from", self.max_time_from)
    }
}

/// Ordered points between two trip ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub trip_id: String,
    pub device_id: String,
    pub points: Vec<LocationPoint>,
    /// Position of `points[0]` in the sequence the trip was cut from.
    pub first_index: usize,
    pub label: Option<ModeLabel>,
}

impl Trip {
    pub fn new(
        trip_id: impl Into<String>,
        device_id: impl Into<String>,
        points: Vec<LocationPoint>,
        first_index: usize,
    ) -> Result<Self, TripError> {
        let ordered = points.windows(2).all(|w| w[0].timestamp < w[1].timestamp);
        if points.len() < 2 || !ordered {
            return Err(TripError::Degenerate);
        }
        Ok(Trip { trip_id: trip_id.into(), device_id: device_id.into(), points, first_index, label: None })
    }

    pub fn origin(&self) -> LatLon {
        self.points[0].position()
    }

    pub fn destination(&self) -> LatLon {
        self.points[self.points.len() - 1].position()
    }

    pub fn start_time(&self) -> f64 {
        self.points[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.points[self.points.len() - 1].timestamp
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }
}

pub(crate) fn trip_id(device_id: &str, ordinal: usize) -> String {
    format!("{device_id}-{ordinal:05}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        FilterConfig::default().validate().unwrap();
        StayRegionConfig::default().validate().unwrap();
        TripSplitConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        assert!(FilterConfig { min_accuracy: 0.0, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { max_jump_speed: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(StayRegionConfig { min_dwell_time: -1.0, ..Default::default() }.validate().is_err());
        assert!(StayRegionConfig { max_speed: 0.0, ..Default::default() }.validate().is_ok());
        assert!(TripSplitConfig { max_time_from: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn single_point_trip_is_degenerate() {
        let p = LocationPoint::new("d", 0.0, 0.0, 0.0, None, None).unwrap();
        assert_eq!(Trip::new("t", "d", vec![p], 0), Err(TripError::Degenerate));
    }
}
