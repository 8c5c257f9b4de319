//! Geographic and temporal primitives.
//!
//! Point-to-point distances are great-circle (haversine) on a sphere of
//! radius [`EARTH_RADIUS_M`]. Point-to-segment distances locate the nearest
//! point of the segment in a local equirectangular projection centred on the
//! query point and then measure it with haversine.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid {field} value {value}")]
    InvalidField { field: &'static str, value: f64 },
    #[error("speed undefined for time delta {dt} s")]
    UndefinedSpeed { dt: f64 },
    #[error("point for device `{found}` in sequence of device `{expected}`")]
    DeviceMismatch { expected: String, found: String },
}

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    /// Validated constructor.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = LatLon { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate { lat: self.lat, lon: self.lon })
        }
    }

    fn lerp(self, other: LatLon, t: f64) -> LatLon {
        LatLon {
            lat: self.lat + (other.lat - self.lat) * t,
            lon: self.lon + (other.lon - self.lon) * t,
        }
    }
}

/// One timestamped observation of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationPoint {
    pub device_id: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: f64,
    /// Horizontal accuracy radius in meters.
    pub accuracy: Option<f64>,
    /// Instantaneous speed reported by the device, m/s.
    pub speed: Option<f64>,
}

impl LocationPoint {
    pub fn new(
        device_id: impl Into<String>,
        latitude: f64,
        longitude: f64,
        timestamp: f64,
        accuracy: Option<f64>,
        speed: Option<f64>,
    ) -> Result<Self, GeoError> {
        let p = LocationPoint {
            device_id: device_id.into(),
            latitude,
            longitude,
            timestamp,
            accuracy,
            speed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        self.position().validate()?;
        if !self.timestamp.is_finite() {
            return Err(GeoError::InvalidField { field: "timestamp", value: self.timestamp });
        }
        for (field, v) in [("accuracy", self.accuracy), ("speed", self.speed)] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(GeoError::InvalidField { field, value: v });
                }
            }
        }
        Ok(())
    }

    pub fn position(&self) -> LatLon {
        LatLon { lat: self.latitude, lon: self.longitude }
    }
}

/// Time-ordered points of a single device with unique timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSequence {
    device_id: String,
    points: Vec<LocationPoint>,
}

impl PointSequence {
    /// Sorts by timestamp (stable) and collapses equal timestamps, keeping
    /// the first record of each run.
    pub fn new(device_id: impl Into<String>, mut points: Vec<LocationPoint>) -> Result<Self, GeoError> {
        let device_id = device_id.into();
        for p in &points {
            if p.device_id != device_id {
                return Err(GeoError::DeviceMismatch {
                    expected: device_id,
                    found: p.device_id.clone(),
                });
            }
            p.validate()?;
        }
        points.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        points.dedup_by(|later, earlier| later.timestamp == earlier.timestamp);
        Ok(PointSequence { device_id, points })
    }

    /// Wraps points already known to be valid, sorted and deduplicated.
    pub(crate) fn from_sorted_unchecked(device_id: String, points: Vec<LocationPoint>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        PointSequence { device_id, points }
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn points(&self) -> &[LocationPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<LocationPoint> {
        self.points
    }
}

/// Groups points by device into sequences, ordered by device id.
pub fn group_by_device(points: Vec<LocationPoint>) -> Result<Vec<PointSequence>, GeoError> {
    let mut by_device: std::collections::BTreeMap<String, Vec<LocationPoint>> = Default::default();
    for p in points {
        by_device.entry(p.device_id.clone()).or_default().push(p);
    }
    by_device
        .into_iter()
        .map(|(id, pts)| PointSequence::new(id, pts))
        .collect()
}

/// Straight piece of a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoSegment {
    pub start: LatLon,
    pub end: LatLon,
}

impl GeoSegment {
    pub fn new(start: LatLon, end: LatLon) -> Result<Self, GeoError> {
        start.validate()?;
        end.validate()?;
        Ok(GeoSegment { start, end })
    }

    /// (min_lat, min_lon, max_lat, max_lon)
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        (
            self.start.lat.min(self.end.lat),
            self.start.lon.min(self.end.lon),
            self.start.lat.max(self.end.lat),
            self.start.lon.max(self.end.lon),
        )
    }
}

/// Great-circle distance in meters, without input validation.
#[inline]
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi * 0.5).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: LatLon, b: LatLon) -> Result<f64, GeoError> {
    a.validate()?;
    b.validate()?;
    Ok(haversine_m(a, b))
}

/// Distance in meters from `p` to the closest point of `s`.
///
/// Never exceeds the haversine distance to either endpoint; zero for points
/// on the segment. Degenerate segments reduce to point distance.
pub fn segment_point_distance(p: LatLon, s: &GeoSegment) -> f64 {
    let to_start = haversine_m(p, s.start);
    let to_end = haversine_m(p, s.end);
    let endpoint_min = to_start.min(to_end);
    if s.start == s.end {
        return to_start;
    }
    // Local planar frame in degrees of latitude, longitude scaled by cos(lat).
    let kx = p.lat.to_radians().cos();
    let (ax, ay) = ((s.start.lon - p.lon) * kx, s.start.lat - p.lat);
    let (bx, by) = ((s.end.lon - p.lon) * kx, s.end.lat - p.lat);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return endpoint_min;
    }
    let t = -(ax * dx + ay * dy) / len2;
    if t <= 0.0 || t >= 1.0 {
        return endpoint_min;
    }
    haversine_m(p, s.start.lerp(s.end, t)).min(endpoint_min)
}

/// Average speed between two observations in m/s.
pub fn pairwise_speed(a: &LocationPoint, b: &LocationPoint) -> Result<f64, GeoError> {
    let dt = b.timestamp - a.timestamp;
    if !(dt > 0.0) {
        return Err(GeoError::UndefinedSpeed { dt });
    }
    Ok(haversine_m(a.position(), b.position()) / dt)
}
