use serde::{Deserialize, Serialize};

use super::StayRegionConfig;
use crate::geo::{haversine_m, pairwise_speed, LatLon, PointSequence};

/// A run of points `start..=end` where the device stayed put.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StayRegion {
    pub device_id: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub anchor: LatLon,
    pub entry_time: f64,
    pub exit_time: f64,
}

impl StayRegion {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Speed at each point: the reported instantaneous speed, or the average
/// speed from the previous point when missing (0 for the first point).
pub fn point_speeds(seq: &PointSequence) -> Vec<f64> {
    let pts = seq.points();
    pts.iter()
        .enumerate()
        .map(|(i, p)| match p.speed {
            Some(v) => v,
            None if i == 0 => 0.0,
            None => pairwise_speed(&pts[i - 1], p).unwrap_or(0.0),
        })
        .collect()
}

/// Greedy left-to-right stay-region detection.
///
/// The first unconsumed point becomes the anchor `p0`; the run grows while
/// every added point is within `D` of the anchor and has speed `<= V` (the
/// anchor itself must satisfy the speed cap too). The run is a stay region
/// iff its last timestamp minus the anchor's is `>= T`; then scanning resumes
/// after it, otherwise at the point following the anchor.
pub fn detect_stay_regions(seq: &PointSequence, cfg: &StayRegionConfig) -> Vec<StayRegion> {
    let pts = seq.points();
    let speeds = point_speeds(seq);
    let n = pts.len();
    let mut regions = Vec::new();
    let mut anchor = 0;
    while anchor < n {
        if speeds[anchor] > cfg.max_speed {
            anchor += 1;
            continue;
        }
        let origin = pts[anchor].position();
        let mut end = anchor;
        while end + 1 < n
            && speeds[end + 1] <= cfg.max_speed
            && haversine_m(origin, pts[end + 1].position()) <= cfg.max_roam_distance
        {
            end += 1;
        }
        if pts[end].timestamp - pts[anchor].timestamp >= cfg.min_dwell_time {
            regions.push(StayRegion {
                device_id: seq.device_id().to_string(),
                start: anchor,
                end,
                anchor: origin,
                entry_time: pts[anchor].timestamp,
                exit_time: pts[end].timestamp,
            });
            anchor = end + 1;
        } else {
            anchor += 1;
        }
    }
    regions
}
