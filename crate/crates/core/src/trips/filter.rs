use super::FilterConfig;
use crate::geo::{haversine_m, LocationPoint, PointSequence};

/// Drops low-accuracy records, then scans left to right dropping any point
/// whose speed from the previously kept point exceeds `max_jump_speed`.
pub fn filter_points(seq: &PointSequence, cfg: &FilterConfig) -> PointSequence {
    let mut kept: Vec<LocationPoint> = Vec::with_capacity(seq.len());
    for p in seq.points() {
        if p.accuracy.is_some_and(|a| a > cfg.min_accuracy) {
            continue;
        }
        if let Some(prev) = kept.last() {
            let dt = p.timestamp - prev.timestamp;
            let dist = haversine_m(prev.position(), p.position());
            if dist > cfg.max_jump_speed * dt {
                continue;
            }
        }
        kept.push(p.clone());
    }
    PointSequence::from_sorted_unchecked(seq.device_id().to_string(), kept)
}
