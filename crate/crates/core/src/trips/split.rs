use super::{trip_id, StayRegion, Trip, TripSplitConfig};
use crate::geo::{haversine_m, PointSequence};

fn push_trip(trips: &mut Vec<Trip>, seq: &PointSequence, start: usize, end: usize) {
    let points = seq.points()[start..=end].to_vec();
    if let Ok(t) = Trip::new(trip_id(seq.device_id(), trips.len()), seq.device_id(), points, start) {
        trips.push(t);
    }
}

/// Cuts the sequence at stay regions.
///
/// A trip between two regions runs from the exit point of the earlier
/// region to the entry point of the later one and needs at least one point
/// strictly between them. The leading trip runs from the first point of the
/// sequence to the first region's entry point, the trailing one from the last
/// region's exit point to the end of the sequence; those need two points.
pub fn split_by_stay_regions(seq: &PointSequence, regions: &[StayRegion]) -> Vec<Trip> {
    let n = seq.len();
    let mut trips = Vec::new();
    if n == 0 {
        return trips;
    }
    if regions.is_empty() {
        push_trip(&mut trips, seq, 0, n - 1);
        return trips;
    }
    if regions[0].start >= 1 {
        push_trip(&mut trips, seq, 0, regions[0].start);
    }
    for pair in regions.windows(2) {
        let (exit, entry) = (pair[0].end, pair[1].start);
        if entry >= exit + 2 {
            push_trip(&mut trips, seq, exit, entry);
        }
    }
    let last = regions[regions.len() - 1].end;
    if last + 1 < n {
        push_trip(&mut trips, seq, last, n - 1);
    }
    trips
}

/// Consecutive-observation splitting.
///
/// The next point stays in the current trip iff its distance, elapsed time
/// and implied speed from the current point are all within the thresholds
/// (a zero time step counts as the same trip). Single-point trips are
/// dropped, so a device with one observation yields nothing.
pub fn split_by_thresholds(seq: &PointSequence, cfg: &TripSplitConfig) -> Vec<Trip> {
    let pts = seq.points();
    let mut trips = Vec::new();
    if pts.len() < 2 {
        return trips;
    }
    let mut start = 0;
    for i in 0..pts.len() - 1 {
        let (cur, next) = (&pts[i], &pts[i + 1]);
        let time_from = next.timestamp - cur.timestamp;
        let distance_from = haversine_m(cur.position(), next.position());
        let same_trip = if time_from <= 0.0 {
            true
        } else {
            let speed_from = distance_from / time_from;
            distance_from <= cfg.max_distance_from
                && time_from <= cfg.max_time_from
                && speed_from <= cfg.max_speed_from
        };
        if !same_trip {
            if i > start {
                push_trip(&mut trips, seq, start, i);
            }
            start = i + 1;
        }
    }
    if pts.len() - 1 > start {
        push_trip(&mut trips, seq, start, pts.len() - 1);
    }
    trips
}
