//! Seeded generator of labelled trajectories and modal networks.
//!
//! Stands in for survey data with known modes. Each device alternates between
//! stays (sparse, near-stationary fixes) and trips. Car, bus and metro trips
//! follow highway, bus and rail polylines; walk trips and a share of car
//! trips wander freely. All speed profiles, dropout rates and noise levels
//! are invented defaults.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::features::NetworkKind;
use crate::geo::{haversine_m, LatLon, LocationPoint, EARTH_RADIUS_M};
use crate::mode::{Mode, N_MODES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("{mode} trips need a non-empty {network} network")]
    MissingNetwork { mode: Mode, network: NetworkKind },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Mean and standard deviation of a cruising speed (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedProfile {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub rail_lines: usize,
    pub bus_lines: usize,
    pub highway_lines: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec { rail_lines: 5, bus_lines: 25, highway_lines: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Total trips, split by `mode_mix` with largest-remainder rounding.
    pub n_trips: usize,
    /// Shares in mode order car, metro, bus, walk.
    pub mode_mix: [f64; N_MODES],
    /// Explicit per-mode counts; overrides `n_trips` and `mode_mix`.
    pub trips_per_mode: Option<[usize; N_MODES]>,
    pub max_trips_per_device: usize,
    pub speed_car: SpeedProfile,
    pub speed_metro: SpeedProfile,
    pub speed_bus: SpeedProfile,
    pub speed_walk: SpeedProfile,
    /// Seconds between fixes while moving (jittered by +-20%).
    pub sample_interval: f64,
    /// GPS position noise sigma, metres.
    pub gps_noise: f64,
    /// Probability that a metro fix is lost.
    pub metro_dropout: f64,
    /// Probability of one contiguous signal-loss gap per metro trip.
    pub metro_gap_probability: f64,
    /// Gap length as a fraction of the trip duration.
    pub metro_gap_fraction: (f64, f64),
    /// Share of car trips off the highway network.
    pub car_off_network: f64,
    /// Per-fix probability of a poor-accuracy fix while moving.
    pub bad_accuracy_rate: f64,
    /// Per-fix probability of an extra fix teleported ~20 km away.
    pub jump_rate: f64,
    pub center: LatLon,
    /// Half-width of the study area in degrees.
    pub half_extent_deg: f64,
    pub networks: NetworkSpec,
    /// Epoch seconds of the first possible fix.
    pub start_time: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 42,
            n_trips: 1009,
            mode_mix: [0.193, 0.529, 0.159, 0.119],
            trips_per_mode: None,
            max_trips_per_device: 4,
            speed_car: SpeedProfile { mean: 12.0, sd: 4.0 },
            speed_metro: SpeedProfile { mean: 15.0, sd: 4.0 },
            speed_bus: SpeedProfile { mean: 6.0, sd: 1.5 },
            speed_walk: SpeedProfile { mean: 1.4, sd: 0.2 },
            sample_interval: 30.0,
            gps_noise: 8.0,
            metro_dropout: 0.3,
            metro_gap_probability: 0.5,
            metro_gap_fraction: (0.1, 0.4),
            car_off_network: 0.2,
            bad_accuracy_rate: 0.02,
            jump_rate: 0.01,
            center: LatLon { lat: 38.9, lon: -77.03 },
            half_extent_deg: 0.2,
            networks: NetworkSpec::default(),
            start_time: 1_498_867_200.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.trips_per_mode.is_none()
            && (self.mode_mix.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || self.mode_mix.iter().sum::<f64>() <= 0.0)
        {
            return bad("mode_mix must be non-negative with a positive sum".into());
        }
        if self.max_trips_per_device == 0 {
            return bad("max_trips_per_device must be at least 1".into());
        }
        for (name, p) in [
            ("car", self.speed_car),
            ("metro", self.speed_metro),
            ("bus", self.speed_bus),
            ("walk", self.speed_walk),
        ] {
            if !(p.mean > 0.0 && p.sd >= 0.0 && p.mean.is_finite() && p.sd.is_finite()) {
                return bad(format!("speed profile for {name} must have a positive mean"));
            }
        }
        if !(self.sample_interval >= 2.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval must be at least 2 s".into());
        }
        for (name, p) in [
            ("metro_dropout", self.metro_dropout),
            ("metro_gap_probability", self.metro_gap_probability),
            ("car_off_network", self.car_off_network),
            ("bad_accuracy_rate", self.bad_accuracy_rate),
            ("jump_rate", self.jump_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.metro_dropout >= 1.0 {
            return bad("metro_dropout must be below 1".into());
        }
        let (lo, hi) = self.metro_gap_fraction;
        if !(lo >= 0.0 && hi >= lo && hi < 1.0) {
            return bad("metro_gap_fraction must be an ordered pair in [0, 1)".into());
        }
        if !(self.gps_noise >= 0.0 && self.gps_noise.is_finite()) {
            return bad("gps_noise must be non-negative".into());
        }
        if !(self.half_extent_deg > 0.0 && self.half_extent_deg < 10.0) {
            return bad("half_extent_deg must lie in (0, 10)".into());
        }
        self.center.validate().map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        if !self.start_time.is_finite() {
            return bad("start_time must be finite".into());
        }
        Ok(())
    }

    /// Trip count per mode.
    pub fn mode_counts(&self) -> [usize; N_MODES] {
        self.trips_per_mode.unwrap_or_else(|| largest_remainder(self.n_trips, &self.mode_mix))
    }

    fn speed(&self, mode: Mode) -> SpeedProfile {
        match mode {
            Mode::Car => self.speed_car,
            Mode::Metro => self.speed_metro,
            Mode::Bus => self.speed_bus,
            Mode::Walk => self.speed_walk,
        }
    }
}

/// Apportions `total` by `weights` with the largest-remainder rule; ties in
/// the remainder go to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64; N_MODES]) -> [usize; N_MODES] {
    let sum: f64 = weights.iter().sum();
    let quotas = weights.map(|w| total as f64 * w / sum);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..N_MODES).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Polylines per network kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticNetworks {
    pub rail: Vec<Vec<LatLon>>,
    pub bus: Vec<Vec<LatLon>>,
    pub highway: Vec<Vec<LatLon>>,
}

impl SyntheticNetworks {
    pub fn get(&self, kind: NetworkKind) -> &[Vec<LatLon>] {
        match kind {
            NetworkKind::Rail => &self.rail,
            NetworkKind::Bus => &self.bus,
            NetworkKind::Highway => &self.highway,
        }
    }
}

/// True span and mode of one generated trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTrip {
    pub trip_id: String,
    pub device_id: String,
    pub mode: Mode,
    pub start_time: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// All fixes, grouped by device and time-ordered within each device.
    pub points: Vec<LocationPoint>,
    pub trips: Vec<GroundTruthTrip>,
}

/// Moves `north`/`east` metres from `p` on a local tangent plane.
fn offset(p: LatLon, north: f64, east: f64) -> LatLon {
    let dlat = (north / EARTH_RADIUS_M).to_degrees();
    let dlon = (east / (EARTH_RADIUS_M * p.lat.to_radians().cos())).to_degrees();
    LatLon { lat: p.lat + dlat, lon: p.lon + dlon }
}

fn random_walk_line(rng: &mut ChaCha8Rng, start: LatLon, heading: f64, length: f64, step: f64, turn_sd: f64) -> Vec<LatLon> {
    let turn = Normal::new(0.0, turn_sd).expect("finite sd");
    let mut pts = vec![start];
    let mut h = heading;
    let mut at = start;
    let mut walked = 0.0;
    while walked < length {
        h += turn.sample(rng);
        at = offset(at, step * h.cos(), step * h.sin());
        pts.push(at);
        walked += step;
    }
    pts
}

fn bearing_towards(from: LatLon, to: LatLon) -> f64 {
    let north = (to.lat - from.lat).to_radians() * EARTH_RADIUS_M;
    let east = (to.lon - from.lon).to_radians() * EARTH_RADIUS_M * from.lat.to_radians().cos();
    east.atan2(north)
}

fn random_point(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> LatLon {
    let e = spec.half_extent_deg;
    LatLon { lat: spec.center.lat + rng.random_range(-e..e), lon: spec.center.lon + rng.random_range(-e..e) }
}

/// Random-walk polylines crossing the study area.
pub fn generate_networks(spec: &SyntheticSpec) -> SyntheticNetworks {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let lines = |n: usize, len: (f64, f64), step: f64, turn_sd: f64, rng: &mut ChaCha8Rng| -> Vec<Vec<LatLon>> {
        (0..n)
            .map(|_| {
                let start = random_point(rng, spec);
                let heading = bearing_towards(start, spec.center) + rng.random_range(-0.6..0.6);
                let length = rng.random_range(len.0..len.1);
                random_walk_line(rng, start, heading, length, step, turn_sd)
            })
            .collect()
    };
    let n = spec.networks;
    SyntheticNetworks {
        rail: lines(n.rail_lines, (25_000.0, 40_000.0), 500.0, 0.12, &mut rng),
        bus: lines(n.bus_lines, (10_000.0, 25_000.0), 300.0, 0.3, &mut rng),
        highway: lines(n.highway_lines, (30_000.0, 45_000.0), 500.0, 0.1, &mut rng),
    }
}

/// Arc-length parametrised path.
struct Path {
    pts: Vec<LatLon>,
    cum: Vec<f64>,
}

impl Path {
    fn new(pts: Vec<LatLon>) -> Path {
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum[cum.len() - 1] + haversine_m(w[0], w[1]));
        }
        Path { pts, cum }
    }

    fn length(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    fn at(&self, s: f64) -> LatLon {
        let s = s.clamp(0.0, self.length());
        let i = self.cum.partition_point(|&c| c <= s).clamp(1, self.pts.len() - 1);
        let (a, b) = (self.pts[i - 1], self.pts[i]);
        let span = self.cum[i] - self.cum[i - 1];
        let f = if span > 0.0 { (s - self.cum[i - 1]) / span } else { 0.0 };
        LatLon { lat: a.lat + f * (b.lat - a.lat), lon: a.lon + f * (b.lon - a.lon) }
    }

    /// The piece `[s0, s0 + len]`, or `[s0 - len, s0]` reversed.
    fn piece(&self, s0: f64, len: f64, forward: bool) -> Path {
        let (lo, hi) = if forward { (s0, (s0 + len).min(self.length())) } else { ((s0 - len).max(0.0), s0) };
        let mut pts = vec![self.at(lo)];
        for (p, &c) in self.pts.iter().zip(&self.cum) {
            if c > lo && c < hi {
                pts.push(*p);
            }
        }
        pts.push(self.at(hi));
        if !forward {
            pts.reverse();
        }
        Path::new(pts)
    }
}

/// Piecewise motion: knots `(time offset, arc position, speed)`; between
/// knots the device moves linearly.
struct Motion {
    knots: Vec<(f64, f64, f64)>,
}

impl Motion {
    fn duration(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    fn state(&self, t: f64) -> (f64, f64) {
        let i = self.knots.partition_point(|k| k.0 <= t).clamp(1, self.knots.len() - 1);
        let (t0, s0, _) = self.knots[i - 1];
        let (t1, s1, v) = self.knots[i];
        let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let moving = s1 > s0;
        (s0 + f * (s1 - s0), if moving { v } else { 0.0 })
    }
}

/// Legs separated by stops: `(stop spacing m, stop dwell s, per-leg speed jitter)`.
fn stop_pattern(mode: Mode) -> ((f64, f64), (f64, f64), f64) {
    match mode {
        Mode::Car => ((600.0, 2_500.0), (0.0, 60.0), 0.2),
        Mode::Metro => ((1_000.0, 2_500.0), (20.0, 45.0), 0.1),
        Mode::Bus => ((250.0, 700.0), (10.0, 45.0), 0.2),
        Mode::Walk => ((150.0, 400.0), (0.0, 0.0), 0.1),
    }
}

fn speed_bounds(mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Car => (4.0, 33.0),
        Mode::Metro => (6.0, 30.0),
        Mode::Bus => (2.5, 12.0),
        Mode::Walk => (0.8, 2.2),
    }
}

fn plan_motion(rng: &mut ChaCha8Rng, mode: Mode, length: f64, cruise: f64) -> Motion {
    let ((sp_lo, sp_hi), (dw_lo, dw_hi), jitter) = stop_pattern(mode);
    let (v_lo, v_hi) = speed_bounds(mode);
    let mut knots = vec![(0.0, 0.0, 0.0)];
    let (mut t, mut s) = (0.0, 0.0);
    while s < length {
        let leg = rng.random_range(sp_lo..sp_hi).min(length - s);
        let v = (cruise * (1.0 + rng.random_range(-jitter..=jitter))).clamp(v_lo, v_hi);
        t += leg / v;
        s += leg;
        knots.push((t, s, v));
        if s < length && dw_hi > 0.0 {
            t += rng.random_range(dw_lo..=dw_hi);
            knots.push((t, s, 0.0));
        }
    }
    Motion { knots }
}

fn trip_length_range(mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Car => (3_000.0, 25_000.0),
        Mode::Metro => (3_000.0, 15_000.0),
        Mode::Bus => (2_000.0, 10_000.0),
        Mode::Walk => (1_000.0, 3_500.0),
    }
}

fn network_for(mode: Mode) -> Option<NetworkKind> {
    match mode {
        Mode::Car => Some(NetworkKind::Highway),
        Mode::Metro => Some(NetworkKind::Rail),
        Mode::Bus => Some(NetworkKind::Bus),
        Mode::Walk => None,
    }
}

fn choose_path(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    networks: &SyntheticNetworks,
    mode: Mode,
) -> Path {
    let (lo, hi) = trip_length_range(mode);
    let want = rng.random_range(lo..hi);
    let on_network = match mode {
        Mode::Car => !rng.random_bool(spec.car_off_network),
        Mode::Walk => false,
        _ => true,
    };
    if on_network {
        let lines = networks.get(network_for(mode).expect("network mode"));
        let mut best: Option<Path> = None;
        for _ in 0..8 {
            let line = Path::new(lines[rng.random_range(0..lines.len())].clone());
            let s0 = rng.random_range(0.0..=line.length());
            let forward = line.length() - s0 >= s0;
            let piece = line.piece(s0, want, forward);
            if piece.length() >= 0.6 * want {
                return piece;
            }
            if best.as_ref().is_none_or(|b| piece.length() > b.length()) {
                best = Some(piece);
            }
        }
        return best.expect("at least one attempt");
    }
    let start = random_point(rng, spec);
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let step = if mode == Mode::Walk { 50.0 } else { 200.0 };
    let turn_sd = if mode == Mode::Walk { 0.35 } else { 0.25 };
    let raw = Path::new(random_walk_line(rng, start, heading, want, step, turn_sd));
    raw.piece(0.0, want, true)
}

struct Fix {
    t: f64,
    pos: LatLon,
    accuracy: f64,
    speed: f64,
}

fn jitter_pos(rng: &mut ChaCha8Rng, p: LatLon, sigma: f64) -> LatLon {
    if sigma == 0.0 {
        return p;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    offset(p, n.sample(rng), n.sample(rng))
}

/// Stay fixes from `t_from` to `t_to` inclusive, sparse and near-stationary.
fn stay_fixes(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, at: LatLon, t_from: f64, t_to: f64, out: &mut Vec<Fix>) {
    let mut t = t_from;
    loop {
        out.push(Fix {
            t,
            pos: jitter_pos(rng, at, spec.gps_noise),
            accuracy: rng.random_range(5.0..30.0),
            speed: rng.random_range(0.0..0.5),
        });
        if t >= t_to {
            break;
        }
        t = (t + rng.random_range(120.0..300.0f64).round()).min(t_to);
    }
}

fn clean_speed(rng: &mut ChaCha8Rng, v: f64) -> f64 {
    if v == 0.0 {
        return rng.random_range(0.0..0.3);
    }
    (v + rng.random_range(-0.1..0.1) * v).max(0.0)
}

/// Generates devices, stays and trips. Deterministic for a given spec and
/// network set.
pub fn generate_synthetic(spec: &SyntheticSpec, networks: &SyntheticNetworks) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let counts = spec.mode_counts();
    for mode in Mode::ALL {
        if let Some(kind) = network_for(mode) {
            let needed = counts[mode.index()] > 0 && (mode != Mode::Car || spec.car_off_network < 1.0);
            if needed && networks.get(kind).iter().all(|l| l.len() < 2) {
                return Err(SynthError::MissingNetwork { mode, network: kind });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let mut modes: Vec<Mode> = Mode::ALL.iter().zip(counts).flat_map(|(&m, c)| std::iter::repeat_n(m, c)).collect();
    modes.shuffle(&mut rng);

    let mut points = Vec::new();
    let mut trips = Vec::new();
    let mut next = 0;
    let mut device = 0;
    while next < modes.len() {
        let k = rng.random_range(1..=spec.max_trips_per_device).min(modes.len() - next);
        let device_id = format!("dev-{device:05}");
        let mut fixes: Vec<Fix> = Vec::new();
        let mut t = spec.start_time + rng.random_range(0.0..6.0 * 3600.0f64).round();
        for (j, &mode) in modes[next..next + k].iter().enumerate() {
            let path = choose_path(&mut rng, spec, networks, mode);
            let prof = spec.speed(mode);
            let (v_lo, v_hi) = speed_bounds(mode);
            let cruise = (prof.mean + prof.sd * Normal::new(0.0, 1.0).expect("unit").sample(&mut rng)).clamp(v_lo, v_hi);
            let motion = plan_motion(&mut rng, mode, path.length(), cruise);

            // Origin stay ending exactly at departure.
            let dwell = rng.random_range(600.0..1_800.0f64).round();
            stay_fixes(&mut rng, spec, path.at(0.0), t, t + dwell, &mut fixes);
            let depart = t + dwell;
            let arrive = depart + motion.duration().ceil();

            let gap = if mode == Mode::Metro && rng.random_bool(spec.metro_gap_probability) {
                let (lo, hi) = spec.metro_gap_fraction;
                let len = rng.random_range(lo..=hi) * motion.duration();
                let start = rng.random_range(0.0..=(motion.duration() - len).max(0.0));
                Some((start, start + len))
            } else {
                None
            };
            let mut dt = 0.0;
            loop {
                dt += (spec.sample_interval * rng.random_range(0.8..1.2f64)).round().max(1.0);
                if depart + dt >= arrive {
                    break;
                }
                let (s, v) = motion.state(dt);
                let dropped = mode == Mode::Metro
                    && (rng.random_bool(spec.metro_dropout) || gap.is_some_and(|(a, b)| dt >= a && dt <= b));
                let bad = rng.random_bool(spec.bad_accuracy_rate);
                let jump = rng.random_bool(spec.jump_rate);
                if dropped {
                    continue;
                }
                let pos = jitter_pos(&mut rng, path.at(s), if bad { 25.0 * spec.gps_noise } else { spec.gps_noise });
                let speed = clean_speed(&mut rng, v);
                let accuracy = if bad { rng.random_range(150.0..500.0) } else { rng.random_range(5.0..30.0) };
                fixes.push(Fix { t: depart + dt, pos, accuracy, speed });
                if jump && depart + dt + 1.0 < arrive {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let far = offset(path.at(s), 20_000.0 * angle.cos(), 20_000.0 * angle.sin());
                    fixes.push(Fix { t: depart + dt + 1.0, pos: far, accuracy: rng.random_range(5.0..30.0), speed });
                }
            }

            // Destination stay starting exactly at arrival.
            let dwell = rng.random_range(600.0..1_800.0f64).round();
            let dest = path.at(path.length());
            stay_fixes(&mut rng, spec, dest, arrive, arrive + dwell, &mut fixes);
            trips.push(GroundTruthTrip {
                trip_id: format!("{device_id}-gt{j}"),
                device_id: device_id.clone(),
                mode,
                start_time: depart,
                end_time: arrive,
            });
            t = arrive + dwell + rng.random_range(3_600.0..5.0 * 3600.0f64).round();
        }
        for f in fixes {
            points.push(LocationPoint {
                device_id: device_id.clone(),
                latitude: f.pos.lat,
                longitude: f.pos.lon,
                timestamp: f.t,
                accuracy: Some(f.accuracy),
                speed: Some(f.speed),
            });
        }
        next += k;
        device += 1;
    }
    Ok(SyntheticData { points, trips })
}

/// Time overlap of two closed intervals.
pub fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Whether an extracted span matches a ground-truth span: their overlap
/// exceeds `min_fraction` of both durations.
pub fn spans_match(truth: (f64, f64), found: (f64, f64), min_fraction: f64) -> bool {
    let o = overlap(truth, found);
    let longest = (truth.1 - truth.0).max(found.1 - found.0);
    longest > 0.0 && o > min_fraction * longest
}

/// Share of ground-truth trips matched by some extracted span of the same
/// device (see [`spans_match`]).
pub fn recovery_rate(truth: &[GroundTruthTrip], extracted: &[(String, f64, f64)], min_fraction: f64) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let mut by_device: std::collections::HashMap<&str, Vec<(f64, f64)>> = std::collections::HashMap::new();
    for (d, s, e) in extracted {
        by_device.entry(d.as_str()).or_default().push((*s, *e));
    }
    let hits = truth
        .iter()
        .filter(|g| {
            by_device
                .get(g.device_id.as_str())
                .is_some_and(|v| v.iter().any(|&f| spans_match((g.start_time, g.end_time), f, min_fraction)))
        })
        .count();
    hits as f64 / truth.len() as f64
}

/// Ground-truth mode of the span with the largest overlap, if any overlaps.
pub fn label_by_overlap(truth: &[GroundTruthTrip], device: &str, span: (f64, f64)) -> Option<Mode> {
    let mut best: Option<(f64, Mode)> = None;
    for g in truth.iter().filter(|g| g.device_id == device) {
        let o = overlap((g.start_time, g.end_time), span);
        if o > 0.0 && best.is_none_or(|(b, _)| o > b) {
            best = Some((o, g.mode));
        }
    }
    best.map(|(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SyntheticSpec {
        SyntheticSpec { n_trips: n, ..Default::default() }
    }

    #[test]
    fn survey_mix_counts() {
        let c = largest_remainder(1009, &[0.193, 0.529, 0.159, 0.119]);
        assert_eq!(c, [195, 534, 160, 120]);
        assert_eq!(largest_remainder(2000, &[0.193, 0.529, 0.159, 0.119]).iter().sum::<usize>(), 2000);
        assert_eq!(largest_remainder(3, &[1.0, 1.0, 1.0, 1.0]), [1, 1, 1, 0]);
    }

    #[test]
    fn walk_only_spec() {
        let spec = SyntheticSpec { trips_per_mode: Some([0, 0, 0, 100]), ..Default::default() };
        let data = generate_synthetic(&spec, &SyntheticNetworks::default()).unwrap();
        assert_eq!(data.trips.len(), 100);
        assert!(data.trips.iter().all(|t| t.mode == Mode::Walk));
    }

    #[test]
    fn missing_network_is_an_error() {
        let spec = SyntheticSpec { trips_per_mode: Some([0, 5, 0, 0]), ..Default::default() };
        let nets = SyntheticNetworks { rail: vec![], ..generate_networks(&spec) };
        assert_eq!(
            generate_synthetic(&spec, &nets).unwrap_err(),
            SynthError::MissingNetwork { mode: Mode::Metro, network: NetworkKind::Rail }
        );
    }

    #[test]
    fn deterministic() {
        let spec = small(40);
        let nets = generate_networks(&spec);
        assert_eq!(nets, generate_networks(&spec));
        assert_eq!(generate_synthetic(&spec, &nets).unwrap(), generate_synthetic(&spec, &nets).unwrap());
        let other = SyntheticSpec { seed: 7, ..spec };
        assert_ne!(generate_synthetic(&other, &nets).unwrap().points, generate_synthetic(&small(40), &nets).unwrap().points);
    }

    #[test]
    fn per_device_times_increase() {
        let spec = small(60);
        let data = generate_synthetic(&spec, &generate_networks(&spec)).unwrap();
        for w in data.points.windows(2) {
            if w[0].device_id == w[1].device_id {
                assert!(w[1].timestamp > w[0].timestamp);
            }
        }
        for t in &data.trips {
            assert!(t.end_time > t.start_time);
        }
    }

    fn density(data: &SyntheticData, mode: Mode) -> f64 {
        let mut pts = 0usize;
        let mut secs = 0.0;
        for g in data.trips.iter().filter(|g| g.mode == mode) {
            pts += data
                .points
                .iter()
                .filter(|p| p.device_id == g.device_id && p.timestamp > g.start_time && p.timestamp < g.end_time)
                .count();
            secs += g.end_time - g.start_time;
        }
        pts as f64 / secs
    }

    #[test]
    fn metro_dropout_halves_density() {
        let spec = SyntheticSpec {
            trips_per_mode: Some([60, 60, 0, 0]),
            metro_dropout: 0.5,
            jump_rate: 0.0,
            ..Default::default()
        };
        let data = generate_synthetic(&spec, &generate_networks(&spec)).unwrap();
        assert!(density(&data, Mode::Metro) <= 0.5 * density(&data, Mode::Car));
    }

    #[test]
    fn network_trips_stay_near_their_lines() {
        let spec = SyntheticSpec { trips_per_mode: Some([0, 0, 10, 0]), gps_noise: 0.0, bad_accuracy_rate: 0.0, jump_rate: 0.0, ..Default::default() };
        let nets = generate_networks(&spec);
        let bus = crate::features::ModalNetwork::from_polylines(NetworkKind::Bus, &nets.bus, 0.01).unwrap();
        let data = generate_synthetic(&spec, &nets).unwrap();
        for p in &data.points {
            assert!(bus.nearest_line_distance(p.position()).unwrap() < 1.0);
        }
    }

    #[test]
    fn overlap_rules() {
        assert_eq!(overlap((0.0, 10.0), (5.0, 20.0)), 5.0);
        assert_eq!(overlap((0.0, 1.0), (2.0, 3.0)), 0.0);
        assert!(spans_match((0.0, 100.0), (5.0, 100.0), 0.8));
        assert!(!spans_match((0.0, 100.0), (0.0, 300.0), 0.8));
        let truth = vec![GroundTruthTrip { trip_id: "g".into(), device_id: "d".into(), mode: Mode::Bus, start_time: 0.0, end_time: 100.0 }];
        assert_eq!(recovery_rate(&truth, &[("d".into(), 10.0, 100.0)], 0.8), 1.0);
        assert_eq!(recovery_rate(&truth, &[("e".into(), 10.0, 100.0)], 0.8), 0.0);
        assert_eq!(label_by_overlap(&truth, "d", (50.0, 500.0)), Some(Mode::Bus));
        assert_eq!(label_by_overlap(&truth, "d", (150.0, 500.0)), None);
    }
}
