use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::geo::{segment_point_distance, GeoSegment, LatLon, EARTH_RADIUS_M};

/// Default grid cell edge in degrees (about 1.1 km of latitude).
pub const DEFAULT_CELL_DEG: f64 = 0.01;

/// Cells are enlarged until the grid has at most this many.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Rail,
    Bus,
    Highway,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [NetworkKind::Rail, NetworkKind::Bus, NetworkKind::Highway];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Rail => "rail",
            NetworkKind::Bus => "bus",
            NetworkKind::Highway => "highway",
        })
    }
}

/// Uniform lat/lon grid; each cell lists the segments whose bounding box
/// overlaps it.
#[derive(Debug, Clone)]
struct Grid {
    lat0: f64,
    lon0: f64,
    cell: f64,
    rows: i64,
    cols: i64,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn build(segments: &[GeoSegment], cell_deg: f64) -> Grid {
        let (mut lat_lo, mut lon_lo, mut lat_hi, mut lon_hi) =
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in segments {
            let (a, b, c, d) = s.bbox();
            lat_lo = lat_lo.min(a);
            lon_lo = lon_lo.min(b);
            lat_hi = lat_hi.max(c);
            lon_hi = lon_hi.max(d);
        }
        if segments.is_empty() {
            return Grid { lat0: 0.0, lon0: 0.0, cell: cell_deg, rows: 0, cols: 0, cells: Vec::new() };
        }
        let mut cell = cell_deg;
        let dims = |cell: f64| {
            (((lat_hi - lat_lo) / cell).floor() as i64 + 1, ((lon_hi - lon_lo) / cell).floor() as i64 + 1)
        };
        let (mut rows, mut cols) = dims(cell);
        while (rows as usize).saturating_mul(cols as usize) > MAX_CELLS {
            cell *= 2.0;
            (rows, cols) = dims(cell);
        }
        if cell != cell_deg {
            log::warn!("grid cell enlarged from {cell_deg} to {cell} degrees");
        }
        let mut grid = Grid {
            lat0: lat_lo,
            lon0: lon_lo,
            cell,
            rows,
            cols,
            cells: vec![Vec::new(); (rows * cols) as usize],
        };
        for (i, s) in segments.iter().enumerate() {
            let (a, b, c, d) = s.bbox();
            let (r1, c1) = grid.cell_of(a, b);
            let (r2, c2) = grid.cell_of(c, d);
            for r in r1.max(0)..=r2.min(rows - 1) {
                for c in c1.max(0)..=c2.min(cols - 1) {
                    grid.cells[(r * cols + c) as usize].push(i as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (i64, i64) {
        (((lat - self.lat0) / self.cell).floor() as i64, ((lon - self.lon0) / self.cell).floor() as i64)
    }

    fn cell(&self, r: i64, c: i64) -> &[u32] {
        &self.cells[(r * self.cols + c) as usize]
    }
}

/// Polyline network of one mode behind a grid index.
#[derive(Debug, Clone)]
pub struct ModalNetwork {
    kind: NetworkKind,
    segments: Vec<GeoSegment>,
    grid: Grid,
}

/// The three networks used for proximity features.
#[derive(Debug, Clone)]
pub struct NetworkSet {
    pub rail: ModalNetwork,
    pub bus: ModalNetwork,
    pub highway: ModalNetwork,
}

impl NetworkSet {
    pub fn get(&self, kind: NetworkKind) -> &ModalNetwork {
        match kind {
            NetworkKind::Rail => &self.rail,
            NetworkKind::Bus => &self.bus,
            NetworkKind::Highway => &self.highway,
        }
    }
}

impl ModalNetwork {
    pub fn new(kind: NetworkKind, segments: Vec<GeoSegment>, cell_deg: f64) -> Result<Self, FeatureError> {
        if !(cell_deg.is_finite() && cell_deg > 0.0) {
            return Err(FeatureError::Parse {
                file: String::new(),
                index: 0,
                reason: format!("grid cell size must be positive, got {cell_deg}"),
            });
        }
        let grid = Grid::build(&segments, cell_deg);
        Ok(ModalNetwork { kind, segments, grid })
    }

    /// Splits each polyline into consecutive segments.
    pub fn from_polylines(kind: NetworkKind, polylines: &[Vec<LatLon>], cell_deg: f64) -> Result<Self, FeatureError> {
        let segments = polylines
            .iter()
            .flat_map(|line| line.windows(2).map(|w| GeoSegment { start: w[0], end: w[1] }))
            .collect();
        Self::new(kind, segments, cell_deg)
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn segments(&self) -> &[GeoSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Nearest segment by exhaustive scan: `(distance, index)`, ties to the
    /// lowest index.
    pub fn nearest_linear(&self, p: LatLon) -> Result<(f64, usize), FeatureError> {
        if self.segments.is_empty() {
            return Err(FeatureError::EmptyNetwork(self.kind));
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, s) in self.segments.iter().enumerate() {
            let d = segment_point_distance(p, s);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best)
    }

    /// Nearest segment via expanding square rings of grid cells. Stops once
    /// the best distance found is below a lower bound on the distance to
    /// anything outside the searched square. Same answer as
    /// [`nearest_linear`](Self::nearest_linear).
    pub fn nearest(&self, p: LatLon) -> Result<(f64, usize), FeatureError> {
        if self.segments.is_empty() {
            return Err(FeatureError::EmptyNetwork(self.kind));
        }
        let g = &self.grid;
        let (r0, c0) = g.cell_of(p.lat, p.lon);
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |idx: u32, best: &mut (f64, usize)| {
            let i = idx as usize;
            let d = segment_point_distance(p, &self.segments[i]);
            if d < best.0 || (d == best.0 && i < best.1) {
                *best = (d, i);
            }
        };
        let mut ring: i64 = 0;
        loop {
            let (rlo, rhi, clo, chi) = (r0 - ring, r0 + ring, c0 - ring, c0 + ring);
            for r in rlo.max(0)..=rhi.min(g.rows - 1) {
                let on_edge_row = r == rlo || r == rhi;
                if on_edge_row {
                    for c in clo.max(0)..=chi.min(g.cols - 1) {
                        g.cell(r, c).iter().for_each(|&i| consider(i, &mut best));
                    }
                } else {
                    for c in [clo, chi] {
                        if (0..g.cols).contains(&c) {
                            g.cell(r, c).iter().for_each(|&i| consider(i, &mut best));
                        }
                    }
                }
            }
            let covers_all = rlo <= 0 && clo <= 0 && rhi >= g.rows - 1 && chi >= g.cols - 1;
            if covers_all || best.0 < self.outside_lower_bound(p, rlo, rhi, clo, chi) {
                return Ok(best);
            }
            ring += 1;
        }
    }

    /// Lower bound (m) on the distance from `p` to any point of a segment
    /// that is not registered in the cell square `[rlo, rhi] x [clo, chi]`.
    fn outside_lower_bound(&self, p: LatLon, rlo: i64, rhi: i64, clo: i64, chi: i64) -> f64 {
        let g = &self.grid;
        let mut lb = f64::INFINITY;
        // Crossing a latitude line costs at least the latitude difference.
        if rlo > 0 {
            lb = lb.min((p.lat - (g.lat0 + rlo as f64 * g.cell)).to_radians());
        }
        if rhi < g.rows - 1 {
            lb = lb.min((g.lat0 + (rhi + 1) as f64 * g.cell - p.lat).to_radians());
        }
        // Beyond a meridian at longitude offset a: asin(sin a * cos lat).
        let cos_lat = p.lat.to_radians().cos().abs();
        let across = |a_deg: f64| (a_deg.to_radians().min(std::f64::consts::FRAC_PI_2).sin() * cos_lat).asin();
        if clo > 0 {
            lb = lb.min(across(p.lon - (g.lon0 + clo as f64 * g.cell)));
        }
        if chi < g.cols - 1 {
            lb = lb.min(across(g.lon0 + (chi + 1) as f64 * g.cell - p.lon));
        }
        (lb.max(0.0) * EARTH_RADIUS_M) * (1.0 - 1e-9)
    }

    /// Distance (m) from `p` to the closest segment.
    pub fn nearest_line_distance(&self, p: LatLon) -> Result<f64, FeatureError> {
        self.nearest(p).map(|(d, _)| d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ll(lat: f64, lon: f64) -> LatLon {
        LatLon { lat, lon }
    }

    fn random_network(rng: &mut ChaCha8Rng, n: usize, cell: f64) -> ModalNetwork {
        let segs = (0..n)
            .map(|_| {
                let a = ll(rng.random_range(38.5..39.5), rng.random_range(-77.5..-76.5));
                let b = ll(a.lat + rng.random_range(-0.03..0.03), a.lon + rng.random_range(-0.03..0.03));
                GeoSegment { start: a, end: b }
            })
            .collect();
        ModalNetwork::new(NetworkKind::Bus, segs, cell).unwrap()
    }

    #[test]
    fn every_segment_registered_in_overlapping_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = random_network(&mut rng, 300, 0.01);
        let g = &net.grid;
        for (i, s) in net.segments.iter().enumerate() {
            let (a, b, c, d) = s.bbox();
            let (r1, c1) = g.cell_of(a, b);
            let (r2, c2) = g.cell_of(c, d);
            for r in r1..=r2 {
                for c in c1..=c2 {
                    assert!(g.cell(r, c).contains(&(i as u32)));
                }
            }
        }
    }

    #[test]
    fn grid_equals_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for cell in [0.002, 0.01, 0.05] {
            let net = random_network(&mut rng, 500, cell);
            for _ in 0..300 {
                let p = ll(rng.random_range(38.0..40.0), rng.random_range(-78.0..-76.0));
                assert_eq!(net.nearest(p).unwrap(), net.nearest_linear(p).unwrap());
            }
        }
    }

    #[test]
    fn on_line_is_zero() {
        let net = ModalNetwork::from_polylines(
            NetworkKind::Rail,
            &[vec![ll(38.9, -77.0), ll(38.95, -77.0), ll(38.95, -76.9)]],
            DEFAULT_CELL_DEG,
        )
        .unwrap();
        assert_eq!(net.segments().len(), 2);
        assert!(net.nearest_line_distance(ll(38.92, -77.0)).unwrap() < 1e-6);
        assert!(net.nearest_line_distance(ll(38.95, -76.95)).unwrap() < 1e-6);
    }

    #[test]
    fn empty_network_errors() {
        let net = ModalNetwork::new(NetworkKind::Highway, vec![], DEFAULT_CELL_DEG).unwrap();
        assert_eq!(net.nearest_line_distance(ll(0.0, 0.0)), Err(FeatureError::EmptyNetwork(NetworkKind::Highway)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = GeoSegment { start: ll(38.9, -77.0), end: ll(38.91, -77.0) };
        let net = ModalNetwork::new(NetworkKind::Bus, vec![s, s, s], 0.001).unwrap();
        assert_eq!(net.nearest(ll(38.905, -76.99)).unwrap().1, 0);
    }
}
