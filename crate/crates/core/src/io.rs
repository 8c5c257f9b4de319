//! CSV formats of the pipeline stages.
//!
//! | file | columns |
//! |------|---------|
//! | points | `device_id,timestamp,latitude,longitude,accuracy,speed` |
//! | trips | `trip_id,device_id,start_time,end_time,n_points,first_index` |
//! | trip points | `trip_id,device_id,timestamp,latitude,longitude,accuracy,speed` |
//! | ground truth | `trip_id,device_id,mode,start_time,end_time` |
//! | features | `trip_id`, 14 raw columns, 14 `n_` normalized columns, `label` |
//! | labelled trips | `trip_id,device_id,start_time,end_time,trip_time,trip_length,mode,provenance,p_car,p_metro,p_bus,p_walk` |
//!
//! Timestamps are read as epoch seconds or RFC 3339 / `YYYY-MM-DD HH:MM:SS`
//! (UTC) text and always written as epoch seconds. Empty optional fields
//! mean "not reported". Every writer goes through [`write_atomic`].

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::features::{FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::geo::LocationPoint;
use crate::mode::{Mode, ModeLabel, Provenance, N_MODES};
use crate::synth::GroundTruthTrip;
use crate::trips::Trip;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IoError {
    #[error("{file}: {reason}")]
    Io { file: String, reason: String },
    /// `record` counts data rows from 1 (the header is not a record).
    #[error("{file}, record {record}: {reason}")]
    Parse { file: String, record: usize, reason: String },
}

impl IoError {
    pub fn file(&self) -> &str {
        match self {
            IoError::Io { file, .. } | IoError::Parse { file, .. } => file,
        }
    }

    pub fn record(&self) -> Option<usize> {
        match self {
            IoError::Parse { record, .. } => Some(*record),
            IoError::Io { .. } => None,
        }
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.partial"));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Io { file: path.display().to_string(), reason: e.to_string() }
}

/// Serialises rows into memory and writes them atomically.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
    write_atomic(path, &bytes).map_err(|e| io_err(path, e))
}

/// Header-indexed CSV rows with per-record error context.
struct Table {
    file: String,
    columns: HashMap<String, usize>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, IoError> {
        let file = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_path(path)
            .map_err(|e| io_err(path, e))?;
        let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
        let columns = headers.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        let mut records = Vec::new();
        for (i, r) in rdr.records().enumerate() {
            records.push(r.map_err(|e| IoError::Parse { file: file.clone(), record: i + 1, reason: e.to_string() })?);
        }
        Ok(Table { file, columns, records })
    }

    fn column(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.columns.get(*n).copied())
    }

    fn require(&self, names: &[&str]) -> Result<usize, IoError> {
        self.column(names).ok_or_else(|| IoError::Parse {
            file: self.file.clone(),
            record: 0,
            reason: format!("missing column `{}`", names[0]),
        })
    }

    fn err(&self, record: usize, reason: impl Into<String>) -> IoError {
        IoError::Parse { file: self.file.clone(), record: record + 1, reason: reason.into() }
    }

    fn text<'a>(&self, rec: &'a csv::StringRecord, col: usize) -> &'a str {
        rec.get(col).unwrap_or("")
    }

    fn f64_at(&self, i: usize, col: usize, name: &str) -> Result<f64, IoError> {
        let s = self.text(&self.records[i], col);
        s.parse::<f64>().map_err(|_| self.err(i, format!("{name}: `{s}` is not a number")))
    }

    fn opt_f64_at(&self, i: usize, col: Option<usize>, name: &str) -> Result<Option<f64>, IoError> {
        match col {
            Some(c) if !self.text(&self.records[i], c).is_empty() => self.f64_at(i, c, name).map(Some),
            _ => Ok(None),
        }
    }
}

/// Epoch seconds from a number or an RFC 3339 / `YYYY-MM-DD HH:MM:SS` string.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp() as f64 + f64::from(t.timestamp_subsec_nanos()) * 1e-9);
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"].iter().find_map(|fmt| {
        NaiveDateTime::parse_from_str(s, fmt)
            .ok()
            .map(|t| t.and_utc().timestamp() as f64 + f64::from(t.and_utc().timestamp_subsec_nanos()) * 1e-9)
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const POINT_HEADER: [&str; 6] = ["device_id", "timestamp", "latitude", "longitude", "accuracy", "speed"];

fn read_point_rows(t: &Table, with_trip: bool) -> Result<Vec<(String, LocationPoint)>, IoError> {
    let trip = if with_trip { Some(t.require(&["trip_id"])?) } else { None };
    let dev = t.require(&["device_id", "device", "id"])?;
    let ts = t.require(&["timestamp", "time", "datetime"])?;
    let lat = t.require(&["latitude", "lat"])?;
    let lon = t.require(&["longitude", "lon", "lng"])?;
    let acc = t.column(&["accuracy", "horizontal_accuracy"]);
    let spd = t.column(&["speed"]);
    let mut out = Vec::with_capacity(t.records.len());
    for (i, rec) in t.records.iter().enumerate() {
        let raw_ts = t.text(rec, ts);
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| t.err(i, format!("timestamp: cannot parse `{raw_ts}`")))?;
        let p = LocationPoint {
            device_id: t.text(rec, dev).to_string(),
            latitude: t.f64_at(i, lat, "latitude")?,
            longitude: t.f64_at(i, lon, "longitude")?,
            timestamp,
            accuracy: t.opt_f64_at(i, acc, "accuracy")?,
            speed: t.opt_f64_at(i, spd, "speed")?,
        };
        if p.device_id.is_empty() {
            return Err(t.err(i, "empty device_id"));
        }
        p.validate().map_err(|e| t.err(i, e.to_string()))?;
        out.push((trip.map(|c| t.text(rec, c).to_string()).unwrap_or_default(), p));
    }
    Ok(out)
}

pub fn read_points(path: &Path) -> Result<Vec<LocationPoint>, IoError> {
    let t = Table::read(path)?;
    Ok(read_point_rows(&t, false)?.into_iter().map(|(_, p)| p).collect())
}

fn point_fields(p: &LocationPoint) -> [String; 6] {
    [
        p.device_id.clone(),
        p.timestamp.to_string(),
        p.latitude.to_string(),
        p.longitude.to_string(),
        opt(p.accuracy),
        opt(p.speed),
    ]
}

pub fn write_points(path: &Path, points: &[LocationPoint]) -> Result<(), IoError> {
    write_csv(path, &POINT_HEADER, points.iter().map(|p| point_fields(p).to_vec()))
}

/// Writes the trip table and the per-trip point membership file.
pub fn write_trips(trips_path: &Path, points_path: &Path, trips: &[Trip]) -> Result<(), IoError> {
    write_csv(
        trips_path,
        &["trip_id", "device_id", "start_time", "end_time", "n_points", "first_index"],
        trips.iter().map(|t| {
            vec![
                t.trip_id.clone(),
                t.device_id.clone(),
                t.start_time().to_string(),
                t.end_time().to_string(),
                t.points.len().to_string(),
                t.first_index.to_string(),
            ]
        }),
    )?;
    let mut header = vec!["trip_id"];
    header.extend(POINT_HEADER);
    write_csv(
        points_path,
        &header,
        trips.iter().flat_map(|t| {
            t.points.iter().map(move |p| {
                let mut row = vec![t.trip_id.clone()];
                row.extend(point_fields(p));
                row
            })
        }),
    )
}

/// Rebuilds trips from a trip-points file, in order of first appearance.
/// `first_index` is not stored there and comes back as 0.
pub fn read_trip_points(path: &Path) -> Result<Vec<Trip>, IoError> {
    let t = Table::read(path)?;
    let rows = read_point_rows(&t, true)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (usize, Vec<LocationPoint>)> = HashMap::new();
    for (i, (trip_id, p)) in rows.into_iter().enumerate() {
        let entry = groups.entry(trip_id.clone()).or_insert_with(|| {
            order.push(trip_id.clone());
            (i, Vec::new())
        });
        entry.1.push(p);
    }
    order
        .into_iter()
        .map(|id| {
            let (first_row, points) = groups.remove(&id).expect("grouped");
            let device = points[0].device_id.clone();
            Trip::new(id.clone(), device, points, 0)
                .map_err(|e| t.err(first_row, format!("trip `{id}`: {e}")))
        })
        .collect()
}

pub fn write_ground_truth(path: &Path, trips: &[GroundTruthTrip]) -> Result<(), IoError> {
    write_csv(
        path,
        &["trip_id", "device_id", "mode", "start_time", "end_time"],
        trips.iter().map(|g| {
            vec![
                g.trip_id.clone(),
                g.device_id.clone(),
                g.mode.to_string(),
                g.start_time.to_string(),
                g.end_time.to_string(),
            ]
        }),
    )
}

fn parse_mode(t: &Table, i: usize, s: &str) -> Result<Mode, IoError> {
    s.parse().map_err(|e: crate::mode::UnknownMode| t.err(i, e.to_string()))
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthTrip>, IoError> {
    let t = Table::read(path)?;
    let (id, dev, mode) = (t.require(&["trip_id"])?, t.require(&["device_id"])?, t.require(&["mode"])?);
    let (start, end) = (t.require(&["start_time"])?, t.require(&["end_time"])?);
    let mut out = Vec::with_capacity(t.records.len());
    for (i, rec) in t.records.iter().enumerate() {
        let time = |c: usize, name: &str| {
            let s = t.text(rec, c);
            parse_timestamp(s).ok_or_else(|| t.err(i, format!("{name}: cannot parse `{s}`")))
        };
        let g = GroundTruthTrip {
            trip_id: t.text(rec, id).to_string(),
            device_id: t.text(rec, dev).to_string(),
            mode: parse_mode(&t, i, t.text(rec, mode))?,
            start_time: time(start, "start_time")?,
            end_time: time(end, "end_time")?,
        };
        if g.end_time < g.start_time {
            return Err(t.err(i, "end_time before start_time"));
        }
        out.push(g);
    }
    Ok(out)
}

fn feature_header() -> Vec<String> {
    let mut h = vec!["trip_id".to_string()];
    h.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    h.extend(FEATURE_NAMES.iter().map(|s| format!("n_{s}")));
    h.push("label".into());
    h
}

pub fn write_features(path: &Path, vectors: &[FeatureVector]) -> Result<(), IoError> {
    let header = feature_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        vectors.iter().map(|v| {
            let mut row = vec![v.trip_id.clone()];
            row.extend(v.raw.iter().map(|x| x.to_string()));
            match &v.normalized {
                Some(n) => row.extend(n.iter().map(|x| x.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), N_FEATURES)),
            }
            row.push(v.label.map(|m| m.to_string()).unwrap_or_default());
            row
        }),
    )
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>, IoError> {
    let t = Table::read(path)?;
    let id = t.require(&["trip_id"])?;
    let raw_cols = FEATURE_NAMES.iter().map(|n| t.require(&[n])).collect::<Result<Vec<_>, _>>()?;
    let norm_cols: Vec<Option<usize>> = FEATURE_NAMES.iter().map(|n| t.column(&[&format!("n_{n}")])).collect();
    let label = t.column(&["label", "mode"]);
    let mut out = Vec::with_capacity(t.records.len());
    for (i, rec) in t.records.iter().enumerate() {
        let mut raw = [0.0; N_FEATURES];
        for (j, &c) in raw_cols.iter().enumerate() {
            raw[j] = t.f64_at(i, c, FEATURE_NAMES[j])?;
        }
        let mut normalized = [0.0; N_FEATURES];
        let mut have_norm = true;
        for (j, c) in norm_cols.iter().enumerate() {
            match t.opt_f64_at(i, *c, FEATURE_NAMES[j])? {
                Some(v) => normalized[j] = v,
                None => have_norm = false,
            }
        }
        let label = match label.map(|c| t.text(rec, c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(parse_mode(&t, i, s)?),
            None => None,
        };
        out.push(FeatureVector {
            trip_id: t.text(rec, id).to_string(),
            raw,
            normalized: have_norm.then_some(normalized),
            label,
        });
    }
    Ok(out)
}

/// One row of the labelled-trip table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTrip {
    pub trip_id: String,
    pub device_id: String,
    pub start_time: f64,
    pub end_time: f64,
    pub trip_time: f64,
    pub trip_length: f64,
    pub label: ModeLabel,
    /// Class probabilities for imputed labels.
    pub probabilities: Option<[f64; N_MODES]>,
}

const LABELLED_HEADER: [&str; 12] = [
    "trip_id",
    "device_id",
    "start_time",
    "end_time",
    "trip_time",
    "trip_length",
    "mode",
    "provenance",
    "p_car",
    "p_metro",
    "p_bus",
    "p_walk",
];

fn provenance_str(p: Provenance) -> &'static str {
    match p {
        Provenance::GroundTruth => "ground_truth",
        Provenance::Imputed => "imputed",
    }
}

pub fn write_labelled_trips(path: &Path, trips: &[LabelledTrip]) -> Result<(), IoError> {
    write_csv(
        path,
        &LABELLED_HEADER,
        trips.iter().map(|t| {
            let mut row = vec![
                t.trip_id.clone(),
                t.device_id.clone(),
                t.start_time.to_string(),
                t.end_time.to_string(),
                t.trip_time.to_string(),
                t.trip_length.to_string(),
                t.label.mode.to_string(),
                provenance_str(t.label.provenance).to_string(),
            ];
            match t.probabilities {
                Some(p) => row.extend(p.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), N_MODES)),
            }
            row
        }),
    )
}

pub fn read_labelled_trips(path: &Path) -> Result<Vec<LabelledTrip>, IoError> {
    let t = Table::read(path)?;
    let cols = LABELLED_HEADER[..8].iter().map(|n| t.require(&[n])).collect::<Result<Vec<_>, _>>()?;
    let probs: Vec<Option<usize>> = LABELLED_HEADER[8..].iter().map(|n| t.column(&[n])).collect();
    let mut out = Vec::with_capacity(t.records.len());
    for (i, rec) in t.records.iter().enumerate() {
        let provenance = match t.text(rec, cols[7]) {
            "ground_truth" => Provenance::GroundTruth,
            "imputed" => Provenance::Imputed,
            other => return Err(t.err(i, format!("provenance: unknown value `{other}`"))),
        };
        let mut p = [0.0; N_MODES];
        let mut have = true;
        for (k, c) in probs.iter().enumerate() {
            match t.opt_f64_at(i, *c, LABELLED_HEADER[8 + k])? {
                Some(v) => p[k] = v,
                None => have = false,
            }
        }
        out.push(LabelledTrip {
            trip_id: t.text(rec, cols[0]).to_string(),
            device_id: t.text(rec, cols[1]).to_string(),
            start_time: t.f64_at(i, cols[2], "start_time")?,
            end_time: t.f64_at(i, cols[3], "end_time")?,
            trip_time: t.f64_at(i, cols[4], "trip_time")?,
            trip_length: t.f64_at(i, cols[5], "trip_length")?,
            label: ModeLabel { mode: parse_mode(&t, i, t.text(rec, cols[6]))?, provenance },
            probabilities: have.then_some(p),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(dev: &str, t: f64, speed: Option<f64>) -> LocationPoint {
        LocationPoint::new(dev, 38.9 + t * 1e-5, -77.0, t, Some(12.5), speed).unwrap()
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1498867200"), Some(1_498_867_200.0));
        assert_eq!(parse_timestamp("2017-07-01T00:00:00Z"), Some(1_498_867_200.0));
        assert_eq!(parse_timestamp("2017-07-01T02:00:00+02:00"), Some(1_498_867_200.0));
        assert_eq!(parse_timestamp("2017-07-01 00:00:01.5"), Some(1_498_867_201.5));
        assert_eq!(parse_timestamp("yesterday"), None);
        assert_eq!(parse_timestamp("NaN"), None);
    }

    #[test]
    fn points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let pts = vec![point("a", 0.0, Some(1.25)), point("a", 30.0, None), point("b", 5.0, Some(0.0))];
        write_points(&path, &pts).unwrap();
        assert_eq!(read_points(&path).unwrap(), pts);
        assert!(!dir.path().join(".p.csv.partial").exists());
    }

    #[test]
    fn aliases_and_iso_times() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "id,time,lat,lng\nx,2017-07-01T00:00:00Z,38.9,-77.0\n").unwrap();
        let p = read_points(&path).unwrap();
        assert_eq!(p[0].timestamp, 1_498_867_200.0);
        assert_eq!(p[0].accuracy, None);
    }

    #[test]
    fn bad_record_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "device_id,timestamp,latitude,longitude\na,0,38.9,-77\na,10,95.0,-77\n").unwrap();
        let err = read_points(&path).unwrap_err();
        assert_eq!(err.record(), Some(2));
        assert!(err.file().ends_with("p.csv"));
        std::fs::write(&path, "device_id,timestamp,longitude\n").unwrap();
        assert!(read_points(&path).unwrap_err().to_string().contains("latitude"));
    }

    #[test]
    fn trips_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (tp, pp) = (dir.path().join("trips.csv"), dir.path().join("tp.csv"));
        let a = Trip::new("a-00000", "a", vec![point("a", 0.0, Some(3.0)), point("a", 30.0, Some(4.0))], 0).unwrap();
        let b = Trip::new("b-00000", "b", vec![point("b", 5.0, None), point("b", 9.0, None), point("b", 12.0, None)], 0).unwrap();
        write_trips(&tp, &pp, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_trip_points(&pp).unwrap(), vec![a, b]);
        let text = std::fs::read_to_string(&tp).unwrap();
        assert!(text.starts_with("trip_id,device_id,start_time,end_time,n_points,first_index\na-00000,a,0,30,2,0"));
    }

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut raw = [0.0; N_FEATURES];
        raw.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 1.5 + 0.1);
        let v = vec![
            FeatureVector { trip_id: "t1".into(), raw, normalized: Some([0.5; N_FEATURES]), label: Some(Mode::Bus) },
            FeatureVector { trip_id: "t2".into(), raw, normalized: None, label: None },
        ];
        write_features(&path, &v).unwrap();
        assert_eq!(read_features(&path).unwrap(), v);
    }

    #[test]
    fn ground_truth_and_labelled_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = vec![GroundTruthTrip { trip_id: "g".into(), device_id: "d".into(), mode: Mode::Walk, start_time: 1.0, end_time: 9.0 }];
        let gp = dir.path().join("gt.csv");
        write_ground_truth(&gp, &g).unwrap();
        assert_eq!(read_ground_truth(&gp).unwrap(), g);

        let l = vec![
            LabelledTrip {
                trip_id: "t".into(),
                device_id: "d".into(),
                start_time: 0.0,
                end_time: 60.0,
                trip_time: 60.0,
                trip_length: 812.25,
                label: ModeLabel { mode: Mode::Metro, provenance: Provenance::Imputed },
                probabilities: Some([0.1, 0.7, 0.1, 0.1]),
            },
            LabelledTrip {
                trip_id: "u".into(),
                device_id: "d".into(),
                start_time: 100.0,
                end_time: 160.0,
                trip_time: 60.0,
                trip_length: 80.0,
                label: ModeLabel { mode: Mode::Walk, provenance: Provenance::GroundTruth },
                probabilities: None,
            },
        ];
        let lp = dir.path().join("l.csv");
        write_labelled_trips(&lp, &l).unwrap();
        assert_eq!(read_labelled_trips(&lp).unwrap(), l);
    }
}
