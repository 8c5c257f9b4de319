//! Network geometry readers and writers: GeoJSON line features and GTFS
//! `shapes.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{FeatureError, ModalNetwork, NetworkKind, NetworkSet};
use crate::geo::LatLon;

fn io_err(path: &Path, e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Io { file: path.display().to_string(), reason: e.to_string() }
}

fn parse_err(path: &Path, index: usize, reason: impl Into<String>) -> FeatureError {
    FeatureError::Parse { file: path.display().to_string(), index, reason: reason.into() }
}

/// Loads a network from GeoJSON, or from GTFS shapes when the path ends in
/// `.txt`/`.csv` or is a directory containing `shapes.txt`.
pub fn load_network(path: &Path, kind: NetworkKind, cell_deg: f64) -> Result<ModalNetwork, FeatureError> {
    let polylines = if path.is_dir() {
        read_gtfs_shapes(&path.join("shapes.txt"))?
    } else {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("txt") | Some("csv") => read_gtfs_shapes(path)?,
            _ => read_geojson(path)?,
        }
    };
    log::debug!("{kind} network {}: {} polylines", path.display(), polylines.len());
    ModalNetwork::from_polylines(kind, &polylines, cell_deg)
}

pub fn load_networks(rail: &Path, bus: &Path, highway: &Path, cell_deg: f64) -> Result<NetworkSet, FeatureError> {
    Ok(NetworkSet {
        rail: load_network(rail, NetworkKind::Rail, cell_deg)?,
        bus: load_network(bus, NetworkKind::Bus, cell_deg)?,
        highway: load_network(highway, NetworkKind::Highway, cell_deg)?,
    })
}

fn parse_position(v: &Value) -> Result<LatLon, String> {
    let arr = v.as_array().ok_or("position is not an array")?;
    if arr.len() < 2 {
        return Err("position needs [lon, lat]".into());
    }
    let lon = arr[0].as_f64().ok_or("longitude is not a number")?;
    let lat = arr[1].as_f64().ok_or("latitude is not a number")?;
    LatLon::new(lat, lon).map_err(|e| e.to_string())
}

fn parse_line(v: &Value) -> Result<Vec<LatLon>, String> {
    v.as_array().ok_or("LineString coordinates are not an array")?.iter().map(parse_position).collect()
}

/// Line geometries of one GeoJSON geometry object; other types yield none.
fn geometry_lines(geom: &Value) -> Result<Vec<Vec<LatLon>>, String> {
    if geom.is_null() {
        return Ok(Vec::new());
    }
    let ty = geom.get("type").and_then(Value::as_str).ok_or("geometry without a type")?;
    let coords = || geom.get("coordinates").ok_or_else(|| format!("{ty} without coordinates"));
    match ty {
        "LineString" => Ok(vec![parse_line(coords()?)?]),
        "MultiLineString" => coords()?
            .as_array()
            .ok_or("MultiLineString coordinates are not an array")?
            .iter()
            .map(parse_line)
            .collect(),
        "GeometryCollection" => {
            let mut out = Vec::new();
            for g in geom.get("geometries").and_then(Value::as_array).ok_or("GeometryCollection without geometries")? {
                out.extend(geometry_lines(g)?);
            }
            Ok(out)
        }
        "Point" | "MultiPoint" | "Polygon" | "MultiPolygon" => Ok(Vec::new()),
        other => Err(format!("unknown geometry type `{other}`")),
    }
}

fn read_geojson(path: &Path) -> Result<Vec<Vec<LatLon>>, FeatureError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let features: Vec<&Value> = match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(path, 0, "FeatureCollection without features"))?
            .iter()
            .collect(),
        _ => vec![&doc],
    };
    let mut lines = Vec::new();
    for (i, f) in features.into_iter().enumerate() {
        let geom = match f.get("type").and_then(Value::as_str) {
            Some("Feature") => f.get("geometry").unwrap_or(&Value::Null),
            _ => f,
        };
        lines.extend(geometry_lines(geom).map_err(|r| parse_err(path, i, r))?);
    }
    Ok(lines)
}

#[derive(Debug, Deserialize)]
struct ShapeRow {
    shape_id: String,
    shape_pt_lat: f64,
    shape_pt_lon: f64,
    shape_pt_sequence: u64,
}

/// Reads `shapes.txt` into one polyline per `shape_id` (ordered by id),
/// vertices sorted by `shape_pt_sequence`.
fn read_gtfs_shapes(path: &Path) -> Result<Vec<Vec<LatLon>>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut shapes: BTreeMap<String, Vec<(u64, LatLon)>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<ShapeRow>().enumerate() {
        let row = row.map_err(|e| parse_err(path, i, e.to_string()))?;
        let p = LatLon::new(row.shape_pt_lat, row.shape_pt_lon).map_err(|e| parse_err(path, i, e.to_string()))?;
        shapes.entry(row.shape_id).or_default().push((row.shape_pt_sequence, p));
    }
    Ok(shapes
        .into_values()
        .map(|mut pts| {
            pts.sort_by_key(|&(seq, _)| seq);
            pts.into_iter().map(|(_, p)| p).collect()
        })
        .collect())
}

/// Writes polylines as a GeoJSON FeatureCollection of LineStrings.
pub fn write_geojson(path: &Path, kind: NetworkKind, polylines: &[Vec<LatLon>]) -> std::io::Result<()> {
    let features: Vec<Value> = polylines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let coords: Vec<[f64; 2]> = line.iter().map(|p| [p.lon, p.lat]).collect();
            json!({
                "type": "Feature",
                "properties": { "id": i, "mode": kind.to_string() },
                "geometry": { "type": "LineString", "coordinates": coords },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    crate::io::write_atomic(path, serde_json::to_string_pretty(&doc)?.as_bytes())
}

/// Writes polylines as GTFS `shapes.txt` rows.
pub fn write_gtfs_shapes(path: &Path, polylines: &[Vec<LatLon>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["shape_id", "shape_pt_lat", "shape_pt_lon", "shape_pt_sequence"])?;
    for (i, line) in polylines.iter().enumerate() {
        for (k, p) in line.iter().enumerate() {
            w.write_record([format!("shape_{i:04}"), p.lat.to_string(), p.lon.to_string(), (k + 1).to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    crate::io::write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DEFAULT_CELL_DEG;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn geojson_linestring_to_segments() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "rail.geojson",
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[-77.0,38.9],[-77.01,38.91],[-77.02,38.92]]}},
                {"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[-77.0,38.9]}}
            ]}"#,
        );
        let net = load_network(&p, NetworkKind::Rail, DEFAULT_CELL_DEG).unwrap();
        assert_eq!(net.segments().len(), 2);
        assert_eq!(net.segments()[0].start, LatLon { lat: 38.9, lon: -77.0 });
    }

    #[test]
    fn multilinestring() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "hw.json",
            r#"{"type":"MultiLineString","coordinates":[[[-77.0,38.9],[-77.01,38.91]],[[-76.0,39.0],[-76.1,39.1],[-76.2,39.2]]]}"#,
        );
        assert_eq!(load_network(&p, NetworkKind::Highway, DEFAULT_CELL_DEG).unwrap().segments().len(), 3);
    }

    #[test]
    fn malformed_geometry_names_file_and_feature() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "bad.geojson",
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","geometry":{"type":"LineString","coordinates":[[-77.0,38.9],[-77.01,38.91]]}},
                {"type":"Feature","geometry":{"type":"LineString","coordinates":[[-77.0,"x"]]}}
            ]}"#,
        );
        match load_network(&p, NetworkKind::Rail, DEFAULT_CELL_DEG) {
            Err(FeatureError::Parse { file, index, .. }) => {
                assert!(file.ends_with("bad.geojson"));
                assert_eq!(index, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gtfs_two_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence,shape_dist_traveled\n");
        for s in ["A", "B"] {
            for k in 0..4 {
                text += &format!("{s},{},{},{},\n", 38.9 + k as f64 * 0.01, -77.0, k);
            }
        }
        let p = write(&dir, "shapes.txt", &text);
        assert_eq!(load_network(&p, NetworkKind::Bus, DEFAULT_CELL_DEG).unwrap().segments().len(), 6);
        assert_eq!(load_network(dir.path(), NetworkKind::Bus, DEFAULT_CELL_DEG).unwrap().segments().len(), 6);
    }

    #[test]
    fn gtfs_rows_sorted_by_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "shapes.txt",
            "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\nS,38.92,-77.0,3\nS,38.90,-77.0,1\nS,38.91,-77.0,2\n",
        );
        let net = load_network(&p, NetworkKind::Bus, DEFAULT_CELL_DEG).unwrap();
        let lats: Vec<(f64, f64)> = net.segments().iter().map(|s| (s.start.lat, s.end.lat)).collect();
        assert_eq!(lats, vec![(38.90, 38.91), (38.91, 38.92)]);
    }

    #[test]
    fn gtfs_bad_row_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "shapes.txt", "shape_id,shape_pt_lat,shape_pt_lon,shape_pt_sequence\nS,38.9,-77.0,1\nS,abc,-77.0,2\n");
        assert!(matches!(
            load_network(&p, NetworkKind::Bus, DEFAULT_CELL_DEG),
            Err(FeatureError::Parse { index: 1, .. })
        ));
    }

    #[test]
    fn writers_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lines = vec![
            vec![LatLon { lat: 38.9, lon: -77.0 }, LatLon { lat: 38.95, lon: -77.05 }],
            vec![LatLon { lat: 39.0, lon: -76.9 }, LatLon { lat: 39.1, lon: -76.8 }, LatLon { lat: 39.2, lon: -76.7 }],
        ];
        let g = dir.path().join("n.geojson");
        write_geojson(&g, NetworkKind::Rail, &lines).unwrap();
        let s = dir.path().join("shapes.txt");
        write_gtfs_shapes(&s, &lines).unwrap();
        let a = load_network(&g, NetworkKind::Rail, DEFAULT_CELL_DEG).unwrap();
        let b = load_network(&s, NetworkKind::Bus, DEFAULT_CELL_DEG).unwrap();
        assert_eq!(a.segments(), b.segments());
        assert_eq!(a.segments().len(), 3);
    }
}
