use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 5
[paths]
points = "data/points.csv"
ground_truth = "data/ground_truth.csv"
rail = "data/rail.geojson"
bus = "data/bus_shapes.txt"
highway = "data/highway.geojson"
output_dir = "out"
[synth]
n_trips = 160
[train]
kind = "wide_deep"
hidden_widths = [16, 8]
epochs = 15
[evaluate]
folds = 3
seeds = 2
[[evaluate.models]]
name = "wide_deep"
network = ["rail", "bus", "highway"]
model = { kind = "wide_deep", hidden_widths = [16, 8], epochs = 10 }
[[evaluate.models]]
name = "forest"
model = { kind = "random_forest", n_trees = 15 }
"#;

fn modeforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modeforge"))
        .args(args)
        .arg("--config")
        .arg(dir.join("c.toml"))
        .env("MODEFORGE_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), config).unwrap();
    dir
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["data", "out"] {
        for entry in fs::read_dir(dir.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            files.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), fs::read(&p).unwrap());
        }
    }
    files
}

fn full_run(threads: &str, seed: Option<&str>) -> (tempfile::TempDir, BTreeMap<String, Vec<u8>>) {
    let dir = setup(CONFIG);
    let mut extra = vec!["--threads", threads];
    if let Some(s) = seed {
        extra.extend(["--seed", s]);
    }
    let mut synth = vec!["synth"];
    synth.extend(&extra);
    ok(&modeforge(dir.path(), &synth));
    let mut run = vec!["run"];
    run.extend(&extra);
    ok(&modeforge(dir.path(), &run));
    let snap = snapshot(dir.path());
    (dir, snap)
}

#[test]
fn runs_are_byte_identical_across_reruns_and_thread_counts() {
    let (_a, one) = full_run("1", None);
    let (_b, again) = full_run("1", None);
    let (_c, eight) = full_run("8", None);
    assert!(one.contains_key("out/report.json") && one.contains_key("out/metrics.csv"));
    assert!(!one.keys().any(|k| k.contains(".partial")));
    assert_eq!(one, again);
    assert_eq!(one, eight);
    let (_d, reseeded) = full_run("1", Some("6"));
    assert_ne!(one["data/points.csv"], reseeded["data/points.csv"]);
}

#[test]
fn stages_run_one_at_a_time_and_are_idempotent() {
    let dir = setup(CONFIG);
    ok(&modeforge(dir.path(), &["synth"]));
    for stage in ["filter", "segment", "features", "train", "impute", "report"] {
        ok(&modeforge(dir.path(), &[stage]));
    }
    let first = snapshot(dir.path());
    ok(&modeforge(dir.path(), &["impute"]));
    ok(&modeforge(dir.path(), &["report"]));
    assert_eq!(first, snapshot(dir.path()));

    let out = dir.path().join("out");
    let trips = fs::read_to_string(out.join("trips.csv")).unwrap().lines().count();
    let labelled = fs::read_to_string(out.join("labeled_trips.csv")).unwrap();
    assert_eq!(labelled.lines().count(), trips);
    assert!(labelled.lines().skip(1).all(|l| l.split(',').nth(7) == Some("imputed")));
    let shares = fs::read_to_string(out.join("mode_shares.csv")).unwrap();
    assert!(shares.starts_with("mode,count,share,share_pct\ncar,"));
}

#[test]
fn unknown_config_key_fails_before_any_work() {
    let dir = setup("[stay_region]\nmax_roam = 50.0\n");
    let out = modeforge(dir.path(), &["synth"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config") && err.contains("max_roam"), "{err}");
    assert!(!dir.path().join("points.csv").exists());
}

#[test]
fn bad_record_reports_stage_file_and_record() {
    let dir = setup("[paths]\npoints = \"p.csv\"\n");
    fs::write(dir.path().join("p.csv"), "device_id,timestamp,latitude,longitude\na,0,38.9,-77.0\na,30,north,-77.0\n")
        .unwrap();
    let out = modeforge(dir.path(), &["filter"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage filter") && err.contains("p.csv") && err.contains("record 2"), "{err}");
    assert!(!dir.path().join("out/filtered_points.csv").exists());
}

#[test]
fn missing_config_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_modeforge")).arg("filter").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
