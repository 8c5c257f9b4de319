use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::mode::{Mode, N_MODES};

/// What the demand summaries need to know about one labelled trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub mode: Mode,
    /// Seconds.
    pub trip_time: f64,
    /// Metres.
    pub trip_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TripTime,
    TripLength,
}

impl Metric {
    pub fn of(self, r: &TripRecord) -> f64 {
        match self {
            Metric::TripTime => r.trip_time,
            Metric::TripLength => r.trip_length,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TripTime => "trip_time",
            Metric::TripLength => "trip_length",
        }
    }
}

/// Counts and shares per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSummary {
    pub counts: [u64; N_MODES],
    pub shares: [f64; N_MODES],
    pub total: u64,
}

pub fn mode_shares<I: IntoIterator<Item = Mode>>(modes: I) -> Result<DemandSummary, EvalError> {
    let mut counts = [0u64; N_MODES];
    modes.into_iter().for_each(|m| counts[m.index()] += 1);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(DemandSummary { counts, shares: counts.map(|c| c as f64 / total as f64), total })
}

fn check_edges(edges: &[f64]) -> Result<(), EvalError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(EvalError::BadEdges);
    }
    Ok(())
}

/// Bin counts for `edges.len() - 1` bins `[e_i, e_{i+1})`. Values below the
/// first edge land in the first bin and values at or above the last edge in
/// the last bin.
pub fn histogram(values: impl IntoIterator<Item = f64>, edges: &[f64]) -> Result<Vec<u64>, EvalError> {
    check_edges(edges)?;
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for v in values {
        let upper = edges[1..bins].partition_point(|&e| e <= v);
        counts[upper] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeHistogram {
    pub mode: Mode,
    pub counts: Vec<u64>,
    /// `None` when the mode has no trips.
    pub proportions: Option<Vec<f64>>,
    pub reference: Option<Vec<f64>>,
    /// Total-variation distance to the reference, `0.5 * sum |p - q|`.
    pub total_variation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub metric: Metric,
    pub edges: Vec<f64>,
    pub modes: Vec<ModeHistogram>,
}

/// One row of a reference histogram file (`mode,bin_lo,bin_hi,proportion`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBin {
    pub mode: Mode,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub proportion: f64,
}

pub fn read_reference(path: &Path) -> Result<Vec<ReferenceBin>, EvalError> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EvalError::Parse { file: file.clone(), record: 0, reason: e.to_string() })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let parse = |reason: String| EvalError::Parse { file: file.clone(), record: i + 1, reason };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse(format!("expected 4 fields, found {}", rec.len())));
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|e| parse(format!("field {j}: {e}")));
        out.push(ReferenceBin {
            mode: rec[0].parse().map_err(|e: crate::mode::UnknownMode| parse(e.to_string()))?,
            bin_lo: num(1)?,
            bin_hi: num(2)?,
            proportion: num(3)?,
        });
    }
    Ok(out)
}

fn reference_for(mode: Mode, edges: &[f64], reference: &[ReferenceBin]) -> Result<Option<Vec<f64>>, EvalError> {
    let mut q = vec![0.0; edges.len() - 1];
    let mut any = false;
    for r in reference.iter().filter(|r| r.mode == mode) {
        let bin = edges.windows(2).position(|w| w[0] == r.bin_lo && w[1] == r.bin_hi).ok_or_else(|| {
            EvalError::ReferenceMismatch { mode: mode.to_string(), lo: r.bin_lo, hi: r.bin_hi }
        })?;
        q[bin] += r.proportion;
        any = true;
    }
    Ok(any.then_some(q))
}

/// Per-mode histograms of `metric`, optionally compared with a reference.
pub fn distribution_report(
    trips: &[TripRecord],
    metric: Metric,
    edges: &[f64],
    reference: Option<&[ReferenceBin]>,
) -> Result<DistributionReport, EvalError> {
    check_edges(edges)?;
    let mut modes = Vec::with_capacity(N_MODES);
    for mode in Mode::ALL {
        let counts = histogram(trips.iter().filter(|t| t.mode == mode).map(|t| metric.of(t)), edges)?;
        let n: u64 = counts.iter().sum();
        let proportions = (n > 0).then(|| counts.iter().map(|&c| c as f64 / n as f64).collect::<Vec<f64>>());
        let reference = match reference {
            Some(r) => reference_for(mode, edges, r)?,
            None => None,
        };
        let total_variation = match (&proportions, &reference) {
            (Some(p), Some(q)) => Some(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()),
            _ => None,
        };
        modes.push(ModeHistogram { mode, counts, proportions, reference, total_variation });
    }
    Ok(DistributionReport { metric, edges: edges.to_vec(), modes })
}

impl DistributionReport {
    /// The report's own proportions in reference-file form.
    pub fn as_reference(&self) -> Vec<ReferenceBin> {
        let mut out = Vec::new();
        for h in &self.modes {
            if let Some(p) = &h.proportions {
                for (b, &v) in p.iter().enumerate() {
                    out.push(ReferenceBin { mode: h.mode, bin_lo: self.edges[b], bin_hi: self.edges[b + 1], proportion: v });
                }
            }
        }
        out
    }
}
