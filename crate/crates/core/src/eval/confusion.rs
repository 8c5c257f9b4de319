use serde::{Deserialize, Serialize};

use crate::mode::{Mode, N_MODES};

/// Rows are the true (reported) mode, columns the detected mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_MODES]; N_MODES],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; N_MODES]; N_MODES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn record(&mut self, truth: Mode, detected: Mode) {
        self.counts[truth.index()][detected.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..N_MODES {
            for j in 0..N_MODES {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_MODES).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Per-class margins; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: [Option<f64>; N_MODES],
    pub recall: [Option<f64>; N_MODES],
    pub accuracy: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall(cm: &ConfusionMatrix) -> PrecisionRecall {
    let mut precision = [None; N_MODES];
    let mut recall = [None; N_MODES];
    for i in 0..N_MODES {
        recall[i] = ratio(cm.counts[i][i], cm.row_sum(i));
        precision[i] = ratio(cm.counts[i][i], cm.col_sum(i));
    }
    PrecisionRecall { precision, recall, accuracy: ratio(cm.trace(), cm.total()) }
}

/// A fraction as a percentage rounded half away from zero to `decimals`.
pub fn percent(fraction: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (fraction * 100.0 * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_perfect() {
        let mut cm = ConfusionMatrix::default();
        for m in Mode::ALL {
            cm.record(m, m);
        }
        let pr = precision_recall(&cm);
        assert_eq!(pr.precision, [Some(1.0); 4]);
        assert_eq!(pr.recall, [Some(1.0); 4]);
        assert_eq!(pr.accuracy, Some(1.0));
    }

    #[test]
    fn undefined_margins() {
        let mut cm = ConfusionMatrix::default();
        cm.record(Mode::Car, Mode::Car);
        cm.record(Mode::Metro, Mode::Car);
        let pr = precision_recall(&cm);
        assert_eq!(pr.recall[2], None);
        assert_eq!(pr.precision[1], None);
        assert_eq!(pr.recall[1], Some(0.0));
        assert_eq!(pr.precision[0], Some(0.5));
        assert_eq!(precision_recall(&ConfusionMatrix::default()).accuracy, None);
    }

    #[test]
    fn car_row_and_column() {
        let cm = ConfusionMatrix::new([[194, 1, 0, 0], [0, 525, 8, 1], [1, 10, 149, 0], [1, 1, 1, 117]]);
        let pr = precision_recall(&cm);
        assert_eq!(pr.recall[0], Some(194.0 / 195.0));
        assert_eq!(percent(pr.recall[0].unwrap(), 1), 99.5);
        assert_eq!(percent(pr.precision[0].unwrap(), 1), 99.0);
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(percent(90.0 / 160.0, 1), 56.3);
        assert_eq!(percent(0.76, 2), 76.0);
    }
}
