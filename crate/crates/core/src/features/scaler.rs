use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Per-column min-max scaling to `[0, 1]`, fitted on training rows only.
///
/// Constant columns map to 0; values outside the fitted range are clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, FeatureError> {
        let first = rows.first().ok_or(FeatureError::EmptyMatrix)?.as_ref();
        let d = first.len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(FeatureError::DimensionMismatch { expected: d, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn check(&self, len: usize) -> Result<(), FeatureError> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(FeatureError::DimensionMismatch { expected: self.dim(), found: len })
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect())
    }

    pub fn invert(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| lo + v * (hi - lo))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_2_4_6() {
        let s = FeatureScaler::fit(&[[2.0], [4.0], [6.0]]).unwrap();
        let out: Vec<f64> = [2.0, 4.0, 6.0].iter().map(|&v| s.apply(&[v]).unwrap()[0]).collect();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = FeatureScaler::fit(&[[7.0], [7.0]]).unwrap();
        assert_eq!(s.apply(&[7.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn out_of_range_clamps() {
        let s = FeatureScaler::fit(&[[2.0], [6.0]]).unwrap();
        assert_eq!(s.apply(&[8.0]).unwrap(), vec![1.0]);
        assert_eq!(s.apply(&[-1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn empty_and_ragged_inputs() {
        let empty: [[f64; 2]; 0] = [];
        assert_eq!(FeatureScaler::fit(&empty), Err(FeatureError::EmptyMatrix));
        let ragged: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(FeatureScaler::fit(&ragged).is_err());
        let s = FeatureScaler::fit(&[[1.0, 2.0]]).unwrap();
        assert!(s.apply(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn apply_then_invert_is_identity(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..40)
        ) {
            let s = FeatureScaler::fit(&rows).unwrap();
            for row in &rows {
                let back = s.invert(&s.apply(row).unwrap()).unwrap();
                for j in 0..3 {
                    if s.max[j] > s.min[j] {
                        let scale = row[j].abs().max(s.max[j] - s.min[j]);
                        prop_assert!((back[j] - row[j]).abs() <= 1e-12 * scale, "{} vs {}", back[j], row[j]);
                    }
                }
            }
        }
    }
}
