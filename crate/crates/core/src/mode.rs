use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of travel modes the classifiers distinguish.
pub const N_MODES: usize = 4;

/// Travel mode. The declaration order is the class order used everywhere
/// (model outputs, confusion matrices, tie-breaking).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Car,
    Metro,
    Bus,
    Walk,
}

impl Mode {
    pub const ALL: [Mode; N_MODES] = [Mode::Car, Mode::Metro, Mode::Bus, Mode::Walk];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Mode> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Metro => "metro",
            Mode::Bus => "bus",
            Mode::Walk => "walk",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown travel mode `{0}`")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" | "auto" | "highway" | "drive" => Ok(Mode::Car),
            "metro" | "rail" | "subway" => Ok(Mode::Metro),
            "bus" => Ok(Mode::Bus),
            "walk" | "bike" | "walk/bike" | "non-motorized" => Ok(Mode::Walk),
            other => Err(UnknownMode(other.to_string())),
        }
    }
}

/// Where a trip's mode label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GroundTruth,
    Imputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLabel {
    pub mode: Mode,
    pub provenance: Provenance,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
