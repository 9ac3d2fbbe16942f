//! Data-space slices by ground-truth-class probability.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slice {
    Worst,
    Bad,
    Good,
    Best,
}

impl Slice {
    pub const ALL: [Slice; 4] = [Slice::Worst, Slice::Bad, Slice::Good, Slice::Best];
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slice::Worst => "Worst",
            Slice::Bad => "Bad",
            Slice::Good => "Good",
            Slice::Best => "Best",
        })
    }
}

/// A subset of instances statistics are computed on: one slice or the whole
/// space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    All,
    Slice(Slice),
}

impl Scope {
    pub const EVERY: [Scope; 5] = [
        Scope::All,
        Scope::Slice(Slice::Worst),
        Scope::Slice(Slice::Bad),
        Scope::Slice(Slice::Good),
        Scope::Slice(Slice::Best),
    ];

    pub fn parse(name: &str) -> Result<Scope> {
        match name.to_ascii_lowercase().as_str() {
            "all" => Ok(Scope::All),
            "worst" => Ok(Scope::Slice(Slice::Worst)),
            "bad" => Ok(Scope::Slice(Slice::Bad)),
            "good" => Ok(Scope::Slice(Slice::Good)),
            "best" => Ok(Scope::Slice(Slice::Best)),
            other => Err(Error::InvalidRequest(format!("unknown slice `{other}`"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::All => f.write_str("All"),
            Scope::Slice(s) => s.fmt(f),
        }
    }
}

/// Slice boundaries in percent. The middle boundary is fixed at 50.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct SliceThresholds {
    low: u8,
    high: u8,
}

#[derive(Deserialize)]
struct RawThresholds {
    low: i64,
    high: i64,
}

impl TryFrom<RawThresholds> for SliceThresholds {
    type Error = Error;

    fn try_from(raw: RawThresholds) -> Result<Self> {
        set_thresholds(raw.low, raw.high)
    }
}

impl SliceThresholds {
    pub const FIXED: u8 = 50;
    pub const LOW_RANGE: (u8, u8) = (5, 45);
    pub const HIGH_RANGE: (u8, u8) = (55, 95);

    pub fn low(&self) -> u8 {
        self.low
    }

    pub fn high(&self) -> u8 {
        self.high
    }

    pub fn classify(&self, p: f64) -> Slice {
        let cut = |pct: u8| f64::from(pct) / 100.0;
        if p < cut(self.low) {
            Slice::Worst
        } else if p < cut(Self::FIXED) {
            Slice::Bad
        } else if p < cut(self.high) {
            Slice::Good
        } else {
            Slice::Best
        }
    }
}

impl Default for SliceThresholds {
    fn default() -> Self {
        Self { low: 25, high: 75 }
    }
}

/// Validates movable thresholds. Out-of-range values are rejected, never
/// clamped.
pub fn set_thresholds(low: i64, high: i64) -> Result<SliceThresholds> {
    let (l0, l1) = SliceThresholds::LOW_RANGE;
    let (h0, h1) = SliceThresholds::HIGH_RANGE;
    if !(i64::from(l0)..=i64::from(l1)).contains(&low) {
        return Err(Error::OutOfRange {
            name: "low threshold",
            min: l0.into(),
            max: l1.into(),
            value: low as f64,
        });
    }
    if !(i64::from(h0)..=i64::from(h1)).contains(&high) {
        return Err(Error::OutOfRange {
            name: "high threshold",
            min: h0.into(),
            max: h1.into(),
            value: high as f64,
        });
    }
    Ok(SliceThresholds {
        low: low as u8,
        high: high as u8,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePartition {
    pub assignment: Vec<Slice>,
    /// Worst, Bad, Good, Best.
    pub counts: [usize; 4],
}

impl SlicePartition {
    pub fn rows(&self, scope: Scope) -> Vec<usize> {
        match scope {
            Scope::All => (0..self.assignment.len()).collect(),
            Scope::Slice(s) => (0..self.assignment.len()).filter(|&i| self.assignment[i] == s).collect(),
        }
    }

    pub fn count(&self, slice: Slice) -> usize {
        self.counts[slice as usize]
    }
}

/// Assigns every instance to a slice: `p < low` is Worst, `low ≤ p < 50%`
/// Bad, `50% ≤ p < high` Good, the rest Best.
pub fn slice(probabilities: &[f64], thresholds: &SliceThresholds) -> Result<SlicePartition> {
    let mut counts = [0usize; 4];
    let assignment = probabilities
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange {
                    name: "probability",
                    min: 0.0,
                    max: 1.0,
                    value: p,
                });
            }
            let s = thresholds.classify(p);
            counts[s as usize] += 1;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlicePartition { assignment, counts })
}
