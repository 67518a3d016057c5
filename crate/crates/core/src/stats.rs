//! Binomial confidence intervals and accuracy arithmetic.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinomialResult {
    pub correct: u64,
    pub total: u64,
    pub confidence: f64,
}

impl BinomialResult {
    pub fn new(correct: u64, total: u64, confidence: f64) -> Result<Self> {
        if total == 0 {
            return Err(Error::InvalidParameter {
                name: "total",
                reason: "must be at least 1",
            });
        }
        if correct > total {
            return Err(Error::InvalidParameter {
                name: "correct",
                reason: "cannot exceed total",
            });
        }
        z_value(confidence)?;
        Ok(Self {
            correct,
            total,
            confidence,
        })
    }
}

/// Two-sided normal quantiles for the supported confidence levels.
const Z_TABLE: [(f64, f64); 3] = [
    (0.90, 1.644_853_626_951_472_2),
    (0.95, 1.959_963_984_540_054),
    (0.99, 2.575_829_303_548_900_4),
];

pub fn z_value(confidence: f64) -> Result<f64> {
    Z_TABLE
        .iter()
        .find(|(c, _)| libm::fabs(c - confidence) < 1e-9)
        .map(|&(_, z)| z)
        .ok_or(Error::UnsupportedConfidence)
}

/// Wilson score interval `(lo, hi)` as proportions in `[0, 1]`.
pub fn wilson_interval(r: &BinomialResult) -> Result<(f64, f64)> {
    if r.total == 0 {
        return Err(Error::InvalidParameter {
            name: "total",
            reason: "must be at least 1",
        });
    }
    let z = z_value(r.confidence)?;
    let n = r.total as f64;
    let p = r.correct as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if r.correct == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if r.correct == r.total { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Percentage correct, rounded to two decimals.
pub fn accuracy(correct: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidParameter {
            name: "total",
            reason: "must be at least 1",
        });
    }
    let pct = 100.0 * correct as f64 / total as f64;
    Ok(libm::round(pct * 100.0) / 100.0)
}
