//! ON-run duration statistics and the logistic OFF-enforcement weight.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::StateSeries;

/// Method-of-moments gamma fit of the run-length distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
}

/// Histogram of maximal contiguous ON-run lengths, in grid steps, with an
/// optional gamma fit. Runs touching a day boundary are kept at their
/// observed truncated length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub class_id: String,
    pub histogram: BTreeMap<usize, u64>,
    /// Present only when at least two distinct run lengths were observed.
    pub gamma: Option<GammaFit>,
}

impl DurationModel {
    pub fn total_runs(&self) -> u64 {
        self.histogram.values().sum()
    }
}

fn gamma_moments(histogram: &BTreeMap<usize, u64>) -> Option<GammaFit> {
    if histogram.len() < 2 {
        return None;
    }
    let total: u64 = histogram.values().sum();
    let n = total as f64;
    let mean: f64 = histogram
        .iter()
        .map(|(&len, &count)| len as f64 * count as f64)
        .sum::<f64>()
        / n;
    let variance: f64 = histogram
        .iter()
        .map(|(&len, &count)| {
            let d = len as f64 - mean;
            d * d * count as f64
        })
        .sum::<f64>()
        / n;
    if variance <= 0.0 || mean <= 0.0 {
        return None;
    }
    Some(GammaFit {
        shape: mean * mean / variance,
        scale: variance / mean,
    })
}

/// Count maximal contiguous ON runs within each day and fit the gamma law.
pub fn estimate_durations(observations: &[StateSeries]) -> Result<DurationModel> {
    let class_id = observations
        .first()
        .map(|s| s.class_id.clone())
        .unwrap_or_default();
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    for series in observations {
        for day in series.days() {
            let mut run = 0usize;
            for &s in &day.states {
                if s == 1 {
                    run += 1;
                } else if run > 0 {
                    *histogram.entry(run).or_insert(0) += 1;
                    run = 0;
                }
            }
            if run > 0 {
                *histogram.entry(run).or_insert(0) += 1;
            }
        }
    }
    if histogram.is_empty() {
        return Err(Error::Estimation(format!(
            "class '{class_id}' has no ON runs"
        )));
    }
    let gamma = gamma_moments(&histogram);
    Ok(DurationModel {
        class_id,
        histogram,
        gamma,
    })
}

/// Logistic attenuation that enforces switch-off around `t_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffEnforcement {
    /// Step index of the turn-off time.
    pub t_off: usize,
    /// Exponential scale in steps.
    pub lambda: f64,
}

impl OffEnforcement {
    pub fn new(t_off: usize, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Config(format!(
                "off-enforcement scale must be positive, got {lambda}"
            )));
        }
        Ok(Self { t_off, lambda })
    }
}

/// Apply `d[t] = d0[t] / (1 + exp((t - t_off) / lambda))`.
///
/// The result is the unnormalized proportionality; callers renormalize if
/// they need a distribution.
pub fn apply_off_enforcement(d0: &[f64], enforcement: &OffEnforcement) -> Result<Vec<f64>> {
    if enforcement.lambda <= 0.0 || !enforcement.lambda.is_finite() {
        return Err(Error::Config(format!(
            "off-enforcement scale must be positive, got {}",
            enforcement.lambda
        )));
    }
    if enforcement.t_off >= d0.len() {
        return Err(Error::Config(format!(
            "t_off {} out of range [0, {})",
            enforcement.t_off,
            d0.len()
        )));
    }
    Ok(d0
        .iter()
        .enumerate()
        .map(|(t, &w)| {
            let z = (t as f64 - enforcement.t_off as f64) / enforcement.lambda;
            w / (1.0 + z.exp())
        })
        .collect())
}
