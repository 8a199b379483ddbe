//! Statistical estimators over state observations: rate-of-use and the
//! empirical per-step ON/OFF transition probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ingest::StateSeries;
use crate::profile::{ProbabilityProfile, FALLBACK_PROB};

/// Rate-of-use: per step, the fraction of observed days the class is ON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouProfile {
    pub class_id: String,
    pub rou: Vec<f64>,
    /// Number of (series, day) samples behind each step.
    pub support: Vec<u64>,
}

fn class_of(observations: &[StateSeries]) -> Result<String> {
    let first = observations
        .first()
        .ok_or_else(|| Error::Estimation("no observations".into()))?;
    for series in observations {
        if series.class_id != first.class_id {
            return Err(Error::Estimation(format!(
                "mixed classes in observation set: '{}' vs '{}'",
                first.class_id, series.class_id
            )));
        }
    }
    Ok(first.class_id.clone())
}

/// Fraction of days (present or not) the appliance class is ON at each step.
pub fn estimate_rou(observations: &[StateSeries], grid: &TimeGrid) -> Result<RouProfile> {
    let class_id = class_of(observations)?;
    let steps = grid.steps_per_day();
    let total_days: u64 = observations.iter().map(|s| s.num_days() as u64).sum();
    if total_days == 0 {
        return Err(Error::Estimation(format!(
            "class '{class_id}' has no observed days"
        )));
    }
    let mut on_counts = vec![0u64; steps];
    for series in observations {
        for day in series.days() {
            debug_assert_eq!(day.states.len(), steps);
            for (t, &s) in day.states.iter().enumerate() {
                on_counts[t] += s as u64;
            }
        }
    }
    let rou = on_counts
        .iter()
        .map(|&c| c as f64 / total_days as f64)
        .collect();
    Ok(RouProfile {
        class_id,
        rou,
        support: vec![total_days; steps],
    })
}

/// Empirical transition probabilities over the present days of one class.
///
/// For each step `t >= 1`:
/// `p_on[t]  = sum_m S_t (1 - S_{t-1}) / sum_m (1 - S_{t-1})`
/// `p_off[t] = sum_m S_{t-1} (1 - S_t) / sum_m S_{t-1}`
/// where `m` runs over present days of every series. Zero denominators take
/// the 0.5 fallback with support 0. Step 0 is not a transition and always
/// carries the fallback; the day startup is described by `p_init` instead.
pub fn estimate_empirical_probs(
    observations: &[StateSeries],
    grid: &TimeGrid,
) -> Result<ProbabilityProfile> {
    let class_id = class_of(observations)?;
    let steps = grid.steps_per_day();
    let total_days: u64 = observations.iter().map(|s| s.num_days() as u64).sum();
    if total_days == 0 {
        return Err(Error::Estimation(format!(
            "class '{class_id}' has no observed days"
        )));
    }

    let mut on_num = vec![0u64; steps];
    let mut on_den = vec![0u64; steps];
    let mut off_num = vec![0u64; steps];
    let mut off_den = vec![0u64; steps];
    let mut present_days = 0u64;
    let mut init_on_days = 0u64;

    for series in observations {
        for day in series.present_days() {
            present_days += 1;
            init_on_days += day.states[0] as u64;
            for t in 1..steps {
                let prev = day.states[t - 1] as u64;
                let cur = day.states[t] as u64;
                on_num[t] += cur * (1 - prev);
                on_den[t] += 1 - prev;
                off_num[t] += prev * (1 - cur);
                off_den[t] += prev;
            }
        }
    }

    let ratio_or_fallback = |num: u64, den: u64| -> f64 {
        if den == 0 {
            FALLBACK_PROB
        } else {
            num as f64 / den as f64
        }
    };
    let mut p_on = vec![FALLBACK_PROB; steps];
    let mut p_off = vec![FALLBACK_PROB; steps];
    for t in 1..steps {
        p_on[t] = ratio_or_fallback(on_num[t], on_den[t]);
        p_off[t] = ratio_or_fallback(off_num[t], off_den[t]);
    }
    on_den[0] = 0;
    off_den[0] = 0;

    let p_pres = present_days as f64 / total_days as f64;
    let p_init = if present_days == 0 {
        FALLBACK_PROB
    } else {
        init_on_days as f64 / present_days as f64
    };

    Ok(ProbabilityProfile {
        class_id,
        p_on,
        p_off,
        p_pres,
        p_init,
        on_support: on_den,
        off_support: off_den,
    })
}

/// Per-step sample mean of the states over present days: the observed
/// conditional trajectory the analytic recursion reproduces.
pub fn present_day_mean(observations: &[StateSeries], grid: &TimeGrid) -> Result<Vec<f64>> {
    class_of(observations)?;
    let steps = grid.steps_per_day();
    let mut counts = vec![0u64; steps];
    let mut days = 0u64;
    for series in observations {
        for day in series.present_days() {
            days += 1;
            for (t, &s) in day.states.iter().enumerate() {
                counts[t] += s as u64;
            }
        }
    }
    if days == 0 {
        return Err(Error::Estimation("no present days".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / days as f64).collect())
}
