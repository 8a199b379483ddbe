//! Monte Carlo simulation of per-appliance state chains, building-level
//! aggregation, and the analytic cross-correlation variance correction.
//!
//! Runs are mutually independent; each (run, appliance) pair draws from its
//! own counter-derived random stream, and all across-run statistics are
//! accumulated as exact integer moments. Results are therefore bitwise
//! identical for any degree of parallelism.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationTable;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::profile::ProbabilityProfile;
use crate::rng::{stream_rng, STREAM_SIM_RUN};

/// Occupant-category composition of a building plus nominal appliance draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingProfile {
    /// Category label -> (appliance class -> count per occupant).
    pub categories: BTreeMap<String, BTreeMap<String, u32>>,
    /// Category label -> number of occupants.
    pub occupants: BTreeMap<String, u32>,
    /// Appliance class -> nominal ON power draw in watts.
    pub power_watts: BTreeMap<String, f64>,
}

impl BuildingProfile {
    /// Total appliances per class: `N_a = sum over categories of
    /// occupant_count x per-occupant count`.
    pub fn class_counts(&self) -> Result<BTreeMap<String, u64>> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (category, class_map) in &self.categories {
            for class_id in class_map.keys() {
                counts.entry(class_id.clone()).or_insert(0);
            }
            let occupant_count = self.occupants.get(category).copied().unwrap_or(0) as u64;
            for (class_id, per_occupant) in class_map {
                *counts.get_mut(class_id).expect("inserted above") +=
                    occupant_count * *per_occupant as u64;
            }
        }
        for category in self.occupants.keys() {
            if !self.categories.contains_key(category) {
                return Err(Error::Config(format!(
                    "occupant category '{category}' has no appliance set"
                )));
            }
        }
        Ok(counts)
    }
}

/// Monte Carlo run count, master seed and grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub num_runs: usize,
    pub seed: u64,
    pub grid: TimeGrid,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            num_runs: 10_000,
            seed: 0,
            grid: TimeGrid::default(),
        }
    }
}

/// One simulated appliance-day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplianceDay {
    pub present: bool,
    pub states: Vec<u8>,
}

/// Simulate one appliance-day: presence ~ Ber(p_pres); a present day starts
/// with S_0 ~ Ber(p_init) and then follows the two-state chain.
pub fn simulate_appliance(
    profile: &ProbabilityProfile,
    grid: &TimeGrid,
    rng: &mut impl Rng,
) -> ApplianceDay {
    let mut states = vec![0u8; grid.steps_per_day()];
    let present = simulate_appliance_into(profile, rng, &mut states);
    ApplianceDay { present, states }
}

fn simulate_appliance_into(
    profile: &ProbabilityProfile,
    rng: &mut impl Rng,
    states: &mut [u8],
) -> bool {
    debug_assert_eq!(states.len(), profile.steps());
    if rng.gen::<f64>() >= profile.p_pres {
        states.fill(0);
        return false;
    }
    states[0] = u8::from(rng.gen::<f64>() < profile.p_init);
    for t in 1..states.len() {
        let draw = rng.gen::<f64>();
        states[t] = if states[t - 1] == 0 {
            u8::from(draw < profile.p_on[t])
        } else {
            u8::from(draw < 1.0 - profile.p_off[t])
        };
    }
    true
}

/// The closed-form mean trajectory of the chain, conditioned on presence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMeanState {
    /// `g[t] = 1 - p_on[t] - p_off[t]`.
    pub g: Vec<f64>,
    /// `E[S_t]`, seeded with `s1_mean` at the first step.
    pub expected_state: Vec<f64>,
    pub s1_mean: f64,
}

/// Evaluate `E[S_t] = p_on[t] + (1 - p_on[t] - p_off[t]) E[S_{t-1}]` with
/// `E[S_0] = s1_mean`. Multiply by `p_pres` for unconditional means.
pub fn analytic_mean_recursion(profile: &ProbabilityProfile, s1_mean: f64) -> AnalyticMeanState {
    assert!(
        (0.0..=1.0).contains(&s1_mean),
        "s1_mean {s1_mean} outside [0, 1]"
    );
    let steps = profile.steps();
    let g: Vec<f64> = (0..steps)
        .map(|t| 1.0 - profile.p_on[t] - profile.p_off[t])
        .collect();
    let mut expected_state = vec![0.0; steps];
    expected_state[0] = s1_mean;
    for t in 1..steps {
        expected_state[t] = profile.p_on[t] + g[t] * expected_state[t - 1];
    }
    AnalyticMeanState {
        g,
        expected_state,
        s1_mean,
    }
}

/// Aggregate variance corrected for within- and cross-class correlation,
/// with feasibility diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedVariance {
    pub variance: Vec<f64>,
    /// Steps where the corrected variance was negative and clamped to zero.
    pub clamped_steps: Vec<usize>,
    /// Class pairs whose correlation was undefined and treated as zero.
    pub undefined_entries: Vec<(String, String)>,
}

/// Correct the independent-sum variance of the aggregate:
///
/// `var[t] = sum_a s2_a N_a + sum_a s2_a N_a (N_a - 1) rho_aa
///         + sum_{a != b} s_a s_b N_a N_b rho_ab`
///
/// where `s_a = appliance_std[a][t]` is the per-appliance deviation of one
/// appliance of class `a`. Negative results are clamped to zero and the
/// affected steps reported.
pub fn correct_aggregate_variance(
    appliance_std: &BTreeMap<String, Vec<f64>>,
    counts: &BTreeMap<String, u64>,
    correlations: &CorrelationTable,
) -> Result<CorrectedVariance> {
    let mut steps = None;
    for class_id in counts.keys() {
        let std = appliance_std.get(class_id).ok_or_else(|| {
            Error::Config(format!("no per-appliance std for class '{class_id}'"))
        })?;
        match steps {
            None => steps = Some(std.len()),
            Some(n) if n != std.len() => {
                return Err(Error::Config("std vectors have mismatched lengths".into()))
            }
            _ => {}
        }
    }
    let steps = steps.unwrap_or(0);
    let classes: Vec<&String> = counts.keys().collect();

    let mut undefined_entries = Vec::new();
    let mut rho = BTreeMap::new();
    for (i, a) in classes.iter().enumerate() {
        for b in &classes[i..] {
            let n_a = counts[*a];
            let n_b = counts[*b];
            let relevant = if a == b { n_a >= 2 } else { n_a >= 1 && n_b >= 1 };
            let value = correlations.rho_between(a, b);
            if value.is_none() && relevant {
                undefined_entries.push(((*a).clone(), (*b).clone()));
            }
            rho.insert(((*a).clone(), (*b).clone()), value.unwrap_or(0.0));
        }
    }
    let rho_of = |a: &String, b: &String| -> f64 {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        rho[&key]
    };

    let mut variance = vec![0.0; steps];
    let mut clamped_steps = Vec::new();
    for (t, var) in variance.iter_mut().enumerate() {
        let mut v = 0.0;
        for a in &classes {
            let n = counts[*a] as f64;
            let s = appliance_std[*a][t];
            v += s * s * n;
            v += s * s * n * (n - 1.0) * rho_of(a, a);
        }
        for (i, a) in classes.iter().enumerate() {
            for (j, b) in classes.iter().enumerate() {
                if i == j {
                    continue;
                }
                v += appliance_std[*a][t]
                    * appliance_std[*b][t]
                    * counts[*a] as f64
                    * counts[*b] as f64
                    * rho_of(a, b);
            }
        }
        if v < 0.0 {
            clamped_steps.push(t);
            v = 0.0;
        }
        *var = v;
    }
    Ok(CorrectedVariance {
        variance,
        clamped_steps,
        undefined_entries,
    })
}

/// Per-step statistics of a building simulation. Per-class vectors are
/// simultaneous ON-counts; aggregate vectors are watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub classes: Vec<String>,
    pub per_class_mean: BTreeMap<String, Vec<f64>>,
    pub per_class_std: BTreeMap<String, Vec<f64>>,
    pub aggregate_mean_watts: Vec<f64>,
    /// Sample standard deviation of the per-run aggregate watt total.
    pub aggregate_std_raw: Vec<f64>,
    /// Correlation-corrected standard deviation of the aggregate watt total.
    pub aggregate_std_corrected: Vec<f64>,
    /// Feasibility notes from the variance correction.
    pub correction: CorrectionNotes,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionNotes {
    pub clamped_steps: Vec<usize>,
    pub undefined_correlations: Vec<(String, String)>,
}

/// Exact integer moment accumulators over runs.
struct MomentAcc {
    /// [class][t] sum of class ON-counts.
    count_sum: Vec<Vec<u64>>,
    /// [class][t] sum of squared class ON-counts.
    count_sq: Vec<Vec<u64>>,
    /// [pair][t] sum of cross products, pairs (a, b) with a < b in order.
    cross: Vec<Vec<u64>>,
    /// [class][t] ON frequency of one representative appliance.
    rep_on: Vec<Vec<u64>>,
}

impl MomentAcc {
    fn new(num_classes: usize, steps: usize) -> Self {
        let pairs = num_classes * num_classes.saturating_sub(1) / 2;
        Self {
            count_sum: vec![vec![0; steps]; num_classes],
            count_sq: vec![vec![0; steps]; num_classes],
            cross: vec![vec![0; steps]; pairs],
            rep_on: vec![vec![0; steps]; num_classes],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let add = |dst: &mut Vec<Vec<u64>>, src: &[Vec<u64>]| {
            for (d, s) in dst.iter_mut().zip(src) {
                for (x, y) in d.iter_mut().zip(s) {
                    *x += y;
                }
            }
        };
        add(&mut self.count_sum, &other.count_sum);
        add(&mut self.count_sq, &other.count_sq);
        add(&mut self.cross, &other.cross);
        add(&mut self.rep_on, &other.rep_on);
        self
    }
}

struct ClassPlan<'a> {
    class_id: &'a str,
    count: u64,
    watts: f64,
    profile: &'a ProbabilityProfile,
    /// Global index of this class's first appliance.
    offset: u64,
}

/// Simulate all appliances of the building for `num_runs` independent runs
/// and summarize per-step statistics. The MC samples appliances
/// independently; correlation enters only through the post-hoc analytic
/// correction of the aggregate variance.
pub fn simulate_building(
    building: &BuildingProfile,
    profiles: &BTreeMap<String, ProbabilityProfile>,
    config: &SimulationConfig,
    correlations: &CorrelationTable,
) -> Result<SimulationSummary> {
    if config.num_runs == 0 {
        return Err(Error::Config("num_runs must be at least 1".into()));
    }
    let steps = config.grid.steps_per_day();
    let counts = building.class_counts()?;

    let mut plans: Vec<ClassPlan> = Vec::with_capacity(counts.len());
    let mut offset = 0u64;
    for (class_id, &count) in &counts {
        let profile = profiles.get(class_id).ok_or_else(|| {
            Error::Config(format!("no probability profile for class '{class_id}'"))
        })?;
        profile.validate()?;
        if profile.steps() != steps {
            return Err(Error::Config(format!(
                "profile for class '{class_id}' has {} steps, grid expects {steps}",
                profile.steps()
            )));
        }
        let watts = *building.power_watts.get(class_id).ok_or_else(|| {
            Error::Config(format!("no nominal wattage for class '{class_id}'"))
        })?;
        if !watts.is_finite() || watts < 0.0 {
            return Err(Error::Config(format!(
                "wattage for class '{class_id}' must be finite and nonnegative"
            )));
        }
        plans.push(ClassPlan {
            class_id,
            count,
            watts,
            profile,
            offset,
        });
        offset += count;
    }

    let num_classes = plans.len();
    let seed = config.seed;

    let acc = (0..config.num_runs)
        .into_par_iter()
        .fold(
            || MomentAcc::new(num_classes, steps),
            |mut acc, run| {
                let mut states = vec![0u8; steps];
                let mut class_counts = vec![vec![0u32; steps]; num_classes];
                for (c, plan) in plans.iter().enumerate() {
                    for k in 0..plan.count {
                        let mut rng =
                            stream_rng(seed, &[STREAM_SIM_RUN, run as u64, plan.offset + k]);
                        simulate_appliance_into(plan.profile, &mut rng, &mut states);
                        for (t, &s) in states.iter().enumerate() {
                            class_counts[c][t] += s as u32;
                        }
                        if k == 0 {
                            for (t, &s) in states.iter().enumerate() {
                                acc.rep_on[c][t] += s as u64;
                            }
                        }
                    }
                }
                let mut pair = 0;
                for a in 0..num_classes {
                    for t in 0..steps {
                        let v = class_counts[a][t] as u64;
                        acc.count_sum[a][t] += v;
                        acc.count_sq[a][t] += v * v;
                    }
                    for b in a + 1..num_classes {
                        for t in 0..steps {
                            acc.cross[pair][t] +=
                                class_counts[a][t] as u64 * class_counts[b][t] as u64;
                        }
                        pair += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| MomentAcc::new(num_classes, steps), MomentAcc::merge);

    let runs = config.num_runs as f64;
    let sample_var = |sum: u64, sq: u64| -> f64 {
        if config.num_runs < 2 {
            return 0.0;
        }
        let sum = sum as f64;
        ((sq as f64 - sum * sum / runs) / (runs - 1.0)).max(0.0)
    };

    let mut per_class_mean = BTreeMap::new();
    let mut per_class_std = BTreeMap::new();
    let mut appliance_std = BTreeMap::new();
    for (c, plan) in plans.iter().enumerate() {
        let mean: Vec<f64> = acc.count_sum[c].iter().map(|&s| s as f64 / runs).collect();
        let std: Vec<f64> = (0..steps)
            .map(|t| sample_var(acc.count_sum[c][t], acc.count_sq[c][t]).sqrt())
            .collect();
        // Representative single-appliance deviation; ON frequency is both the
        // sum and the sum of squares of a 0/1 state.
        let rep_std: Vec<f64> = (0..steps)
            .map(|t| {
                if plan.count == 0 {
                    0.0
                } else {
                    sample_var(acc.rep_on[c][t], acc.rep_on[c][t]).sqrt()
                }
            })
            .collect();
        per_class_mean.insert(plan.class_id.to_string(), mean);
        per_class_std.insert(plan.class_id.to_string(), std);
        appliance_std.insert(plan.class_id.to_string(), rep_std);
    }

    let aggregate_mean_watts: Vec<f64> = (0..steps)
        .map(|t| {
            plans
                .iter()
                .enumerate()
                .map(|(c, plan)| plan.watts * acc.count_sum[c][t] as f64 / runs)
                .sum()
        })
        .collect();

    // Raw aggregate variance from the exact per-run moments:
    // var(sum_a w_a C_a) = sum_a w_a^2 var(C_a) + 2 sum_{a<b} w_a w_b cov(C_a, C_b).
    let aggregate_std_raw: Vec<f64> = (0..steps)
        .map(|t| {
            let mut v = 0.0;
            for (c, plan) in plans.iter().enumerate() {
                v += plan.watts * plan.watts * sample_var(acc.count_sum[c][t], acc.count_sq[c][t]);
            }
            if config.num_runs >= 2 {
                let mut pair = 0;
                for a in 0..num_classes {
                    for b in a + 1..num_classes {
                        let cov = (acc.cross[pair][t] as f64
                            - acc.count_sum[a][t] as f64 * acc.count_sum[b][t] as f64 / runs)
                            / (runs - 1.0);
                        v += 2.0 * plans[a].watts * plans[b].watts * cov;
                        pair += 1;
                    }
                }
            }
            v.max(0.0).sqrt()
        })
        .collect();

    // Watt-weighted corrected variance: scaling each per-appliance deviation
    // by its class wattage turns the ON-count correction into a watt one.
    let scaled_std: BTreeMap<String, Vec<f64>> = plans
        .iter()
        .map(|plan| {
            let scaled = appliance_std[plan.class_id]
                .iter()
                .map(|s| s * plan.watts)
                .collect();
            (plan.class_id.to_string(), scaled)
        })
        .collect();
    let corrected = correct_aggregate_variance(&scaled_std, &counts, correlations)?;
    let aggregate_std_corrected: Vec<f64> =
        corrected.variance.iter().map(|v| v.sqrt()).collect();

    Ok(SimulationSummary {
        classes: plans.iter().map(|p| p.class_id.to_string()).collect(),
        per_class_mean,
        per_class_std,
        aggregate_mean_watts,
        aggregate_std_raw,
        aggregate_std_corrected,
        correction: CorrectionNotes {
            clamped_steps: corrected.clamped_steps,
            undefined_correlations: corrected.undefined_entries,
        },
    })
}

/// Watt view of a summary: nominal-draw-weighted mean and propagated
/// deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub mean_watts: Vec<f64>,
    /// Independent propagation `sqrt(sum_a w_a^2 std_a^2)` of the per-class
    /// ON-count deviations.
    pub std_raw_watts: Vec<f64>,
    /// Correlation-corrected aggregate deviation, carried over from the
    /// summary.
    pub std_corrected_watts: Vec<f64>,
}

/// Convert per-class ON-count statistics to watts with the nominal draws.
pub fn summarize_power(
    summary: &SimulationSummary,
    building: &BuildingProfile,
) -> Result<PowerSummary> {
    let steps = summary.aggregate_mean_watts.len();
    let mut mean_watts = vec![0.0; steps];
    let mut var_watts = vec![0.0; steps];
    for class_id in &summary.classes {
        let watts = *building.power_watts.get(class_id).ok_or_else(|| {
            Error::Config(format!("no nominal wattage for class '{class_id}'"))
        })?;
        let mean = &summary.per_class_mean[class_id];
        let std = &summary.per_class_std[class_id];
        for t in 0..steps {
            mean_watts[t] += watts * mean[t];
            var_watts[t] += watts * watts * std[t] * std[t];
        }
    }
    Ok(PowerSummary {
        mean_watts,
        std_raw_watts: var_watts.iter().map(|v| v.sqrt()).collect(),
        std_corrected_watts: summary.aggregate_std_corrected.clone(),
    })
}

/// Write the summary CSV: `step,class,mean_count,std_count,agg_mean_watts,
/// agg_std_raw,agg_std_corrected`. Aggregate columns are repeated on every
/// row. Leading `#` lines carry provenance and are skipped by the parsers.
pub fn write_summary_csv(
    mut writer: impl std::io::Write,
    summary: &SimulationSummary,
    provenance: &[(&str, String)],
) -> Result<()> {
    for (key, value) in provenance {
        writeln!(writer, "# {key}={value}")?;
    }
    writeln!(
        writer,
        "step,class,mean_count,std_count,agg_mean_watts,agg_std_raw,agg_std_corrected"
    )?;
    let steps = summary.aggregate_mean_watts.len();
    for t in 0..steps {
        for class_id in &summary.classes {
            writeln!(
                writer,
                "{},{},{},{},{},{},{}",
                t,
                class_id,
                summary.per_class_mean[class_id][t],
                summary.per_class_std[class_id][t],
                summary.aggregate_mean_watts[t],
                summary.aggregate_std_raw[t],
                summary.aggregate_std_corrected[t]
            )?;
        }
    }
    Ok(())
}
