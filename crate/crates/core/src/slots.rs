//! Coarse time-slot ON-probability model and its geometric diagnostic.
//!
//! The slot model is the low-resolution alternative to the per-step chain:
//! within each preset slot the turning-ON probability is assumed constant,
//! and a per-step simulation probability is recovered as `p_pw / n_pw`. The
//! diagnostic compares the within-slot distribution of first ON events
//! against the geometric law that assumption implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ingest::StateSeries;

/// Default working-day slot boundaries, in minutes after midnight:
/// 0-8AM, 8-9AM, 9-11:30AM, 11:30AM-1:30PM, 1:30-5PM, 5-7PM, 7-9:30PM,
/// 9:30PM-midnight.
pub const DEFAULT_SLOT_MINUTES: [u32; 8] = [0, 480, 540, 690, 810, 1020, 1140, 1350];

/// Slot start indices for the default boundaries on the given grid.
pub fn default_slot_boundaries(grid: &TimeGrid) -> Result<Vec<usize>> {
    DEFAULT_SLOT_MINUTES
        .iter()
        .map(|&minutes| {
            if minutes % grid.step_minutes() != 0 {
                return Err(Error::Config(format!(
                    "slot boundary at {minutes} min is not on the {}-min grid",
                    grid.step_minutes()
                )));
            }
            Ok((minutes / grid.step_minutes()) as usize)
        })
        .collect()
}

/// Per-slot turning-ON probabilities over a partition of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotModel {
    pub class_id: String,
    /// Slot start indices; slot `k` covers `[boundaries[k], boundaries[k+1])`
    /// and the last slot runs to `T`.
    pub boundaries: Vec<usize>,
    /// Probability that a present day sees at least one OFF->ON transition
    /// inside the slot.
    pub p_pw: Vec<f64>,
    /// Slot widths in grid steps.
    pub n_pw: Vec<usize>,
}

impl SlotModel {
    /// Per-step simulation probability for slot `k`: `p_pw[k] / n_pw[k]`.
    pub fn per_step_probability(&self, k: usize) -> f64 {
        self.p_pw[k] / self.n_pw[k] as f64
    }

    pub fn num_slots(&self) -> usize {
        self.boundaries.len()
    }

    fn slot_range(&self, k: usize, steps: usize) -> (usize, usize) {
        let start = self.boundaries[k];
        let end = if k + 1 < self.boundaries.len() {
            self.boundaries[k + 1]
        } else {
            steps
        };
        (start, end)
    }
}

fn validate_boundaries(boundaries: &[usize], steps: usize) -> Result<()> {
    if boundaries.first() != Some(&0) {
        return Err(Error::Config(
            "slot boundaries must start at step 0".into(),
        ));
    }
    for pair in boundaries.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config(
                "slot boundaries must be strictly increasing".into(),
            ));
        }
    }
    if let Some(&last) = boundaries.last() {
        if last >= steps {
            return Err(Error::Config(format!(
                "slot boundary {last} out of range [0, {steps})"
            )));
        }
    }
    Ok(())
}

/// First step of the slot at which an OFF->ON transition is observable.
/// Step 0 of the day has no predecessor, so slot 0 starts counting at 1.
fn first_feasible(start: usize) -> usize {
    start.max(1)
}

/// Estimate per-slot turning-ON probabilities from present days.
pub fn build_slot_model(
    observations: &[StateSeries],
    boundaries: &[usize],
    grid: &TimeGrid,
) -> Result<SlotModel> {
    let steps = grid.steps_per_day();
    validate_boundaries(boundaries, steps)?;
    let class_id = observations
        .first()
        .map(|s| s.class_id.clone())
        .unwrap_or_default();

    let num_slots = boundaries.len();
    let mut event_days = vec![0u64; num_slots];
    let mut sample_days = 0u64;

    let model_shape = SlotModel {
        class_id: class_id.clone(),
        boundaries: boundaries.to_vec(),
        p_pw: vec![0.0; num_slots],
        n_pw: vec![0; num_slots],
    };

    for series in observations {
        for day in series.present_days() {
            sample_days += 1;
            for k in 0..num_slots {
                let (start, end) = model_shape.slot_range(k, steps);
                let hit = (first_feasible(start)..end)
                    .any(|t| day.states[t] == 1 && day.states[t - 1] == 0);
                event_days[k] += u64::from(hit);
            }
        }
    }

    let n_pw: Vec<usize> = (0..num_slots)
        .map(|k| {
            let (start, end) = model_shape.slot_range(k, steps);
            end - start
        })
        .collect();
    let p_pw = event_days
        .iter()
        .map(|&e| {
            if sample_days == 0 {
                0.0
            } else {
                e as f64 / sample_days as f64
            }
        })
        .collect();

    Ok(SlotModel {
        class_id,
        boundaries: boundaries.to_vec(),
        p_pw,
        n_pw,
    })
}

/// Diagnostic for one slot: empirical first-transition offsets against the
/// geometric reference implied by `p_pw / n_pw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDiagnostic {
    pub slot: usize,
    /// Present days with at least one OFF->ON transition in the slot.
    pub event_days: u64,
    /// Empirical mass of the first transition offset, length `n_pw`.
    pub empirical: Vec<f64>,
    /// Geometric reference mass over feasible offsets, length `n_pw`.
    pub geometric: Vec<f64>,
    /// Total-variation distance; `None` when the slot has no events.
    pub tv_distance: Option<f64>,
}

impl SlotDiagnostic {
    pub fn insufficient_data(&self) -> bool {
        self.event_days == 0
    }
}

/// Compare first ON events per slot with the geometric law.
///
/// The reference is the geometric distribution with per-step parameter
/// `p_pw/n_pw`, restricted to the offsets at which a transition is
/// observable and conditioned on the event occurring within the slot.
pub fn slot_geometric_diagnostic(
    observations: &[StateSeries],
    slot_model: &SlotModel,
    grid: &TimeGrid,
) -> Result<Vec<SlotDiagnostic>> {
    let steps = grid.steps_per_day();
    validate_boundaries(&slot_model.boundaries, steps)?;
    if slot_model.n_pw.iter().sum::<usize>() != steps {
        return Err(Error::Config(
            "slot model was built for a different grid".into(),
        ));
    }

    let mut diagnostics = Vec::with_capacity(slot_model.num_slots());
    for k in 0..slot_model.num_slots() {
        let (start, end) = slot_model.slot_range(k, steps);
        let width = end - start;
        let feasible_from = first_feasible(start) - start;

        let mut counts = vec![0u64; width];
        let mut event_days = 0u64;
        for series in observations {
            for day in series.present_days() {
                let first = (first_feasible(start)..end)
                    .find(|&t| day.states[t] == 1 && day.states[t - 1] == 0);
                if let Some(t) = first {
                    counts[t - start] += 1;
                    event_days += 1;
                }
            }
        }

        let empirical: Vec<f64> = counts
            .iter()
            .map(|&c| {
                if event_days == 0 {
                    0.0
                } else {
                    c as f64 / event_days as f64
                }
            })
            .collect();

        let p = slot_model.per_step_probability(k);
        let mut geometric = vec![0.0; width];
        if p > 0.0 && p <= 1.0 {
            let mut mass_sum = 0.0;
            for (offset, g) in geometric.iter_mut().enumerate().skip(feasible_from) {
                *g = p * (1.0 - p).powi((offset - feasible_from) as i32);
                mass_sum += *g;
            }
            if mass_sum > 0.0 {
                for g in &mut geometric {
                    *g /= mass_sum;
                }
            }
        }

        let tv_distance = if event_days == 0 {
            None
        } else {
            Some(
                0.5 * empirical
                    .iter()
                    .zip(&geometric)
                    .map(|(e, g)| (e - g).abs())
                    .sum::<f64>(),
            )
        };

        diagnostics.push(SlotDiagnostic {
            slot: k,
            event_days,
            empirical,
            geometric,
            tv_distance,
        });
    }
    Ok(diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DayRecord;
    use crate::profile::ProbabilityProfile;
    use crate::synth::{generate_synthetic, SyntheticSpec};
    use chrono::NaiveDate;

    fn series_from(states: &[Vec<u8>], grid: &TimeGrid) -> StateSeries {
        let start: NaiveDate = "2024-01-01".parse().unwrap();
        let days = states
            .iter()
            .enumerate()
            .map(|(i, s)| DayRecord::from_states(start + chrono::Duration::days(i as i64), s.clone()))
            .collect();
        StateSeries::new("a1", "c", days, grid).unwrap()
    }

    #[test]
    fn default_boundaries_give_eight_slots_with_twelve_steps_in_the_breakfast_slot() {
        let grid = TimeGrid::default();
        let boundaries = default_slot_boundaries(&grid).unwrap();
        assert_eq!(boundaries.len(), 8);
        let model = build_slot_model(&[], &boundaries, &grid).unwrap();
        assert_eq!(model.num_slots(), 8);
        // 8-9AM at 5-minute resolution.
        assert_eq!(model.n_pw[1], 12);
        assert_eq!(model.n_pw.iter().sum::<usize>(), 288);
    }

    #[test]
    fn per_step_probability_is_p_pw_over_n_pw() {
        let model = SlotModel {
            class_id: "c".into(),
            boundaries: vec![0],
            p_pw: vec![0.12],
            n_pw: vec![12],
        };
        assert!((model.per_step_probability(0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn slot_widths_sum_to_t_for_any_partition() {
        let grid = TimeGrid::default();
        for boundaries in [vec![0], vec![0, 7, 100, 250], vec![0, 1, 2, 3]] {
            let model = build_slot_model(&[], &boundaries, &grid).unwrap();
            assert_eq!(model.n_pw.iter().sum::<usize>(), 288);
        }
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        let grid = TimeGrid::default();
        assert!(build_slot_model(&[], &[1, 5], &grid).is_err()); // must start at 0
        assert!(build_slot_model(&[], &[0, 5, 5], &grid).is_err()); // not increasing
        assert!(build_slot_model(&[], &[0, 288], &grid).is_err()); // out of range
    }

    #[test]
    fn p_pw_counts_days_with_a_turn_on_event() {
        let grid = TimeGrid::new(360, 4).unwrap();
        // Slot 0 = steps [0,2), slot 1 = [2,4).
        // day1 has an OFF->ON at t=1 (slot 0) and t=3 (slot 1);
        // day2 has one only at t=2 (slot 1); day3 has none (all ON: no OFF->ON).
        let series = series_from(
            &[vec![0, 1, 0, 1], vec![0, 0, 1, 1], vec![1, 1, 1, 1]],
            &grid,
        );
        let model = build_slot_model(std::slice::from_ref(&series), &[0, 2], &grid).unwrap();
        assert_eq!(model.n_pw, vec![2, 2]);
        assert!((model.p_pw[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((model.p_pw[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_slot_is_marked_insufficient() {
        let grid = TimeGrid::new(360, 4).unwrap();
        let series = series_from(&[vec![0, 0, 0, 1]], &grid);
        let model = build_slot_model(std::slice::from_ref(&series), &[0, 2], &grid).unwrap();
        let diags =
            slot_geometric_diagnostic(std::slice::from_ref(&series), &model, &grid).unwrap();
        assert!(diags[0].insufficient_data());
        assert_eq!(diags[0].tv_distance, None);
        assert!(!diags[1].insufficient_data());
    }

    #[test]
    fn deterministic_first_offset_is_a_point_mass() {
        let grid = TimeGrid::new(360, 4).unwrap();
        // Every present day turns ON exactly at step 2 = offset 0 of slot 1.
        let series = series_from(&vec![vec![0, 0, 1, 1]; 5], &grid);
        let model = build_slot_model(std::slice::from_ref(&series), &[0, 2], &grid).unwrap();
        let diags =
            slot_geometric_diagnostic(std::slice::from_ref(&series), &model, &grid).unwrap();
        assert_eq!(diags[1].empirical, vec![1.0, 0.0]);
        assert_eq!(diags[1].event_days, 5);
    }

    #[test]
    fn constant_rate_synthetic_matches_the_geometric_reference() {
        // Constant per-step ON probability, immediate OFF: first events in a
        // slot are geometric, so the TV distance shrinks with M.
        let grid = TimeGrid::default();
        let truth = ProbabilityProfile::constant("c", 288, 0.05, 1.0, 1.0, 0.0).unwrap();
        let series =
            generate_synthetic(&SyntheticSpec::new(truth, 10_000, 21), &grid).unwrap();
        let boundaries: Vec<usize> = (0..48).map(|k| k * 6).collect();
        let model =
            build_slot_model(std::slice::from_ref(&series), &boundaries, &grid).unwrap();
        let diags =
            slot_geometric_diagnostic(std::slice::from_ref(&series), &model, &grid).unwrap();
        for diag in &diags {
            let tv = diag.tv_distance.expect("every slot sees events");
            assert!(tv <= 0.05, "slot {} tv = {tv}", diag.slot);
        }
    }
}
