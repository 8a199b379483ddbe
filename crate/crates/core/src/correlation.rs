//! Average pairwise state correlations within and across appliance classes,
//! the measured inputs of the aggregate variance correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ingest::StateSeries;

/// Symmetric table of average state correlations. The diagonal holds the
/// average correlation between *distinct* appliances of the same class, not
/// self-correlation. Entries with no valid (pair, step) sample are `None`
/// and are treated as zero (and flagged) by the variance correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub classes: Vec<String>,
    pub rho: Vec<Vec<Option<f64>>>,
    /// Number of (pair, step) samples averaged into each entry.
    pub pair_counts: Vec<Vec<u64>>,
}

impl CorrelationTable {
    /// Table with no measured entries for the given classes.
    pub fn empty(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            rho: vec![vec![None; k]; k],
            pair_counts: vec![vec![0; k]; k],
        }
    }

    /// Table of explicit values, mainly for fixtures and configs.
    pub fn from_dense(classes: Vec<String>, rho: Vec<Vec<f64>>) -> Result<Self> {
        let k = classes.len();
        if rho.len() != k || rho.iter().any(|row| row.len() != k) {
            return Err(Error::Config("correlation matrix shape mismatch".into()));
        }
        for a in 0..k {
            for b in 0..k {
                if !(-1.0..=1.0).contains(&rho[a][b]) {
                    return Err(Error::Config(format!(
                        "correlation [{a}][{b}] = {} outside [-1, 1]",
                        rho[a][b]
                    )));
                }
                if (rho[a][b] - rho[b][a]).abs() > 1e-12 {
                    return Err(Error::Config("correlation matrix not symmetric".into()));
                }
            }
        }
        Ok(Self {
            classes,
            rho: rho
                .into_iter()
                .map(|row| row.into_iter().map(Some).collect())
                .collect(),
            pair_counts: vec![vec![1; k]; k],
        })
    }

    fn index_of(&self, class_id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class_id)
    }

    /// Correlation between two classes; `None` if unmeasured or unknown.
    pub fn rho_between(&self, a: &str, b: &str) -> Option<f64> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        self.rho[ia][ib]
    }
}

struct PairAccumulator {
    days: u64,
    on_x: Vec<u64>,
    on_y: Vec<u64>,
    on_both: Vec<u64>,
}

impl PairAccumulator {
    fn new(steps: usize) -> Self {
        Self {
            days: 0,
            on_x: vec![0; steps],
            on_y: vec![0; steps],
            on_both: vec![0; steps],
        }
    }
}

/// Accumulate the per-step indicator moments of one appliance pair over the
/// calendar days where both are present.
fn accumulate_pair(x: &StateSeries, y: &StateSeries, steps: usize) -> PairAccumulator {
    let mut acc = PairAccumulator::new(steps);
    let mut ix = 0;
    let mut iy = 0;
    let dx = x.days();
    let dy = y.days();
    while ix < dx.len() && iy < dy.len() {
        match dx[ix].date.cmp(&dy[iy].date) {
            std::cmp::Ordering::Less => ix += 1,
            std::cmp::Ordering::Greater => iy += 1,
            std::cmp::Ordering::Equal => {
                if dx[ix].present && dy[iy].present {
                    acc.days += 1;
                    for t in 0..steps {
                        let sx = dx[ix].states[t] as u64;
                        let sy = dy[iy].states[t] as u64;
                        acc.on_x[t] += sx;
                        acc.on_y[t] += sy;
                        acc.on_both[t] += sx & sy;
                    }
                }
                ix += 1;
                iy += 1;
            }
        }
    }
    acc
}

/// Average Pearson correlation of the per-step state indicators over all
/// distinct appliance pairs of each class pair and all steps where both
/// indicators vary. Pairs are enumerated in sorted order so the reduction
/// is deterministic.
pub fn estimate_correlations(
    observations: &[StateSeries],
    grid: &TimeGrid,
) -> Result<CorrelationTable> {
    if observations.len() < 2 {
        return Err(Error::Estimation(
            "correlation estimation needs at least two appliances".into(),
        ));
    }
    let steps = grid.steps_per_day();

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, series) in observations.iter().enumerate() {
        by_class.entry(&series.class_id).or_default().push(idx);
    }
    // Within a class, order appliances by id for a stable pair enumeration.
    for members in by_class.values_mut() {
        members.sort_by(|&i, &j| observations[i].appliance_id.cmp(&observations[j].appliance_id));
    }

    let classes: Vec<String> = by_class.keys().map(|c| c.to_string()).collect();
    let k = classes.len();
    let mut table = CorrelationTable::empty(classes.clone());

    for a in 0..k {
        for b in a..k {
            let members_a = &by_class[classes[a].as_str()];
            let members_b = &by_class[classes[b].as_str()];
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            if a == b {
                for (pos, &i) in members_a.iter().enumerate() {
                    for &j in &members_a[pos + 1..] {
                        pairs.push((i, j));
                    }
                }
            } else {
                for &i in members_a {
                    for &j in members_b {
                        pairs.push((i, j));
                    }
                }
            }

            let mut rho_sum = 0.0;
            let mut samples = 0u64;
            for (i, j) in pairs {
                let acc = accumulate_pair(&observations[i], &observations[j], steps);
                if acc.days == 0 {
                    continue;
                }
                let n = acc.days as f64;
                for t in 0..steps {
                    // Nonzero variance needs the indicator to take both values.
                    if acc.on_x[t] == 0
                        || acc.on_x[t] == acc.days
                        || acc.on_y[t] == 0
                        || acc.on_y[t] == acc.days
                    {
                        continue;
                    }
                    let mx = acc.on_x[t] as f64 / n;
                    let my = acc.on_y[t] as f64 / n;
                    let cov = acc.on_both[t] as f64 / n - mx * my;
                    let var_x = mx * (1.0 - mx);
                    let var_y = my * (1.0 - my);
                    let r = (cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0);
                    rho_sum += r;
                    samples += 1;
                }
            }

            let entry = if samples == 0 {
                None
            } else {
                Some(rho_sum / samples as f64)
            };
            table.rho[a][b] = entry;
            table.rho[b][a] = entry;
            table.pair_counts[a][b] = samples;
            table.pair_counts[b][a] = samples;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DayRecord;
    use crate::profile::ProbabilityProfile;
    use crate::synth::{generate_synthetic, SyntheticSpec};
    use chrono::NaiveDate;
    use rand::Rng;
    use rand::SeedableRng;

    fn series_named(
        appliance: &str,
        class: &str,
        states: &[Vec<u8>],
        grid: &TimeGrid,
    ) -> StateSeries {
        let start: NaiveDate = "2024-01-01".parse().unwrap();
        let days = states
            .iter()
            .enumerate()
            .map(|(i, s)| DayRecord::from_states(start + chrono::Duration::days(i as i64), s.clone()))
            .collect();
        StateSeries::new(appliance, class, days, grid).unwrap()
    }

    #[test]
    fn identical_series_have_unit_correlation() {
        let grid = TimeGrid::new(360, 4).unwrap();
        let states: Vec<Vec<u8>> = vec![
            vec![0, 1, 1, 0],
            vec![1, 0, 1, 0],
            vec![0, 0, 1, 1],
            vec![1, 1, 0, 1],
        ];
        let a = series_named("a1", "c", &states, &grid);
        let b = series_named("a2", "c", &states, &grid);
        let table = estimate_correlations(&[a, b], &grid).unwrap();
        let rho = table.rho_between("c", "c").unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!(table.pair_counts[0][0] > 0);
    }

    #[test]
    fn independent_synthetic_appliances_are_nearly_uncorrelated() {
        let grid = TimeGrid::default();
        let truth = ProbabilityProfile::constant("c", 288, 0.1, 0.1, 1.0, 0.5).unwrap();
        let mut a = generate_synthetic(&SyntheticSpec::new(truth.clone(), 10_000, 100), &grid)
            .unwrap();
        let mut b =
            generate_synthetic(&SyntheticSpec::new(truth, 10_000, 200), &grid).unwrap();
        a.appliance_id = "a1".into();
        b.appliance_id = "a2".into();
        let table = estimate_correlations(&[a, b], &grid).unwrap();
        let rho = table.rho_between("c", "c").unwrap();
        assert!(rho.abs() <= 0.05, "rho = {rho}");
    }

    #[test]
    fn common_shock_pair_matches_analytic_correlation() {
        // X_i = Z with probability w, an independent copy otherwise, so the
        // analytic pair correlation is w^2 (cov = w^2 q (1-q)).
        let grid = TimeGrid::new(144, 10).unwrap();
        let steps = grid.steps_per_day();
        let (w, q, days) = (0.6, 0.3, 8_000usize);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut states_a = Vec::with_capacity(days);
        let mut states_b = Vec::with_capacity(days);
        for _ in 0..days {
            let mut da = vec![0u8; steps];
            let mut db = vec![0u8; steps];
            for t in 0..steps {
                let shock = u8::from(rng.gen::<f64>() < q);
                for d in [&mut da, &mut db] {
                    d[t] = if rng.gen::<f64>() < w {
                        shock
                    } else {
                        u8::from(rng.gen::<f64>() < q)
                    };
                }
            }
            states_a.push(da);
            states_b.push(db);
        }
        let a = series_named("a1", "c", &states_a, &grid);
        let b = series_named("a2", "c", &states_b, &grid);
        let table = estimate_correlations(&[a, b], &grid).unwrap();
        let rho = table.rho_between("c", "c").unwrap();
        assert!((rho - w * w).abs() <= 0.05, "rho = {rho}, expected {}", w * w);
    }

    #[test]
    fn correlations_use_only_common_present_days() {
        let grid = TimeGrid::new(360, 4).unwrap();
        // a2 is absent on the two days where a1 varies; only the common
        // present days (indices 0,1) count, where both series alternate.
        let a = series_named(
            "a1",
            "c",
            &[vec![0, 1, 0, 0], vec![1, 0, 1, 1], vec![1, 1, 1, 1], vec![1, 1, 0, 0]],
            &grid,
        );
        let b = series_named(
            "a2",
            "c",
            &[vec![0, 1, 0, 0], vec![1, 0, 1, 1], vec![0, 0, 0, 0], vec![0, 0, 0, 0]],
            &grid,
        );
        let table = estimate_correlations(&[a, b], &grid).unwrap();
        // On the common present days the two series are identical.
        let rho = table.rho_between("c", "c").unwrap();
        assert!((rho - 1.0).abs() < 1e-12, "rho = {rho}");
    }

    #[test]
    fn no_valid_samples_is_undefined_not_zero() {
        let grid = TimeGrid::new(360, 4).unwrap();
        // Constant states: zero variance at every step.
        let all_on = vec![vec![1u8, 1, 1, 1]; 3];
        let a = series_named("a1", "c", &all_on, &grid);
        let b = series_named("a2", "c", &all_on, &grid);
        let table = estimate_correlations(&[a, b], &grid).unwrap();
        assert_eq!(table.rho_between("c", "c"), None);
        assert_eq!(table.pair_counts[0][0], 0);
    }

    #[test]
    fn fewer_than_two_appliances_is_an_error() {
        let grid = TimeGrid::new(360, 4).unwrap();
        let a = series_named("a1", "c", &[vec![0, 1, 0, 0]], &grid);
        assert!(matches!(
            estimate_correlations(std::slice::from_ref(&a), &grid),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn cross_class_entries_are_symmetric() {
        let grid = TimeGrid::new(360, 4).unwrap();
        let states: Vec<Vec<u8>> = vec![vec![0, 1, 1, 0], vec![1, 0, 1, 0], vec![0, 0, 1, 1]];
        let a = series_named("a1", "ca", &states, &grid);
        let b = series_named("b1", "cb", &states, &grid);
        let c = series_named("b2", "cb", &states, &grid);
        let table = estimate_correlations(&[a, b, c], &grid).unwrap();
        assert_eq!(table.rho_between("ca", "cb"), table.rho_between("cb", "ca"));
        let rho = table.rho_between("ca", "cb").unwrap();
        assert!((rho - 1.0).abs() < 1e-12, "rho = {rho}");
    }
}
