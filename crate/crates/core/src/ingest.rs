//! Binary appliance state observations: types, CSV ingestion, thresholding
//! and weekday filtering.
//!
//! A "day" is midnight-to-midnight in the data's local timezone. A day is
//! observed either completely (all `T` steps) or not at all; partially
//! observed days are rejected rather than imputed.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// One observed day of a single appliance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    /// Whether the appliance was active at all that day. Always false implies
    /// an all-zero state vector.
    pub present: bool,
    /// Length-`T` vector of {0,1} states.
    pub states: Vec<u8>,
}

impl DayRecord {
    /// Build a day, deriving presence from the states (present iff any step
    /// is ON). This is the operational presence rule for observed data.
    pub fn from_states(date: NaiveDate, states: Vec<u8>) -> Self {
        let present = states.iter().any(|&s| s == 1);
        Self {
            date,
            present,
            states,
        }
    }

    fn validate(&self, steps_per_day: usize, appliance: &str) -> Result<()> {
        if self.states.len() != steps_per_day {
            return Err(Error::Integrity {
                appliance: appliance.to_string(),
                date: Some(self.date),
                message: format!(
                    "day has {} steps, expected {steps_per_day}",
                    self.states.len()
                ),
            });
        }
        if self.states.iter().any(|&s| s > 1) {
            return Err(Error::Integrity {
                appliance: appliance.to_string(),
                date: Some(self.date),
                message: "state values must be 0 or 1".into(),
            });
        }
        if !self.present && self.states.iter().any(|&s| s != 0) {
            return Err(Error::Integrity {
                appliance: appliance.to_string(),
                date: Some(self.date),
                message: "absent day carries nonzero states".into(),
            });
        }
        Ok(())
    }
}

/// Per-appliance, per-day binary ON/OFF observation matrix on a fixed grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSeries {
    pub appliance_id: String,
    pub class_id: String,
    days: Vec<DayRecord>,
}

impl StateSeries {
    /// Build a series, enforcing the day invariants (complete days, binary
    /// states, strictly increasing dates, absent days all zero).
    pub fn new(
        appliance_id: impl Into<String>,
        class_id: impl Into<String>,
        days: Vec<DayRecord>,
        grid: &TimeGrid,
    ) -> Result<Self> {
        let appliance_id = appliance_id.into();
        for day in &days {
            day.validate(grid.steps_per_day(), &appliance_id)?;
        }
        for pair in days.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(pair[1].date),
                    message: "day records must be strictly increasing by date".into(),
                });
            }
        }
        Ok(Self {
            appliance_id,
            class_id: class_id.into(),
            days,
        })
    }

    pub fn days(&self) -> &[DayRecord] {
        &self.days
    }

    /// Number of observed days, `M`.
    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    pub fn present_days(&self) -> impl Iterator<Item = &DayRecord> {
        self.days.iter().filter(|d| d.present)
    }

    /// Retain only Monday..Friday day records, order preserved.
    pub fn filter_weekdays(&self) -> StateSeries {
        let days = self
            .days
            .iter()
            .filter(|d| d.date.weekday().num_days_from_monday() < 5)
            .cloned()
            .collect();
        StateSeries {
            appliance_id: self.appliance_id.clone(),
            class_id: self.class_id.clone(),
            days,
        }
    }
}

/// Raw per-appliance power trace; only used by the threshold extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub appliance_id: String,
    days: Vec<PowerDay>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDay {
    pub date: NaiveDate,
    pub watts: Vec<f64>,
}

impl PowerTrace {
    pub fn new(appliance_id: impl Into<String>, days: Vec<PowerDay>, grid: &TimeGrid) -> Result<Self> {
        let appliance_id = appliance_id.into();
        for day in &days {
            if day.watts.len() != grid.steps_per_day() {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(day.date),
                    message: format!(
                        "power day has {} steps, expected {}",
                        day.watts.len(),
                        grid.steps_per_day()
                    ),
                });
            }
            if day.watts.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(day.date),
                    message: "power values must be finite and nonnegative".into(),
                });
            }
        }
        for pair in days.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(pair[1].date),
                    message: "power days must be strictly increasing by date".into(),
                });
            }
        }
        Ok(Self { appliance_id, days })
    }

    pub fn days(&self) -> &[PowerDay] {
        &self.days
    }
}

/// Binarize a power trace: ON exactly where `power > threshold_watts`
/// (strict, so a zero threshold maps exactly-zero power to OFF). The
/// class defaults to the appliance id; callers may relabel afterwards.
pub fn threshold_extract(trace: &PowerTrace, threshold_watts: f64) -> Result<StateSeries> {
    if !threshold_watts.is_finite() || threshold_watts < 0.0 {
        return Err(Error::Config(format!(
            "threshold must be finite and nonnegative, got {threshold_watts}"
        )));
    }
    let days = trace
        .days
        .iter()
        .map(|day| {
            let states = day
                .watts
                .iter()
                .map(|&w| u8::from(w > threshold_watts))
                .collect();
            DayRecord::from_states(day.date, states)
        })
        .collect();
    Ok(StateSeries {
        appliance_id: trace.appliance_id.clone(),
        class_id: trace.appliance_id.clone(),
        days,
    })
}

/// Retain only Monday..Friday day records of a series.
pub fn filter_weekdays(series: &StateSeries) -> StateSeries {
    series.filter_weekdays()
}

const STATE_HEADER: [&str; 5] = ["appliance_id", "class_id", "date", "step", "state"];
const POWER_HEADER: [&str; 4] = ["appliance_id", "date", "step", "watts"];

struct RawRow {
    line: usize,
    step: usize,
    state: u8,
}

/// Parse the long-format state CSV (`appliance_id,class_id,date,step,state`).
///
/// Returns one series per distinct appliance, sorted by appliance id, with
/// every (appliance, date) pair fully populated. Lines starting with `#` are
/// skipped.
pub fn parse_state_csv(path: impl AsRef<Path>, grid: &TimeGrid) -> Result<Vec<StateSeries>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_state_reader(file, grid)
}

pub fn parse_state_reader(reader: impl Read, grid: &TimeGrid) -> Result<Vec<StateSeries>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut csv_reader, &STATE_HEADER)?;

    let steps = grid.steps_per_day();
    // appliance -> (class, date -> rows)
    let mut by_appliance: BTreeMap<String, BTreeMap<NaiveDate, Vec<RawRow>>> = BTreeMap::new();
    let mut classes: BTreeMap<String, (String, usize)> = BTreeMap::new();

    for record in csv_reader.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        if record.len() != STATE_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", STATE_HEADER.len(), record.len()),
            });
        }
        let appliance_id = non_empty(&record[0], line, "appliance_id")?;
        let class_id = non_empty(&record[1], line, "class_id")?;
        let date = parse_date(&record[2], line)?;
        let step = parse_step(&record[3], steps, line)?;
        let state = parse_state(&record[4], line)?;

        match classes.get(&appliance_id) {
            None => {
                classes.insert(appliance_id.clone(), (class_id.clone(), line));
            }
            Some((existing, _)) if *existing != class_id => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "appliance '{appliance_id}' reassigned from class '{existing}' to '{class_id}'"
                    ),
                });
            }
            Some(_) => {}
        }

        by_appliance
            .entry(appliance_id)
            .or_default()
            .entry(date)
            .or_default()
            .push(RawRow { line, step, state });
    }

    let mut out = Vec::with_capacity(by_appliance.len());
    for (appliance_id, days) in by_appliance {
        let class_id = classes[&appliance_id].0.clone();
        let mut records = Vec::with_capacity(days.len());
        for (date, rows) in days {
            let mut states = vec![u8::MAX; steps];
            for row in &rows {
                if states[row.step] != u8::MAX {
                    return Err(Error::Integrity {
                        appliance: appliance_id,
                        date: Some(date),
                        message: format!("duplicate step {} (line {})", row.step, row.line),
                    });
                }
                states[row.step] = row.state;
            }
            let missing = states.iter().filter(|&&s| s == u8::MAX).count();
            if missing > 0 {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(date),
                    message: format!("day is missing {missing} of {steps} steps"),
                });
            }
            records.push(DayRecord::from_states(date, states));
        }
        out.push(StateSeries::new(appliance_id, class_id, records, grid)?);
    }
    Ok(out)
}

/// Serialize series back to the long-format state CSV, rows sorted by
/// (appliance, date, step). Re-parsing the output reproduces the input for
/// any series whose presence flags follow the any-ON rule.
pub fn write_state_csv(writer: impl Write, series: &[StateSeries]) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(STATE_HEADER)?;
    for s in series {
        for day in s.days() {
            for (step, state) in day.states.iter().enumerate() {
                csv_writer.write_record([
                    s.appliance_id.as_str(),
                    s.class_id.as_str(),
                    &day.date.to_string(),
                    &step.to_string(),
                    &state.to_string(),
                ])?;
            }
        }
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn write_state_csv_path(path: impl AsRef<Path>, series: &[StateSeries]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_state_csv(file, series)
}

/// Parse the power CSV (`appliance_id,date,step,watts`), one trace per
/// appliance, sorted by appliance id.
pub fn parse_power_csv(path: impl AsRef<Path>, grid: &TimeGrid) -> Result<Vec<PowerTrace>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_power_reader(file, grid)
}

pub fn parse_power_reader(reader: impl Read, grid: &TimeGrid) -> Result<Vec<PowerTrace>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut csv_reader, &POWER_HEADER)?;

    let steps = grid.steps_per_day();
    let mut by_appliance: BTreeMap<String, BTreeMap<NaiveDate, Vec<(usize, usize, f64)>>> =
        BTreeMap::new();

    for record in csv_reader.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        if record.len() != POWER_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", POWER_HEADER.len(), record.len()),
            });
        }
        let appliance_id = non_empty(&record[0], line, "appliance_id")?;
        let date = parse_date(&record[1], line)?;
        let step = parse_step(&record[2], steps, line)?;
        let watts: f64 = record[3].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid watts value '{}'", &record[3]),
        })?;
        if !watts.is_finite() || watts < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("watts must be finite and nonnegative, got {watts}"),
            });
        }
        by_appliance
            .entry(appliance_id)
            .or_default()
            .entry(date)
            .or_default()
            .push((line, step, watts));
    }

    let mut out = Vec::with_capacity(by_appliance.len());
    for (appliance_id, days) in by_appliance {
        let mut records = Vec::with_capacity(days.len());
        for (date, rows) in days {
            let mut watts = vec![f64::NAN; steps];
            for &(line, step, value) in &rows {
                if !watts[step].is_nan() {
                    return Err(Error::Integrity {
                        appliance: appliance_id,
                        date: Some(date),
                        message: format!("duplicate step {step} (line {line})"),
                    });
                }
                watts[step] = value;
            }
            let missing = watts.iter().filter(|w| w.is_nan()).count();
            if missing > 0 {
                return Err(Error::Integrity {
                    appliance: appliance_id,
                    date: Some(date),
                    message: format!("day is missing {missing} of {steps} steps"),
                });
            }
            records.push(PowerDay { date, watts });
        }
        out.push(PowerTrace::new(appliance_id, records, grid)?);
    }
    Ok(out)
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_row_error)?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}', got '{}'", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn csv_row_error(err: csv::Error) -> Error {
    let line = match err.position() {
        Some(pos) => pos.line() as usize,
        None => 0,
    };
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

fn non_empty(value: &str, line: usize, field: &str) -> Result<String> {
    if value.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("empty {field}"),
        });
    }
    Ok(value.to_string())
}

fn parse_date(value: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| Error::Parse {
        line,
        message: format!("invalid ISO-8601 date '{value}'"),
    })
}

fn parse_state(value: &str, line: usize) -> Result<u8> {
    match value {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse {
            line,
            message: format!("state must be 0 or 1, got '{other}'"),
        }),
    }
}

fn parse_step(value: &str, steps: usize, line: usize) -> Result<usize> {
    let step: usize = value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid step '{value}'"),
    })?;
    if step >= steps {
        return Err(Error::Parse {
            line,
            message: format!("step {step} out of range [0, {})", steps),
        });
    }
    Ok(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::from_step_minutes(360).unwrap() // T = 4, keeps fixtures small
    }

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn csv_of(rows: &[(&str, &str, &str, usize, u8)]) -> String {
        let mut text = String::from("appliance_id,class_id,date,step,state\n");
        for (a, c, d, s, v) in rows {
            text.push_str(&format!("{a},{c},{d},{s},{v}\n"));
        }
        text
    }

    #[test]
    fn parses_two_complete_zero_days() {
        let mut rows = vec![];
        for day in ["2024-01-01", "2024-01-02"] {
            for step in 0..4 {
                rows.push(("a1", "monitor", day, step, 0u8));
            }
        }
        let series = parse_state_reader(csv_of(&rows).as_bytes(), &grid()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].num_days(), 2);
        assert!(series[0].days().iter().all(|d| !d.present));
        assert!(series[0]
            .days()
            .iter()
            .all(|d| d.states.iter().all(|&s| s == 0)));
    }

    #[test]
    fn partial_day_is_an_integrity_error() {
        let rows = vec![
            ("a1", "monitor", "2024-01-01", 0, 0u8),
            ("a1", "monitor", "2024-01-01", 1, 1),
            ("a1", "monitor", "2024-01-01", 2, 0),
        ];
        let err = parse_state_reader(csv_of(&rows).as_bytes(), &grid()).unwrap_err();
        match err {
            Error::Integrity {
                appliance, date, ..
            } => {
                assert_eq!(appliance, "a1");
                assert_eq!(date, Some("2024-01-01".parse().unwrap()));
            }
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn non_binary_state_names_the_line() {
        let text = "appliance_id,class_id,date,step,state\na1,monitor,2024-01-01,0,2\n";
        let err = parse_state_reader(text.as_bytes(), &grid()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("state"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_date_names_the_line() {
        let text = "appliance_id,class_id,date,step,state\n\
                    a1,monitor,2024-01-01,0,0\n\
                    a1,monitor,01/02/2024,1,0\n";
        let err = parse_state_reader(text.as_bytes(), &grid()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_step_is_rejected() {
        let rows = vec![
            ("a1", "monitor", "2024-01-01", 0, 0u8),
            ("a1", "monitor", "2024-01-01", 1, 0),
            ("a1", "monitor", "2024-01-01", 1, 1),
            ("a1", "monitor", "2024-01-01", 2, 0),
            ("a1", "monitor", "2024-01-01", 3, 0),
        ];
        assert!(matches!(
            parse_state_reader(csv_of(&rows).as_bytes(), &grid()),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn class_reassignment_is_rejected() {
        let mut rows = vec![];
        for step in 0..4 {
            rows.push(("a1", "monitor", "2024-01-01", step, 0u8));
        }
        let mut text = csv_of(&rows);
        text.push_str("a1,laptop,2024-01-02,0,0\n");
        assert!(matches!(
            parse_state_reader(text.as_bytes(), &grid()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn multi_appliance_fixture_counts_match() {
        // 3 appliances x 80 days, built programmatically and recounted.
        let grid = TimeGrid::from_step_minutes(360).unwrap();
        let start = date("2024-01-01");
        let mut text = String::from("appliance_id,class_id,date,step,state\n");
        for a in ["a1", "a2", "a3"] {
            for d in 0..80 {
                let day = start + chrono::Duration::days(d);
                for step in 0..4 {
                    let state = u8::from(step == 1 && d % 2 == 0);
                    text.push_str(&format!("{a},c,{day},{step},{state}\n"));
                }
            }
        }
        let series = parse_state_reader(text.as_bytes(), &grid).unwrap();
        assert_eq!(series.len(), 3);
        for s in &series {
            assert_eq!(s.num_days(), 80);
            assert_eq!(s.present_days().count(), 40);
        }
    }

    #[test]
    fn threshold_zero_power_yields_no_presence() {
        let grid = grid();
        let trace = PowerTrace::new(
            "a1",
            vec![PowerDay {
                date: date("2024-01-01"),
                watts: vec![0.0; 4],
            }],
            &grid,
        )
        .unwrap();
        let series = threshold_extract(&trace, 5.0).unwrap();
        assert!(series.days().iter().all(|d| !d.present));
        assert!(series.days()[0].states.iter().all(|&s| s == 0));
    }

    #[test]
    fn threshold_is_strict() {
        let grid = grid();
        let trace = PowerTrace::new(
            "a1",
            vec![PowerDay {
                date: date("2024-01-01"),
                watts: vec![10.0, 10.0, 5.0, 0.0],
            }],
            &grid,
        )
        .unwrap();
        let series = threshold_extract(&trace, 5.0).unwrap();
        assert_eq!(series.days()[0].states, vec![1, 1, 0, 0]);
        assert!(series.days()[0].present);
    }

    #[test]
    fn sinusoidal_power_produces_expected_run_count() {
        let grid = TimeGrid::default();
        let steps = grid.steps_per_day();
        // 4 full sine periods above/below the threshold -> 4 contiguous ON runs.
        let watts: Vec<f64> = (0..steps)
            .map(|t| 50.0 + 40.0 * (2.0 * std::f64::consts::PI * 4.0 * t as f64 / steps as f64).sin())
            .collect();
        let crossings_up = (1..steps)
            .filter(|&t| watts[t] > 50.0 && watts[t - 1] <= 50.0)
            .count()
            + usize::from(watts[0] > 50.0);
        let trace = PowerTrace::new(
            "a1",
            vec![PowerDay {
                date: date("2024-01-01"),
                watts,
            }],
            &grid,
        )
        .unwrap();
        let series = threshold_extract(&trace, 50.0).unwrap();
        let states = &series.days()[0].states;
        let runs = (1..steps)
            .filter(|&t| states[t] == 1 && states[t - 1] == 0)
            .count()
            + usize::from(states[0] == 1);
        assert_eq!(runs, crossings_up);
        assert_eq!(runs, 4);
    }

    #[test]
    fn weekday_filter_keeps_monday_to_friday() {
        let grid = grid();
        // 2024-01-01 is a Monday.
        let days: Vec<DayRecord> = (0..7)
            .map(|d| DayRecord::from_states(date("2024-01-01") + chrono::Duration::days(d), vec![0; 4]))
            .collect();
        let series = StateSeries::new("a1", "c", days, &grid).unwrap();
        let filtered = filter_weekdays(&series);
        assert_eq!(filtered.num_days(), 5);
        assert!(filtered
            .days()
            .iter()
            .all(|d| d.date.weekday().num_days_from_monday() < 5));
    }

    #[test]
    fn weekend_only_input_filters_to_empty() {
        let grid = grid();
        // 2024-01-06 is a Saturday.
        let days = vec![
            DayRecord::from_states(date("2024-01-06"), vec![0; 4]),
            DayRecord::from_states(date("2024-01-07"), vec![0; 4]),
        ];
        let series = StateSeries::new("a1", "c", days, &grid).unwrap();
        assert_eq!(filter_weekdays(&series).num_days(), 0);
    }

    #[test]
    fn weekday_filter_matches_calendar_enumeration() {
        let grid = grid();
        let start = date("2024-03-07"); // arbitrary Thursday
        let days: Vec<DayRecord> = (0..80)
            .map(|d| DayRecord::from_states(start + chrono::Duration::days(d), vec![0; 4]))
            .collect();
        // Independent calendar recount.
        let expected = (0..80)
            .filter(|&d| {
                (start + chrono::Duration::days(d))
                    .weekday()
                    .num_days_from_monday()
                    < 5
            })
            .count();
        let series = StateSeries::new("a1", "c", days, &grid).unwrap();
        assert_eq!(filter_weekdays(&series).num_days(), expected);
    }

    #[test]
    fn state_csv_round_trips() {
        let grid = grid();
        let days = vec![
            DayRecord::from_states(date("2024-01-01"), vec![0, 1, 1, 0]),
            DayRecord::from_states(date("2024-01-02"), vec![0, 0, 0, 0]),
        ];
        let series = vec![
            StateSeries::new("a1", "monitor", days.clone(), &grid).unwrap(),
            StateSeries::new("a2", "laptop", days, &grid).unwrap(),
        ];
        let mut buf = Vec::new();
        write_state_csv(&mut buf, &series).unwrap();
        let reparsed = parse_state_reader(buf.as_slice(), &grid).unwrap();
        assert_eq!(reparsed, series);
    }
}
