//! Subcommand implementations. Each returns the process exit code on its
//! success path; hard failures propagate as errors and are classified by
//! `main` (2 input, 3 configuration, 4 validation failure).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use enduse_core::correlation::CorrelationTable;
use enduse_core::durations::DurationModel;
use enduse_core::profile_doc::{file_digest, ProfileDocument, Provenance};
use enduse_core::simulate::SimulationConfig;
use enduse_core::slots::{SlotDiagnostic, SlotModel};
use enduse_core::validate::{
    check_consistency_ladder, check_theorem_identity, check_theorem_mc,
    check_variance_correction, CheckStatus, ValidationOptions, ValidationReport,
};
use enduse_core::{
    build_slot_model, default_slot_boundaries, estimate_correlations, estimate_durations,
    estimate_empirical_probs, estimate_rou, filter_weekdays, generate_synthetic, parse_power_csv,
    parse_state_csv, slot_geometric_diagnostic, smooth_profile, threshold_extract,
    write_state_csv_path, write_summary_csv, StateSeries, TimeGrid,
};

use crate::config::{load_config, LoadedConfig};
use crate::plot::{render_day_chart, PlotLine};
use crate::{EstimateArgs, IngestArgs, SimulateArgs, ValidateArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 4;

pub fn cmd_ingest(args: &IngestArgs) -> Result<i32> {
    let grid = TimeGrid::from_step_minutes(args.step_minutes)?;
    let traces = parse_power_csv(&args.power, &grid)
        .with_context(|| format!("ingesting '{}'", args.power.display()))?;
    let mut series = Vec::with_capacity(traces.len());
    for trace in &traces {
        let mut extracted = threshold_extract(trace, args.threshold)?;
        if let Some(class) = &args.class {
            extracted.class_id = class.clone();
        }
        if !args.keep_weekends {
            extracted = filter_weekdays(&extracted);
        }
        series.push(extracted);
    }
    if let Some(parent) = args.out_states.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_state_csv_path(&args.out_states, &series)?;
    let days: usize = series.iter().map(|s| s.num_days()).sum();
    println!(
        "ingested {} appliance(s), {} day record(s) -> {}",
        series.len(),
        days,
        args.out_states.display()
    );
    Ok(EXIT_OK)
}

fn group_by_class(series: Vec<StateSeries>) -> BTreeMap<String, Vec<StateSeries>> {
    let mut grouped: BTreeMap<String, Vec<StateSeries>> = BTreeMap::new();
    for s in series {
        grouped.entry(s.class_id.clone()).or_default().push(s);
    }
    grouped
}

#[derive(Debug, Serialize)]
struct ClassDiagnostics {
    appliances: usize,
    days: usize,
    present_days: usize,
    p_pres: f64,
    /// Steps whose ON (resp. OFF) estimate is the zero-support fallback.
    on_fallback_steps: usize,
    off_fallback_steps: usize,
    fallback_fraction: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SlotReport {
    model: SlotModel,
    diagnostics: Vec<SlotDiagnostic>,
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let loaded = load_config(&args.config)?;
    let grid = loaded.config.grid()?;
    let smoother = loaded.config.smoother();
    let state_csv = args
        .states
        .clone()
        .or_else(|| loaded.config.io.state_csv.clone())
        .ok_or_else(|| {
            enduse_core::Error::Config("no state CSV given (--states or [io].state_csv)".into())
        })?;
    let out_dir = resolve_out_dir(&args.out, &loaded);

    let series = parse_state_csv(&state_csv, &grid)
        .with_context(|| format!("parsing '{}'", state_csv.display()))?;
    if series.is_empty() {
        bail!(enduse_core::Error::Estimation(
            "state CSV contains no appliances".into()
        ));
    }
    let provenance = Provenance {
        inputs: vec![(state_csv.display().to_string(), file_digest(&state_csv)?)],
        config_digest: Some(loaded.digest.clone()),
        seed: None,
    };
    let boundaries = match &loaded.config.slots {
        Some(b) => b.clone(),
        None => default_slot_boundaries(&grid)?,
    };

    let profiles_dir = out_dir.join("profiles");
    std::fs::create_dir_all(&profiles_dir)?;

    let all_series: Vec<StateSeries> = series.clone();
    let grouped = group_by_class(series);

    let mut rou_rows: Vec<(usize, String, f64, u64)> = Vec::new();
    let mut slot_reports: BTreeMap<String, SlotReport> = BTreeMap::new();
    let mut duration_models: BTreeMap<String, Option<DurationModel>> = BTreeMap::new();
    let mut diagnostics: BTreeMap<String, ClassDiagnostics> = BTreeMap::new();

    for (class_id, observations) in &grouped {
        let mut warnings = Vec::new();
        let raw = estimate_empirical_probs(observations, &grid)?;
        if raw.p_pres == 0.0 {
            let message = format!("class '{class_id}' has no present days; profile is all fallback");
            eprintln!("warning: {message}");
            warnings.push(message);
        }
        let smoothed = smooth_profile(&raw, &smoother)?;

        ProfileDocument::new(&raw, &grid, None, provenance.clone())?
            .write(profiles_dir.join(format!("{class_id}.raw.json")))?;
        ProfileDocument::new(&smoothed, &grid, Some(smoother), provenance.clone())?
            .write(profiles_dir.join(format!("{class_id}.json")))?;

        let rou = estimate_rou(observations, &grid)?;
        for (t, (&value, &support)) in rou.rou.iter().zip(&rou.support).enumerate() {
            rou_rows.push((t, class_id.clone(), value, support));
        }

        let model = build_slot_model(observations, &boundaries, &grid)?;
        let slot_diags = slot_geometric_diagnostic(observations, &model, &grid)?;
        slot_reports.insert(
            class_id.clone(),
            SlotReport {
                model,
                diagnostics: slot_diags,
            },
        );

        let durations = match estimate_durations(observations) {
            Ok(model) => Some(model),
            Err(err) => {
                let message = format!("class '{class_id}': durations skipped ({err})");
                eprintln!("warning: {message}");
                warnings.push(message);
                None
            }
        };
        duration_models.insert(class_id.clone(), durations);

        let steps = grid.steps_per_day();
        let on_fallback = raw.on_support.iter().filter(|&&s| s == 0).count();
        let off_fallback = raw.off_support.iter().filter(|&&s| s == 0).count();
        diagnostics.insert(
            class_id.clone(),
            ClassDiagnostics {
                appliances: observations.len(),
                days: observations.iter().map(|s| s.num_days()).sum(),
                present_days: observations
                    .iter()
                    .map(|s| s.present_days().count())
                    .sum(),
                p_pres: raw.p_pres,
                on_fallback_steps: on_fallback,
                off_fallback_steps: off_fallback,
                fallback_fraction: (on_fallback + off_fallback) as f64 / (2 * steps) as f64,
                warnings,
            },
        );
    }

    // Correlations need at least two appliances overall.
    if all_series.len() >= 2 {
        let table = estimate_correlations(&all_series, &grid)?;
        write_json(&profiles_dir.join("correlations.json"), &table)?;
    } else {
        eprintln!("warning: correlation table skipped (single appliance)");
    }

    let mut rou_csv = String::from("step,class,rou,support\n");
    rou_rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    for (step, class, value, support) in rou_rows {
        rou_csv.push_str(&format!("{step},{class},{value},{support}\n"));
    }
    std::fs::write(out_dir.join("rou.csv"), rou_csv)?;
    write_json(&out_dir.join("slots.json"), &slot_reports)?;
    write_json(&out_dir.join("durations.json"), &duration_models)?;
    write_json(&out_dir.join("diagnostics.json"), &diagnostics)?;

    println!(
        "estimated {} class(es) -> {}",
        grouped.len(),
        out_dir.display()
    );
    Ok(EXIT_OK)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating '{}'", path.display()))?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

fn resolve_out_dir(arg: &Option<PathBuf>, loaded: &LoadedConfig) -> PathBuf {
    arg.clone()
        .or_else(|| loaded.config.io.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Load every profile document in a directory: files `<class>.json`,
/// excluding raw estimates (`*.raw.json`) and the correlation table.
fn load_profiles(dir: &Path) -> Result<BTreeMap<String, ProfileDocument>> {
    let mut docs = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("reading profiles directory '{}'", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !name.ends_with(".json") || name.ends_with(".raw.json") || name == "correlations.json" {
            continue;
        }
        let doc = ProfileDocument::read(&path)
            .with_context(|| format!("loading profile '{}'", path.display()))?;
        docs.insert(doc.class_id.clone(), doc);
    }
    Ok(docs)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let loaded = load_config(&args.config)?;
    let grid = loaded.config.grid()?;
    let out_dir = resolve_out_dir(&args.out, &loaded);
    let profiles_dir = args
        .profiles
        .clone()
        .or_else(|| loaded.config.io.profiles_dir.clone())
        .ok_or_else(|| {
            enduse_core::Error::Config(
                "no profiles directory given (--profiles or [io].profiles_dir)".into(),
            )
        })?;

    let docs = load_profiles(&profiles_dir)?;
    let mut profiles = BTreeMap::new();
    for (class_id, doc) in &docs {
        if doc.grid()? != grid {
            bail!(enduse_core::Error::Config(format!(
                "profile '{class_id}' was estimated on a different grid"
            )));
        }
        profiles.insert(class_id.clone(), doc.to_profile()?);
    }

    let correlations_path = profiles_dir.join("correlations.json");
    let correlations: CorrelationTable = if correlations_path.exists() {
        let file = std::fs::File::open(&correlations_path)?;
        serde_json::from_reader(file).context("parsing correlations.json")?
    } else {
        eprintln!("warning: no correlations.json; correction treats correlations as zero");
        CorrelationTable::empty(profiles.keys().cloned().collect())
    };

    let sim_config = SimulationConfig {
        num_runs: args.runs.unwrap_or(loaded.config.simulation.num_runs),
        seed: args.seed.unwrap_or(loaded.config.simulation.seed),
        grid,
    };
    let summary = enduse_core::simulate_building(
        &loaded.config.building,
        &profiles,
        &sim_config,
        &correlations,
    )?;
    if !summary.correction.clamped_steps.is_empty() {
        eprintln!(
            "warning: corrected variance clamped to zero at {} step(s)",
            summary.correction.clamped_steps.len()
        );
    }
    if !summary.correction.undefined_correlations.is_empty() {
        eprintln!(
            "warning: undefined correlations treated as zero: {:?}",
            summary.correction.undefined_correlations
        );
    }

    std::fs::create_dir_all(&out_dir)?;
    let summary_path = out_dir.join("summary.csv");
    let file = std::fs::File::create(&summary_path)?;
    write_summary_csv(
        file,
        &summary,
        &[
            ("config_digest", loaded.digest.clone()),
            ("seed", sim_config.seed.to_string()),
            ("runs", sim_config.num_runs.to_string()),
        ],
    )?;

    if args.plot {
        for class_id in &summary.classes {
            let mean = &summary.per_class_mean[class_id];
            let upper: Vec<f64> = mean
                .iter()
                .zip(&summary.per_class_std[class_id])
                .map(|(m, s)| m + s)
                .collect();
            let svg = render_day_chart(
                &format!("{class_id}: simultaneous ON count"),
                "appliances ON",
                grid.step_minutes(),
                &[
                    PlotLine {
                        label: "mean",
                        values: mean,
                        color: "black",
                        dashed: false,
                    },
                    PlotLine {
                        label: "mean + std",
                        values: &upper,
                        color: "green",
                        dashed: true,
                    },
                ],
            );
            std::fs::write(out_dir.join(format!("plot_{class_id}.svg")), svg)?;
        }
        let upper_raw: Vec<f64> = summary
            .aggregate_mean_watts
            .iter()
            .zip(&summary.aggregate_std_raw)
            .map(|(m, s)| m + s)
            .collect();
        let upper_corrected: Vec<f64> = summary
            .aggregate_mean_watts
            .iter()
            .zip(&summary.aggregate_std_corrected)
            .map(|(m, s)| m + s)
            .collect();
        let svg = render_day_chart(
            "aggregate power",
            "watts",
            grid.step_minutes(),
            &[
                PlotLine {
                    label: "mean",
                    values: &summary.aggregate_mean_watts,
                    color: "black",
                    dashed: false,
                },
                PlotLine {
                    label: "mean + raw std",
                    values: &upper_raw,
                    color: "gray",
                    dashed: true,
                },
                PlotLine {
                    label: "mean + corrected std",
                    values: &upper_corrected,
                    color: "green",
                    dashed: true,
                },
            ],
        );
        std::fs::write(out_dir.join("plot_aggregate.svg"), svg)?;
    }

    println!(
        "simulated {} run(s) of {} class(es) -> {}",
        sim_config.num_runs,
        summary.classes.len(),
        summary_path.display()
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ValidationDocument {
    config_digest: String,
    seed: u64,
    num_runs: usize,
    passed: bool,
    checks: Vec<enduse_core::validate::CheckResult>,
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let loaded = load_config(&args.config)?;
    let grid = loaded.config.grid()?;
    let out_dir = resolve_out_dir(&args.out, &loaded);
    let opts = ValidationOptions {
        num_runs: args.runs.unwrap_or(loaded.config.simulation.num_runs),
        seed: args.seed.unwrap_or(loaded.config.simulation.seed),
    };

    let state_csv = args
        .states
        .clone()
        .or_else(|| loaded.config.io.state_csv.clone());
    let mut checks = Vec::new();
    match &state_csv {
        Some(path) => {
            let series = parse_state_csv(path, &grid)
                .with_context(|| format!("parsing '{}'", path.display()))?;
            for (class_id, observations) in group_by_class(series) {
                let mut identity = check_theorem_identity(&observations, &grid)?;
                identity.name = format!("theorem1_identity[{class_id}]");
                checks.push(identity);
                let mut mc = check_theorem_mc(&observations, &grid, &opts)?;
                mc.name = format!("theorem1_mc[{class_id}]");
                checks.push(mc);
            }
        }
        None => {
            let series = enduse_core::validate::default_validation_series(&grid, opts.seed)?;
            checks.push(check_theorem_identity(std::slice::from_ref(&series), &grid)?);
            checks.push(check_theorem_mc(
                std::slice::from_ref(&series),
                &grid,
                &opts,
            )?);
        }
    }
    checks.push(check_consistency_ladder(&grid, &opts)?);
    checks.push(check_variance_correction(&grid, &opts)?);

    let report = ValidationReport { checks };
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        match (check.measured, check.tolerance) {
            (Some(measured), Some(tolerance)) => println!(
                "{status} {}: measured {measured:.3e} vs tolerance {tolerance:.3e} ({})",
                check.name, check.detail
            ),
            (Some(measured), None) => {
                println!("{status} {}: measured {measured:.3e} ({})", check.name, check.detail)
            }
            _ => println!("{status} {}: {}", check.name, check.detail),
        }
    }

    std::fs::create_dir_all(&out_dir)?;
    write_json(
        &out_dir.join("validation_report.json"),
        &ValidationDocument {
            config_digest: loaded.digest.clone(),
            seed: opts.seed,
            num_runs: opts.num_runs,
            passed: report.passed(),
            checks: report.checks.clone(),
        },
    )?;

    if report.passed() {
        println!("validation passed");
        Ok(EXIT_OK)
    } else {
        println!("validation FAILED");
        Ok(EXIT_VALIDATION)
    }
}

/// Generate a synthetic state CSV, mostly for demos and smoke tests.
pub fn cmd_synth(args: &crate::SynthArgs) -> Result<i32> {
    let grid = TimeGrid::from_step_minutes(args.step_minutes)?;
    let steps = grid.steps_per_day();
    let mut series = Vec::new();
    for (idx, class_id) in args.classes.iter().enumerate() {
        for appliance in 0..args.appliances_per_class {
            let phase_shift = idx as f64 * 0.7;
            let p_on: Vec<f64> = (0..steps)
                .map(|t| {
                    let phase =
                        2.0 * std::f64::consts::PI * t as f64 / steps as f64 + phase_shift;
                    0.05 + 0.04 * phase.sin().max(-0.9)
                })
                .collect();
            let p_off: Vec<f64> = (0..steps)
                .map(|t| {
                    let phase =
                        2.0 * std::f64::consts::PI * t as f64 / steps as f64 + phase_shift;
                    0.07 + 0.05 * phase.cos().max(-0.9)
                })
                .collect();
            let truth = enduse_core::ProbabilityProfile::from_rates(
                class_id.clone(),
                p_on,
                p_off,
                0.95,
                0.2,
            )?;
            let mut generated = generate_synthetic(
                &enduse_core::SyntheticSpec::new(
                    truth,
                    args.days,
                    args.seed
                        .wrapping_add((idx * args.appliances_per_class + appliance) as u64),
                ),
                &grid,
            )?;
            generated.appliance_id = format!("{class_id}-{appliance:02}");
            series.push(generated);
        }
    }
    if let Some(parent) = args.out_states.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_state_csv_path(&args.out_states, &series)?;
    println!(
        "generated {} appliance(s) x {} day(s) -> {}",
        series.len(),
        args.days,
        args.out_states.display()
    );
    Ok(EXIT_OK)
}
