//! Appliance-data-driven end-use energy profile modeling.
//!
//! The library estimates per-class stochastic usage models (time-varying
//! ON/OFF transition probabilities, presence, startup and duration
//! statistics) from binary appliance state series, and simulates
//! whole-building load profiles with a non-homogeneous two-state Markov
//! chain Monte Carlo engine. Aggregate variability is corrected analytically
//! for measured within- and cross-class appliance correlations.
//!
//! Pipeline: ingest (or synthesize) state series -> estimate per-class
//! profiles -> simulate a building described by occupant categories ->
//! summarize per-step means and deviations.

pub mod correlation;
pub mod durations;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod ingest;
pub mod profile;
pub mod profile_doc;
pub mod rng;
pub mod simulate;
pub mod slots;
pub mod smooth;
pub mod synth;
pub mod validate;

pub use correlation::{estimate_correlations, CorrelationTable};
pub use durations::{apply_off_enforcement, estimate_durations, DurationModel, OffEnforcement};
pub use error::{Error, Result};
pub use estimate::{estimate_empirical_probs, estimate_rou, present_day_mean, RouProfile};
pub use grid::TimeGrid;
pub use ingest::{
    filter_weekdays, parse_power_csv, parse_state_csv, threshold_extract, write_state_csv,
    write_state_csv_path, DayRecord, PowerTrace, StateSeries,
};
pub use profile::{ProbabilityProfile, FALLBACK_PROB};
pub use profile_doc::{file_digest, ProfileDocument, Provenance};
pub use simulate::{
    analytic_mean_recursion, correct_aggregate_variance, simulate_appliance, simulate_building,
    summarize_power, write_summary_csv, AnalyticMeanState, BuildingProfile, PowerSummary,
    SimulationConfig, SimulationSummary,
};
pub use slots::{build_slot_model, default_slot_boundaries, slot_geometric_diagnostic, SlotModel};
pub use smooth::{kernel_smooth, smooth_profile, Kernel, SmootherConfig};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use validate::{run_validation, ValidationOptions, ValidationReport};
