//! Run configuration: a single TOML document describing grid, smoothing,
//! slot boundaries, building composition, simulation parameters and I/O
//! paths. Round-trips losslessly through `toml`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use enduse_core::simulate::BuildingProfile;
use enduse_core::smooth::SmootherConfig;
use enduse_core::TimeGrid;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
    /// Optional slot start indices; the built-in working-day partition is
    /// used when absent.
    #[serde(default)]
    pub slots: Option<Vec<usize>>,
    pub building: BuildingProfile,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub io: IoSection,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub step_minutes: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { step_minutes: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub kernel: enduse_core::smooth::Kernel,
    pub bandwidth_steps: f64,
    pub circular: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        let config = SmootherConfig::default();
        Self {
            kernel: config.kernel,
            bandwidth_steps: config.bandwidth_steps,
            circular: config.circular,
        }
    }
}

impl From<SmoothingConfig> for SmootherConfig {
    fn from(value: SmoothingConfig) -> Self {
        SmootherConfig {
            kernel: value.kernel,
            bandwidth_steps: value.bandwidth_steps,
            circular: value.circular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub num_runs: usize,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            num_runs: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// Input state CSV for estimation/validation.
    pub state_csv: Option<PathBuf>,
    /// Directory holding profile documents for simulation.
    pub profiles_dir: Option<PathBuf>,
    /// Default output directory.
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_step_minutes(self.grid.step_minutes)
            .context("invalid [grid] configuration")
    }

    pub fn smoother(&self) -> SmootherConfig {
        self.smoothing.into()
    }
}

/// Configuration plus the digest of its on-disk bytes, for provenance.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub digest: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read config '{}'", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("config is not UTF-8")?;
    let config: RunConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse config '{}'", path.display()))?;
    if config.schema_version != CONFIG_SCHEMA_VERSION {
        anyhow::bail!(
            "unsupported config schema version {}",
            config.schema_version
        );
    }
    config.grid()?;
    Ok(LoadedConfig {
        config,
        digest: enduse_core::profile_doc::bytes_digest(&bytes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample() -> RunConfig {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            grid: GridConfig { step_minutes: 5 },
            smoothing: SmoothingConfig::default(),
            slots: Some(vec![0, 96, 108]),
            building: BuildingProfile {
                categories: BTreeMap::from([(
                    "office".to_string(),
                    BTreeMap::from([("monitor".to_string(), 1u32)]),
                )]),
                occupants: BTreeMap::from([("office".to_string(), 11u32)]),
                power_watts: BTreeMap::from([("monitor".to_string(), 35.0)]),
            },
            simulation: SimulationSection {
                num_runs: 10_000,
                seed: 42,
            },
            io: IoSection {
                state_csv: Some(PathBuf::from("states.csv")),
                profiles_dir: Some(PathBuf::from("profiles")),
                out_dir: Some(PathBuf::from("out")),
            },
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = sample();
        let text = toml::to_string_pretty(&config).unwrap();
        let reparsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(reparsed, config);
        // And a second serialization is byte-stable.
        assert_eq!(toml::to_string_pretty(&reparsed).unwrap(), text);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = r#"
            [building]
            categories = {}
            occupants = {}
            power_watts = {}
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(config.grid.step_minutes, 5);
        assert_eq!(config.simulation.num_runs, 10_000);
        assert!(config.slots.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"
            typo_section = 1
            [building]
            categories = {}
            occupants = {}
            power_watts = {}
        "#;
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }
}
