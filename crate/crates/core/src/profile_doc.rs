//! Versioned on-disk profile document.
//!
//! Field-complete for simulation: grid, transition curves, presence and
//! startup probabilities, supports, the smoothing configuration used, and
//! input provenance. Serialized as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::profile::ProbabilityProfile;
use crate::smooth::SmootherConfig;

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// (path, sha256 hex) of every input file behind the estimate.
    pub inputs: Vec<(String, String)>,
    /// Digest of the run configuration, when the estimate came from a run.
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub schema_version: u32,
    pub class_id: String,
    pub step_minutes: u32,
    pub steps_per_day: u32,
    pub p_on: Vec<f64>,
    pub p_off: Vec<f64>,
    pub p_pres: f64,
    pub p_init: f64,
    pub on_support: Vec<u64>,
    pub off_support: Vec<u64>,
    /// Smoothing applied to the transition curves; `None` for raw estimates.
    pub smoothing: Option<SmootherConfig>,
    pub provenance: Provenance,
}

impl ProfileDocument {
    pub fn new(
        profile: &ProbabilityProfile,
        grid: &TimeGrid,
        smoothing: Option<SmootherConfig>,
        provenance: Provenance,
    ) -> Result<Self> {
        profile.validate()?;
        if profile.steps() != grid.steps_per_day() {
            return Err(Error::Config(format!(
                "profile has {} steps but grid expects {}",
                profile.steps(),
                grid.steps_per_day()
            )));
        }
        Ok(Self {
            schema_version: PROFILE_SCHEMA_VERSION,
            class_id: profile.class_id.clone(),
            step_minutes: grid.step_minutes(),
            steps_per_day: grid.steps_per_day() as u32,
            p_on: profile.p_on.clone(),
            p_off: profile.p_off.clone(),
            p_pres: profile.p_pres,
            p_init: profile.p_init,
            on_support: profile.on_support.clone(),
            off_support: profile.off_support.clone(),
            smoothing,
            provenance,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.step_minutes, self.steps_per_day)
    }

    pub fn to_profile(&self) -> Result<ProbabilityProfile> {
        let profile = ProbabilityProfile {
            class_id: self.class_id.clone(),
            p_on: self.p_on.clone(),
            p_off: self.p_off.clone(),
            p_pres: self.p_pres,
            p_init: self.p_init,
            on_support: self.on_support.clone(),
            off_support: self.off_support.clone(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let doc: Self = serde_json::from_reader(file)?;
        if doc.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported profile schema version {}",
                doc.schema_version
            )));
        }
        doc.grid()?;
        Ok(doc)
    }
}

/// Hex SHA-256 of a file's contents, for provenance records.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let bytes = std::fs::read(path.as_ref())?;
    Ok(bytes_digest(&bytes))
}

/// Hex SHA-256 of a byte buffer.
pub fn bytes_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trips_through_json() {
        let grid = TimeGrid::default();
        let profile = ProbabilityProfile::constant("monitor", 288, 0.1, 0.2, 0.9, 0.3).unwrap();
        let doc = ProfileDocument::new(
            &profile,
            &grid,
            Some(SmootherConfig::default()),
            Provenance {
                inputs: vec![("states.csv".to_string(), "abc123".to_string())],
                config_digest: Some("deadbeef".to_string()),
                seed: Some(42),
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile_monitor.json");
        doc.write(&path).unwrap();
        let reread = ProfileDocument::read(&path).unwrap();
        assert_eq!(reread, doc);
        assert_eq!(reread.to_profile().unwrap(), profile);
        assert_eq!(reread.grid().unwrap(), grid);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let grid = TimeGrid::default();
        let profile = ProbabilityProfile::constant("c", 48, 0.1, 0.2, 0.9, 0.3).unwrap();
        assert!(ProfileDocument::new(&profile, &grid, None, Provenance::default()).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            bytes_digest(b"hello"),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }
}
