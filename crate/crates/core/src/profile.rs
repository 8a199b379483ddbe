//! Per-class stochastic usage model: per-step ON/OFF transition
//! probabilities plus the day-level presence and startup probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value assigned to probabilities whose estimator denominator is zero.
/// Support vectors let consumers detect these steps.
pub const FALLBACK_PROB: f64 = 0.5;

/// Time-varying two-state chain parameters for one appliance class.
///
/// `p_on[t]` is the OFF→ON probability at step `t`, `p_off[t]` the ON→OFF
/// probability. Index 0 is never used by simulation (the day starts from
/// `p_init`, not a transition). The support vectors carry the estimator
/// denominators; a support of zero marks a fallback value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityProfile {
    pub class_id: String,
    pub p_on: Vec<f64>,
    pub p_off: Vec<f64>,
    /// Probability the appliance is active at all on a given day.
    pub p_pres: f64,
    /// Probability the appliance is already ON at the first step of a
    /// present day (overnight carry-over).
    pub p_init: f64,
    pub on_support: Vec<u64>,
    pub off_support: Vec<u64>,
}

impl ProbabilityProfile {
    /// Build a profile from known rates (e.g. a synthetic ground truth).
    /// All supports are set to 1 so no fallback constraint applies.
    pub fn from_rates(
        class_id: impl Into<String>,
        p_on: Vec<f64>,
        p_off: Vec<f64>,
        p_pres: f64,
        p_init: f64,
    ) -> Result<Self> {
        let len = p_on.len();
        let profile = Self {
            class_id: class_id.into(),
            p_on,
            p_off,
            p_pres,
            p_init,
            on_support: vec![1; len],
            off_support: vec![1; len],
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Constant-rate profile, mostly for fixtures.
    pub fn constant(
        class_id: impl Into<String>,
        steps: usize,
        p_on: f64,
        p_off: f64,
        p_pres: f64,
        p_init: f64,
    ) -> Result<Self> {
        Self::from_rates(class_id, vec![p_on; steps], vec![p_off; steps], p_pres, p_init)
    }

    /// Number of steps per day, `T`.
    pub fn steps(&self) -> usize {
        self.p_on.len()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.p_on.len();
        if len == 0 {
            return Err(Error::Config("profile has zero steps".into()));
        }
        if self.p_off.len() != len || self.on_support.len() != len || self.off_support.len() != len
        {
            return Err(Error::Config(format!(
                "profile '{}' has mismatched vector lengths",
                self.class_id
            )));
        }
        for (name, value) in [("p_pres", self.p_pres), ("p_init", self.p_init)] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(Error::Config(format!(
                    "profile '{}': {name} = {value} outside [0, 1]",
                    self.class_id
                )));
            }
        }
        for t in 0..len {
            for (name, value, support) in [
                ("p_on", self.p_on[t], self.on_support[t]),
                ("p_off", self.p_off[t], self.off_support[t]),
            ] {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(Error::Config(format!(
                        "profile '{}': {name}[{t}] = {value} outside [0, 1]",
                        self.class_id
                    )));
                }
                if support == 0 && value != FALLBACK_PROB {
                    return Err(Error::Config(format!(
                        "profile '{}': {name}[{t}] = {value} has zero support but is not the {FALLBACK_PROB} fallback",
                        self.class_id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rates_validates_ranges() {
        assert!(ProbabilityProfile::constant("c", 4, 0.1, 0.2, 1.0, 0.0).is_ok());
        assert!(ProbabilityProfile::constant("c", 4, 1.5, 0.2, 1.0, 0.0).is_err());
        assert!(ProbabilityProfile::constant("c", 4, 0.1, 0.2, -0.1, 0.0).is_err());
        assert!(ProbabilityProfile::constant("c", 0, 0.1, 0.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_support_requires_fallback_value() {
        let mut profile = ProbabilityProfile::constant("c", 4, 0.1, 0.2, 1.0, 0.0).unwrap();
        profile.on_support[2] = 0;
        assert!(profile.validate().is_err());
        profile.p_on[2] = FALLBACK_PROB;
        assert!(profile.validate().is_ok());
    }
}
