//! Kernel smoothing of empirical probability curves.
//!
//! Smoothing is a support-weighted Nadaraya-Watson average: steps whose
//! estimate came from the zero-denominator fallback carry no data and are
//! excluded from both sums, so the fallback constant cannot leak into
//! neighbouring estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{ProbabilityProfile, FALLBACK_PROB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Uniform weight within `bandwidth_steps` of the target step.
    Box,
    /// Linear decay to zero at `bandwidth_steps`.
    Triangular,
    /// `exp(-d^2 / (2 bw^2))`, evaluated over the whole day.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub kernel: Kernel,
    /// Kernel scale in grid steps; zero means identity smoothing.
    pub bandwidth_steps: f64,
    /// Wrap distances across midnight.
    pub circular: bool,
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.bandwidth_steps.is_finite() || self.bandwidth_steps < 0.0 {
            return Err(Error::Config(format!(
                "bandwidth must be finite and nonnegative, got {}",
                self.bandwidth_steps
            )));
        }
        Ok(())
    }
}

/// Gaussian, 3 steps (15 minutes on the default grid), non-circular.
impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            bandwidth_steps: 3.0,
            circular: false,
        }
    }
}

fn weight(kernel: Kernel, distance: f64, bandwidth: f64) -> f64 {
    match kernel {
        Kernel::Box => {
            if distance <= bandwidth {
                1.0
            } else {
                0.0
            }
        }
        Kernel::Triangular => (1.0 - distance / bandwidth).max(0.0),
        Kernel::Gaussian => (-distance * distance / (2.0 * bandwidth * bandwidth)).exp(),
    }
}

/// Smooth a per-step probability vector.
///
/// `output[t] = sum_i K(t, t_i) profile[t_i] / sum_i K(t, t_i)` over steps
/// with nonzero support; if no supported step receives weight, the output is
/// the 0.5 fallback. The result is clamped to [0, 1]. A zero bandwidth is
/// the identity on supported steps.
pub fn kernel_smooth(
    profile: &[f64],
    support: &[u64],
    config: &SmootherConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if profile.len() != support.len() {
        return Err(Error::Config(format!(
            "profile length {} != support length {}",
            profile.len(),
            support.len()
        )));
    }
    let steps = profile.len();
    if config.bandwidth_steps == 0.0 {
        return Ok((0..steps)
            .map(|t| if support[t] > 0 { profile[t] } else { FALLBACK_PROB })
            .collect());
    }

    let mut out = vec![0.0; steps];
    for t in 0..steps {
        // Centering on the local value keeps constant inputs exactly constant.
        let center = profile[t];
        let mut weight_sum = 0.0;
        let mut deviation_sum = 0.0;
        for (i, &p) in profile.iter().enumerate() {
            if support[i] == 0 {
                continue;
            }
            let mut distance = (t as f64 - i as f64).abs();
            if config.circular {
                distance = distance.min(steps as f64 - distance);
            }
            let w = weight(config.kernel, distance, config.bandwidth_steps);
            weight_sum += w;
            deviation_sum += w * (p - center);
        }
        out[t] = if weight_sum == 0.0 {
            FALLBACK_PROB
        } else {
            (center + deviation_sum / weight_sum).clamp(0.0, 1.0)
        };
    }
    Ok(out)
}

/// Smooth both transition curves of a profile with the same configuration.
/// Supports are unchanged: they describe the raw estimation.
pub fn smooth_profile(
    profile: &ProbabilityProfile,
    config: &SmootherConfig,
) -> Result<ProbabilityProfile> {
    let p_on = kernel_smooth(&profile.p_on, &profile.on_support, config)?;
    let p_off = kernel_smooth(&profile.p_off, &profile.off_support, config)?;
    Ok(ProbabilityProfile {
        class_id: profile.class_id.clone(),
        p_on,
        p_off,
        p_pres: profile.p_pres,
        p_init: profile.p_init,
        on_support: profile.on_support.clone(),
        off_support: profile.off_support.clone(),
    })
}
