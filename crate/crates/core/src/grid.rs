use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes in a civil day; every grid must tile it exactly.
pub const MINUTES_PER_DAY: u32 = 1440;

/// The fixed intra-day time discretization shared by all series, profiles
/// and simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    step_minutes: u32,
    steps_per_day: u32,
}

impl TimeGrid {
    /// Build a grid, checking that `step_minutes * steps_per_day == 1440`.
    pub fn new(step_minutes: u32, steps_per_day: u32) -> Result<Self> {
        if step_minutes == 0 || steps_per_day == 0 {
            return Err(Error::Config(
                "grid step width and step count must be positive".into(),
            ));
        }
        if step_minutes * steps_per_day != MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "grid does not tile the day: {step_minutes} min x {steps_per_day} steps != {MINUTES_PER_DAY} min"
            )));
        }
        Ok(Self {
            step_minutes,
            steps_per_day,
        })
    }

    /// Grid from the step width alone; the step count is implied.
    pub fn from_step_minutes(step_minutes: u32) -> Result<Self> {
        if step_minutes == 0 || MINUTES_PER_DAY % step_minutes != 0 {
            return Err(Error::Config(format!(
                "step width {step_minutes} min does not divide the day"
            )));
        }
        Self::new(step_minutes, MINUTES_PER_DAY / step_minutes)
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    /// Number of steps per day, `T`.
    pub fn steps_per_day(&self) -> usize {
        self.steps_per_day as usize
    }
}

/// Five-minute steps, 288 per day.
impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            step_minutes: 5,
            steps_per_day: 288,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_five_minutes() {
        let grid = TimeGrid::default();
        assert_eq!(grid.step_minutes(), 5);
        assert_eq!(grid.steps_per_day(), 288);
    }

    #[test]
    fn rejects_grids_that_do_not_tile_the_day() {
        assert!(TimeGrid::new(5, 287).is_err());
        assert!(TimeGrid::new(0, 288).is_err());
        assert!(TimeGrid::from_step_minutes(7).is_err());
    }

    #[test]
    fn accepts_coarser_grids() {
        let grid = TimeGrid::from_step_minutes(30).unwrap();
        assert_eq!(grid.steps_per_day(), 48);
    }
}
