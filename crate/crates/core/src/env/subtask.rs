//! Normalized sub-task scores.

use serde::{Deserialize, Serialize};

use super::config::{Mode, SubtaskCalibration};
use super::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SubtaskOutcome {
    /// Ticks until the enemy crystal fell (or the step limit).
    FrameLength(u32),
    /// Total gold collected by the controlled team.
    Gold(u32),
}

impl SubtaskOutcome {
    pub fn value(self) -> f64 {
        match self {
            SubtaskOutcome::FrameLength(v) | SubtaskOutcome::Gold(v) => v as f64,
        }
    }
}

/// Affine score with `cal.random ↦ 0` and `cal.expert ↦ 1`. Destroy Turret
/// rewards short episodes, Gain Gold rewards gold; both reduce to
/// `(x − random) / (expert − random)`.
pub fn subtask_score(mode: Mode, outcome: f64, cal: SubtaskCalibration) -> Result<f64, EnvError> {
    if !mode.is_subtask() {
        return Err(EnvError::Config { field: "mode", reason: format!("{} is not a sub-task mode", mode.name()) });
    }
    let denom = cal.expert - cal.random;
    if denom == 0.0 || !denom.is_finite() {
        return Err(EnvError::Config {
            field: "subtask_calibration",
            reason: format!("random ({}) and expert ({}) endpoints must differ", cal.random, cal.expert),
        });
    }
    Ok((outcome - cal.random) / denom)
}
