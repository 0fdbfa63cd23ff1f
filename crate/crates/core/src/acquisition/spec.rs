use serde::{Deserialize, Serialize};

use super::AcquisitionError;
use crate::metrics::Metric;

/// Fraction by which an `at_least` threshold drops per relaxation level.
pub const RELAXATION_STEP: f64 = 0.1;
/// Highest relaxation level a campaign may reach.
pub const MAX_RELAXATION_LEVEL: u32 = 9;

/// What the optimizer is trying to improve. Both modes are turned into a
/// utility to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Utility `−(y − target)²`.
    MinimizeSquaredDistance { metric: Metric, target: f64 },
    /// Utility `y`.
    Maximize { metric: Metric },
}

impl ObjectiveSpec {
    pub fn metric(&self) -> Metric {
        match *self {
            ObjectiveSpec::MinimizeSquaredDistance { metric, .. } | ObjectiveSpec::Maximize { metric } => metric,
        }
    }

    #[inline]
    pub fn utility(&self, value: f64) -> f64 {
        match *self {
            ObjectiveSpec::MinimizeSquaredDistance { target, .. } => -(value - target) * (value - target),
            ObjectiveSpec::Maximize { .. } => value,
        }
    }

    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if let ObjectiveSpec::MinimizeSquaredDistance { target, .. } = self {
            if !target.is_finite() {
                return Err(AcquisitionError::InvalidSpec(format!("objective target {target} not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintKind {
    AtLeast { threshold: f64 },
    WithinCorridor { center: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub metric: Metric,
    pub kind: ConstraintKind,
    #[serde(default)]
    pub relaxation_level: u32,
}

impl ConstraintSpec {
    pub fn at_least(metric: Metric, threshold: f64) -> Self {
        ConstraintSpec {
            metric,
            kind: ConstraintKind::AtLeast { threshold },
            relaxation_level: 0,
        }
    }

    pub fn corridor(metric: Metric, center: f64, half_width: f64) -> Self {
        ConstraintSpec {
            metric,
            kind: ConstraintKind::WithinCorridor { center, half_width },
            relaxation_level: 0,
        }
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.relaxation_level = level;
        self
    }

    /// `τ·(1 − 0.1·level)` for `at_least`.
    pub fn effective_threshold(&self) -> Option<f64> {
        match self.kind {
            ConstraintKind::AtLeast { threshold } => {
                Some(threshold * (1.0 - RELAXATION_STEP * f64::from(self.relaxation_level)))
            }
            ConstraintKind::WithinCorridor { .. } => None,
        }
    }

    /// Corridor bounds `(lower, upper)` after relaxation. A corridor is relaxed
    /// by widening it by 10 % of its half-width per level.
    pub fn effective_corridor(&self) -> Option<(f64, f64)> {
        match self.kind {
            ConstraintKind::WithinCorridor { center, half_width } => {
                let h = half_width * (1.0 + RELAXATION_STEP * f64::from(self.relaxation_level));
                Some((center - h, center + h))
            }
            ConstraintKind::AtLeast { .. } => None,
        }
    }

    /// Whether a measured value meets the constraint at the current level.
    pub fn is_satisfied(&self, value: f64) -> bool {
        match (self.effective_threshold(), self.effective_corridor()) {
            (Some(t), _) => value >= t,
            (_, Some((lo, hi))) => value >= lo && value <= hi,
            _ => unreachable!("constraint is either a threshold or a corridor"),
        }
    }

    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if self.relaxation_level > MAX_RELAXATION_LEVEL {
            return Err(AcquisitionError::InvalidSpec(format!(
                "relaxation level {} above {MAX_RELAXATION_LEVEL}",
                self.relaxation_level
            )));
        }
        match self.kind {
            ConstraintKind::AtLeast { threshold } if !threshold.is_finite() => {
                Err(AcquisitionError::InvalidSpec(format!("threshold {threshold} not finite")))
            }
            ConstraintKind::WithinCorridor { center, half_width } if !center.is_finite() || !(half_width > 0.0) => Err(
                AcquisitionError::InvalidSpec(format!("corridor {center} ± {half_width} invalid")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub base_sample_seed: u64,
    #[serde(default = "default_temperature")]
    pub smoothing_temperature: f64,
}

fn default_mc_samples() -> usize {
    128
}

fn default_temperature() -> f64 {
    1e-3
}

impl AcquisitionSpec {
    pub const MIN_MC_SAMPLES: usize = 16;

    pub fn new(objective: ObjectiveSpec, constraints: Vec<ConstraintSpec>) -> Self {
        AcquisitionSpec {
            objective,
            constraints,
            mc_samples: default_mc_samples(),
            base_sample_seed: 0,
            smoothing_temperature: default_temperature(),
        }
    }

    pub fn validate(&self) -> Result<(), AcquisitionError> {
        self.objective.validate()?;
        for c in &self.constraints {
            c.validate()?;
        }
        if self.mc_samples < Self::MIN_MC_SAMPLES {
            return Err(AcquisitionError::InvalidSpec(format!(
                "mc_samples {} below {}",
                self.mc_samples,
                Self::MIN_MC_SAMPLES
            )));
        }
        if !(self.smoothing_temperature > 0.0) || !self.smoothing_temperature.is_finite() {
            return Err(AcquisitionError::InvalidSpec(format!(
                "smoothing temperature {} not positive",
                self.smoothing_temperature
            )));
        }
        Ok(())
    }
}
