use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::ConstraintSpec;
use crate::metrics::{Metric, QualityMetrics};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid problem: {0}")]
pub struct InvalidProblem(pub String);

/// Target and output constraints of the compounding problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemSpec {
    pub mfr_target: f64,
    pub youngs_min: f64,
    pub impact_min: f64,
    pub corridor_half_width: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            mfr_target: 10.0,
            youngs_min: 1500.0,
            impact_min: 8.0,
            corridor_half_width: 5.0,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), InvalidProblem> {
        for (name, v) in [
            ("mfr_target", self.mfr_target),
            ("youngs_min", self.youngs_min),
            ("impact_min", self.impact_min),
            ("corridor_half_width", self.corridor_half_width),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(InvalidProblem(format!("{name} = {v} must be positive")));
            }
        }
        if self.corridor_half_width >= self.mfr_target {
            return Err(InvalidProblem(format!(
                "corridor half width {} must be below the MFR target {}",
                self.corridor_half_width, self.mfr_target
            )));
        }
        Ok(())
    }

    /// Young's and impact thresholds at relaxation level 0.
    pub fn output_constraints(&self) -> Vec<ConstraintSpec> {
        vec![
            ConstraintSpec::at_least(Metric::YoungsModulus, self.youngs_min),
            ConstraintSpec::at_least(Metric::ImpactStrength, self.impact_min),
        ]
    }

    pub fn mfr_corridor(&self) -> ConstraintSpec {
        ConstraintSpec::corridor(Metric::Mfr, self.mfr_target, self.corridor_half_width)
    }

    pub fn meets_youngs(&self, m: &QualityMetrics) -> bool {
        m.youngs_modulus >= self.youngs_min
    }

    pub fn meets_impact(&self, m: &QualityMetrics) -> bool {
        m.impact_strength >= self.impact_min
    }

    /// Both output constraints at their original thresholds.
    pub fn is_feasible(&self, m: &QualityMetrics) -> bool {
        self.meets_youngs(m) && self.meets_impact(m)
    }

    pub fn mfr_distance(&self, m: &QualityMetrics) -> f64 {
        (m.mfr - self.mfr_target).abs()
    }
}
