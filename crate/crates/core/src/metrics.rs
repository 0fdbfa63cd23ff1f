use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three measured properties of a compound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mfr,
    YoungsModulus,
    ImpactStrength,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Mfr, Metric::YoungsModulus, Metric::ImpactStrength];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Mfr => "mfr",
            Metric::YoungsModulus => "youngs_modulus",
            Metric::ImpactStrength => "impact_strength",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{metric} = {value} must be finite and positive")]
pub struct NonPositiveMetric {
    pub metric: Metric,
    pub value: f64,
}

/// MFR in g/10 min, Young's modulus in MPa, impact strength in kJ/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub mfr: f64,
    pub youngs_modulus: f64,
    pub impact_strength: f64,
}

impl QualityMetrics {
    pub fn new(mfr: f64, youngs_modulus: f64, impact_strength: f64) -> Result<Self, NonPositiveMetric> {
        let m = QualityMetrics {
            mfr,
            youngs_modulus,
            impact_strength,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NonPositiveMetric> {
        for metric in Metric::ALL {
            let value = self.get(metric);
            if !(value > 0.0) || !value.is_finite() {
                return Err(NonPositiveMetric { metric, value });
            }
        }
        Ok(())
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mfr => self.mfr,
            Metric::YoungsModulus => self.youngs_modulus,
            Metric::ImpactStrength => self.impact_strength,
        }
    }
}
