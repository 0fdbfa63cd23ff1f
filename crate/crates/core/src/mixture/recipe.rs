use serde::{Deserialize, Serialize};

use super::MixtureError;

/// Tolerance on the sum of fractions.
pub const SUM_TOL: f64 = 1e-9;

/// Mass fractions of the four compound components, in the order used by
/// every 4-vector in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecipe {
    pub virgin_pp: f64,
    pub recycled: f64,
    pub filler: f64,
    pub impact_modifier: f64,
}

impl MixtureRecipe {
    pub const COMPONENTS: [&'static str; 4] = ["virgin_pp", "recycled", "filler", "impact_modifier"];

    pub fn new(virgin_pp: f64, recycled: f64, filler: f64, impact_modifier: f64) -> Result<Self, MixtureError> {
        Self::from_array([virgin_pp, recycled, filler, impact_modifier])
    }

    /// Checks the fractions lie in `[0, 1]` and sum to one.
    pub fn from_array(x: [f64; 4]) -> Result<Self, MixtureError> {
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(MixtureError::InvalidRecipe(format!(
                "{} = {v} outside [0, 1]",
                Self::COMPONENTS[i]
            )));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(MixtureError::InvalidRecipe(format!("fractions sum to {sum}")));
        }
        Ok(Self::from_array_unchecked(x))
    }

    pub(crate) fn from_array_unchecked(x: [f64; 4]) -> Self {
        MixtureRecipe {
            virgin_pp: x[0],
            recycled: x[1],
            filler: x[2],
            impact_modifier: x[3],
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.virgin_pp, self.recycled, self.filler, self.impact_modifier]
    }

    pub fn distance(&self, other: &MixtureRecipe) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_fractions() {
        assert!(MixtureRecipe::new(0.5, 0.3, 0.1, 0.1).is_ok());
        assert!(MixtureRecipe::new(0.5, 0.3, 0.1, 0.2).is_err());
        assert!(MixtureRecipe::new(1.1, -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn json_field_names() {
        let r = MixtureRecipe::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"impact_modifier\":0.0"));
    }
}
