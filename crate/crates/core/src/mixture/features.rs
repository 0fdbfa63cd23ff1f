use serde::{Deserialize, Serialize};

use super::{MixtureError, MixtureRecipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Virgin,
    Recycled,
    Filler,
    ImpactModifier,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Virgin, Role::Recycled, Role::Filler, Role::ImpactModifier];
}

/// Nominal properties of one raw material, as printed on its data sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientSheet {
    pub material_id: String,
    pub role: Role,
    pub nominal_mfr_g_per_10min: f64,
    pub nominal_youngs_mpa: f64,
    pub nominal_impact_kj_per_m2: f64,
}

/// One data sheet per role, stored in [`Role::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<IngredientSheet>", into = "Vec<IngredientSheet>")]
pub struct IngredientSheetSet {
    sheets: [IngredientSheet; 4],
}

impl TryFrom<Vec<IngredientSheet>> for IngredientSheetSet {
    type Error = MixtureError;

    fn try_from(sheets: Vec<IngredientSheet>) -> Result<Self, Self::Error> {
        Self::new(sheets)
    }
}

impl From<IngredientSheetSet> for Vec<IngredientSheet> {
    fn from(set: IngredientSheetSet) -> Self {
        set.sheets.into()
    }
}

impl Default for IngredientSheetSet {
    fn default() -> Self {
        let sheet = |id: &str, role, mfr, youngs, impact| IngredientSheet {
            material_id: id.to_string(),
            role,
            nominal_mfr_g_per_10min: mfr,
            nominal_youngs_mpa: youngs,
            nominal_impact_kj_per_m2: impact,
        };
        IngredientSheetSet {
            sheets: [
                sheet("pp-homo-6", Role::Virgin, 6.0, 1480.0, 6.2),
                sheet("pcr-pp-35", Role::Recycled, 35.0, 1070.0, 2.0),
                sheet("talc-fine", Role::Filler, 0.45, 5650.0, 1.0),
                sheet("poe-elastomer", Role::ImpactModifier, 4.0, 20.0, 60.0),
            ],
        }
    }
}

impl IngredientSheetSet {
    pub fn new(sheets: Vec<IngredientSheet>) -> Result<Self, MixtureError> {
        let mut slots: [Option<IngredientSheet>; 4] = Default::default();
        for s in sheets {
            let idx = Role::ALL.iter().position(|r| *r == s.role).expect("role is one of ALL");
            for (name, v) in [
                ("nominal_mfr_g_per_10min", s.nominal_mfr_g_per_10min),
                ("nominal_youngs_mpa", s.nominal_youngs_mpa),
                ("nominal_impact_kj_per_m2", s.nominal_impact_kj_per_m2),
            ] {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(MixtureError::InvalidSheets(format!("{}: {name} = {v}", s.material_id)));
                }
            }
            if slots[idx].is_some() {
                return Err(MixtureError::InvalidSheets(format!("two sheets for role {:?}", s.role)));
            }
            slots[idx] = Some(s);
        }
        let missing: Vec<_> = Role::ALL
            .iter()
            .zip(&slots)
            .filter(|(_, s)| s.is_none())
            .map(|(r, _)| format!("{r:?}"))
            .collect();
        if !missing.is_empty() {
            return Err(MixtureError::InvalidSheets(format!("missing roles: {}", missing.join(", "))));
        }
        Ok(IngredientSheetSet {
            sheets: slots.map(|s| s.expect("checked above")),
        })
    }

    pub fn from_json(s: &str) -> Result<Self, MixtureError> {
        serde_json::from_str(s).map_err(|e| MixtureError::InvalidSheets(e.to_string()))
    }

    pub fn sheet(&self, role: Role) -> &IngredientSheet {
        &self.sheets[Role::ALL.iter().position(|r| *r == role).expect("role is one of ALL")]
    }

    pub fn sheets(&self) -> &[IngredientSheet; 4] {
        &self.sheets
    }

    /// The 7 derived features: mixture-weighted nominal MFR, modulus and
    /// impact, then each fraction's share of the nominal-MFR-weighted sum.
    pub fn extra_features(&self, recipe: &MixtureRecipe) -> [f64; 7] {
        let x = recipe.to_array();
        let weighted = |f: fn(&IngredientSheet) -> f64| -> f64 { x.iter().zip(&self.sheets).map(|(xi, s)| xi * f(s)).sum() };
        let mfr = weighted(|s| s.nominal_mfr_g_per_10min);
        let youngs = weighted(|s| s.nominal_youngs_mpa);
        let impact = weighted(|s| s.nominal_impact_kj_per_m2);
        let mut out = [mfr, youngs, impact, 0.0, 0.0, 0.0, 0.0];
        for i in 0..4 {
            out[3 + i] = x[i] * self.sheets[i].nominal_mfr_g_per_10min / mfr;
        }
        out
    }
}

/// How a recipe is turned into GP inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// The four fractions as they are.
    Plain4d,
    /// Fractions plus 7 data-sheet features: 11 inputs.
    Augmented { sheets: IngredientSheetSet },
}

impl FeatureMap {
    pub fn augmented_default() -> Self {
        FeatureMap::Augmented {
            sheets: IngredientSheetSet::default(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Plain4d => 4,
            FeatureMap::Augmented { .. } => 11,
        }
    }

    pub fn features(&self, recipe: &MixtureRecipe) -> Vec<f64> {
        let mut out = recipe.to_array().to_vec();
        if let FeatureMap::Augmented { sheets } = self {
            out.extend_from_slice(&sheets.extra_features(recipe));
        }
        out
    }

    pub fn is_augmented(&self) -> bool {
        matches!(self, FeatureMap::Augmented { .. })
    }
}
