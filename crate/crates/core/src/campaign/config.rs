use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::experiment::Experiment;
use crate::gp::FitOptions;
use crate::mixture::{DomainSpec, FeatureMap, OptimizerOptions};
use crate::oracle::OracleSpec;
use crate::problem::ProblemSpec;

pub const DEFAULT_SCHEDULE: [usize; 3] = [10, 7, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Constrained BO on the prior model from the first batch on.
    Run1Vanilla,
    /// As run1, relaxing the output thresholds until the optimizer finds a
    /// feasible start.
    Run2Relaxation,
    /// Unconstrained impact maximization, constraints only in the final
    /// batch.
    Run3Reformulated,
    /// Random first batch, then constrained BO on refitted 4-d models.
    Run4Simplified,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Run1Vanilla,
        Strategy::Run2Relaxation,
        Strategy::Run3Reformulated,
        Strategy::Run4Simplified,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Run1Vanilla => "run1_vanilla",
            Strategy::Run2Relaxation => "run2_relaxation",
            Strategy::Run3Reformulated => "run3_reformulated",
            Strategy::Run4Simplified => "run4_simplified",
        }
    }

    pub fn short(self) -> &'static str {
        &self.label()[..4]
    }

    /// Runs 1 to 3 start from a model fitted on historical data.
    pub fn uses_history(self) -> bool {
        !matches!(self, Strategy::Run4Simplified)
    }

    pub fn default_feature_map(self) -> FeatureMap {
        if self.uses_history() {
            FeatureMap::augmented_default()
        } else {
            FeatureMap::Plain4d
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = CampaignError;

    /// Accepts the full label or its `runN` prefix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == s || st.short() == s)
            .ok_or_else(|| CampaignError::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// Objective of the run3 final batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalObjective {
    #[default]
    ImpactStrength,
    MfrDistance,
}

fn default_bounds() -> [f64; 4] {
    DomainSpec::DEFAULT_UPPER_BOUNDS
}

fn default_schedule() -> Vec<usize> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_mc_samples() -> usize {
    128
}

/// Everything needed to run a campaign. Stored verbatim in the `created`
/// event, so a log is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "default_bounds")]
    pub upper_bounds: [f64; 4],
    pub strategy: Strategy,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to augmented features for runs 1 to 3 and plain fractions
    /// for run4.
    #[serde(default)]
    pub feature_map: Option<FeatureMap>,
    /// Measured rows the prior model is fitted on.
    #[serde(default)]
    pub historical: Vec<Experiment>,
    /// Refit hyperparameters on all data before every batch instead of
    /// conditioning the prior fit. Only affects runs 1 to 3.
    #[serde(default)]
    pub refit_between_batches: bool,
    #[serde(default)]
    pub run3_final_objective: FinalObjective,
    #[serde(default)]
    pub fit: FitOptions,
    /// The `seed` field is ignored; per-batch seeds derive from `seed`.
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

impl CampaignConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        CampaignConfig {
            label: None,
            problem: ProblemSpec::default(),
            upper_bounds: default_bounds(),
            strategy,
            schedule: default_schedule(),
            seed,
            feature_map: None,
            historical: Vec::new(),
            refit_between_batches: false,
            run3_final_objective: FinalObjective::default(),
            fit: FitOptions::default(),
            optimizer: OptimizerOptions::default(),
            mc_samples: default_mc_samples(),
            oracle: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.strategy.label(), self.seed))
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
            .clone()
            .unwrap_or_else(|| self.strategy.default_feature_map())
    }

    pub fn domain(&self) -> Result<DomainSpec, CampaignError> {
        Ok(DomainSpec::new(self.upper_bounds, self.feature_map())?)
    }

    pub fn total_experiments(&self) -> usize {
        self.schedule.iter().sum()
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::InvalidConfig(m));
        self.problem
            .validate()
            .map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
        let domain = self.domain()?;
        if self.schedule.is_empty() || self.schedule.contains(&0) {
            return bad(format!("schedule {:?} needs at least one non-empty batch", self.schedule));
        }
        if self.mc_samples < crate::acquisition::AcquisitionSpec::MIN_MC_SAMPLES {
            return bad(format!("mc_samples {} below minimum", self.mc_samples));
        }
        if self.optimizer.starts == 0 || self.optimizer.max_iterations == 0 {
            return bad("optimizer needs at least one start and one iteration".into());
        }
        for e in &self.historical {
            if e.measured.is_none() {
                return bad(format!("historical row {} has no measurements", e.id));
            }
            domain
                .check(&e.recipe)
                .map_err(|err| CampaignError::InvalidConfig(format!("historical row {}: {err}", e.id)))?;
        }
        if self.strategy.uses_history() && self.historical.len() < 3 {
            return bad(format!(
                "{} needs at least 3 historical rows, got {}",
                self.strategy,
                self.historical.len()
            ));
        }
        if self.strategy == Strategy::Run4Simplified && self.schedule.len() > 1 && self.schedule[0] < 3 {
            return bad("run4 needs at least 3 random experiments in the first batch".into());
        }
        Ok(())
    }
}
