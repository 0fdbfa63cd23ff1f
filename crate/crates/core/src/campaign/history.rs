//! Synthetic stand-ins for a historical product dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::experiment::{Experiment, Provenance};
use crate::mixture::DomainSpec;
use crate::oracle::Oracle;
use crate::problem::ProblemSpec;

/// Shape of a generated historical dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistorySpec {
    pub rows: usize,
    /// Cap on rows meeting the impact threshold. No row meets both
    /// thresholds.
    pub max_impact_feasible: usize,
    /// Dirichlet concentration of the recipe draws, in component order.
    pub portfolio_alpha: [f64; 4],
    pub seed: u64,
}

impl Default for HistorySpec {
    fn default() -> Self {
        HistorySpec {
            rows: 50,
            max_impact_feasible: 2,
            portfolio_alpha: [1.0; 4],
            seed: 0,
        }
    }
}

const MAX_DRAWS: usize = 1_000_000;

/// Dirichlet draws over the domain, answered noise-free by `oracle`, keeping
/// only rows that are not jointly feasible and at most
/// `max_impact_feasible` rows that meet the impact threshold.
pub fn scarce_feasible_history(
    oracle: &Oracle,
    problem: &ProblemSpec,
    upper_bounds: [f64; 4],
    spec: &HistorySpec,
) -> Result<Vec<Experiment>, CampaignError> {
    let domain = DomainSpec::plain(upper_bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.rows);
    let mut impact_ok = 0;
    let mut draws = 0;
    while out.len() < spec.rows {
        if draws >= MAX_DRAWS {
            return Err(CampaignError::InvalidConfig(format!(
                "no {} scarce-feasible rows within {MAX_DRAWS} draws",
                spec.rows
            )));
        }
        let recipe = domain.sample_with_rng(1, spec.portfolio_alpha, &mut rng)?.recipes[0];
        draws += 1;
        let m = oracle
            .query_noiseless(&recipe)
            .map_err(|source| CampaignError::Oracle { id: 0, source })?;
        if problem.is_feasible(&m) {
            continue;
        }
        if problem.meets_impact(&m) {
            if impact_ok >= spec.max_impact_feasible {
                continue;
            }
            impact_ok += 1;
        }
        out.push(Experiment {
            id: out.len() as u64 + 1,
            batch_index: 0,
            recipe,
            measured: Some(m),
            provenance: Provenance::ManualEntry,
        });
    }
    Ok(out)
}
