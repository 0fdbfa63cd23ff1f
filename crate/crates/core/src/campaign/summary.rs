use std::io::Write;

use serde::{Deserialize, Serialize};

use super::events::RelaxationLevels;
use super::{CampaignState, Status, Strategy};
use crate::diagnostics::boundary_fraction;
use crate::experiment::{CsvError, Provenance};
use crate::metrics::QualityMetrics;
use crate::mixture::MixtureRecipe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub id: u64,
    pub provenance: Provenance,
    pub recipe: MixtureRecipe,
    pub metrics: Option<QualityMetrics>,
    /// Against the unrelaxed thresholds.
    pub feasible: Option<bool>,
    pub mfr_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub batch: usize,
    pub size: usize,
    pub completed: usize,
    pub feasible_count: usize,
    pub best_mfr_distance: Option<f64>,
    pub experiments: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestExperiment {
    pub id: u64,
    pub batch: usize,
    pub recipe: MixtureRecipe,
    pub metrics: QualityMetrics,
    pub mfr_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub label: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub status: Status,
    pub batch_index: usize,
    pub feature_dim: usize,
    pub proposed: usize,
    pub completed: usize,
    pub feasible_count: usize,
    /// Smallest |MFR − target| among feasible completed experiments.
    pub best_mfr_distance: Option<f64>,
    pub best_feasible: Option<BestExperiment>,
    /// Over BO proposals only.
    pub boundary_fraction: Option<f64>,
    pub relaxation_levels: RelaxationLevels,
    pub batches: Vec<BatchTrace>,
}

fn min_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.min(b)))
}

/// Aggregates a state. Feasibility always uses the configured thresholds,
/// whatever relaxation was active when a point was proposed.
pub fn campaign_summary(state: &CampaignState) -> CampaignSummary {
    let cfg = &state.config;
    let problem = &cfg.problem;
    let domain = cfg.domain().expect("validated at creation");
    let mut batches: Vec<BatchTrace> = Vec::new();
    let mut best: Option<BestExperiment> = None;
    let (mut completed, mut feasible_count) = (0, 0);
    for e in &state.history {
        if batches.last().is_none_or(|b| b.batch != e.batch_index) {
            batches.push(BatchTrace {
                batch: e.batch_index,
                size: 0,
                completed: 0,
                feasible_count: 0,
                best_mfr_distance: None,
                experiments: Vec::new(),
            });
        }
        let trace = batches.last_mut().expect("pushed");
        trace.size += 1;
        let feasible = e.measured.map(|m| problem.is_feasible(&m));
        let distance = e.measured.map(|m| problem.mfr_distance(&m));
        if let Some(m) = e.measured {
            completed += 1;
            trace.completed += 1;
            if problem.is_feasible(&m) {
                let d = problem.mfr_distance(&m);
                feasible_count += 1;
                trace.feasible_count += 1;
                trace.best_mfr_distance = min_opt(trace.best_mfr_distance, d);
                if best.as_ref().is_none_or(|b| d < b.mfr_distance) {
                    best = Some(BestExperiment {
                        id: e.id,
                        batch: e.batch_index,
                        recipe: e.recipe,
                        metrics: m,
                        mfr_distance: d,
                    });
                }
            }
        }
        trace.experiments.push(TracePoint {
            id: e.id,
            provenance: e.provenance,
            recipe: e.recipe,
            metrics: e.measured,
            feasible,
            mfr_distance: distance,
        });
    }
    let bo: Vec<MixtureRecipe> = state
        .history
        .iter()
        .filter(|e| e.provenance == Provenance::BoProposal)
        .map(|e| e.recipe)
        .collect();
    CampaignSummary {
        label: cfg.label(),
        strategy: cfg.strategy,
        seed: cfg.seed,
        status: state.status,
        batch_index: state.batch_index,
        feature_dim: domain.feature_map().dim(),
        proposed: state.history.len(),
        completed,
        feasible_count,
        best_mfr_distance: best.as_ref().map(|b| b.mfr_distance),
        best_feasible: best,
        boundary_fraction: boundary_fraction(&bo, &domain),
        relaxation_levels: state.relaxation_levels.clone(),
        batches,
    }
}

#[derive(Serialize)]
struct PlotRow {
    batch: usize,
    id: u64,
    provenance: Provenance,
    mfr_g_per_10min: Option<f64>,
    youngs_mpa: Option<f64>,
    impact_kj_per_m2: Option<f64>,
    feasible: Option<bool>,
    best_mfr_distance_so_far: Option<f64>,
    mfr_target: f64,
    mfr_corridor_low: f64,
    mfr_corridor_high: f64,
    youngs_min: f64,
    impact_min: f64,
}

/// Per-experiment metric traces with threshold columns, in history order.
pub fn write_plot_csv<W: Write>(out: W, state: &CampaignState) -> Result<(), CsvError> {
    let p = &state.config.problem;
    let mut w = csv::Writer::from_writer(out);
    let mut best: Option<f64> = None;
    let mut any = false;
    for e in &state.history {
        if let Some(m) = e.measured {
            if p.is_feasible(&m) {
                best = min_opt(best, p.mfr_distance(&m));
            }
        }
        any = true;
        w.serialize(PlotRow {
            batch: e.batch_index,
            id: e.id,
            provenance: e.provenance,
            mfr_g_per_10min: e.measured.map(|m| m.mfr),
            youngs_mpa: e.measured.map(|m| m.youngs_modulus),
            impact_kj_per_m2: e.measured.map(|m| m.impact_strength),
            feasible: e.measured.map(|m| p.is_feasible(&m)),
            best_mfr_distance_so_far: best,
            mfr_target: p.mfr_target,
            mfr_corridor_low: p.mfr_target - p.corridor_half_width,
            mfr_corridor_high: p.mfr_target + p.corridor_half_width,
            youngs_min: p.youngs_min,
            impact_min: p.impact_min,
        })?;
    }
    if !any {
        w.write_record([
            "batch",
            "id",
            "provenance",
            "mfr_g_per_10min",
            "youngs_mpa",
            "impact_kj_per_m2",
            "feasible",
            "best_mfr_distance_so_far",
            "mfr_target",
            "mfr_corridor_low",
            "mfr_corridor_high",
            "youngs_min",
            "impact_min",
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
