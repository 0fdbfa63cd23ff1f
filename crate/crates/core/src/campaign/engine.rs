//! Strategy dispatch for batch proposals.

use super::events::{Event, ProposedExperiment, RelaxationLevels};
use super::{CampaignError, CampaignState, FinalObjective, Strategy};
use crate::acquisition::{AcquisitionSpec, ConstraintSpec, MetricModels, ObjectiveSpec, MAX_RELAXATION_LEVEL};
use crate::experiment::Provenance;
use crate::gp::FitOptions;
use crate::metrics::Metric;
use crate::mixture::{optimize_acquisition, DomainSpec, FeasibilityReport, MixtureError, OptimizerOptions, MIN_START_POF};
use crate::modeling::{condition_metric_models, fit_metric_models, training_data, TrainingData};
use crate::seeds::derive_seed;

const STREAM_RANDOM: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_OPTIMIZER: u64 = 3;
const STREAM_MC: u64 = 4;
const STREAM_PRIOR: u64 = 5;

pub(crate) fn stream_seed(base: u64, stream: u64, index: u64) -> u64 {
    derive_seed(derive_seed(base, stream), index)
}

/// Rows a strategy trains on: historical plus completed campaign
/// experiments for runs 1 to 3, campaign experiments only for run4.
pub fn model_training_data(state: &CampaignState, domain: &DomainSpec) -> TrainingData {
    let campaign = state.completed().map(|e| (&e.recipe, e.measured.as_ref().expect("completed")));
    if state.config.strategy.uses_history() {
        let hist = state
            .config
            .historical
            .iter()
            .filter_map(|e| e.measured.as_ref().map(|m| (&e.recipe, m)));
        training_data(domain, hist.chain(campaign))
    } else {
        training_data(domain, campaign)
    }
}

fn fit_options(base: &FitOptions, seed: u64) -> FitOptions {
    FitOptions { seed, ..base.clone() }
}

/// Hyperparameters fitted once on the historical rows.
pub fn fit_prior_models(state: &CampaignState, domain: &DomainSpec) -> Result<MetricModels<f64>, CampaignError> {
    let cfg = &state.config;
    let hist = training_data(
        domain,
        cfg.historical
            .iter()
            .filter_map(|e| e.measured.as_ref().map(|m| (&e.recipe, m))),
    );
    Ok(fit_metric_models(domain, &hist, &fit_options(&cfg.fit, stream_seed(cfg.seed, STREAM_PRIOR, 0)))?)
}

/// Surrogates for the batch about to be proposed.
pub fn batch_models(
    state: &CampaignState,
    domain: &DomainSpec,
    prior: &mut Option<MetricModels<f64>>,
) -> Result<MetricModels<f64>, CampaignError> {
    let cfg = &state.config;
    let refit = !cfg.strategy.uses_history() || cfg.refit_between_batches;
    if refit {
        let data = model_training_data(state, domain);
        let opts = fit_options(&cfg.fit, stream_seed(cfg.seed, STREAM_FIT, state.batch_index as u64));
        return Ok(fit_metric_models(domain, &data, &opts)?);
    }
    if prior.is_none() {
        *prior = Some(fit_prior_models(state, domain)?);
    }
    let campaign = training_data(
        domain,
        state.completed().map(|e| (&e.recipe, e.measured.as_ref().expect("completed"))),
    );
    Ok(condition_metric_models(prior.as_ref().expect("just set"), &campaign)?)
}

/// Objective and unrelaxed constraints for `batch`.
pub fn batch_acquisition(state: &CampaignState, batch: usize) -> (ObjectiveSpec, Vec<ConstraintSpec>) {
    let cfg = &state.config;
    let p = &cfg.problem;
    let distance = ObjectiveSpec::MinimizeSquaredDistance {
        metric: Metric::Mfr,
        target: p.mfr_target,
    };
    let impact = ObjectiveSpec::Maximize {
        metric: Metric::ImpactStrength,
    };
    match cfg.strategy {
        Strategy::Run3Reformulated if !state.is_final_batch(batch) => (impact, Vec::new()),
        Strategy::Run3Reformulated => {
            let objective = match cfg.run3_final_objective {
                FinalObjective::ImpactStrength => impact,
                FinalObjective::MfrDistance => distance,
            };
            let constraints = vec![
                ConstraintSpec::at_least(Metric::YoungsModulus, p.youngs_min),
                p.mfr_corridor(),
            ];
            (objective, constraints)
        }
        _ => (distance, p.output_constraints()),
    }
}

/// Constraints to relax after a failed attempt: every one whose best
/// single PoF is below the start threshold, or else the weakest one.
/// Constraints already at the cap are skipped.
fn relax(levels: &mut RelaxationLevels, report: &FeasibilityReport) -> bool {
    let below: Vec<Metric> = report
        .per_constraint
        .iter()
        .filter(|c| c.best_pof < MIN_START_POF)
        .map(|c| c.constraint.metric)
        .collect();
    let mut targets: Vec<Metric> = below
        .into_iter()
        .filter(|m| levels.get(m).copied().unwrap_or(0) < MAX_RELAXATION_LEVEL)
        .collect();
    if targets.is_empty() {
        targets = report
            .per_constraint
            .iter()
            .filter(|c| levels.get(&c.constraint.metric).copied().unwrap_or(0) < MAX_RELAXATION_LEVEL)
            .min_by(|a, b| a.best_pof.total_cmp(&b.best_pof))
            .map(|c| vec![c.constraint.metric])
            .unwrap_or_default();
    }
    for m in &targets {
        *levels.entry(*m).or_insert(0) += 1;
    }
    !targets.is_empty()
}

/// Events that propose the next batch: zero or more `relaxed` events and
/// one `proposed` event. Nothing is applied to `state`.
pub fn plan_batch(
    state: &CampaignState,
    prior: &mut Option<MetricModels<f64>>,
    request_id: Option<String>,
) -> Result<Vec<Event>, CampaignError> {
    let cfg = &state.config;
    let batch = state.batch_index;
    let Some(&size) = cfg.schedule.get(batch) else {
        return Err(CampaignError::ScheduleExhausted);
    };
    let domain = cfg.domain()?;
    let first_id = state.next_id();
    let proposed = |recipes: Vec<_>, provenance: Provenance, levels: RelaxationLevels| Event::Proposed {
        request_id: request_id.clone(),
        batch,
        levels,
        experiments: recipes
            .into_iter()
            .enumerate()
            .map(|(k, recipe)| ProposedExperiment {
                id: first_id + k as u64,
                recipe,
                provenance,
            })
            .collect(),
    };

    if cfg.strategy == Strategy::Run4Simplified && batch == 0 {
        let sample = domain.sample_dirichlet_rejection(size, [1.0; 4], stream_seed(cfg.seed, STREAM_RANDOM, 0))?;
        return Ok(vec![proposed(sample.recipes, Provenance::RandomInit, RelaxationLevels::new())]);
    }

    let models = batch_models(state, &domain, prior)?;
    let (objective, constraints) = batch_acquisition(state, batch);
    let relaxable = cfg.strategy == Strategy::Run2Relaxation && !state.is_final_batch(batch);
    let mut levels: RelaxationLevels = constraints.iter().map(|c| (c.metric, 0)).collect();
    let options = OptimizerOptions {
        seed: stream_seed(cfg.seed, STREAM_OPTIMIZER, batch as u64),
        ..cfg.optimizer.clone()
    };
    let mut events = Vec::new();
    loop {
        let spec = AcquisitionSpec {
            mc_samples: cfg.mc_samples,
            base_sample_seed: stream_seed(cfg.seed, STREAM_MC, batch as u64),
            ..AcquisitionSpec::new(
                objective,
                constraints
                    .iter()
                    .map(|c| c.with_level(levels.get(&c.metric).copied().unwrap_or(0)))
                    .collect(),
            )
        };
        match optimize_acquisition(&models, &spec, &domain, size, &options) {
            Ok(p) => {
                events.push(proposed(p.recipes, Provenance::BoProposal, levels));
                return Ok(events);
            }
            Err(MixtureError::AllStartsInfeasible { report }) if relaxable => {
                if !relax(&mut levels, &report) {
                    return Err(CampaignError::RelaxationExhausted { batch, report });
                }
                log::info!("batch {batch}: no feasible start, relaxing to {levels:?}");
                events.push(Event::Relaxed {
                    batch,
                    levels: levels.clone(),
                    feasibility: report,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
}
