//! Batched experimentation campaigns: an event-sourced state machine plus
//! the four proposal strategies.

mod config;
mod engine;
mod events;
mod history;
mod state;
mod summary;

pub use config::{CampaignConfig, FinalObjective, Strategy, DEFAULT_SCHEDULE};
pub use engine::{batch_acquisition, batch_models, fit_prior_models, model_training_data, plan_batch};
pub use events::{
    append_event_log, events_from_jsonl, events_to_jsonl, read_event_log, Event, ExperimentResult, ProposedExperiment,
    RelaxationLevels,
};
pub use history::{scarce_feasible_history, HistorySpec};
pub use state::{CampaignState, Status};
pub use summary::{campaign_summary, write_plot_csv, BatchTrace, BestExperiment, CampaignSummary, TracePoint};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::acquisition::MetricModels;
use crate::experiment::Experiment;
use crate::gp::GpError;
use crate::metrics::NonPositiveMetric;
use crate::mixture::{FeasibilityReport, MixtureError};
use crate::oracle::{Oracle, OracleError};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("campaign is {}, expected {}", actual.label(), expected.label())]
    WrongStatus { expected: Status, actual: Status },
    #[error("every batch in the schedule has been proposed")]
    ScheduleExhausted,
    #[error("experiment {id} is not in the open batch")]
    UnknownExperiment { id: u64 },
    #[error("experiment {id} appears twice in the results")]
    DuplicateResult { id: u64 },
    #[error("results missing for experiments {missing:?}")]
    IncompleteBatch { missing: Vec<u64> },
    #[error("experiment {id}: {source}")]
    NonPositiveMetric { id: u64, source: NonPositiveMetric },
    #[error("batch {batch}: still no feasible start at the maximum relaxation level")]
    RelaxationExhausted { batch: usize, report: FeasibilityReport },
    #[error("request id {0:?} was already used for a different operation")]
    RequestIdReused(String),
    #[error("oracle query for experiment {id}: {source}")]
    Oracle { id: u64, source: OracleError },
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("event log: {0}")]
    Replay(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CampaignError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Per-constraint PoF payload of an infeasibility failure.
    pub fn infeasibility(&self) -> Option<&FeasibilityReport> {
        match self {
            CampaignError::Mixture(MixtureError::AllStartsInfeasible { report })
            | CampaignError::RelaxationExhausted { report, .. } => Some(report),
            _ => None,
        }
    }
}

/// A campaign with its event log. Mutations append events and apply them
/// atomically; a failed operation leaves both untouched.
#[derive(Debug, Clone)]
pub struct Campaign {
    state: CampaignState,
    events: Vec<Event>,
    prior: Option<MetricModels<f64>>,
}

impl Campaign {
    pub fn create(config: CampaignConfig) -> Result<Self, CampaignError> {
        config.validate()?;
        Ok(Campaign {
            state: CampaignState::new(config.clone()),
            events: vec![Event::Created { config }],
            prior: None,
        })
    }

    pub fn replay(events: Vec<Event>) -> Result<Self, CampaignError> {
        let state = CampaignState::replay(&events)?;
        state.config.validate()?;
        Ok(Campaign {
            state,
            events,
            prior: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        Self::replay(read_event_log(path)?)
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.state.config
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_log(&self) -> String {
        events_to_jsonl(&self.events)
    }

    pub fn summary(&self) -> CampaignSummary {
        campaign_summary(&self.state)
    }

    fn commit(&mut self, new: Vec<Event>) -> Result<(), CampaignError> {
        let mut next = self.state.clone();
        for e in &new {
            next.apply(e)?;
        }
        self.state = next;
        self.events.extend(new);
        Ok(())
    }

    fn previous_request(&self, request_id: Option<&str>, kind: &str) -> Result<Option<&Event>, CampaignError> {
        let Some(id) = request_id else { return Ok(None) };
        if !self.state.request_ids.contains(id) {
            return Ok(None);
        }
        let e = self
            .events
            .iter()
            .find(|e| e.request_id() == Some(id))
            .expect("request ids come from events");
        if e.kind() != kind {
            return Err(CampaignError::RequestIdReused(id.to_string()));
        }
        Ok(Some(e))
    }

    /// Proposes the next batch and returns its experiments. Repeating a
    /// `request_id` returns the batch proposed under it.
    pub fn propose(&mut self, request_id: Option<&str>) -> Result<Vec<Experiment>, CampaignError> {
        if let Some(Event::Proposed { experiments, .. }) = self.previous_request(request_id, "proposed")? {
            let ids: Vec<u64> = experiments.iter().map(|p| p.id).collect();
            return Ok(self.state.history.iter().filter(|e| ids.contains(&e.id)).cloned().collect());
        }
        if self.state.status != Status::ReadyToPropose {
            return Err(CampaignError::WrongStatus {
                expected: Status::ReadyToPropose,
                actual: self.state.status,
            });
        }
        let events = plan_batch(&self.state, &mut self.prior, request_id.map(str::to_string))?;
        self.commit(events)?;
        Ok(self.state.open_batch().to_vec())
    }

    /// Records metrics for the whole open batch.
    pub fn record(&mut self, results: Vec<ExperimentResult>, request_id: Option<&str>) -> Result<(), CampaignError> {
        if self.previous_request(request_id, "recorded")?.is_some() {
            return Ok(());
        }
        self.state.validate_results(&results)?;
        let mut ordered = results;
        ordered.sort_by_key(|r| r.id);
        let mut new = vec![Event::Recorded {
            request_id: request_id.map(str::to_string),
            batch: self.state.batch_index,
            results: ordered,
        }];
        if self.state.batch_index + 1 == self.state.config.schedule.len() {
            new.push(Event::Completed);
        }
        self.commit(new)
    }

    /// Answers the open batch from `oracle` and records it.
    pub fn evaluate_with_oracle(&mut self, oracle: &Oracle, request_id: Option<&str>) -> Result<(), CampaignError> {
        if self.previous_request(request_id, "recorded")?.is_some() {
            return Ok(());
        }
        if self.state.status != Status::AwaitingResults {
            return Err(CampaignError::WrongStatus {
                expected: Status::AwaitingResults,
                actual: self.state.status,
            });
        }
        let results = self
            .state
            .open_batch()
            .iter()
            .map(|e| {
                oracle
                    .query(&e.recipe, e.id)
                    .map(|metrics| ExperimentResult { id: e.id, metrics })
                    .map_err(|source| CampaignError::Oracle { id: e.id, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.record(results, request_id)
    }

    /// Alternates proposals and oracle answers until the schedule is done
    /// or a proposal fails.
    pub fn run_to_completion(&mut self, oracle: &Oracle) -> Result<(), CampaignError> {
        loop {
            match self.state.status {
                Status::Complete => return Ok(()),
                Status::AwaitingResults => self.evaluate_with_oracle(oracle, None)?,
                Status::ReadyToPropose => {
                    self.propose(None)?;
                }
            }
        }
    }
}

/// Fills in a generated scarce-feasible history for strategies that need
/// one and have none.
pub fn prepare_simulation(mut config: CampaignConfig, oracle: &Oracle) -> Result<CampaignConfig, CampaignError> {
    if config.strategy.uses_history() && config.historical.is_empty() {
        let spec = HistorySpec {
            seed: crate::seeds::derive_seed(config.seed, 0x4157),
            ..HistorySpec::default()
        };
        config.historical = scarce_feasible_history(oracle, &config.problem, config.upper_bounds, &spec)?;
    }
    Ok(config)
}

/// Runs a whole campaign against `oracle`. The campaign is returned even
/// when a proposal fails, together with the error.
pub fn simulate(config: CampaignConfig, oracle: &Oracle) -> Result<(Campaign, Option<CampaignError>), CampaignError> {
    let config = prepare_simulation(config, oracle)?;
    let mut campaign = Campaign::create(config)?;
    let err = campaign.run_to_completion(oracle).err();
    Ok((campaign, err))
}
