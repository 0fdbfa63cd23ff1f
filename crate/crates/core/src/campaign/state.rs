use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::events::{Event, ExperimentResult, RelaxationLevels};
use super::{CampaignConfig, CampaignError};
use crate::experiment::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingResults,
    ReadyToPropose,
    Complete,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::AwaitingResults => "awaiting_results",
            Status::ReadyToPropose => "ready_to_propose",
            Status::Complete => "complete",
        }
    }
}

/// Campaign state as a fold over its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub config: CampaignConfig,
    pub history: Vec<Experiment>,
    pub relaxation_levels: RelaxationLevels,
    /// Batch that is open, or next to be proposed.
    pub batch_index: usize,
    pub status: Status,
    pub request_ids: BTreeSet<String>,
}

impl CampaignState {
    pub fn new(config: CampaignConfig) -> Self {
        CampaignState {
            config,
            history: Vec::new(),
            relaxation_levels: RelaxationLevels::new(),
            batch_index: 0,
            status: Status::ReadyToPropose,
            request_ids: BTreeSet::new(),
        }
    }

    /// Experiments of the open batch, if any.
    pub fn open_batch(&self) -> &[Experiment] {
        if self.status != Status::AwaitingResults {
            return &[];
        }
        let start = self.history.partition_point(|e| e.batch_index < self.batch_index);
        &self.history[start..]
    }

    pub fn completed(&self) -> impl Iterator<Item = &Experiment> {
        self.history.iter().filter(|e| e.measured.is_some())
    }

    pub fn next_id(&self) -> u64 {
        self.history.last().map_or(1, |e| e.id + 1)
    }

    pub fn is_final_batch(&self, batch: usize) -> bool {
        batch + 1 == self.config.schedule.len()
    }

    fn expect_status(&self, expected: Status) -> Result<(), CampaignError> {
        if self.status == expected {
            Ok(())
        } else {
            Err(CampaignError::WrongStatus {
                expected,
                actual: self.status,
            })
        }
    }

    /// Checks results against the open batch without changing anything.
    pub fn validate_results(&self, results: &[ExperimentResult]) -> Result<(), CampaignError> {
        self.expect_status(Status::AwaitingResults)?;
        let open: BTreeSet<u64> = self.open_batch().iter().map(|e| e.id).collect();
        let mut seen = BTreeSet::new();
        for r in results {
            if !open.contains(&r.id) {
                return Err(CampaignError::UnknownExperiment { id: r.id });
            }
            if !seen.insert(r.id) {
                return Err(CampaignError::DuplicateResult { id: r.id });
            }
            r.metrics
                .validate()
                .map_err(|source| CampaignError::NonPositiveMetric { id: r.id, source })?;
        }
        let missing: Vec<u64> = open.difference(&seen).copied().collect();
        if !missing.is_empty() {
            return Err(CampaignError::IncompleteBatch { missing });
        }
        Ok(())
    }

    /// Applies one event. Events that do not fit the current state are
    /// rejected, so a corrupted log fails loudly on replay.
    pub fn apply(&mut self, event: &Event) -> Result<(), CampaignError> {
        match event {
            Event::Created { .. } => return Err(CampaignError::Replay("second created event".into())),
            Event::Relaxed { batch, levels, .. } => {
                self.expect_status(Status::ReadyToPropose)?;
                if *batch != self.batch_index {
                    return Err(CampaignError::Replay(format!("relaxed batch {batch} while at {}", self.batch_index)));
                }
                self.relaxation_levels = levels.clone();
            }
            Event::Proposed {
                request_id,
                batch,
                levels,
                experiments,
            } => {
                self.expect_status(Status::ReadyToPropose)?;
                let size = self.config.schedule.get(*batch).copied();
                if *batch != self.batch_index || size != Some(experiments.len()) {
                    return Err(CampaignError::Replay(format!(
                        "proposal of {} for batch {batch} does not match schedule",
                        experiments.len()
                    )));
                }
                let mut id = self.next_id();
                for p in experiments {
                    if p.id != id {
                        return Err(CampaignError::Replay(format!("expected experiment id {id}, got {}", p.id)));
                    }
                    id += 1;
                    self.history.push(Experiment {
                        id: p.id,
                        batch_index: *batch,
                        recipe: p.recipe,
                        measured: None,
                        provenance: p.provenance,
                    });
                }
                self.relaxation_levels = levels.clone();
                self.status = Status::AwaitingResults;
                self.note_request(request_id);
            }
            Event::Recorded {
                request_id,
                batch,
                results,
            } => {
                if *batch != self.batch_index {
                    return Err(CampaignError::Replay(format!("results for batch {batch} while at {}", self.batch_index)));
                }
                self.validate_results(results)?;
                for r in results {
                    let e = self
                        .history
                        .iter_mut()
                        .find(|e| e.id == r.id)
                        .expect("validated against the open batch");
                    e.measured = Some(r.metrics);
                }
                self.batch_index += 1;
                self.status = Status::ReadyToPropose;
                self.note_request(request_id);
            }
            Event::Completed => {
                if self.status != Status::ReadyToPropose || self.batch_index != self.config.schedule.len() {
                    return Err(CampaignError::Replay("completed before the schedule was exhausted".into()));
                }
                self.status = Status::Complete;
            }
        }
        Ok(())
    }

    fn note_request(&mut self, id: &Option<String>) {
        if let Some(id) = id {
            self.request_ids.insert(id.clone());
        }
    }

    /// Rebuilds state from a full log.
    pub fn replay(events: &[Event]) -> Result<Self, CampaignError> {
        let Some(Event::Created { config }) = events.first() else {
            return Err(CampaignError::Replay("log must start with a created event".into()));
        };
        let mut state = CampaignState::new(config.clone());
        for e in &events[1..] {
            state.apply(e)?;
        }
        Ok(state)
    }
}
