//! Append-only campaign event log, one JSON object per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CampaignConfig, CampaignError};
use crate::experiment::Provenance;
use crate::metrics::{Metric, QualityMetrics};
use crate::mixture::{FeasibilityReport, MixtureRecipe};

/// Relaxation level per relaxable constraint.
pub type RelaxationLevels = BTreeMap<Metric, u32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedExperiment {
    pub id: u64,
    pub recipe: MixtureRecipe,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: u64,
    pub metrics: QualityMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        config: CampaignConfig,
    },
    /// A failed optimization attempt that raised the levels.
    Relaxed {
        batch: usize,
        levels: RelaxationLevels,
        feasibility: FeasibilityReport,
    },
    Proposed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        batch: usize,
        levels: RelaxationLevels,
        experiments: Vec<ProposedExperiment>,
    },
    Recorded {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        batch: usize,
        results: Vec<ExperimentResult>,
    },
    Completed,
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Created { .. } => "created",
            Event::Relaxed { .. } => "relaxed",
            Event::Proposed { .. } => "proposed",
            Event::Recorded { .. } => "recorded",
            Event::Completed => "completed",
        }
    }

    pub fn request_id(&self) -> Option<&str> {
        match self {
            Event::Proposed { request_id, .. } | Event::Recorded { request_id, .. } => request_id.as_deref(),
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

pub fn events_to_jsonl(events: &[Event]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_line());
        s.push('\n');
    }
    s
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<Event>, CampaignError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CampaignError::Replay(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn read_event_log(path: &Path) -> Result<Vec<Event>, CampaignError> {
    let file = File::open(path).map_err(|e| CampaignError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CampaignError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CampaignError::Replay(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Appends and fsyncs.
pub fn append_event_log(path: &Path, events: &[Event]) -> Result<(), CampaignError> {
    if events.is_empty() {
        return Ok(());
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CampaignError::io(path, e))?;
    f.write_all(events_to_jsonl(events).as_bytes())
        .and_then(|_| f.sync_data())
        .map_err(|e| CampaignError::io(path, e))
}
