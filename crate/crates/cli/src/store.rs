//! Campaigns persisted as one JSONL event log per campaign,
//! `<root>/<id>.jsonl`. The CLI and the HTTP service share this layout.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use compound_bo::campaign::{append_event_log, events_to_jsonl, Campaign, CampaignConfig, CampaignError, Event};

use crate::error::ApiError;

const EXTENSION: &str = "jsonl";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// ASCII alphanumerics plus `-`, `_` and `.`, not starting with `.`.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Campaign id derived from a config label.
pub fn id_from_label(label: &str) -> String {
    let id: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '-' })
        .collect();
    id.trim_start_matches('.').to_string()
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, id: &str) -> Result<PathBuf, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::invalid(format!("invalid campaign id {id:?}")));
        }
        Ok(self.root.join(format!("{id}.{EXTENSION}")))
    }

    /// A path to an existing file is used as is; anything else is a
    /// campaign id in this store.
    pub fn resolve(&self, reference: &str) -> Result<PathBuf, ApiError> {
        let p = Path::new(reference);
        if p.is_file() {
            Ok(p.to_path_buf())
        } else {
            self.log_path(reference)
        }
    }

    pub fn list(&self) -> Result<Vec<String>, ApiError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(ApiError::internal(format!("{}: {e}", self.root.display()))),
        };
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == EXTENSION).then(|| p.file_stem()?.to_str().map(str::to_string))?
            })
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Creates the log. Creating an existing id with an identical config
    /// returns the stored campaign; a different config is a conflict.
    pub fn create(&self, id: &str, config: CampaignConfig) -> Result<Campaign, ApiError> {
        let path = self.log_path(id)?;
        let campaign = Campaign::create(config)?;
        fs::create_dir_all(&self.root).map_err(|e| ApiError::internal(format!("{}: {e}", self.root.display())))?;
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                f.write_all(campaign.event_log().as_bytes())
                    .and_then(|_| f.sync_data())
                    .map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
                Ok(campaign)
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let existing = load_path(&path)?;
                if existing.config() == campaign.config() {
                    Ok(existing)
                } else {
                    Err(ApiError::conflict(format!("campaign {id:?} exists with a different config")))
                }
            }
            Err(e) => Err(ApiError::internal(format!("{}: {e}", path.display()))),
        }
    }

    /// By id or log path, see [`Store::resolve`].
    pub fn load(&self, reference: &str) -> Result<Campaign, ApiError> {
        load_path(&self.resolve(reference)?)
    }

    pub fn load_id(&self, id: &str) -> Result<Campaign, ApiError> {
        load_path(&self.log_path(id)?)
    }

    /// By id or log path, see [`Store::resolve`].
    pub fn mutate<T>(
        &self,
        reference: &str,
        f: impl FnOnce(&mut Campaign) -> Result<T, CampaignError>,
    ) -> Result<(T, Campaign), ApiError> {
        mutate_path(&self.resolve(reference)?, f)
    }

    pub fn mutate_id<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Campaign) -> Result<T, CampaignError>,
    ) -> Result<(T, Campaign), ApiError> {
        mutate_path(&self.log_path(id)?, f)
    }
}

/// Loads, applies `f` and appends whatever events `f` added. A failing `f`
/// leaves the log untouched.
pub fn mutate_path<T>(
    path: &Path,
    f: impl FnOnce(&mut Campaign) -> Result<T, CampaignError>,
) -> Result<(T, Campaign), ApiError> {
    let mut campaign = load_path(path)?;
    let before = campaign.events().len();
    let out = f(&mut campaign)?;
    append_event_log(path, &campaign.events()[before..])?;
    Ok((out, campaign))
}

pub fn load_path(path: &Path) -> Result<Campaign, ApiError> {
    if !path.is_file() {
        return Err(ApiError::not_found(format!("no campaign log at {}", path.display())));
    }
    Ok(Campaign::load(path)?)
}

/// Replaces the file at `path` with the given events.
pub fn write_log(path: &Path, events: &[Event]) -> Result<(), ApiError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, events_to_jsonl(events)).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
}
