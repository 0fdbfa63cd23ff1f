use std::fmt;
use std::io::ErrorKind;

use compound_bo::campaign::CampaignError;
use compound_bo::experiment::CsvError;
use compound_bo::mixture::MixtureError;
use compound_bo::oracle::OracleError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidInput,
    NotFound,
    Conflict,
    Infeasible,
    Internal,
}

impl ErrorCode {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::Internal => 1,
            ErrorCode::InvalidInput => 2,
            ErrorCode::NotFound => 3,
            ErrorCode::Conflict => 4,
            ErrorCode::Infeasible => 5,
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::InvalidInput => 400,
            ErrorCode::NotFound => 404,
            ErrorCode::Conflict => 409,
            ErrorCode::Infeasible => 422,
            ErrorCode::Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Error envelope shared by the CLI (stderr) and the HTTP API (body).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidInput, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Conflict, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

fn io_code(kind: ErrorKind) -> ErrorCode {
    if kind == ErrorKind::NotFound {
        ErrorCode::NotFound
    } else {
        ErrorCode::Internal
    }
}

fn mixture_code(e: &MixtureError) -> ErrorCode {
    match e {
        MixtureError::EmptyDomain
        | MixtureError::InvalidRecipe(_)
        | MixtureError::OutOfDomain(_)
        | MixtureError::InvalidSheets(_) => ErrorCode::InvalidInput,
        MixtureError::AllStartsInfeasible { .. } => ErrorCode::Infeasible,
        MixtureError::RejectionBudgetExceeded { .. } | MixtureError::Acquisition(_) => ErrorCode::Internal,
    }
}

fn oracle_code(e: &OracleError) -> ErrorCode {
    match e {
        OracleError::OutOfDomain(_)
        | OracleError::Schema(_)
        | OracleError::InvalidParams(_)
        | OracleError::NoFeasibleRegion { .. }
        | OracleError::Csv(_) => ErrorCode::InvalidInput,
        OracleError::Mixture(m) => mixture_code(m),
        OracleError::Fit(_) => ErrorCode::Internal,
        OracleError::Io { source, .. } => io_code(source.kind()),
    }
}

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> Self {
        let code = match &e {
            CampaignError::InvalidConfig(_)
            | CampaignError::UnknownExperiment { .. }
            | CampaignError::DuplicateResult { .. }
            | CampaignError::NonPositiveMetric { .. } => ErrorCode::InvalidInput,
            CampaignError::WrongStatus { .. }
            | CampaignError::ScheduleExhausted
            | CampaignError::IncompleteBatch { .. }
            | CampaignError::RequestIdReused(_) => ErrorCode::Conflict,
            CampaignError::RelaxationExhausted { .. } => ErrorCode::Infeasible,
            CampaignError::Mixture(m) => mixture_code(m),
            CampaignError::Oracle { source, .. } => match oracle_code(source) {
                // The engine only queries its own proposals, so a bad query is a bug.
                ErrorCode::InvalidInput => ErrorCode::Internal,
                c => c,
            },
            CampaignError::Gp(_) | CampaignError::Replay(_) => ErrorCode::Internal,
            CampaignError::Io { source, .. } => io_code(source.kind()),
        };
        let detail = match &e {
            CampaignError::IncompleteBatch { missing } => Some(json!({ "missing": missing })),
            CampaignError::RelaxationExhausted { batch, report } => Some(json!({ "batch": batch, "feasibility": report })),
            _ => e.infeasibility().map(|r| json!({ "feasibility": r })),
        };
        ApiError {
            code,
            message: e.to_string(),
            detail,
        }
    }
}

impl From<OracleError> for ApiError {
    fn from(e: OracleError) -> Self {
        ApiError::new(oracle_code(&e), e.to_string())
    }
}

impl From<CsvError> for ApiError {
    fn from(e: CsvError) -> Self {
        ApiError::invalid(e.to_string())
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::invalid(format!("json: {e}"))
    }
}
