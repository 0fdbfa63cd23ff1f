//! JSON HTTP API over the campaign [`Store`].
//!
//! Mutations take a per-campaign writer lock with `try_lock`, so a second
//! concurrent writer gets `409`. Proposals run on the blocking pool as jobs
//! that clients poll; `?wait=true` blocks until the job ends instead.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use compound_bo::campaign::{
    write_plot_csv, CampaignConfig, CampaignError, CampaignState, CampaignSummary, ExperimentResult, Status,
};
use compound_bo::diagnostics::{diagnose_campaign, DiagnosticsReport};
use compound_bo::experiment::Experiment;
use serde::{Deserialize, Serialize};
use tokio::sync::OwnedMutexGuard;

use crate::error::ApiError;
use crate::store::{id_from_label, Store};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.http_status()).expect("valid status");
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub campaign: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<Vec<Experiment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignView {
    pub id: String,
    pub state: CampaignState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateCampaign {
    #[serde(default)]
    pub id: Option<String>,
    pub config: CampaignConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProposeRequest {
    #[serde(default)]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub results: Vec<ExperimentResult>,
}

#[derive(Debug, Default, Deserialize)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

#[derive(Debug, Default, Deserialize)]
struct DiagnosticsQuery {
    #[serde(default)]
    validate: bool,
}

#[derive(Debug)]
struct Inner {
    store: Store,
    token: Option<String>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    jobs: Mutex<HashMap<String, Job>>,
    next_job: AtomicU64,
}

#[derive(Debug, Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// `token`, when set, is required as `Authorization: Bearer <token>`.
    pub fn new(store: Store, token: Option<String>) -> Self {
        AppState(Arc::new(Inner {
            store,
            token,
            locks: Mutex::default(),
            jobs: Mutex::default(),
            next_job: AtomicU64::new(1),
        }))
    }

    fn writer(&self, id: &str) -> ApiResult<OwnedMutexGuard<()>> {
        let lock = self.0.locks.lock().expect("lock map").entry(id.to_string()).or_default().clone();
        lock.try_lock_owned()
            .map_err(|_| ApiError::conflict(format!("campaign {id:?} has a mutation in progress")))
    }

    fn set_job(&self, job: Job) {
        self.0.jobs.lock().expect("job map").insert(job.id.clone(), job);
    }

    fn job(&self, id: &str) -> Option<Job> {
        self.0.jobs.lock().expect("job map").get(id).cloned()
    }

    fn running_job(&self, campaign: &str, request_id: &str) -> Option<Job> {
        self.0
            .jobs
            .lock()
            .expect("job map")
            .values()
            .find(|j| j.campaign == campaign && j.request_id.as_deref() == Some(request_id) && j.status == JobStatus::Running)
            .cloned()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/campaigns", get(list_campaigns).post(create_campaign))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/results", post(post_results))
        .route("/campaigns/{id}/propose", post(post_propose))
        .route("/campaigns/{id}/history", get(get_history))
        .route("/campaigns/{id}/diagnostics", get(get_diagnostics))
        .route("/campaigns/{id}/summary", get(get_summary))
        .route("/campaigns/{id}/plot-data", get(get_plot_data))
        .route("/campaigns/{id}/events", get(get_events))
        .route("/jobs/{job}", get(get_job))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(app): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.0.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            let mut r = ApiError::invalid("missing or wrong bearer token").into_response();
            *r.status_mut() = StatusCode::UNAUTHORIZED;
            return r;
        }
    }
    next.run(req).await
}

/// Runs store IO and model fits off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn body<T>(json: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    json.map(|Json(v)| v).map_err(|e| ApiError::invalid(e.body_text()))
}

async fn list_campaigns(State(app): State<AppState>) -> ApiResult<Json<Vec<String>>> {
    let store = app.0.store.clone();
    blocking(move || store.list()).await.map(Json)
}

async fn create_campaign(
    State(app): State<AppState>,
    req: Result<Json<CreateCampaign>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CampaignView>)> {
    let req = body(req)?;
    let id = req.id.unwrap_or_else(|| id_from_label(&req.config.label()));
    let _guard = app.writer(&id)?;
    let store = app.0.store.clone();
    let view = blocking(move || {
        let c = store.create(&id, req.config)?;
        Ok(CampaignView {
            id,
            state: c.state().clone(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_campaign(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<CampaignView>> {
    let store = app.0.store.clone();
    blocking(move || {
        let c = store.load_id(&id)?;
        Ok(Json(CampaignView {
            id,
            state: c.state().clone(),
        }))
    })
    .await
}

async fn post_results(
    State(app): State<AppState>,
    Path(id): Path<String>,
    req: Result<Json<RecordRequest>, JsonRejection>,
) -> ApiResult<Json<CampaignView>> {
    let req = body(req)?;
    let guard = app.writer(&id)?;
    let store = app.0.store.clone();
    blocking(move || {
        let _guard = guard;
        let ((), c) = store.mutate_id(&id, |c| c.record(req.results, req.request_id.as_deref()))?;
        Ok(Json(CampaignView {
            id,
            state: c.state().clone(),
        }))
    })
    .await
}

async fn post_propose(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
    req: Option<Json<ProposeRequest>>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let request_id = req.and_then(|Json(r)| r.request_id);
    if let Some(job) = request_id.as_deref().and_then(|r| app.running_job(&id, r)) {
        return Ok((StatusCode::ACCEPTED, Json(job)));
    }
    let guard = app.writer(&id)?;
    let store = app.0.store.clone();
    let (check_id, check_rid) = (id.clone(), request_id.clone());
    blocking(move || {
        let state = store.load_id(&check_id)?.state().clone();
        let repeat = check_rid.is_some_and(|r| state.request_ids.contains(&r));
        if !repeat && state.status != Status::ReadyToPropose {
            return Err(CampaignError::WrongStatus {
                expected: Status::ReadyToPropose,
                actual: state.status,
            }
            .into());
        }
        Ok(())
    })
    .await?;

    let job_id = format!("job-{}", app.0.next_job.fetch_add(1, Ordering::Relaxed));
    let mut job = Job {
        id: job_id.clone(),
        campaign: id.clone(),
        request_id: request_id.clone(),
        status: JobStatus::Running,
        experiments: None,
        error: None,
    };
    app.set_job(job.clone());
    let worker = app.clone();
    let store = app.0.store.clone();
    let handle = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let outcome = store.mutate_id(&id, |c| c.propose(request_id.as_deref()));
        let mut done = worker.job(&job_id).expect("registered");
        match outcome {
            Ok((experiments, _)) => {
                done.status = JobStatus::Done;
                done.experiments = Some(experiments);
            }
            Err(e) => {
                log::warn!("proposal {job_id} for {id} failed: {e}");
                done.status = JobStatus::Failed;
                done.error = Some(e);
            }
        }
        worker.set_job(done.clone());
        done
    });
    if !q.wait {
        return Ok((StatusCode::ACCEPTED, Json(job)));
    }
    job = handle
        .await
        .map_err(|e| ApiError::internal(format!("proposal worker failed: {e}")))?;
    match job.error.clone() {
        Some(e) => Err(e),
        None => Ok((StatusCode::OK, Json(job))),
    }
}

async fn get_job(State(app): State<AppState>, Path(job): Path<String>) -> ApiResult<Json<Job>> {
    app.job(&job)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no job {job:?}")))
}

async fn get_history(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<Experiment>>> {
    let store = app.0.store.clone();
    blocking(move || Ok(Json(store.load_id(&id)?.state().history.clone()))).await
}

async fn get_summary(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<CampaignSummary>> {
    let store = app.0.store.clone();
    blocking(move || Ok(Json(store.load_id(&id)?.summary()))).await
}

async fn get_diagnostics(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DiagnosticsQuery>,
) -> ApiResult<Json<DiagnosticsReport>> {
    let store = app.0.store.clone();
    blocking(move || Ok(Json(diagnose_campaign(store.load_id(&id)?.state(), q.validate)))).await
}

async fn get_plot_data(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = app.0.store.clone();
    let csv = blocking(move || {
        let mut out = Vec::new();
        write_plot_csv(&mut out, store.load_id(&id)?.state())?;
        Ok(out)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn get_events(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = app.0.store.clone();
    let log = blocking(move || Ok(store.load_id(&id)?.event_log())).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], log).into_response())
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
