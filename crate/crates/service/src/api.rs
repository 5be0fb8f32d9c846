use crate::error::ApiError;
use crate::job::{JobStatus, ReviewJob};
use crate::proxy::session_asset;
use crate::render::{default_camera, encode_png, render_frame, View, DEFAULT_SIZE};
use crate::store::Store;
use crate::AppState;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use simready_annotate::session::transition;
use simready_annotate::{
    AnnotateError, AnnotationSession, Decision, ObjectDescription, PartComment, ReviewEvent,
    ReviewState, ValidationMode, Verdict,
};
use simready_core::assets::{load_asset, save_asset, AssetEncoding};
use simready_core::mpm::run_simulation_observed;
use simready_core::{MaterialParams, ScenarioSpec, SimConfig, SimReadyAsset, Trajectory};
use std::collections::BTreeMap;
use std::sync::Arc;
use tower_http::services::ServeDir;

type AppResult<T> = Result<T, ApiError>;
type St = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/annotate", post(annotate))
        .route("/sessions/{id}/simulate", post(simulate))
        .route("/sessions/{id}/verdict", post(verdict))
        .route("/sessions/{id}/requery", post(requery))
        .route("/sessions/{id}/override", post(override_materials))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/frames/{k}", get(get_frame))
        .route("/jobs/{id}/trajectory", get(get_trajectory))
        .fallback(|| async { ApiError::not_found("no such endpoint") });
    let static_dir = state.config.static_dir.clone();
    let app = Router::new().nest("/api", api.with_state(state));
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> AppResult<T> {
    r.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query<T>(r: Result<Query<T>, QueryRejection>) -> AppResult<T> {
    r.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn load_session(store: &Store, id: &str) -> AppResult<AnnotationSession> {
    store
        .load_session(id)?
        .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
}

fn load_job(store: &Store, id: &str) -> AppResult<ReviewJob> {
    store
        .load_job(id)?
        .ok_or_else(|| ApiError::not_found(format!("no job `{id}`")))
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

#[derive(Serialize)]
struct JobView {
    #[serde(flatten)]
    job: ReviewJob,
    /// `[frames done, frames total]` while running.
    #[serde(skip_serializing_if = "Option::is_none")]
    progress: Option<[usize; 2]>,
}

fn job_view(state: &AppState, job: ReviewJob) -> JobView {
    let progress = state
        .progress
        .lock()
        .unwrap()
        .get(&job.id)
        .map(|&(a, b)| [a, b]);
    JobView { job, progress }
}

#[derive(Serialize)]
struct SessionView {
    #[serde(flatten)]
    session: AnnotationSession,
    rectification_count: usize,
    jobs: Vec<JobView>,
}

fn session_view(state: &AppState, session: AnnotationSession) -> AppResult<Json<SessionView>> {
    let jobs = state
        .store
        .jobs_for_session(&session.id)?
        .into_iter()
        .map(|j| job_view(state, j))
        .collect();
    Ok(Json(SessionView {
        rectification_count: session.rectification_count(),
        session,
        jobs,
    }))
}

#[derive(Serialize)]
struct SessionSummary {
    id: String,
    shape_name: String,
    state: ReviewState,
    iterations: usize,
    rectification_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    last_error: Option<String>,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
}

async fn list_sessions(State(state): St) -> AppResult<Json<Vec<SessionSummary>>> {
    let out = state
        .store
        .list_sessions()?
        .into_iter()
        .map(|s| SessionSummary {
            rectification_count: s.rectification_count(),
            iterations: s.iterations.len(),
            id: s.id,
            shape_name: s.description.shape_name,
            state: s.state,
            last_error: s.last_error,
            created_at: s.created_at,
            updated_at: s.updated_at,
        })
        .collect();
    Ok(Json(out))
}

#[derive(Deserialize)]
struct CreateParams {
    #[serde(default)]
    mode: ValidationMode,
}

async fn create_session(
    State(state): St,
    params: Result<Query<CreateParams>, QueryRejection>,
    desc: Result<Json<ObjectDescription>, JsonRejection>,
) -> AppResult<Response> {
    let params = query(params)?;
    let session = AnnotationSession::new(&new_id(), body(desc)?, params.mode)?;
    state.store.save_session(&session)?;
    Ok((StatusCode::CREATED, session_view(&state, session)?).into_response())
}

async fn get_session(State(state): St, Path(id): Path<String>) -> AppResult<Json<SessionView>> {
    let session = load_session(&state.store, &id)?;
    session_view(&state, session)
}

/// Runs a model round off the async runtime and stores the session whatever
/// the outcome, so transport errors stay visible on the record.
async fn chat_round(
    state: &Arc<AppState>,
    id: &str,
    round: fn(
        &mut AnnotationSession,
        &dyn simready_annotate::chat::ChatClient,
    ) -> Result<(), AnnotateError>,
) -> AppResult<Json<SessionView>> {
    let _guard = state.lock_session(id).await;
    let mut session = load_session(&state.store, id)?;
    let client = state.client.clone();
    let (session, result) = tokio::task::spawn_blocking(move || {
        let r = round(&mut session, client.as_ref());
        (session, r)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    state.store.save_session(&session)?;
    result?;
    session_view(state, session)
}

async fn annotate(State(state): St, Path(id): Path<String>) -> AppResult<Json<SessionView>> {
    chat_round(&state, &id, AnnotationSession::run_initial_round).await
}

/// After an implausible verdict: the feedback round. While the latest
/// proposal failed to parse or validate: the same request again.
async fn requery(State(state): St, Path(id): Path<String>) -> AppResult<Json<SessionView>> {
    fn round(
        s: &mut AnnotationSession,
        c: &dyn simready_annotate::chat::ChatClient,
    ) -> Result<(), AnnotateError> {
        match s.state {
            ReviewState::Proposed
                if s.current_materials().is_none() && !s.iterations.is_empty() =>
            {
                s.retry_round(c)
            }
            _ => s.run_feedback_round(c),
        }
    }
    chat_round(&state, &id, round).await
}

#[derive(Deserialize)]
struct OverrideRequest {
    materials: BTreeMap<String, MaterialParams>,
}

async fn override_materials(
    State(state): St,
    Path(id): Path<String>,
    req: Result<Json<OverrideRequest>, JsonRejection>,
) -> AppResult<Json<SessionView>> {
    let req = body(req)?;
    let _guard = state.lock_session(&id).await;
    let mut session = load_session(&state.store, &id)?;
    session.apply_override(&req.materials)?;
    state.store.save_session(&session)?;
    session_view(&state, session)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioArg {
    Name(String),
    Spec(ScenarioSpec),
}

#[derive(Deserialize)]
struct SimulateRequest {
    scenario: ScenarioArg,
    #[serde(default)]
    config: Option<SimConfig>,
    #[serde(default)]
    points_per_axis: Option<usize>,
    #[serde(default)]
    world_scale: Option<f64>,
}

async fn simulate(
    State(state): St,
    Path(id): Path<String>,
    req: Result<Json<SimulateRequest>, JsonRejection>,
) -> AppResult<Response> {
    let req = body(req)?;
    if state.cancelled() {
        return Err(ApiError::conflict("the service is shutting down"));
    }
    let scenario = match req.scenario {
        ScenarioArg::Name(n) => ScenarioSpec::by_name(&n)
            .ok_or_else(|| ApiError::invalid(format!("unknown scenario `{n}`")))?,
        ScenarioArg::Spec(s) => s,
    };
    scenario.validate().map_err(ApiError::invalid)?;
    let config = req
        .config
        .unwrap_or_else(|| state.config.default_sim.clone());
    config.validate().map_err(ApiError::invalid)?;

    let _guard = state.lock_session(&id).await;
    let session = load_session(&state.store, &id)?;
    if transition(session.state, ReviewEvent::SimulationDone).is_none() {
        return Err(ApiError::conflict(format!(
            "cannot simulate a session in state {:?}",
            session.state
        ))
        .with_details(json!({"state": session.state})));
    }
    let materials = session
        .current_materials()
        .ok_or_else(|| ApiError::conflict("the latest proposal has no validated materials"))?;
    let ppa = req.points_per_axis.unwrap_or(state.config.points_per_axis);
    let scale = req.world_scale.unwrap_or(state.config.world_scale);
    if !(2..=128).contains(&ppa) || !(scale > 0.0 && scale.is_finite()) {
        return Err(ApiError::invalid(
            "points_per_axis must be in [2, 128] and world_scale positive",
        ));
    }
    let asset = session_asset(&session.id, &session.description, materials, ppa, scale)
        .map_err(ApiError::invalid)?;

    let job = ReviewJob {
        id: new_id(),
        session_id: session.id.clone(),
        iteration: session.iterations.len() - 1,
        scenario,
        frame_count: config.frame_count(),
        config,
        status: JobStatus::Queued,
        error: None,
        particle_count: asset.len(),
        trajectory_sha256: None,
        report: None,
        created_at: Utc::now(),
        started_at: None,
        finished_at: None,
    };
    state.store.save_job(&job)?;
    save_asset(
        &asset,
        &state.store.asset_path(&job.id)?,
        AssetEncoding::Binary,
    )
    .map_err(|e| ApiError::internal(e.to_string()))?;
    state.jobs.enter();
    tokio::spawn(run_job(state.clone(), job.clone(), asset));
    Ok((StatusCode::ACCEPTED, Json(job_view(&state, job))).into_response())
}

async fn run_job(state: Arc<AppState>, mut job: ReviewJob, asset: SimReadyAsset) {
    let _permit = state
        .slots
        .clone()
        .acquire_owned()
        .await
        .expect("job semaphore is never closed");
    if state.cancelled() {
        job.fail("cancelled: service shutting down");
    } else {
        job.advance(JobStatus::Running).unwrap();
        persist_job(&state, &job);
        let st = state.clone();
        let (id, scenario, config) = (job.id.clone(), job.scenario, job.config.clone());
        let outcome =
            tokio::task::spawn_blocking(move || execute(&st, &id, &asset, &scenario, &config))
                .await;
        state.progress.lock().unwrap().remove(&job.id);
        match outcome {
            Ok(Ok((sha, report))) => {
                job.trajectory_sha256 = Some(sha);
                job.report = Some(report);
                job.advance(JobStatus::Done).unwrap();
            }
            Ok(Err(message)) => job.fail(message),
            Err(e) => job.fail(format!("simulation worker crashed: {e}")),
        }
    }
    persist_job(&state, &job);
    if job.status == JobStatus::Done {
        mark_simulated(&state, &job).await;
    }
    state.jobs.exit();
}

fn persist_job(state: &AppState, job: &ReviewJob) {
    if let Err(e) = state.store.save_job(job) {
        tracing::error!(job = %job.id, error = %e, "could not persist job");
    }
}

/// Moves the session to `simulated` unless its proposal changed meanwhile.
async fn mark_simulated(state: &AppState, job: &ReviewJob) {
    let _guard = state.lock_session(&job.session_id).await;
    let result = (|| -> AppResult<()> {
        let mut session = load_session(&state.store, &job.session_id)?;
        if session.iterations.len() != job.iteration + 1 {
            return Ok(());
        }
        session.record_simulation()?;
        state.store.save_session(&session)?;
        Ok(())
    })();
    if let Err(e) = result {
        tracing::warn!(job = %job.id, error = %e.message, "session not marked simulated");
    }
}

fn execute(
    state: &AppState,
    id: &str,
    asset: &SimReadyAsset,
    scenario: &ScenarioSpec,
    config: &SimConfig,
) -> Result<(String, simready_core::mpm::SimulationReport), String> {
    let mut observer = |done: usize, total: usize| {
        state
            .progress
            .lock()
            .unwrap()
            .insert(id.to_string(), (done, total));
        !state.cancelled()
    };
    let (trajectory, report) = run_simulation_observed(asset, scenario, config, &mut observer)
        .map_err(|e| match e {
            simready_core::mpm::SimError::Cancelled { frames } => {
                format!("cancelled after {frames} frames: service shutting down")
            }
            other => other.to_string(),
        })?;
    let bytes = trajectory.to_bytes();
    let sha: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let store_err = |e: crate::StoreError| e.to_string();
    Store::write_atomic(&state.store.trajectory_path(id).map_err(store_err)?, &bytes)
        .map_err(store_err)?;

    let frames_dir = state.store.job_dir(id).map_err(store_err)?.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| e.to_string())?;
    let camera = default_camera(&trajectory, config, View::Front, DEFAULT_SIZE);
    for k in 0..trajectory.len() {
        let img =
            render_frame(&trajectory, k, asset.colors(), &camera).map_err(|e| e.to_string())?;
        let path = state.store.frame_path(id, k).map_err(store_err)?;
        Store::write_atomic(&path, &encode_png(&img)).map_err(store_err)?;
    }
    Ok((sha, report))
}

async fn get_job(State(state): St, Path(id): Path<String>) -> AppResult<Json<JobView>> {
    let job = load_job(&state.store, &id)?;
    Ok(Json(job_view(&state, job)))
}

fn finished_job(store: &Store, id: &str) -> AppResult<ReviewJob> {
    let job = load_job(store, id)?;
    match job.status {
        JobStatus::Done => Ok(job),
        JobStatus::Failed => Err(ApiError::conflict(format!(
            "job failed: {}",
            job.error.as_deref().unwrap_or("unknown error")
        ))),
        _ => Err(ApiError::conflict(
            format!("job is {:?}", job.status).to_lowercase(),
        )),
    }
}

#[derive(Deserialize)]
struct FrameQuery {
    #[serde(default)]
    view: View,
    #[serde(default)]
    size: Option<u32>,
}

async fn get_frame(
    State(state): St,
    Path((id, k)): Path<(String, String)>,
    q: Result<Query<FrameQuery>, QueryRejection>,
) -> AppResult<Response> {
    let q = query(q)?;
    let k: usize = k
        .parse()
        .map_err(|_| ApiError::bad_request(format!("frame index `{k}` is not a number")))?;
    let size = q.size.unwrap_or(DEFAULT_SIZE);
    if !(16..=2048).contains(&size) {
        return Err(ApiError::bad_request("size must be in [16, 2048]"));
    }
    let job = finished_job(&state.store, &id)?;
    if k >= job.frame_count {
        return Err(ApiError::not_found(format!(
            "frame {k} out of range ({} frames)",
            job.frame_count
        )));
    }
    let cached = state.store.frame_path(&id, k)?;
    let png = if q.view == View::Front && size == DEFAULT_SIZE && cached.exists() {
        std::fs::read(&cached).map_err(|e| ApiError::internal(e.to_string()))?
    } else {
        let store = state.store.clone();
        tokio::task::spawn_blocking(move || -> AppResult<Vec<u8>> {
            let traj = Trajectory::load(&store.trajectory_path(&id)?)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let asset = load_asset(&store.asset_path(&id)?)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let camera = default_camera(&traj, &job.config, q.view, size);
            let img = render_frame(&traj, k, asset.colors(), &camera)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(encode_png(&img))
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn get_trajectory(State(state): St, Path(id): Path<String>) -> AppResult<Response> {
    finished_job(&state.store, &id)?;
    let bytes = std::fs::read(state.store.trajectory_path(&id)?)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.trj\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Deserialize)]
struct VerdictRequest {
    job_id: String,
    decision: Decision,
    #[serde(default)]
    comments: Vec<PartComment>,
    #[serde(default)]
    reviewer: Option<String>,
}

async fn verdict(
    State(state): St,
    Path(id): Path<String>,
    req: Result<Json<VerdictRequest>, JsonRejection>,
) -> AppResult<Json<SessionView>> {
    let req = body(req)?;
    let _guard = state.lock_session(&id).await;
    let mut session = load_session(&state.store, &id)?;
    let job = load_job(&state.store, &req.job_id)?;
    if job.session_id != session.id {
        return Err(ApiError::invalid(format!(
            "job `{}` belongs to another session",
            job.id
        )));
    }
    if job.status != JobStatus::Done {
        return Err(ApiError::conflict(format!(
            "job `{}` has not finished",
            job.id
        )));
    }
    if job.iteration + 1 != session.iterations.len() {
        return Err(ApiError::conflict("the job simulated an earlier proposal"));
    }
    if let Some(bad) = req
        .comments
        .iter()
        .filter_map(|c| c.part.as_deref())
        .find(|p| session.description.part(p).is_none())
    {
        return Err(ApiError::invalid(format!(
            "comment refers to unknown part `{bad}`"
        )));
    }
    session.record_verdict(Verdict {
        scenario: job.scenario.name().to_string(),
        decision: req.decision,
        comments: req.comments,
        reviewer: req.reviewer,
        job_id: Some(job.id),
        timestamp: Utc::now(),
    })?;
    state.store.save_session(&session)?;
    session_view(&state, session)
}
