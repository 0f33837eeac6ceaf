//! HTTP facade over the pipeline: session CRUD, compute steps, and polled jobs for the
//! long-running sweeps and landscapes. Bodies are the session JSON schemas.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use padres_core::config::{Config, GridSpec};
use padres_core::ids::content_id;
use padres_core::io::{parse_csv, parse_json, to_json, ImportFormat};
use padres_core::model::{BasisSpec, ModelSpec};
use padres_core::pipeline::{self, FitRequest, LandscapeRequest, StationaryRequest, TrajectoryRequest};
use padres_core::session::{Session, Source};
use padres_core::stabilization::WindowOptions;
use padres_core::Error;

#[derive(Debug, Clone, PartialEq)]
enum JobStatus {
    Running,
    Done(String),
    Failed(u16, String),
}

#[derive(Debug, Clone)]
struct Job {
    session_id: String,
    step: &'static str,
    status: JobStatus,
}

pub struct AppState {
    config: Config,
    data_dir: Option<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    jobs: Mutex<HashMap<String, Job>>,
    counter: AtomicU64,
}

impl AppState {
    /// `data_dir`, when set, receives `<session id>.json` after every change.
    pub fn new(config: Config, data_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            config,
            data_dir,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    fn next(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::Relaxed)
    }

    fn snapshot(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let map = self.sessions.lock().expect("sessions lock");
        map.get(id).cloned().ok_or_else(|| Error::NotFound(format!("session {id}")).into())
    }

    fn insert(&self, s: Session) -> Result<Arc<Session>, ApiError> {
        let s = Arc::new(s);
        self.persist(&s)?;
        self.sessions.lock().expect("sessions lock").insert(s.id.clone(), s.clone());
        Ok(s)
    }

    /// Applies an append to the current snapshot and publishes the result.
    fn commit(&self, id: &str, f: impl FnOnce(&mut Session) -> padres_core::Result<()>) -> Result<Arc<Session>, ApiError> {
        let mut map = self.sessions.lock().expect("sessions lock");
        let cur = map.get(id).ok_or_else(|| ApiError::from(Error::NotFound(format!("session {id}"))))?;
        let mut next = (**cur).clone();
        f(&mut next)?;
        let next = Arc::new(next);
        self.persist(&next)?;
        map.insert(id.to_string(), next.clone());
        Ok(next)
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        if let Some(dir) = &self.data_dir {
            s.save(&dir.join(format!("{}.json", s.id)))?;
        }
        Ok(())
    }

    /// Registers a job unless one for the same session and step is running.
    fn start_job(&self, session_id: &str, step: &'static str) -> Result<String, ApiError> {
        let mut jobs = self.jobs.lock().expect("jobs lock");
        if jobs.values().any(|j| j.session_id == session_id && j.step == step && j.status == JobStatus::Running) {
            return Err(ApiError::new(StatusCode::CONFLICT, &format!("a {step} job for session {session_id} is already running"), None));
        }
        let id = content_id("job", &format!("{session_id}|{step}|{}", self.next()));
        jobs.insert(id.clone(), Job { session_id: session_id.to_string(), step, status: JobStatus::Running });
        Ok(id)
    }

    fn finish_job(&self, id: &str, status: JobStatus) {
        if let Some(j) = self.jobs.lock().expect("jobs lock").get_mut(id) {
            j.status = status;
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hint: Option<&'a str>,
}

impl ApiError {
    fn new(status: StatusCode, message: &str, field: Option<&str>) -> Self {
        Self { status, body: to_json(&ErrorBody { error: message, field, hint: None }) }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::CrossingInWindow { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            e if e.is_validation() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &e {
            Error::Validation { field, .. } | Error::Parse { field, .. } => Some(field.as_str()),
            _ => None,
        };
        let message = e.to_string();
        Self { status, body: to_json(&ErrorBody { error: &message, field, hint: e.hint() }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, self.body)
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

type ApiResult = Result<Response, ApiError>;

/// JSON body; an empty body reads as `{}`.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| {
        let msg = e.to_string();
        let field = msg.split('`').nth(1).map(str::to_string);
        ApiError::new(StatusCode::BAD_REQUEST, &msg, field.as_deref())
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Upload {
    format: ImportFormat,
    content: String,
    #[serde(default)]
    name: Option<String>,
}

/// `{}` creates the benchmark model; `model`/`basis` override it; `upload` imports data.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    basis: Option<BasisSpec>,
    #[serde(default)]
    upload: Option<Upload>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: CreateSession = parse_body(&body)?;
    let salt = format!("{}|{}", app.next(), std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos()));
    let session = match req.upload {
        Some(up) => {
            if req.model.is_some() || req.basis.is_some() {
                return Err(Error::validation("upload", "give either an upload or a model, not both").into());
            }
            let imported = match up.format {
                ImportFormat::Csv => parse_csv(&up.content)?,
                ImportFormat::Json => parse_json(&up.content)?,
            };
            pipeline::import_session(imported, up.name.as_deref().unwrap_or("upload"), up.format, &salt)
        }
        None => {
            let model = req.model.unwrap_or_else(ModelSpec::benchmark);
            let basis = req.basis.unwrap_or_else(BasisSpec::benchmark);
            model.validate()?;
            basis.validate()?;
            Session::new(Source::Model { model, basis }, Default::default(), &salt)
        }
    };
    let s = app.insert(session)?;
    Ok(json_response(StatusCode::CREATED, s.to_json()))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    Ok(json_response(StatusCode::OK, app.snapshot(&id)?.to_json()))
}

#[derive(Serialize)]
struct Accepted<'a> {
    job_id: &'a str,
    status: &'a str,
}

fn accepted(job_id: &str) -> Response {
    json_response(StatusCode::ACCEPTED, to_json(&Accepted { job_id, status: "running" }))
}

/// Runs `work` on the blocking pool as a job; its JSON result becomes the job result.
fn spawn_job<F>(app: &Arc<AppState>, job_id: String, work: F)
where
    F: FnOnce() -> Result<String, ApiError> + Send + 'static,
{
    let app = app.clone();
    tokio::task::spawn_blocking(move || {
        let status = match work() {
            Ok(body) => JobStatus::Done(body),
            Err(e) => JobStatus::Failed(e.status.as_u16(), e.body),
        };
        app.finish_job(&job_id, status);
    });
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StabilizeBody {
    #[serde(default)]
    alpha: Option<GridSpec>,
}

async fn stabilize(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: StabilizeBody = parse_body(&body)?;
    let snap = app.snapshot(&id)?;
    let grid = req.alpha.unwrap_or(app.config.stabilize_alpha);
    grid.validate("alpha")?;
    if snap.stabilization.is_some() {
        // Cached, imported, or a conflicting grid: all answered without a job.
        let rec = pipeline::stabilize(&snap, &grid, &app.config)?;
        return Ok(json_response(StatusCode::OK, to_json(&rec)));
    }
    let job = app.start_job(&id, "stabilize")?;
    let worker = app.clone();
    spawn_job(&app, job.clone(), move || {
        let rec = pipeline::stabilize(&snap, &grid, &worker.config)?;
        worker.commit(&snap.id, |s| s.add_stabilization(rec.clone()))?;
        Ok(to_json(&rec))
    });
    Ok(accepted(&job))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowsBody {
    #[serde(default)]
    options: Option<WindowOptions>,
}

async fn windows(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: WindowsBody = parse_body(&body)?;
    let mut cfg = app.config.clone();
    if let Some(o) = req.options {
        cfg.windows = o;
    }
    let snap = app.snapshot(&id)?;
    let rec = pipeline::windows(&snap, &cfg)?;
    app.commit(&id, |s| s.add_windows(rec.clone()))?;
    Ok(json_response(StatusCode::OK, to_json(&rec)))
}

async fn fit(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: FitRequest = parse_body(&body)?;
    let snap = app.snapshot(&id)?;
    let rec = pipeline::fit(&snap, &req, &app.config)?;
    app.commit(&id, |s| s.add_fit(rec.clone()))?;
    Ok(json_response(StatusCode::OK, to_json(&rec)))
}

async fn trajectory(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: TrajectoryRequest = parse_body(&body)?;
    let snap = app.snapshot(&id)?;
    let rec = pipeline::trajectory(&snap, &req, &app.config)?;
    app.commit(&id, |s| s.add_trajectory(rec.clone()))?;
    Ok(json_response(StatusCode::OK, to_json(&rec)))
}

async fn stationary(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: StationaryRequest = parse_body(&body)?;
    let snap = app.snapshot(&id)?;
    let out = pipeline::stationary(&snap, &req, &app.config)?;
    app.commit(&id, |s| s.add_stationary(out.clone()))?;
    Ok(json_response(StatusCode::OK, to_json(&out)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CrosscheckBody {
    stationary_id: String,
}

async fn crosscheck(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: CrosscheckBody = parse_body(&body)?;
    let snap = app.snapshot(&id)?;
    let cfg = app.config.clone();
    let rec = tokio::task::spawn_blocking(move || pipeline::crosscheck(&snap, &req.stationary_id, &cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string(), None))??;
    app.commit(&id, |s| s.add_crosscheck(rec.clone()))?;
    Ok(json_response(StatusCode::OK, to_json(&rec)))
}

fn query_grid(q: &HashMap<String, String>, key: &str) -> Result<Option<GridSpec>, ApiError> {
    match q.get(key) {
        None => Ok(None),
        Some(v) => v.parse::<GridSpec>().map(Some).map_err(|e| match e {
            Error::Validation { message, .. } => Error::validation(key, message).into(),
            other => other.into(),
        }),
    }
}

/// `?alpha=start:stop:count&theta=start:stop:count&reference_energy=x`
async fn landscape(State(app): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    if let Some(k) = q.keys().find(|k| !matches!(k.as_str(), "alpha" | "theta" | "reference_energy")) {
        return Err(Error::validation(k.as_str(), "unknown query parameter").into());
    }
    let reference_energy = match q.get("reference_energy") {
        Some(v) => Some(v.parse::<f64>().map_err(|_| ApiError::from(Error::validation("reference_energy", "not a number")))?),
        None => None,
    };
    let req = LandscapeRequest { alpha: query_grid(&q, "alpha")?, theta: query_grid(&q, "theta")?, reference_energy };
    let snap = app.snapshot(&id)?;
    pipeline::hamiltonian(&snap)?;
    let job = app.start_job(&id, "landscape")?;
    let worker = app.clone();
    spawn_job(&app, job.clone(), move || {
        let rec = pipeline::landscape(&snap, &req, &worker.config)?;
        worker.commit(&snap.id, |s| s.add_landscape(rec.clone()))?;
        Ok(to_json(&rec))
    });
    Ok(accepted(&job))
}

#[derive(Serialize)]
struct JobView<'a> {
    id: &'a str,
    session_id: &'a str,
    step: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    http_status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a RawValue>,
}

async fn get_job(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let job = app.jobs.lock().expect("jobs lock").get(&id).cloned().ok_or_else(|| ApiError::from(Error::NotFound(format!("job {id}"))))?;
    let raw = |s: &String| serde_json::from_str::<&RawValue>(s).ok().map(|r| r.to_owned());
    let (status, http_status, result, error) = match &job.status {
        JobStatus::Running => ("running", None, None, None),
        JobStatus::Done(body) => ("done", None, raw(body), None),
        JobStatus::Failed(code, body) => ("failed", Some(*code), None, raw(body)),
    };
    let view = JobView {
        id: &id,
        session_id: &job.session_id,
        step: job.step,
        status,
        http_status,
        result: result.as_deref(),
        error: error.as_deref(),
    };
    Ok(json_response(StatusCode::OK, to_json(&view)))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/stabilize", post(stabilize))
        .route("/sessions/{id}/windows", post(windows))
        .route("/sessions/{id}/fit", post(fit))
        .route("/sessions/{id}/trajectory", post(trajectory))
        .route("/sessions/{id}/stationary", post(stationary))
        .route("/sessions/{id}/crosscheck", post(crosscheck))
        .route("/sessions/{id}/landscape", get(landscape))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
