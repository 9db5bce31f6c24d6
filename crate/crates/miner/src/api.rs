// SPDX-License-Identifier: Apache-2.0

//! HTTP interface of the session service.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use remark_core::ingest::load_dataset;
use remark_core::mining::{FeedbackCommand, MiningConfig};
use remark_core::rules::{break_even, evaluate, parse_ruleset, ObjectiveVector, OBJECTIVES};
use remark_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::numbers::round_json;
use crate::session::{Control, Session, SessionManager};

pub struct AppState {
    pub manager: SessionManager,
    /// Used by `POST /session` when the request names no dataset.
    pub default_dataset: Option<PathBuf>,
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {what} `{id}`"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Invalid(_) => StatusCode::BAD_REQUEST,
            Error::RuleParse { .. }
            | Error::DatasetFormat { .. }
            | Error::SchemaVersion { .. }
            | Error::NotTraced(_)
            | Error::Io { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

/// JSON body with floats rounded to six significant digits.
fn reply<T: Serialize>(status: StatusCode, body: &T) -> ApiResult {
    let value = serde_json::to_value(body)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((status, Json(round_json(value))).into_response())
}

fn ok<T: Serialize>(body: &T) -> ApiResult {
    reply(StatusCode::OK, body)
}

fn session(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    state.manager.get(id).ok_or_else(|| ApiError::not_found("session", id))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", post(create_session).get(list_sessions))
        .route("/session/{id}", get(session_info))
        .route("/session/{id}/start", post(start))
        .route("/session/{id}/pause", post(pause))
        .route("/session/{id}/stop", post(stop))
        .route("/session/{id}/pareto", get(pareto))
        .route("/session/{id}/ruleset/{rid}", get(ruleset))
        .route("/session/{id}/feedback", post(feedback))
        .route("/session/{id}/sample", get(sample))
        .route("/session/{id}/evaluate", post(evaluate_ruleset))
        .route("/session/{id}/baseline", get(baseline))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    dataset_path: Option<PathBuf>,
    seed: Option<u64>,
    config: Option<MiningConfig>,
}

async fn create_session(State(state): State<Shared>, body: Option<Json<CreateRequest>>) -> ApiResult {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let path = req
        .dataset_path
        .or_else(|| state.default_dataset.clone())
        .ok_or_else(|| ApiError::bad_request("dataset_path is required"))?;
    let mut config = req.config.unwrap_or_default();
    if let Some(seed) = req.seed {
        config.seed = seed;
    }
    let st = Arc::clone(&state);
    let session = blocking(move || st.manager.create(&path, config)).await??;
    reply(StatusCode::CREATED, &session.info())
}

async fn list_sessions(State(state): State<Shared>) -> ApiResult {
    ok(&state.manager.list())
}

async fn session_info(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    ok(&session(&state, &id)?.info())
}

async fn control(state: &AppState, id: &str, c: Control) -> ApiResult {
    let s = session(state, id)?;
    let st = s.control(c).await?;
    ok(&json!({ "session_id": s.id, "state": st }))
}

async fn start(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    control(&state, &id, Control::Start).await
}

async fn pause(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    control(&state, &id, Control::Pause).await
}

async fn stop(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult {
    control(&state, &id, Control::Stop).await
}

#[derive(Debug, Deserialize)]
struct ParetoQuery {
    x: Option<String>,
    y: Option<String>,
}

#[derive(Debug, Serialize)]
struct ParetoPoint {
    ruleset_id: String,
    x: f64,
    y: f64,
    nondominated_2d: bool,
}

fn objective(name: &str) -> Result<(usize, bool), ApiError> {
    OBJECTIVES
        .iter()
        .position(|(n, _)| *n == name)
        .map(|i| (i, OBJECTIVES[i].1))
        .ok_or_else(|| ApiError::bad_request(format!("unknown objective `{name}`")))
}

/// `a` is at least as good as `b` in both projected objectives and better in one.
fn dominates_2d(a: (f64, f64), b: (f64, f64), max: (bool, bool)) -> bool {
    let better = |x: f64, y: f64, m: bool| if m { x > y } else { x < y };
    let worse = |x: f64, y: f64, m: bool| if m { x < y } else { x > y };
    !worse(a.0, b.0, max.0)
        && !worse(a.1, b.1, max.1)
        && (better(a.0, b.0, max.0) || better(a.1, b.1, max.1))
}

async fn pareto(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<ParetoQuery>) -> ApiResult {
    let s = session(&state, &id)?;
    let (xi, xmax) = objective(q.x.as_deref().unwrap_or("saved_records_trimmed_mean"))?;
    let (yi, ymax) = objective(q.y.as_deref().unwrap_or("missed_remark_log"))?;
    let snapshot = s.published().snapshot;
    let coords: Vec<(f64, f64)> = snapshot
        .entries
        .iter()
        .map(|e| {
            let a = e.objectives.to_array();
            (a[xi], a[yi])
        })
        .collect();
    let mut points: Vec<ParetoPoint> = snapshot
        .entries
        .iter()
        .zip(&coords)
        .map(|(e, &p)| ParetoPoint {
            ruleset_id: e.id.clone(),
            x: p.0,
            y: p.1,
            nondominated_2d: !coords.iter().any(|&o| dominates_2d(o, p, (xmax, ymax))),
        })
        .collect();
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    ok(&json!({
        "generation": snapshot.generation,
        "x": OBJECTIVES[xi].0,
        "y": OBJECTIVES[yi].0,
        "points": points,
    }))
}

async fn ruleset(State(state): State<Shared>, Path((id, rid)): Path<(String, String)>) -> ApiResult {
    let s = session(&state, &id)?;
    let p = s.published();
    let entry = p
        .snapshot
        .entries
        .iter()
        .find(|e| e.id == rid)
        .ok_or_else(|| ApiError::not_found("ruleset", &rid))?;
    ok(&json!({
        "ruleset_id": entry.id,
        "text": entry.ruleset.to_text(),
        "objectives": entry.objectives,
        "break_even": break_even(&entry.objectives, p.tickets),
        "tickets": p.tickets,
    }))
}

async fn feedback(State(state): State<Shared>, Path(id): Path<String>, Json(mut body): Json<Value>) -> ApiResult {
    let s = session(&state, &id)?;
    let client_id = match body.as_object_mut().and_then(|m| m.remove("id")) {
        None | Some(Value::Null) => None,
        Some(Value::String(v)) => Some(v),
        Some(other) => Some(other.to_string()),
    };
    let command: FeedbackCommand =
        serde_json::from_value(body).map_err(|e| ApiError::bad_request(format!("bad feedback command: {e}")))?;
    let mut acks = s.acks.lock().await;
    if let Some(previous) = client_id.as_ref().and_then(|c| acks.get(c)) {
        let mut previous = previous.clone();
        previous["duplicate"] = Value::Bool(true);
        return ok(&previous);
    }
    let ack = s.feedback(command).await?;
    let body = json!({
        "ack": true,
        "archive_delta": ack.archive_delta,
        "generation": ack.generation,
        "duplicate": false,
    });
    if let Some(c) = client_id {
        acks.insert(c, body.clone());
    }
    ok(&body)
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    ruleset: String,
    n: Option<usize>,
}

async fn sample(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<SampleQuery>) -> ApiResult {
    let s = session(&state, &id)?;
    let rs = s
        .published()
        .snapshot
        .entries
        .iter()
        .find(|e| e.id == q.ruleset)
        .map(|e| e.ruleset.clone())
        .ok_or_else(|| ApiError::not_found("ruleset", &q.ruleset))?;
    let records = s.sample(rs, q.n.unwrap_or(10)).await?;
    ok(&json!({ "ruleset_id": q.ruleset, "records": records }))
}

#[derive(Debug, Deserialize)]
struct EvaluateRequest {
    ruleset_text: String,
    dataset_path: Option<PathBuf>,
}

fn evaluation(objectives: &ObjectiveVector, tickets: usize) -> Value {
    json!({
        "objectives": objectives,
        "break_even": break_even(objectives, tickets),
        "tickets": tickets,
    })
}

async fn evaluate_ruleset(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<EvaluateRequest>,
) -> ApiResult {
    let s = session(&state, &id)?;
    let rs = parse_ruleset(&req.ruleset_text)?;
    match req.dataset_path {
        None => {
            let e = s.evaluate(&req.ruleset_text).await?;
            ok(&evaluation(&e.objectives, e.tickets))
        }
        Some(path) => {
            let full = state.manager.resolve(&path);
            let ext = s.java_ext.clone();
            let (ov, tickets) = blocking(move || -> remark_core::Result<_> {
                let ds = load_dataset(&full)?;
                Ok((evaluate(&rs, &ds, &ext)?, ds.tickets.len()))
            })
            .await??;
            ok(&evaluation(&ov, tickets))
        }
    }
}

#[derive(Debug, Deserialize)]
struct BaselineQuery {
    share: f64,
    seeds: Option<usize>,
}

async fn baseline(State(state): State<Shared>, Path(id): Path<String>, Query(q): Query<BaselineQuery>) -> ApiResult {
    let s = session(&state, &id)?;
    let seeds = q.seeds.unwrap_or(100);
    let ov = s.baseline(q.share, seeds).await?;
    ok(&json!({ "share": q.share, "seeds": seeds, "objectives": ov }))
}
