//! JSON API for the operator console, mounted under `/api/v1`.
//! Timestamps are RFC 3339 in UTC. Errors come back as
//! `{"error": <kind>, "message": <text>}` with a matching status code.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Supervisor, SupervisorError};

pub struct ApiError(SupervisorError);

impl From<SupervisorError> for ApiError {
    fn from(e: SupervisorError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use SupervisorError as E;
        let (status, kind) = match &self.0 {
            E::DayOutOfRange(_) => (StatusCode::UNPROCESSABLE_ENTITY, "day_out_of_range"),
            E::NoActiveFlock(_) => (StatusCode::CONFLICT, "no_active_flock"),
            E::StaleDay { .. } => (StatusCode::CONFLICT, "stale_day"),
            E::UnknownHouse(_) | E::UnknownJob(_) | E::UnknownFlock(_) => {
                (StatusCode::NOT_FOUND, "not_found")
            }
            E::NoPlan => (StatusCode::NOT_FOUND, "no_plan"),
            E::JobNotReady(_) => (StatusCode::CONFLICT, "job_not_ready"),
            E::Invalid(_) | E::Payload(_) => (StatusCode::BAD_REQUEST, "invalid"),
            E::Link(_) => (StatusCode::BAD_GATEWAY, "link"),
            E::Planner(_) | E::Dataset(_) | E::Surrogate(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "model")
            }
            E::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store"),
        };
        (
            status,
            Json(json!({ "error": kind, "message": self.0.to_string() })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Sup = State<Arc<Supervisor>>;

pub fn router(sup: Arc<Supervisor>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/houses", get(houses))
        .route("/houses/{addr}/telemetry", get(telemetry))
        .route("/houses/{addr}/mortality", post(mortality))
        .route("/plan/current", get(current_plan))
        .route("/plan/optimize", post(optimize))
        .route("/plan/approve", post(approve))
        .route("/jobs", get(jobs))
        .route("/jobs/{id}", get(job))
        .route("/alarms", get(alarms))
        .route("/alarms/{id}/ack", post(ack_alarm))
        .route("/flocks/{id}/report", get(flock_report))
        .route("/models", get(models))
        .with_state(sup);
    Router::new().nest("/api/v1", api)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    sup: Arc<Supervisor>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(sup))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn health(State(s): Sup) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "time": Utc::now(),
        "model_version": s.models().version,
        "houses": s.config().houses,
    }))
}

async fn houses(State(s): Sup) -> Json<Vec<super::HouseSummary>> {
    Json(s.houses())
}

#[derive(Debug, Deserialize)]
pub struct Window {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

async fn telemetry(
    State(s): Sup,
    Path(addr): Path<u8>,
    Query(w): Query<Window>,
) -> ApiResult<Vec<super::TelemetryView>> {
    Ok(Json(s.telemetry(addr, w.from, w.to)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MortalityRequest {
    pub day: u32,
    pub count: u32,
    pub operator: String,
}

async fn mortality(
    State(s): Sup,
    Path(addr): Path<u8>,
    Json(r): Json<MortalityRequest>,
) -> ApiResult<super::MortalityAck> {
    if r.operator.trim().is_empty() {
        return Err(SupervisorError::Invalid("operator is required".into()).into());
    }
    Ok(Json(
        s.record_mortality(addr, r.day, r.count, &r.operator)
            .await?,
    ))
}

async fn current_plan(State(s): Sup) -> ApiResult<super::PlanRecord> {
    Ok(Json(s.current_plan().ok_or(SupervisorError::NoPlan)?))
}

/// Optional overrides of the configured search settings.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct OptimizeRequest {
    pub pop_size: Option<usize>,
    pub max_iterations: Option<usize>,
    pub stall_generations: Option<usize>,
    pub seed: Option<u64>,
    pub time_limit_s: Option<f64>,
}

async fn optimize(
    State(s): Sup,
    body: Bytes,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let req: OptimizeRequest = if body.iter().all(u8::is_ascii_whitespace) {
        OptimizeRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| SupervisorError::Invalid(e.to_string()))?
    };
    let mut ga = s.config().ga.clone();
    ga.pop_size = req.pop_size.unwrap_or(ga.pop_size);
    ga.max_iterations = req.max_iterations.unwrap_or(ga.max_iterations);
    ga.stall_generations = req.stall_generations.unwrap_or(ga.stall_generations);
    ga.seed = req.seed.unwrap_or(ga.seed);
    ga.time_limit_s = req.time_limit_s.or(ga.time_limit_s);
    let id = s.start_optimize(Some(ga))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApproveRequest {
    pub job_id: u64,
    pub operator: Option<String>,
}

async fn approve(State(s): Sup, Json(r): Json<ApproveRequest>) -> ApiResult<serde_json::Value> {
    let actor = r.operator.unwrap_or_else(|| "console".into());
    let (record, sent) = s.approve(r.job_id, &actor).await?;
    Ok(Json(json!({ "plan": record, "distributions": sent })))
}

async fn jobs(State(s): Sup) -> Json<Vec<super::Job>> {
    Json(s.jobs())
}

async fn job(State(s): Sup, Path(id): Path<u64>) -> ApiResult<super::Job> {
    Ok(Json(s.job(id)?))
}

async fn alarms(State(s): Sup) -> Json<Vec<super::AlarmEvent>> {
    Json(s.alarms())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AckRequest {
    pub operator: String,
}

async fn ack_alarm(
    State(s): Sup,
    Path(id): Path<u64>,
    Json(r): Json<AckRequest>,
) -> ApiResult<super::AlarmEvent> {
    Ok(Json(s.acknowledge_alarm(id, &r.operator)?))
}

async fn flock_report(State(s): Sup, Path(id): Path<u32>) -> ApiResult<super::FlockReport> {
    Ok(Json(s.flock_report(id)?))
}

async fn models(State(s): Sup) -> Json<super::ModelSet> {
    Json((*s.models()).clone())
}
