use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use crate::session::{Mode, Session, SessionError};

pub type SharedSession = Arc<RwLock<Session>>;

/// An HTTP status with a `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::BAD_REQUEST,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Deserialize)]
struct StreamParams {
    since: Option<i64>,
    limit: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendBody {
    min_fraction: Option<f64>,
    min_length: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EngageBody {
    user_id: String,
    question: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeBody {
    mode: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TickBody {
    seconds: i64,
}

#[derive(Serialize)]
struct ModeReply {
    mode: Mode,
    previous: Mode,
    at: i64,
}

async fn stream(
    State(s): State<SharedSession>,
    q: Result<Query<StreamParams>, QueryRejection>,
) -> ApiResult<crate::session::StreamPage> {
    let Query(q) = q?;
    Ok(Json(s.read().await.stream(q.since, q.limit)?))
}

async fn candidates(State(s): State<SharedSession>) -> ApiResult<crate::session::CandidateView> {
    Ok(Json(s.read().await.candidates()))
}

async fn user(State(s): State<SharedSession>, Path(id): Path<String>) -> ApiResult<crate::session::UserProfile> {
    Ok(Json(s.read().await.user(&id)?))
}

async fn recommend(
    State(s): State<SharedSession>,
    body: Result<Json<RecommendBody>, JsonRejection>,
) -> ApiResult<crate::session::Recommendation> {
    let Json(b) = body?;
    Ok(Json(s.write().await.recommend(b.min_fraction, b.min_length)?))
}

async fn engage(
    State(s): State<SharedSession>,
    body: Result<Json<EngageBody>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::session::Engagement>), ApiError> {
    let Json(b) = body?;
    let e = s.write().await.engage(&b.user_id, &b.question)?;
    Ok((StatusCode::CREATED, Json(e)))
}

async fn engagements(State(s): State<SharedSession>) -> Json<serde_json::Value> {
    let s = s.read().await;
    Json(json!({ "clock": s.clock(), "engagements": s.engagements() }))
}

async fn mode(State(s): State<SharedSession>, body: Result<Json<ModeBody>, JsonRejection>) -> ApiResult<ModeReply> {
    let Json(b) = body?;
    let m: Mode = b.mode.parse()?;
    let change = s.write().await.set_mode(m);
    Ok(Json(ModeReply {
        mode: change.to,
        previous: change.from,
        at: change.at,
    }))
}

async fn tick(
    State(s): State<SharedSession>,
    body: Result<Json<TickBody>, JsonRejection>,
) -> ApiResult<crate::session::TickReport> {
    let Json(b) = body?;
    Ok(Json(s.write().await.tick(b.seconds)?))
}

async fn report(State(s): State<SharedSession>) -> Json<crate::session::Report> {
    Json(s.read().await.report())
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such endpoint".into())
}

async fn method_not_allowed() -> ApiError {
    ApiError(StatusCode::METHOD_NOT_ALLOWED, "method not allowed".into())
}

pub fn router(state: SharedSession) -> Router {
    Router::new()
        .route("/api/stream", get(stream))
        .route("/api/candidates", get(candidates))
        .route("/api/users/{id}", get(user))
        .route("/api/recommend", post(recommend))
        .route("/api/engage", post(engage))
        .route("/api/engagements", get(engagements))
        .route("/api/mode", post(mode))
        .route("/api/tick", post(tick))
        .route("/api/report", get(report))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}
