//! JSON over HTTP.
//!
//! | method | path                         | body            |
//! |--------|------------------------------|-----------------|
//! | POST   | `/sessions`                  | `SessionParams` |
//! | GET    | `/sessions/{id}/state`       |                 |
//! | POST   | `/sessions/{id}/decisions`   | `{units, day?}` |
//! | GET    | `/sessions/{id}/report`      |                 |
//! | GET    | `/sessions/{id}/trace.csv`   |                 |

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{Bulletin, FinalReport, ServiceError, SessionParams, SessionStore, SubmitOutcome};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub units: u32,
    #[serde(default)]
    pub day: Option<u32>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_)
            | ServiceError::InsufficientUnits { .. }
            | ServiceError::NotCompleted => StatusCode::CONFLICT,
            ServiceError::Invalid(_) => StatusCode::BAD_REQUEST,
            ServiceError::Decision(_) | ServiceError::Log { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (
            status,
            Json(ErrorBody {
                error: self.to_string(),
            }),
        )
            .into_response()
    }
}

type Shared = Arc<SessionStore>;

async fn create(
    State(store): State<Shared>,
    body: Option<Json<SessionParams>>,
) -> Result<(StatusCode, Json<Bulletin>), ServiceError> {
    let params = body.map(|Json(p)| p).unwrap_or_default();
    Ok((StatusCode::CREATED, Json(store.create_session(&params)?)))
}

async fn state(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Bulletin>, ServiceError> {
    Ok(Json(store.get_state(&id)?))
}

async fn decide(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<DecisionRequest>,
) -> Result<Json<SubmitOutcome>, ServiceError> {
    Ok(Json(store.submit_decision(&id, req.day, req.units)?))
}

async fn report(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<FinalReport>, ServiceError> {
    Ok(Json(store.report(&id)?))
}

async fn trace(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let csv = store.trace_csv(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/decisions", post(decide))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/trace.csv", get(trace))
        .with_state(store)
}

/// Serves the API on `addr` until ctrl-c.
pub async fn serve(store: Shared, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
