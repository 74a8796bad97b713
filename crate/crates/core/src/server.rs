//! JSON-over-HTTP front end for [`ReviewService`].
//!
//! | method | path                   | body                               | reply              |
//! |--------|------------------------|------------------------------------|--------------------|
//! | POST   | `/runs`                | `{dataset_id, columns, strategy?}` | run                |
//! | GET    | `/runs/{id}`           |                                    | run                |
//! | GET    | `/runs/{id}/pending`   |                                    | items, weakest first |
//! | POST   | `/items/{id}/decision` | `{action:"accept"}` or `{action:"override", entry_id}` | item |
//! | POST   | `/retrain`             | optional `{run_id}`                | `{version, n_records}` |
//! | GET    | `/schema`              |                                    | standard schema    |
//!
//! Errors come back as `{code, message, field?}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::crosswalk::Strategy;
use crate::model::ColumnMeta;
use crate::review::{Action, ErrorKind, ReviewService, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn status_of(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Precondition => StatusCode::PRECONDITION_FAILED,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.0.kind.code().to_string(),
            message: self.0.message,
            field: self.0.field,
        };
        (status_of(self.0.kind), Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SubmitRequest {
    pub dataset_id: String,
    pub columns: Vec<ColumnMeta>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RetrainRequest {
    #[serde(default)]
    pub run_id: Option<String>,
}

/// Parses a JSON body, reporting the path of the offending field.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let err = ServiceError::new(ErrorKind::BadRequest, e.into_inner().to_string());
        ApiError(if path == "." { err } else { err.at(path) })
    })
}

type Shared = Arc<ReviewService>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::new(ErrorKind::Internal, e.to_string())))?
        .map_err(ApiError)
}

async fn submit(State(svc): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: SubmitRequest = parse_body(&body)?;
    let run = blocking(move || svc.submit(&req.dataset_id, req.columns, req.strategy)).await?;
    Ok((StatusCode::CREATED, Json(run)))
}

async fn run(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(svc.run(&id)?))
}

async fn pending(
    State(svc): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(svc.pending(&id)?))
}

async fn decide(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let action: Action = parse_body(&body)?;
    let item = blocking(move || svc.decide(&id, &action)).await?;
    Ok(Json(item))
}

async fn retrain(State(svc): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: RetrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RetrainRequest::default()
    } else {
        parse_body(&body)?
    };
    let info = blocking(move || svc.retrain(req.run_id.as_deref())).await?;
    Ok(Json(info))
}

async fn schema(State(svc): State<Shared>) -> impl IntoResponse {
    Json(svc.schema().clone())
}

async fn fallback() -> ApiError {
    ApiError(ServiceError::new(ErrorKind::NotFound, "no such route"))
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/runs", post(submit))
        .route("/runs/{id}", get(run))
        .route("/runs/{id}/pending", get(pending))
        .route("/items/{id}/decision", post(decide))
        .route("/retrain", post(retrain))
        .route("/schema", get(schema))
        .fallback(fallback)
        .with_state(service)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, service: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
