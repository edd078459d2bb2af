//! HTTP/JSON front of the study service.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::{ServeDir, ServeFile};

use crate::service::model::{Answer, StudySpec};
use crate::service::{ExportFormat, ServiceError, StudyService};

/// Error body returned for every failed request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ApiErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        ApiError {
            status,
            body: ApiErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail,
            },
        }
    }
}

fn status_of(e: &ServiceError) -> StatusCode {
    use ServiceError::*;
    match e {
        UnknownStudy(_) | UnknownToken => StatusCode::NOT_FOUND,
        InvalidTransition { .. } | StudyNotRunning | StudyNotClosed | SessionVoid(_)
        | PhaseMismatch(_) => StatusCode::CONFLICT,
        Ingest(_) | Elicitation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        InvalidSpec(_) | UnknownQuestion(_) | InvalidAnswer { .. } | IncompleteAnswers(_) => {
            StatusCode::BAD_REQUEST
        }
        StudyDataUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn detail_of(e: &ServiceError) -> Value {
    use ServiceError::*;
    match e {
        UnknownStudy(id) => json!({ "study_id": id }),
        InvalidTransition { from, action } => json!({ "status": from, "action": action }),
        SessionVoid(reason) => json!({ "void_reason": reason }),
        PhaseMismatch(state) => json!({ "state": state }),
        UnknownQuestion(q) => json!({ "question_id": q }),
        InvalidAnswer { question, reason } => json!({ "question_id": question, "reason": reason }),
        IncompleteAnswers(missing) => json!({ "missing": missing }),
        Ingest(err) => json!({ "source": err.to_string() }),
        _ => Value::Null,
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = status_of(&e);
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, e.code(), e.to_string(), detail_of(&e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<StudyService>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_json",
            format!("request body is not valid: {e}"),
            json!({ "line": e.line(), "column": e.column() }),
        )
    })
}

/// Runs a service call off the async executor.
async fn blocking<T, F>(service: Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&StudyService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| {
            ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                format!("worker failed: {e}"),
                Value::Null,
            )
        })?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct AnswersBody {
    answers: Vec<Answer>,
}

#[derive(Deserialize)]
struct ResultsQuery {
    format: Option<String>,
}

async fn create_study(State(svc): State<Shared>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let spec: StudySpec = parse_body(&body)?;
    let created = blocking(svc, move |s| s.create_study(spec)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_studies(State(svc): State<Shared>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, |s| Ok(s.list_studies())).await?))
}

async fn study_status(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |s| s.study_status(&id)).await?))
}

async fn start_study(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |s| s.start_study(&id)).await?))
}

async fn close_study(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let status = blocking(svc, move |s| s.close_study(&id)).await?;
    Ok(Json(json!({ "status": status })))
}

async fn results(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ResultsQuery>,
) -> ApiResult<Response> {
    let format = match q.format.as_deref() {
        None | Some("json") => ExportFormat::Json,
        Some("csv") => ExportFormat::Csv,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_format",
                format!("format must be json or csv, got '{other}'"),
                Value::Null,
            ))
        }
    };
    let body = blocking(svc, move |s| s.export_results(&id, format)).await?;
    let content_type = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Csv => "text/csv; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

async fn questionnaire(State(svc): State<Shared>, Path(token): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |s| s.get_questionnaire(&token)).await?))
}

async fn submit_initial(
    State(svc): State<Shared>,
    Path(token): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let AnswersBody { answers } = parse_body(&body)?;
    Ok(Json(blocking(svc, move |s| s.submit_initial(&token, answers)).await?))
}

async fn submit_final(
    State(svc): State<Shared>,
    Path(token): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let AnswersBody { answers } = parse_body(&body)?;
    Ok(Json(blocking(svc, move |s| s.submit_final(&token, answers)).await?))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", Value::Null)
}

/// The API routes, plus the static single-page app when `static_dir` is set.
/// Unknown non-API paths fall back to `index.html` so client-side routes
/// such as `/participate/{token}` load the app.
pub fn router(service: Arc<StudyService>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/studies", post(create_study).get(list_studies))
        .route("/studies/{id}", get(study_status))
        .route("/studies/{id}/start", post(start_study))
        .route("/studies/{id}/close", post(close_study))
        .route("/studies/{id}/results", get(results))
        .route("/sessions/{token}/questionnaire", get(questionnaire))
        .route("/sessions/{token}/initial", post(submit_initial))
        .route("/sessions/{token}/final", post(submit_final))
        .fallback(api_not_found)
        .with_state(service);
    let app = Router::new().nest("/api", api);
    match static_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => app,
    }
}

/// Serves `router` on `listener` until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
