//! HTTP routes over [`SessionService`].
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/sessions` | create a session, returns participant URLs |
//! | GET | `/api/sessions/{id}` | session state and slot progress |
//! | POST | `/api/sessions/{id}/upload[?slot=N]` | file-based log submission |
//! | GET | `/api/sessions/{id}/analysis?window=…` | analysis report |
//! | GET | `/a/{token}` | dashboard page for one participant |
//! | GET | `/api/annotator/{token}` | slot settings and resume point |
//! | POST | `/api/annotator/{token}/identity` | `{"participant_id": "…"}` |
//! | POST | `/api/annotator/{token}/annotations` | `{"offset": n, "annotations": […]}` batch |
//! | POST | `/api/annotator/{token}/complete` | seal and download the log |
//! | GET | `/api/annotator/{token}/log` | current log |
//! | GET | `/media/{id}` | media file, with range requests |
//!
//! Errors are JSON: `{"error": "<code>", "message": "…"}`, plus
//! `violations` for rejected records and `ack` for stale batches.

use std::net::SocketAddr;
use std::path::Path as FsPath;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corae_core::analysis::{AnalysisError, DetectorOverrides};
use corae_core::LogError;
use serde::Deserialize;
use serde_json::{json, Value};
use tower::ServiceExt;
use tower_http::services::{ServeDir, ServeFile};

use crate::config::ServiceConfig;
use crate::service::{CreateSession, ServiceError, SessionService};
use crate::store::{FileStore, StoreError};

pub const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn error_code(e: &ServiceError) -> (StatusCode, &'static str) {
    use ServiceError as E;
    match e {
        E::UnknownToken => (StatusCode::FORBIDDEN, "unknown_token"),
        E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
        E::SessionSealed => (StatusCode::CONFLICT, "session_sealed"),
        E::SlotCompleted => (StatusCode::CONFLICT, "slot_completed"),
        E::IdentifierRequired => (StatusCode::CONFLICT, "identifier_required"),
        E::IdentifierConflict(_) => (StatusCode::CONFLICT, "identifier_conflict"),
        E::InvalidIdentifier(_) => (StatusCode::BAD_REQUEST, "invalid_identifier"),
        E::Stale(_) => (StatusCode::CONFLICT, "stale_batch"),
        E::BeyondMedia { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "beyond_media"),
        E::EmptyLog => (StatusCode::UNPROCESSABLE_ENTITY, "empty_log"),
        E::NotSealed => (StatusCode::CONFLICT, "not_sealed"),
        E::TooFewLogs(_) => (StatusCode::CONFLICT, "too_few_logs"),
        E::NoFreeSlot => (StatusCode::CONFLICT, "no_free_slot"),
        E::SlotOccupied(_) => (StatusCode::CONFLICT, "slot_occupied"),
        E::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        E::Media(_) => (StatusCode::BAD_REQUEST, "media"),
        E::Log(LogError::Invalid(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_records"),
        E::Log(_) => (StatusCode::BAD_REQUEST, "malformed_log"),
        E::Analysis(AnalysisError::InvalidConfig(_)) => (StatusCode::BAD_REQUEST, "invalid_config"),
        E::Analysis(_) => (StatusCode::UNPROCESSABLE_ENTITY, "analysis"),
        E::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = error_code(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let mut body = json!({ "error": code, "message": self.0.to_string() });
        match &self.0 {
            ServiceError::Log(e @ LogError::Invalid(_)) => {
                body["violations"] = e
                    .violations()
                    .iter()
                    .map(|v| json!({ "index": v.index(), "message": v.to_string() }))
                    .collect::<Value>();
            }
            ServiceError::BeyondMedia { index, .. } => {
                body["violations"] = json!([{ "index": index, "message": self.0.to_string() }]);
            }
            ServiceError::Stale(ack) => body["ack"] = json!(ack),
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(service: &Arc<SessionService>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionService) -> Result<T, ServiceError> + Send + 'static,
{
    let service = Arc::clone(service);
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(ServiceError::InvalidRequest(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::InvalidRequest(e.to_string())))
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

type AppState = State<Arc<SessionService>>;

async fn create_session(State(s): AppState, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_json(&body)?;
    let created = blocking(&s, move |s| s.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn session_status(State(s): AppState, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.status(&id)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadQuery {
    slot: Option<usize>,
}

async fn upload(
    State(s): AppState,
    Path(id): Path<String>,
    query: Result<Query<UploadQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError(ServiceError::InvalidRequest(e.body_text())))?;
    let receipt = blocking(&s, move |s| s.upload(&id, &body, q.slot)).await?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn analysis(
    State(s): AppState,
    Path(id): Path<String>,
    query: Result<Query<DetectorOverrides>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(overrides) = query.map_err(|e| ApiError(ServiceError::InvalidRequest(e.body_text())))?;
    let bytes = blocking(&s, move |s| {
        let cfg = overrides.apply(&s.defaults().detector);
        s.analysis(&id, &cfg)
    })
    .await?;
    Ok(json_bytes(bytes.as_ref().clone()))
}

async fn annotator_info(State(s): AppState, Path(token): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.annotator_info(&token)?).into_response())
}

#[derive(Deserialize)]
struct IdentityRequest {
    participant_id: String,
}

async fn identity(State(s): AppState, Path(token): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: IdentityRequest = parse_json(&body)?;
    let info = blocking(&s, move |s| s.register_identifier(&token, &req.participant_id)).await?;
    Ok(Json(info).into_response())
}

async fn annotations(State(s): AppState, Path(token): Path<String>, body: Bytes) -> ApiResult<Response> {
    let ack = blocking(&s, move |s| s.append_json(&token, &body)).await?;
    Ok(Json(ack).into_response())
}

fn log_download(bytes: Vec<u8>) -> Response {
    let mut resp = json_bytes(bytes);
    resp.headers_mut().insert(
        header::CONTENT_DISPOSITION,
        HeaderValue::from_static("attachment; filename=\"annotation-log.json\""),
    );
    resp
}

async fn complete(State(s): AppState, Path(token): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(&s, move |s| s.complete(&token)).await?;
    Ok(log_download(bytes))
}

async fn log(State(s): AppState, Path(token): Path<String>) -> ApiResult<Response> {
    Ok(log_download(s.log_bytes(&token)?))
}

async fn media(State(s): AppState, Path(id): Path<String>, req: Request) -> Response {
    let Some(path) = s.media_path(&id) else {
        return (StatusCode::NOT_FOUND, Json(json!({ "error": "unknown_media", "message": format!("unknown media {id}") })))
            .into_response();
    };
    match ServeFile::new(path).oneshot(req).await {
        Ok(resp) => resp.into_response(),
        Err(never) => match never {},
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn page(status: StatusCode, title: &str, body: &str) -> Response {
    let html = format!(
        "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n\
         <title>{title}</title>\n<link rel=\"stylesheet\" href=\"/static/dashboard.css\">\n\
         </head>\n<body>\n{body}\n</body>\n</html>\n"
    );
    let mut resp = (status, Html(html)).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    headers.insert(header::REFERRER_POLICY, HeaderValue::from_static("no-referrer"));
    resp
}

/// Shell page for the annotation dashboard. The page state is one of
/// `identify`, `annotate` or `completed`; the client bundle under
/// `/static/` renders the interactive parts.
async fn dashboard_page(State(s): AppState, Path(token): Path<String>) -> Response {
    let info = match s.annotator_info(&token) {
        Ok(info) => info,
        Err(_) => {
            return page(
                StatusCode::FORBIDDEN,
                "Invalid link",
                "<main><h1>This annotation link is not valid.</h1></main>",
            )
        }
    };
    let state = match (&info.participant_id, info.completed) {
        (_, true) => "completed",
        (None, false) => "identify",
        (Some(_), false) => "annotate",
    };
    let config = json!({
        "token": token,
        "api": format!("/api/annotator/{token}"),
        "state": state,
        "info": info,
    });
    // No raw `<` inside the script block, so user text cannot close it.
    let config = config.to_string().replace('<', "\\u003c");
    let content = match state {
        "identify" => "<form id=\"identify\">\n<label for=\"participant-id\">Enter your participant identifier</label>\n\
             <input id=\"participant-id\" name=\"participant_id\" required maxlength=\"128\">\n\
             <button type=\"submit\">Continue</button>\n</form>"
            .to_owned(),
        "completed" => format!(
            "<p>Annotation completed for {}. This page is read-only.</p>\n\
             <p><a href=\"/api/annotator/{token}/log\" download>Download annotation file</a></p>",
            escape_html(info.participant_id.as_deref().unwrap_or(""))
        ),
        _ => format!(
            "<video id=\"media\" src=\"{}\" preload=\"auto\"></video>\n<div id=\"slider\"></div>",
            info.media_url
        ),
    };
    let body = format!(
        "<main id=\"corae\" data-state=\"{state}\">\n{content}\n</main>\n\
         <script id=\"corae-config\" type=\"application/json\">{config}</script>\n\
         <script type=\"module\" src=\"/static/dashboard.js\"></script>"
    );
    page(StatusCode::OK, "Annotation", &body)
}

pub fn router(service: Arc<SessionService>, static_dir: Option<&FsPath>) -> Router {
    let mut app = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(session_status))
        .route("/api/sessions/{id}/upload", post(upload))
        .route("/api/sessions/{id}/analysis", get(analysis))
        .route("/a/{token}", get(dashboard_page))
        .route("/api/annotator/{token}", get(annotator_info))
        .route("/api/annotator/{token}/identity", post(identity))
        .route("/api/annotator/{token}/annotations", post(annotations))
        .route("/api/annotator/{token}/complete", post(complete))
        .route("/api/annotator/{token}/log", get(log))
        .route("/media/{id}", get(media))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service);
    if let Some(dir) = static_dir {
        app = app.nest_service("/static", ServeDir::new(dir));
    }
    app
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A bound listener plus the app; [`Server::local_addr`] is known before
/// [`Server::run`] starts accepting.
pub struct Server {
    listener: tokio::net::TcpListener,
    app: Router,
}

impl Server {
    pub async fn bind(config: &ServiceConfig) -> Result<Self, ServeError> {
        let store = FileStore::open(&config.data_dir)?;
        let service = Arc::new(SessionService::open(Box::new(store), config.defaults())?);
        let app = router(service, config.static_dir.as_deref());
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .map_err(|source| ServeError::Bind { addr: config.listen, source })?;
        Ok(Server { listener, app })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until Ctrl-C.
    pub async fn run(self) -> Result<(), ServeError> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    }
}
