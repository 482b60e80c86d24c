//! HTTP/JSON API over a [`Workspace`].
//!
//! | route            | method | body / query                          |
//! |------------------|--------|---------------------------------------|
//! | `/api/tables`    | GET    |                                       |
//! | `/api/graph`     | GET    | `?links=id1,id2` restricts the links  |
//! | `/api/plan`      | POST   | `{"targets": [...], "max_depth": n}`  |
//! | `/api/query`     | POST   | [`QueryRequest`]                      |
//!
//! Errors are `{"code", "message", "detail"}` objects. Every handler is a pure
//! function of the loaded workspace and the request.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use denorm_core::{
    plan, ColumnClass, ColumnType, Error, PathCache, PlanDiagnostics, PlanResult, QueryRequest,
    Workspace,
};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::{ServeDir, ServeFile};

pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Planning deadline per request. Expiry answers 504 with partial diagnostics.
    pub request_timeout: Duration,
    /// Allowed browser origins for development; `*` allows any. Empty disables CORS.
    pub cors_origins: Vec<String>,
    /// Built UI assets served for every non-API path.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            request_timeout: DEFAULT_REQUEST_TIMEOUT,
            cors_origins: Vec::new(),
            static_dir: None,
        }
    }
}

#[derive(Clone)]
struct AppState {
    workspace: Option<Arc<Workspace>>,
    timeout: Duration,
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub detail: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_owned(),
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }

    fn not_loaded() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "BackendUnavailable",
            "no catalog has been loaded",
        )
    }

    fn timeout(diagnostics: Option<&PlanDiagnostics>) -> Self {
        let mut e = Self::from(Error::Timeout);
        if let Some(d) = diagnostics {
            e.detail = serde_json::to_value(d).unwrap_or_default();
        }
        e
    }
}

/// HTTP status for an engine error.
pub fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::NoJoinPath(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Timeout => StatusCode::GATEWAY_TIMEOUT,
        Error::BackendUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        e if e.is_request_error() => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::new(status_for(&e), e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "MalformedRequest", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "MalformedRequest", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn json_text(status: StatusCode, body: String) -> Response {
    (
        status,
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        body,
    )
        .into_response()
}

pub fn router(workspace: Option<Arc<Workspace>>, config: &ServiceConfig) -> Router {
    let state = AppState {
        workspace,
        timeout: config.request_timeout,
    };
    let api = Router::new()
        .route("/api/tables", get(tables))
        .route("/api/graph", get(graph))
        .route("/api/plan", post(plan_handler))
        .route("/api/query", post(query_handler))
        .route("/api/{*rest}", get(not_found).post(not_found))
        .with_state(state);

    let app = match &config.static_dir {
        Some(dir) => api
            .fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => api.fallback(not_found),
    };

    if config.cors_origins.is_empty() {
        return app;
    }
    let origins = if config.cors_origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(
            config
                .cors_origins
                .iter()
                .filter_map(|o| HeaderValue::from_str(o).ok()),
        )
    };
    app.layer(
        CorsLayer::new()
            .allow_origin(origins)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    )
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(app: Router, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

fn loaded(state: &AppState) -> Result<Arc<Workspace>, ApiError> {
    state.workspace.clone().ok_or_else(ApiError::not_loaded)
}

#[derive(Serialize)]
struct TableListing {
    tables: Vec<TableEntry>,
    links: Vec<LinkEntry>,
}

#[derive(Serialize)]
struct TableEntry {
    name: String,
    alias: Option<String>,
    row_count: Option<u64>,
    columns: Vec<ColumnEntry>,
}

#[derive(Serialize)]
struct ColumnEntry {
    name: String,
    class: Option<ColumnClass>,
    #[serde(rename = "type")]
    ty: Option<ColumnType>,
}

#[derive(Serialize)]
struct LinkEntry {
    id: String,
    left: String,
    right: String,
    kind: denorm_core::RelationshipKind,
    mandatory: bool,
}

async fn tables(State(state): State<AppState>) -> Result<Json<TableListing>, ApiError> {
    let ws = loaded(&state)?;
    let dataset = ws.dataset();
    let tables = ws
        .catalog()
        .tables()
        .iter()
        .map(|t| {
            let data = dataset.and_then(|d| d.table(t.name.as_str()));
            TableEntry {
                name: t.name.to_string(),
                alias: ws.aliases().alias_of(t.name.as_str()).map(str::to_owned),
                row_count: data.map(|d| d.row_count),
                columns: t
                    .columns
                    .iter()
                    .map(|c| ColumnEntry {
                        name: c.name.to_string(),
                        class: c.class,
                        ty: data
                            .and_then(|d| d.columns.iter().find(|dc| *dc.name == *c.name))
                            .map(|dc| dc.ty),
                    })
                    .collect(),
            }
        })
        .collect();
    let links = ws
        .catalog()
        .links()
        .iter()
        .map(|l| LinkEntry {
            id: l.id.to_string(),
            left: l.left.to_string(),
            right: l.right.to_string(),
            kind: l.kind,
            mandatory: l.mandatory,
        })
        .collect();
    Ok(Json(TableListing { tables, links }))
}

#[derive(Deserialize)]
struct GraphParams {
    /// Comma-separated link ids.
    links: Option<String>,
}

async fn graph(
    State(state): State<AppState>,
    params: Result<Query<GraphParams>, QueryRejection>,
) -> Result<Json<denorm_core::GraphExport>, ApiError> {
    let Query(params) = params?;
    let ws = loaded(&state)?;
    let ids: Option<Vec<String>> = params.links.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect()
    });
    Ok(Json(ws.graph_for(ids.as_deref())?.export()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub targets: Vec<String>,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

/// Plans with a cache scoped to this call so the result, diagnostics
/// included, depends on nothing but the request.
pub fn run_plan(
    ws: &Workspace,
    request: &PlanRequest,
    deadline: Option<Instant>,
) -> Result<PlanResult, Error> {
    plan(
        ws.graph(),
        &ws.targets(&request.targets),
        &ws.plan_options(request.max_depth, deadline),
        Some(&PathCache::new()),
    )
}

async fn plan_handler(
    State(state): State<AppState>,
    body: Result<Json<PlanRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(request) = body?;
    let ws = loaded(&state)?;
    let timeout = state.timeout;
    let work = tokio::task::spawn_blocking(move || {
        let result = run_plan(&ws, &request, Some(Instant::now() + timeout))?;
        if result.diagnostics.timed_out {
            return Ok(Err(result.diagnostics));
        }
        Ok::<_, Error>(Ok(result.to_json()))
    });
    match tokio::time::timeout(timeout + Duration::from_secs(1), work).await {
        Err(_) => Err(ApiError::timeout(None)),
        Ok(Err(join)) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "Internal",
            join.to_string(),
        )),
        Ok(Ok(Err(e))) => Err(e.into()),
        Ok(Ok(Ok(Err(diagnostics)))) => Err(ApiError::timeout(Some(&diagnostics))),
        Ok(Ok(Ok(Ok(body)))) => Ok(json_text(StatusCode::OK, body)),
    }
}

async fn query_handler(
    State(state): State<AppState>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(request) = body?;
    let ws = loaded(&state)?;
    let timeout = state.timeout;
    let work =
        tokio::task::spawn_blocking(move || ws.query(&request, Some(Instant::now() + timeout)));
    match tokio::time::timeout(timeout + Duration::from_secs(1), work).await {
        Err(_) => Err(ApiError::timeout(None)),
        Ok(Err(join)) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "Internal",
            join.to_string(),
        )),
        Ok(Ok(result)) => Ok(Json(result?).into_response()),
    }
}
