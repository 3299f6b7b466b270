//! HTTP routes. Bodies are JSON except `/jobs/{id}/counts`, which streams
//! one [`qwb_core::jobdata::CountsChunk`] per line.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use qwb_core::docs::{docs_lookup, DocLookup};
use qwb_core::jobdata::{chunk_count, chunk_iter};
use qwb_core::machine::{MachineRegistry, MachineSummary, TimeRange};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use uuid::Uuid;

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::ops;
use crate::store::{JobStore, JobSummary};

pub const NDJSON: &str = "application/x-ndjson";
/// Header carrying the total number of chunks of a counts stream.
pub const CHUNK_TOTAL_HEADER: &str = "x-qwb-chunk-total";

#[derive(Clone)]
pub struct AppState {
    pub machines: Arc<MachineRegistry>,
    pub store: Arc<JobStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(machines: MachineRegistry, store: JobStore, config: ServiceConfig) -> Self {
        AppState {
            machines: Arc::new(machines),
            store: Arc::new(store),
            config: Arc::new(config),
        }
    }

    /// Runs engine work off the async threads, bounded by the request timeout.
    /// A timed-out computation is abandoned, not cancelled.
    async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    {
        let task = tokio::task::spawn_blocking(f);
        match tokio::time::timeout(self.config.timeout(), task).await {
            Ok(Ok(result)) => result,
            Ok(Err(join)) => Err(ApiError::internal(format!("engine task failed: {join}"))),
            Err(_) => Err(ApiError::timeout(self.config.timeout_secs)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/machines", get(list_machines))
        .route("/machines/{name}", get(machine_detail))
        .route("/machines/{name}/series", get(machine_series))
        .route("/queries/run", post(run_query))
        .route("/circuits/parse", post(parse_circuit))
        .route("/circuits/build", post(build_circuit))
        .route("/transpile", post(transpile))
        .route("/transpile/compare", post(compare))
        .route("/run", post(run))
        .route("/analysis/esp", post(esp))
        .route("/analysis/match", post(match_gates))
        .route("/results/hea", post(hea))
        .route("/results/decode", post(decode))
        .route("/jobs", post(import_job).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/counts", get(job_counts))
        .route("/docs/{term}", get(docs));
    let api = match state.config.ui_dir.clone().filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    api.method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(state.config.max_body_bytes())).with_state(state)
}

/// Raw request body; extraction failures become JSON errors.
pub struct RawBody(pub Bytes);

impl<S: Send + Sync> FromRequest<S> for RawBody {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Bytes::from_request(req, state).await.map(RawBody).map_err(|e| {
            let code = if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                "body-too-large"
            } else {
                "request-invalid"
            };
            ApiError::new(e.status(), code, e.body_text())
        })
    }
}

/// Path parameter with JSON errors.
pub struct Path<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for Path<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Path::<T>::from_request_parts(parts, state)
            .await
            .map(|p| Path(p.0))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// Query string with JSON errors.
pub struct Query<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Query(q.0))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method-not-allowed", "method not allowed on this endpoint")
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

/// Decodes the body and runs `op` under the request timeout.
async fn engine<Req, Res, F>(state: &AppState, body: Bytes, op: F) -> Result<Json<Res>, ApiError>
where
    Req: DeserializeOwned + Send + 'static,
    Res: Send + 'static,
    F: FnOnce(&MachineRegistry, Req) -> Result<Res, ApiError> + Send + 'static,
{
    let req: Req = parse_body(&body)?;
    let machines = state.machines.clone();
    state.blocking(move || op(&machines, req)).await.map(Json)
}

async fn list_machines(State(state): State<AppState>) -> Json<Vec<MachineSummary>> {
    Json(state.machines.iter().map(|m| m.summary()).collect())
}

#[derive(Debug, Default, Deserialize, Serialize)]
pub struct AtParam {
    pub at: Option<DateTime<Utc>>,
}

async fn machine_detail(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<AtParam>,
) -> Result<Json<ops::MachineDetail>, ApiError> {
    ops::machine_detail(state.machines.get(&name)?, q.at).map(Json)
}

#[derive(Debug, Default, Deserialize, Serialize)]
pub struct SeriesParams {
    pub selector: String,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

async fn machine_series(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<SeriesParams>,
) -> Result<Json<Vec<qwb_core::machine::Series>>, ApiError> {
    let range = TimeRange { from: q.from, to: q.to };
    ops::machine_series(state.machines.get(&name)?, &q.selector, &range).map(Json)
}

async fn run_query(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req: ops::QueryRequest| ops::query(m, &req)).await
}

async fn parse_circuit(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |_, req: ops::ParseRequest| ops::parse_circuit(&req)).await
}

async fn build_circuit(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |_, spec| ops::build_circuit(&spec)).await
}

async fn transpile(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req| ops::transpile_circuit(m, &req)).await
}

async fn compare(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req| ops::compare(m, &req)).await
}

async fn run(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req| ops::run_circuit(m, &req)).await
}

async fn esp(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req| ops::esp_report(m, &req)).await
}

async fn match_gates(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |_, req| ops::match_circuits(&req)).await
}

async fn hea(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |m, req| ops::hea(m, &req)).await
}

async fn decode(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    engine(&state, body, |_, req| ops::decode(&req)).await
}

async fn import_job(State(state): State<AppState>, RawBody(body): RawBody) -> Result<impl IntoResponse, ApiError> {
    let req: ops::ImportRequest = parse_body(&body)?;
    let store = state.store.clone();
    let summary: JobSummary = state
        .blocking(move || {
            let bundle = ops::import_bundle(&req, store.dir())?;
            store.insert(bundle)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobSummary>> {
    Json(state.store.list())
}

fn parse_id(id: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(id).map_err(|_| ApiError::bad_request(format!("`{id}` is not a job id")))
}

/// The stored bundle file. Large jobs reference their counts sidecar,
/// which is served through `/jobs/{id}/counts`.
async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let store = state.store.clone();
    let text = state.blocking(move || store.file_text(id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Debug, Default, Deserialize, Serialize)]
pub struct CountsParams {
    pub chunk_size: Option<usize>,
    /// First chunk index to send, for resuming an interrupted stream.
    pub from: Option<usize>,
}

async fn job_counts(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CountsParams>,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let size = q.chunk_size.unwrap_or(state.config.chunk_size);
    if size == 0 {
        return Err(ApiError::bad_request("chunk_size must be at least 1"));
    }
    let store = state.store.clone();
    let bundle = state.blocking(move || store.get(id)).await?;
    let total = chunk_count(bundle.counts.len(), size);
    let from = q.from.unwrap_or(0);
    if from >= total {
        return Err(ApiError::bad_request(format!("chunk index {from} out of range 0..{total}")));
    }
    // A producer thread encodes lines into a small bounded channel, so only
    // a few chunks are ever held in memory per connection.
    let (tx, rx) = tokio::sync::mpsc::channel::<Bytes>(4);
    tokio::task::spawn_blocking(move || {
        let job = id.to_string();
        for chunk in chunk_iter(&bundle.counts, &job, size).skip(from) {
            let mut line = serde_json::to_vec(&chunk).expect("chunks serialize");
            line.push(b'\n');
            if tx.blocking_send(Bytes::from(line)).is_err() {
                break;
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, Infallible>(b), rx))
    });
    Ok((
        [
            (header::CONTENT_TYPE, NDJSON.to_string()),
            (header::HeaderName::from_static(CHUNK_TOTAL_HEADER), total.to_string()),
        ],
        Body::from_stream(stream),
    )
        .into_response())
}

async fn docs(Path(term): Path<String>) -> Json<DocLookup> {
    Json(docs_lookup(&term))
}
