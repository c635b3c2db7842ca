use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use curator_core::thumbnail::ThumbnailConfig;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::api::{self, DEFAULT_PAGE};
use crate::error::ApiError;
use crate::ingest::ingest_directory;
use crate::AppState;

type Params = Query<HashMap<String, String>>;
type ApiResult = Result<Response, ApiError>;

pub fn router(state: AppState, static_dir: &FsPath) -> Router {
    let api = Router::new()
        .route("/ingest", post(ingest))
        .route("/series", get(search))
        .route("/series/:uid", get(series))
        .route("/series/:uid/thumbnail.png", get(thumbnail))
        .route("/series/:uid/slices/:file", get(slice))
        .route("/aggregate", get(aggregate))
        .route("/aggregate.csv", get(aggregate_csv))
        .route("/autocomplete", get(autocomplete))
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/:id", get(get_dataset))
        .route("/datasets/:id/series", patch(modify_membership))
        .route("/tags/bulk", post(bulk_tag))
        .route("/annotators", get(list_annotators))
        .route("/annotators/:name/run", post(run_annotator))
        .route("/jobs/:id", get(job))
        .fallback(|| async { ApiError::new("not_found", "no such endpoint") })
        .with_state(state);
    Router::new()
        .nest("/api", api)
        .fallback_service(ServeDir::new(static_dir))
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn num(p: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{key}` must be a non-negative integer"))),
    }
}

fn q(p: &HashMap<String, String>) -> &str {
    p.get("q").map(String::as_str).unwrap_or("")
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new("internal_error", e.to_string()))?
}

fn json<T: serde::Serialize>(v: &T) -> Response {
    Json(v).into_response()
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestBody {
    path: PathBuf,
    #[serde(default = "yes")]
    recursive: bool,
}

fn yes() -> bool {
    true
}

async fn ingest(State(s): State<AppState>, raw: Bytes) -> ApiResult {
    let b: IngestBody = body(&raw)?;
    let report = blocking(move || {
        ingest_directory(&s.catalog, &b.path, b.recursive).map_err(|e| ApiError::new(e.code(), e.to_string()))
    })
    .await?;
    Ok(json(&report))
}

async fn search(State(s): State<AppState>, Query(p): Params) -> ApiResult {
    let from = num(&p, "from", 0)?;
    let size = num(&p, "size", DEFAULT_PAGE)?;
    Ok(json(&api::search(&s.catalog.index, q(&p), from, size, p.get("sort").map(String::as_str))?))
}

async fn series(State(s): State<AppState>, Path(uid): Path<String>) -> ApiResult {
    match s.catalog.index.get(&uid) {
        Some(d) => Ok(json(&*d)),
        None => Err(ApiError::new("unknown_series", format!("unknown series {uid}"))),
    }
}

fn thumb_config(s: &AppState, p: &HashMap<String, String>) -> Result<ThumbnailConfig, ApiError> {
    let edge = num(p, "edge", s.thumb_edge as usize)?;
    let edge = u32::try_from(edge).map_err(|_| ApiError::new("invalid_thumbnail_config", "edge out of range"))?;
    Ok(ThumbnailConfig::with_edge(edge))
}

async fn thumbnail(State(s): State<AppState>, Path(uid): Path<String>, Query(p): Params) -> ApiResult {
    let cfg = thumb_config(&s, &p)?;
    let bytes = blocking(move || Ok(s.catalog.thumbnail(&uid, &cfg)?)).await?;
    Ok(png(bytes))
}

async fn slice(State(s): State<AppState>, Path((uid, file)): Path<(String, String)>, Query(p): Params) -> ApiResult {
    let index: usize = file
        .strip_suffix(".png")
        .and_then(|i| i.parse().ok())
        .ok_or_else(|| ApiError::new("not_found", format!("no slice `{file}`")))?;
    let cfg = thumb_config(&s, &p)?;
    let out = blocking(move || Ok(s.catalog.slice(&uid, index, &cfg)?)).await?;
    match out {
        Some(bytes) => Ok(png(bytes)),
        None => Err(ApiError::new("not_found", format!("slice {index} is past the last slice"))),
    }
}

async fn aggregate(State(s): State<AppState>, Query(p): Params) -> ApiResult {
    let fields = api::field_list(p.get("fields").map(String::as_str).unwrap_or(""));
    Ok(json(&api::aggregate(&s.catalog.index, q(&p), &fields)?))
}

async fn aggregate_csv(State(s): State<AppState>, Query(p): Params) -> ApiResult {
    let field = p
        .get("field")
        .filter(|f| !f.is_empty())
        .ok_or_else(|| ApiError::bad_request("`field` is required"))?;
    let bytes = api::aggregate_csv(&s.catalog.index, q(&p), field)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response())
}

async fn autocomplete(State(s): State<AppState>, Query(p): Params) -> ApiResult {
    let field = p
        .get("field")
        .ok_or_else(|| ApiError::bad_request("`field` is required"))?;
    let prefix = p.get("prefix").map(String::as_str).unwrap_or("");
    let limit = num(&p, "limit", 10)?.min(1000);
    Ok(json(&api::autocomplete(&s.catalog.index, field, prefix, limit)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NameBody {
    name: String,
}

async fn create_dataset(State(s): State<AppState>, raw: Bytes) -> ApiResult {
    let b: NameBody = body(&raw)?;
    let rec = blocking(move || Ok(s.catalog.create_dataset(&b.name)?)).await?;
    Ok((StatusCode::CREATED, Json(rec)).into_response())
}

async fn list_datasets(State(s): State<AppState>) -> ApiResult {
    Ok(json(&s.catalog.store.list_datasets()))
}

async fn get_dataset(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(json(&s.catalog.store.get_dataset(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MembershipBody {
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    remove: Vec<String>,
}

async fn modify_membership(State(s): State<AppState>, Path(id): Path<String>, raw: Bytes) -> ApiResult {
    let b: MembershipBody = body(&raw)?;
    Ok(json(&blocking(move || Ok(s.catalog.modify_membership(&id, &b.add, &b.remove)?)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BulkTagBody {
    uids: Vec<String>,
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    remove: Vec<String>,
}

async fn bulk_tag(State(s): State<AppState>, raw: Bytes) -> ApiResult {
    let b: BulkTagBody = body(&raw)?;
    Ok(json(&blocking(move || Ok(s.catalog.bulk_tag(&b.uids, &b.add, &b.remove)?)).await?))
}

async fn list_annotators(State(s): State<AppState>) -> ApiResult {
    Ok(json(&s.annotators.values().collect::<Vec<_>>()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    series_uids: Vec<String>,
}

async fn run_annotator(State(s): State<AppState>, Path(name): Path<String>, raw: Bytes) -> ApiResult {
    let manifest = s
        .annotators
        .get(&name)
        .cloned()
        .ok_or_else(|| ApiError::new("unknown_annotator", format!("unknown annotator `{name}`")))?;
    let b: RunBody = body(&raw)?;
    if b.series_uids.is_empty() {
        return Err(ApiError::bad_request("`series_uids` is empty"));
    }
    let job = s.jobs.submit(s.catalog.clone(), manifest, b.series_uids);
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    match s.jobs.get(&id) {
        Some(j) => Ok(json(&j)),
        None => Err(ApiError::new("unknown_job", format!("unknown job {id}"))),
    }
}
