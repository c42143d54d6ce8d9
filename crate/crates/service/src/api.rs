//! HTTP routes. Everything under `/api` needs `Authorization: Bearer <token>`.
//! Errors are `{code, message, rule}` JSON bodies; `rule` is set for upload
//! violations.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dielink_core::analytics::{build_curve, cluster, embed_2d, rank_pairs, ClusterLabel};
use dielink_core::notations::Note;
use dielink_core::registration::SimilarityTransform;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::datastore::{
    DatasetKind, DatasetRecord, DatasetState, DatasetSummary, Evaluation, RankedPair, Store, StoreError,
};
use crate::jobs::{JobTicket, Jobs};
use crate::upload::{validate_upload, UploadError, UploadLimits};

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 200;
/// Room for zip headers on top of the uncompressed size limit.
const BODY_SLACK: usize = 16 << 20;

#[derive(Clone)]
pub struct AppState {
    pub store: Store,
    pub jobs: Arc<Jobs>,
    pub token: Arc<str>,
    pub limits: UploadLimits,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    rule: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            rule: None,
        }
    }

    fn upload(e: UploadError, limits: &UploadLimits) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: e.code(),
            message: e.to_string(),
            rule: Some(e.rule(limits)),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "rule": self.rule });
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            StoreError::NotFound(_) => (S::NOT_FOUND, "NOT_FOUND"),
            StoreError::DuplicateName(_) => (S::CONFLICT, "DUPLICATE_NAME"),
            StoreError::DuplicateFileNames(_) => (S::BAD_REQUEST, "DUPLICATE_FILE_NAMES"),
            StoreError::InvalidName(_) => (S::BAD_REQUEST, "INVALID_NAME"),
            StoreError::InvalidState { .. } => (S::CONFLICT, "INVALID_STATE"),
            StoreError::DatasetNotComputed(DatasetState::Failed) => (S::CONFLICT, "DATASET_FAILED"),
            StoreError::DatasetNotComputed(_) => (S::CONFLICT, "COMPUTING"),
            StoreError::UnknownPair(..) => (S::NOT_FOUND, "UNKNOWN_PAIR"),
            StoreError::UnknownImage(_) => (S::NOT_FOUND, "UNKNOWN_IMAGE"),
            StoreError::Csv(_) => (S::BAD_REQUEST, "MALFORMED_CSV"),
            StoreError::Matrix(_) | StoreError::Storage(_) | StoreError::Encoding(_) => {
                tracing::error!(error = %e, "datastore failure");
                (S::INTERNAL_SERVER_ERROR, "INTERNAL")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let body_limit = usize::try_from(state.limits.max_total_bytes)
        .unwrap_or(usize::MAX)
        .saturating_add(BODY_SLACK);
    let api = Router::new()
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/{id}", get(show_dataset).delete(delete_dataset))
        .route("/datasets/{id}/pairs", get(list_pairs))
        .route("/datasets/{id}/pairs/{name1}/{name2}", get(show_pair).put(evaluate_pair))
        .route("/datasets/{id}/curve", get(curve))
        .route("/datasets/{id}/embedding", get(embedding))
        .route("/datasets/{id}/clusters", get(clusters))
        .route("/datasets/{id}/export", get(export))
        .route("/datasets/{id}/notations", post(import))
        .route("/datasets/{id}/images/{name}", get(image))
        .layer(DefaultBodyLimit::max(body_limit))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(health))
        .nest("/api", api)
        .with_state(state)
}

async fn health() -> &'static str {
    "ok"
}

fn same_secret(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(t) if same_secret(t.as_bytes(), state.token.as_bytes()) => next.run(req).await,
        _ => ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHORIZED", "missing or wrong bearer token")
            .into_response(),
    }
}

async fn create_dataset(State(state): State<AppState>, mut form: Multipart) -> ApiResult<Response> {
    let mut name = None;
    let mut kind = DatasetKind::SingleType;
    let mut archive = None;
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", m);
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => {
                let limit = state.limits.max_total_bytes;
                return Err(ApiError::upload(UploadError::ArchiveTooLarge { limit }, &state.limits));
            }
            Err(e) => return Err(bad(e.body_text())),
        };
        let field_name = field.name().unwrap_or_default().to_owned();
        let read_err = |e: axum::extract::multipart::MultipartError| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                let limit = state.limits.max_total_bytes;
                ApiError::upload(UploadError::ArchiveTooLarge { limit }, &state.limits)
            } else {
                bad(e.body_text())
            }
        };
        match field_name.as_str() {
            "name" => name = Some(field.text().await.map_err(read_err)?),
            "kind" => {
                let text = field.text().await.map_err(read_err)?;
                kind = serde_json::from_value(json!(text))
                    .map_err(|_| bad(format!("unknown kind {text:?}")))?;
            }
            "file" => archive = Some(field.bytes().await.map_err(read_err)?),
            _ => {}
        }
    }
    let name = name.ok_or_else(|| bad("missing field \"name\"".into()))?;
    let archive = archive.ok_or_else(|| bad("missing field \"file\"".into()))?;

    let store = state.store.clone();
    let limits = state.limits;
    let record = tokio::task::spawn_blocking(move || -> ApiResult<DatasetRecord> {
        let entries = validate_upload(&archive, &limits).map_err(|e| ApiError::upload(e, &limits))?;
        Ok(store.create_dataset(&name, kind, &entries)?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;

    state.jobs.submit(&record.id);
    let ticket = state.jobs.ticket(&record);
    Ok((StatusCode::ACCEPTED, Json(ticket)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetListing {
    pub id: String,
    pub name: String,
    pub state: DatasetState,
    pub computing: bool,
    pub coins: usize,
    pub progress: crate::jobs::JobProgress,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetLists {
    pub single_type: Vec<DatasetListing>,
    pub treasures: Vec<DatasetListing>,
}

async fn list_datasets(State(state): State<AppState>) -> ApiResult<Json<DatasetLists>> {
    let mut lists = DatasetLists {
        single_type: Vec::new(),
        treasures: Vec::new(),
    };
    for r in state.store.list()? {
        let listing = DatasetListing {
            id: r.id.clone(),
            name: r.name.clone(),
            state: r.state,
            computing: r.state == DatasetState::Computing,
            coins: r.coin_names.len(),
            progress: state.jobs.ticket(&r).progress,
        };
        match r.kind {
            DatasetKind::SingleType => lists.single_type.push(listing),
            DatasetKind::Treasure => lists.treasures.push(listing),
        }
    }
    Ok(Json(lists))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetDetail {
    pub dataset: DatasetRecord,
    pub job: JobTicket,
    pub summary: Option<DatasetSummary>,
}

async fn show_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DatasetDetail>> {
    let dataset = state.store.get(&id)?;
    let summary = match dataset.state {
        DatasetState::Computed => Some(state.store.summarize(&id)?),
        _ => None,
    };
    Ok(Json(DatasetDetail {
        job: state.jobs.ticket(&dataset),
        dataset,
        summary,
    }))
}

async fn delete_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let record = state.store.get(&id)?;
    if record.state == DatasetState::Computing {
        return Err(StoreError::DatasetNotComputed(record.state).into());
    }
    state.store.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
    pub query: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairPage {
    /// Pairs matching the query, before paging.
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub pairs: Vec<RankedPair>,
}

async fn list_pairs(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Json<PairPage>> {
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "INVALID_LIMIT",
            format!("limit must be between 1 and {MAX_PAGE}"),
        ));
    }
    let all = state.store.search_pairs(&id, q.query.as_deref().unwrap_or(""))?;
    let total = all.len();
    let pairs = all.into_iter().skip(offset).take(limit).collect();
    Ok(Json(PairPage {
        total,
        offset,
        limit,
        pairs,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairDetail {
    #[serde(flatten)]
    pub pair: RankedPair,
    /// Maps `name1` image coordinates onto `name2` image coordinates.
    pub transform: Option<SimilarityTransform>,
}

async fn show_pair(
    State(state): State<AppState>,
    Path((id, a, b)): Path<(String, String, String)>,
) -> ApiResult<Json<PairDetail>> {
    let score = state.store.pair_score(&id, &a, &b)?;
    let pair = state
        .store
        .ranked_pairs(&id)?
        .into_iter()
        .find(|p| p.name1 == score.name1 && p.name2 == score.name2)
        .ok_or_else(|| StoreError::UnknownPair(a, b))?;
    Ok(Json(PairDetail {
        pair,
        transform: score.transform,
    }))
}

#[derive(Debug, Deserialize)]
pub struct EvaluationRequest {
    /// Identifier (`probably_linked`) or label (`Probably linked`).
    pub note: String,
    /// Omitted keeps the stored comment.
    pub comment: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationResponse {
    pub evaluation: Evaluation,
    pub summary: DatasetSummary,
}

async fn evaluate_pair(
    State(state): State<AppState>,
    Path((id, a, b)): Path<(String, String, String)>,
    body: Result<Json<EvaluationRequest>, JsonRejection>,
) -> ApiResult<Json<EvaluationResponse>> {
    let Json(req) = body?;
    let note: Note = req
        .note
        .parse()
        .map_err(|e: dielink_core::notations::UnknownNote| {
            ApiError::new(StatusCode::BAD_REQUEST, "UNKNOWN_NOTE", e.to_string())
        })?;
    let evaluation = state
        .store
        .set_evaluation(&id, &a, &b, note, req.comment.as_deref())?;
    let summary = state.store.summarize(&id)?;
    Ok(Json(EvaluationResponse { evaluation, summary }))
}

async fn curve(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let matrix = state.store.matrix(&id)?;
    Ok(Json(build_curve(&rank_pairs(&matrix))).into_response())
}

async fn embedding(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let matrix = state.store.matrix(&id)?;
    Ok(Json(embed_2d(&matrix)).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ClusterQuery {
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterResponse {
    /// Always true: grouping is exploratory.
    pub provisional: bool,
    pub threshold: f64,
    pub labels: Vec<ClusterLabel>,
}

async fn clusters(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ClusterQuery>,
) -> ApiResult<Json<ClusterResponse>> {
    let matrix = state.store.matrix(&id)?;
    let threshold = q.threshold.ok_or_else(|| {
        ApiError::new(StatusCode::BAD_REQUEST, "MISSING_THRESHOLD", "query parameter threshold is required")
    })?;
    let labels = cluster(&matrix, threshold)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_THRESHOLD", e.to_string()))?;
    Ok(Json(ClusterResponse {
        provisional: true,
        threshold,
        labels,
    }))
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (file_name, bytes) = state.store.export_csv(&id)?;
    let disposition = HeaderValue::from_str(&format!("attachment; filename=\"{file_name}\""))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8")),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn import(State(state): State<AppState>, Path(id): Path<String>, body: axum::body::Bytes) -> ApiResult<Response> {
    let applied = state.store.import_csv(&id, &body)?;
    let summary = state.store.summarize(&id)?;
    Ok(Json(json!({ "applied": applied, "summary": summary })).into_response())
}

async fn image(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> ApiResult<Response> {
    let bytes = state.store.image(&id, &name)?;
    let mime = image::guess_format(&bytes)
        .map(|f| f.to_mime_type())
        .unwrap_or("application/octet-stream");
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}
