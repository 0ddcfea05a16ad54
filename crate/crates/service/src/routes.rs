use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use geneblend_core::latent::BlendMode;
use geneblend_core::session::HistoryEntry;
use geneblend_core::{Artifact, BlendSpec, Gene, Lineage, ListFilter, Session, SessionError, Tag};

use crate::{ApiError, AppState};

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sources", get(list_sources))
        .route("/sources/{id}/thumbnail", get(source_thumbnail))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/slots/{slot}", put(swap_slot))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/artifacts", post(save_artifact))
        .route("/gallery", get(list_gallery))
        .route("/gallery/{id}", get(get_artifact))
        .route("/images/{digest}", get(get_image))
        .fallback(|| async { ApiError::not_found("NOT_FOUND", "no such route") })
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("INVALID_REQUEST", e.to_string()))
}

fn png(bytes: Bytes) -> Response {
    (
        [
            (header::CONTENT_TYPE, "image/png"),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response()
}

fn image_url(digest: &str) -> String {
    format!("/images/{digest}")
}

fn thumbnail_url(source_id: &str) -> String {
    format!("/sources/{source_id}/thumbnail")
}

// ---- views ----

#[derive(Serialize)]
struct SourceView {
    id: String,
    label: String,
    thumbnail_url: String,
}

#[derive(Serialize)]
struct SlotView {
    slot_index: usize,
    source_id: String,
    label: String,
    thumbnail_url: String,
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    prompt: String,
    backend_id: String,
    created_at: String,
    slots: Vec<SlotView>,
    history: Vec<HistoryEntry>,
}

#[derive(Serialize)]
struct ArtifactView {
    artifact_id: String,
    tag: Tag,
    prompt: String,
    consent: bool,
    created_at: String,
    image_digest: String,
    image_url: String,
    gene: Gene,
    lineage: Lineage,
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

impl SessionView {
    fn of(state: &AppState, s: &Session) -> Self {
        let pool = state.engine.pool();
        Self {
            session_id: s.session_id.clone(),
            prompt: s.prompt.clone(),
            backend_id: s.backend_id.clone(),
            created_at: timestamp(&s.created_at),
            slots: s
                .slots
                .iter()
                .map(|slot| SlotView {
                    slot_index: slot.slot_index,
                    label: pool.get(&slot.source_id).map(|g| g.label.clone()).unwrap_or_default(),
                    thumbnail_url: thumbnail_url(&slot.source_id),
                    source_id: slot.source_id.clone(),
                })
                .collect(),
            history: s.history.iter().cloned().collect(),
        }
    }
}

impl From<Artifact> for ArtifactView {
    fn from(a: Artifact) -> Self {
        Self {
            image_url: image_url(a.image_digest.as_str()),
            image_digest: a.image_digest.to_string(),
            created_at: timestamp(&a.created_at),
            artifact_id: a.artifact_id,
            tag: a.tag,
            prompt: a.prompt,
            consent: a.consent,
            gene: a.gene,
            lineage: a.lineage,
        }
    }
}

// ---- handlers ----

async fn healthz(State(state): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "backend": state.default_backend }))
}

async fn list_sources(State(state): State<Shared>) -> Json<Vec<SourceView>> {
    Json(
        state
            .engine
            .pool()
            .iter()
            .map(|s| SourceView {
                id: s.id.clone(),
                label: s.label.clone(),
                thumbnail_url: thumbnail_url(&s.id),
            })
            .collect(),
    )
}

/// The pool's thumbnail file when there is one, otherwise a rendering of the
/// source gene with the default backend.
async fn source_thumbnail(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let Some(source) = state.engine.pool().get(&id) else {
        return Err(ApiError::not_found("UNKNOWN_SOURCE", format!("unknown source {id:?}")));
    };
    if let Some(bytes) = state.thumbnails.lock().unwrap_or_else(|e| e.into_inner()).get(&id) {
        return Ok(png(bytes.clone()));
    }
    let gene = source.gene();
    let st = state.clone();
    let bytes = blocking(move || {
        if let Some(bytes) = st.engine.pool().thumbnail_path(&id).and_then(|p| std::fs::read(p).ok()) {
            return Ok((id, Bytes::from(bytes)));
        }
        let (w, h) = st.engine.image_size();
        let r = st.engine.render(&gene, &st.default_backend, w, h, None)?;
        Ok((id, Bytes::from(r.png)))
    })
    .await
    .map(|(id, bytes)| {
        state
            .thumbnails
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, bytes.clone());
        bytes
    })?;
    Ok(png(bytes))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    backend_id: Option<String>,
    #[serde(default)]
    source_ids: Option<Vec<String>>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(SessionError::PromptRequired.into());
    }
    let req: CreateSession = parse_body(&body)?;
    let prompt = req.prompt.ok_or(SessionError::PromptRequired)?;
    let backend = req.backend_id.unwrap_or_else(|| state.default_backend.clone());
    let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let session = state.engine.create_session(&prompt, &backend, req.source_ids, seed)?;
    let view = SessionView::of(&state, &session);
    state.sessions().insert(session);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

fn session_cell(state: &AppState, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Session>>> {
    state
        .sessions()
        .get(id)
        .ok_or_else(|| ApiError::not_found("SESSION_NOT_FOUND", format!("unknown session {id:?}")))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let cell = session_cell(&state, &id)?;
    let session = cell.lock().await;
    Ok(Json(SessionView::of(&state, &session)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SwapRequest {
    source_id: String,
}

async fn swap_slot(
    State(state): State<Shared>,
    Path((id, slot)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let cell = session_cell(&state, &id)?;
    let index: usize = slot
        .parse()
        .map_err(|_| ApiError::not_found("UNKNOWN_SLOT", format!("no slot {slot:?}")))?;
    let req: SwapRequest = parse_body(&body)?;
    let mut session = cell.lock().await;
    state.engine.swap_source(&mut session, index, &req.source_id)?;
    Ok(Json(SessionView::of(&state, &session)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    weights: Vec<f64>,
    #[serde(default)]
    mode: BlendMode,
    truncation: f64,
}

async fn preview(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let cell = session_cell(&state, &id)?;
    let req: PreviewRequest = parse_body(&body)?;
    let spec = BlendSpec::new(req.weights, req.mode, req.truncation);
    let mut session = cell.lock_owned().await;
    let engine = state.engine.clone();
    let rendered = blocking(move || Ok(engine.preview(&mut session, &spec)?)).await?;
    let digest = rendered.image_digest.to_string();
    state.previews().insert(digest.clone(), Bytes::from(rendered.png));
    Ok(Json(json!({
        "gene_digest": rendered.gene_digest,
        "image_digest": digest,
        "image_url": image_url(&digest),
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveRequest {
    weights: Vec<f64>,
    #[serde(default)]
    mode: BlendMode,
    truncation: f64,
    tag: String,
    consent: bool,
    /// Reserved for deployments with login.
    #[serde(default)]
    participant_id: Option<String>,
}

async fn save_artifact(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let cell = session_cell(&state, &id)?;
    let req: SaveRequest = parse_body(&body)?;
    let tag: Tag = req
        .tag
        .parse()
        .map_err(|m: String| ApiError::bad_request("INVALID_TAG", m))?;
    let spec = BlendSpec::new(req.weights, req.mode, req.truncation);
    let session = cell.lock_owned().await;
    let st = state.clone();
    let artifact = blocking(move || {
        let (mut artifact, rendered) = st.engine.prepare_artifact(&session, &spec, tag, req.consent)?;
        artifact.participant_id = req.participant_id;
        st.store.put(&artifact, &rendered.png)?;
        Ok(artifact)
    })
    .await?;
    if !artifact.consent {
        // A private save must not stay reachable through the preview cache.
        state.previews().remove(artifact.image_digest.as_str());
    }
    Ok((StatusCode::CREATED, Json(ArtifactView::from(artifact))).into_response())
}

fn query_number(q: &HashMap<String, String>, key: &str, default: usize, code: &'static str) -> ApiResult<usize> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(code, format!("{key} must be a positive integer, got {v:?}"))),
    }
}

async fn list_gallery(
    State(state): State<Shared>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<serde_json::Value>> {
    let tag = match q.get("tag").map(String::as_str) {
        None | Some("") => None,
        Some(t) => Some(t.parse::<Tag>().map_err(|m| ApiError::bad_request("INVALID_TAG", m))?),
    };
    let filter = ListFilter {
        tag,
        prompt: q.get("prompt").filter(|p| !p.is_empty()).cloned(),
        page: query_number(&q, "page", 1, "INVALID_PAGE")?,
        page_size: query_number(&q, "page_size", 20, "INVALID_PAGE_SIZE")?,
    };
    let st = state.clone();
    let page = blocking(move || Ok(st.store.list(&filter)?)).await?;
    let items: Vec<ArtifactView> = page.items.into_iter().map(ArtifactView::from).collect();
    Ok(Json(json!({
        "items": items,
        "total": page.total,
        "page": page.page,
        "page_size": page.page_size,
    })))
}

async fn get_artifact(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<ArtifactView>> {
    let st = state.clone();
    let (artifact, _) = blocking(move || Ok(st.store.get(&id, false)?)).await?;
    Ok(Json(artifact.into()))
}

async fn get_image(State(state): State<Shared>, Path(digest): Path<String>) -> ApiResult<Response> {
    if let Some(bytes) = state.previews().get(&digest) {
        return Ok(png(bytes));
    }
    let st = state.clone();
    let found = blocking(move || Ok(st.store.public_image(&digest))).await?;
    found
        .map(|b| png(Bytes::from(b)))
        .ok_or_else(|| ApiError::not_found("IMAGE_NOT_FOUND", "image not found"))
}
