//! HTTP service over sessions, uploads, canvas edits, generation and
//! history. All routes live under `/v1`; bodies are JSON except image
//! uploads and downloads.
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/v1/sessions` | create (optional `{canvas, d_min, d_max}`) |
//! | `GET`/`DELETE` | `/v1/sessions/{sid}` | view / delete |
//! | `POST` | `/v1/sessions/{sid}/images` | upload raw bytes → `{image}` |
//! | `GET` | `/v1/sessions/{sid}/images/{image}` | download |
//! | `PUT` | `/v1/sessions/{sid}/target` | `{image}` |
//! | `POST` | `/v1/sessions/{sid}/references` | `{image, position}` |
//! | `PATCH`/`DELETE` | `/v1/sessions/{sid}/references/{image}` | move `{position}` / remove |
//! | `PUT` | `/v1/sessions/{sid}/references/{image}/attributes` | `{attributes}` |
//! | `POST` | `/v1/sessions/{sid}/undo`, `/redo`, `/reset` | |
//! | `GET` | `/v1/sessions/{sid}/preview?x=&y=` | drag-preview weight and line style |
//! | `POST` | `/v1/sessions/{sid}/generate` | 200 with result (synthetic) or 202 `{job}` |
//! | `GET` | `/v1/sessions/{sid}/jobs/{job}` | job status |
//! | `GET` | `/v1/sessions/{sid}/history` | history entries |
//! | `GET` | `/v1/sessions/{sid}/history/{id}/image` | stored result |
//! | `POST` | `/v1/sessions/{sid}/history/{id}/restore` | |
//!
//! Mutations on one session are applied one at a time; different sessions
//! proceed in parallel.

mod error;
mod jobs;
mod repo;
mod views;

use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use error::ApiError;
pub use jobs::{JobRecord, JobStatus};
use repo::SessionSlot;
pub use views::{HistoryView, PlacementView, SessionView, TargetView};

use crate::backend::{BackendKind, Engine};
use crate::config::Config;
use crate::latent::DistanceModel;
use crate::pipeline::Renderer;
use crate::raster::Image;
use crate::session::{CanvasGeometry, CanvasState, LineStyle, Point, SessionDocument};
use crate::store::ImageRef;

pub const API_PREFIX: &str = "/v1";
const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

struct Inner {
    kind: BackendKind,
    canvas_defaults: CanvasGeometry,
    renderer: Arc<Renderer>,
    root: PathBuf,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    permits: Arc<Semaphore>,
    timeout: Duration,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Opens the data directory and reloads every persisted session.
    pub fn open(config: &Config, engine: Engine) -> io::Result<Self> {
        let root = config.service.data_dir.join("sessions");
        let slots = repo::load_all(&root)?;
        let sessions = slots
            .into_iter()
            .map(|slot| {
                let id = slot.doc.try_lock().expect("fresh").session_id.clone();
                (id, Arc::new(slot))
            })
            .collect();
        Ok(Self {
            inner: Arc::new(Inner {
                kind: engine.kind,
                canvas_defaults: config.canvas,
                renderer: Arc::new(Renderer::new(engine, &config.layer_groups)),
                root,
                sessions: RwLock::new(sessions),
                permits: Arc::new(Semaphore::new(config.worker_slots().max(1))),
                timeout: config.generation_timeout(),
            }),
        })
    }

    pub fn renderer(&self) -> Arc<Renderer> {
        self.inner.renderer.clone()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.inner.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn permits(&self) -> Arc<Semaphore> {
        self.inner.permits.clone()
    }

    fn timeout(&self) -> Duration {
        self.inner.timeout
    }

    fn slot(&self, sid: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.inner
            .sessions
            .read()
            .get(sid)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(sid))
    }
}

pub fn router(state: AppState) -> Router {
    let session = Router::new()
        .route("/", get(get_session).delete(delete_session))
        .route("/images", post(upload_image))
        .route("/images/{image}", get(download_image))
        .route("/target", put(set_target))
        .route("/references", post(place_reference))
        .route(
            "/references/{image}",
            axum::routing::patch(move_reference).delete(remove_reference),
        )
        .route("/references/{image}/attributes", put(select_attributes))
        .route("/undo", post(undo))
        .route("/redo", post(redo))
        .route("/reset", post(reset))
        .route("/preview", get(preview))
        .route("/generate", post(generate))
        .route("/jobs/{job}", get(job_status))
        .route("/history", get(list_history))
        .route("/history/{id}/image", get(history_image))
        .route("/history/{id}/restore", post(restore_history));

    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/attributes", get(attributes))
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .nest("/v1/sessions/{sid}", session)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: &Config, engine: Engine) -> io::Result<()> {
    let state = AppState::open(config, engine)?;
    let addr = format!("{}:{}", config.service.host, config.service.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, sessions = state.session_ids().len(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_body(e.to_string()))
}

fn parse_ref(raw: &str) -> Result<ImageRef, ApiError> {
    raw.parse().map_err(|e: String| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_image_ref", e).with_field("image")
    })
}

fn view(doc: &SessionDocument) -> Json<SessionView> {
    Json(SessionView::from(doc))
}

/// Applies `edit` to a copy, persists it, then publishes it.
async fn mutate(
    state: &AppState,
    sid: &str,
    edit: impl FnOnce(&mut SessionDocument) -> Result<(), ApiError>,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(sid)?;
    let mut doc = slot.doc.lock().await;
    let mut next = doc.clone();
    edit(&mut next)?;
    slot.save_doc(&next).map_err(ApiError::storage)?;
    *doc = next;
    Ok(view(&doc))
}

fn require_uploaded(slot: &SessionSlot, image: &ImageRef) -> Result<(), ApiError> {
    if slot.store.contains(image) {
        Ok(())
    } else {
        Err(ApiError::image_not_found(image.as_str()))
    }
}

#[derive(Serialize)]
struct Health {
    backend: String,
    latent_shape: [usize; 2],
    image_size: [u32; 2],
    deterministic: bool,
    mask_provider: String,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let engine = state.inner.renderer.engine();
    let g = &engine.generator;
    let shape = g.latent_shape();
    let (w, h) = g.output_size();
    Json(Health {
        backend: g.name().to_string(),
        latent_shape: [shape.layers, shape.width],
        image_size: [w, h],
        deterministic: g.is_deterministic(),
        mask_provider: engine.masks.name().to_string(),
    })
}

async fn attributes(State(state): State<AppState>) -> Response {
    Json(state.inner.renderer.registry().clone()).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    canvas: Option<CanvasGeometry>,
    #[serde(default)]
    d_min: Option<f64>,
    #[serde(default)]
    d_max: Option<f64>,
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = if body.is_empty() {
        CreateSession::default()
    } else {
        parse(&body)?
    };
    let canvas = req.canvas.unwrap_or(state.inner.canvas_defaults);
    let d_min = req
        .d_min
        .unwrap_or(canvas.target_radius + canvas.reference_radius);
    let d_max = req.d_max.unwrap_or(canvas.width.hypot(canvas.height) / 2.0);
    let model = DistanceModel::new(d_min, d_max).map_err(|e| ApiError::from(e).with_field("d_min"))?;
    let initial = CanvasState::new(canvas, model).map_err(|e| ApiError::from(e).with_field("canvas"))?;
    let doc = SessionDocument::new(uuid::Uuid::new_v4().to_string(), initial);
    let slot = SessionSlot::create(&state.inner.root, doc.clone()).map_err(ApiError::storage)?;
    state
        .inner
        .sessions
        .write()
        .insert(doc.session_id.clone(), Arc::new(slot));
    Ok((StatusCode::CREATED, view(&doc)))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.session_ids())
}

async fn get_session(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&sid)?;
    let doc = slot.doc.lock().await;
    Ok(view(&doc))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<StatusCode, ApiError> {
    let slot = state
        .inner
        .sessions
        .write()
        .remove(&sid)
        .ok_or_else(|| ApiError::session_not_found(&sid))?;
    // wait out in-flight edits
    drop(slot.doc.lock().await);
    match Arc::try_unwrap(slot) {
        Ok(slot) => slot.remove().map_err(ApiError::storage)?,
        Err(shared) => std::fs::remove_dir_all(shared.dir()).map_err(ApiError::storage)?,
    }
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Serialize, Deserialize)]
struct Uploaded {
    image: ImageRef,
}

async fn upload_image(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<Uploaded>), ApiError> {
    let slot = state.slot(&sid)?;
    Image::decode(&body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_image", e.to_string()).with_field("body")
    })?;
    let image = slot.store.put(&body).map_err(ApiError::storage)?;
    Ok((StatusCode::CREATED, Json(Uploaded { image })))
}

fn image_response(bytes: Vec<u8>) -> Response {
    let mime = image::guess_format(&bytes)
        .map(|f| f.to_mime_type())
        .unwrap_or("application/octet-stream");
    ([(header::CONTENT_TYPE, mime)], bytes).into_response()
}

async fn download_image(
    State(state): State<AppState>,
    Path((sid, image)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let slot = state.slot(&sid)?;
    let image = parse_ref(&image)?;
    require_uploaded(&slot, &image)?;
    let bytes = slot.store.get(&image).map_err(ApiError::storage)?;
    Ok(image_response(bytes))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetBody {
    image: ImageRef,
}

async fn set_target(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let TargetBody { image } = parse(&body)?;
    let slot = state.slot(&sid)?;
    require_uploaded(&slot, &image)?;
    let renderer = state.renderer();
    let store = slot.store.clone();
    let check = image.clone();
    tokio::task::spawn_blocking(move || renderer.check_decodable(&store, &check))
        .await
        .map_err(|e| ApiError::storage(format!("decode task: {e}")))??;
    mutate(&state, &sid, |doc| Ok(doc.set_target(image).map(drop)?)).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaceBody {
    image: ImageRef,
    position: Point,
}

async fn place_reference(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let PlaceBody { image, position } = parse(&body)?;
    require_uploaded(&*state.slot(&sid)?, &image)?;
    mutate(&state, &sid, |doc| {
        Ok(doc.place_reference(image, position).map(drop)?)
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveBody {
    position: Point,
}

async fn move_reference(
    State(state): State<AppState>,
    Path((sid, image)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let image = parse_ref(&image)?;
    let MoveBody { position } = parse(&body)?;
    mutate(&state, &sid, |doc| {
        Ok(doc.move_reference(&image, position).map(drop)?)
    })
    .await
}

async fn remove_reference(
    State(state): State<AppState>,
    Path((sid, image)): Path<(String, String)>,
) -> Result<Json<SessionView>, ApiError> {
    let image = parse_ref(&image)?;
    mutate(&state, &sid, |doc| Ok(doc.remove_reference(&image).map(drop)?)).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributesBody {
    attributes: Vec<String>,
}

async fn select_attributes(
    State(state): State<AppState>,
    Path((sid, image)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let image = parse_ref(&image)?;
    let AttributesBody { attributes } = parse(&body)?;
    mutate(&state, &sid, |doc| {
        Ok(doc.select_attributes(&image, &attributes).map(drop)?)
    })
    .await
}

async fn undo(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(&state, &sid, |doc| {
        doc.undo();
        Ok(())
    })
    .await
}

async fn redo(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(&state, &sid, |doc| {
        doc.redo();
        Ok(())
    })
    .await
}

async fn reset(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(&state, &sid, |doc| Ok(doc.reset().map(drop)?)).await
}

#[derive(Deserialize)]
struct PreviewQuery {
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
pub struct Preview {
    pub position: Point,
    pub distance: f64,
    pub weight: f64,
    pub line: LineStyle,
}

async fn preview(
    State(state): State<AppState>,
    Path(sid): Path<String>,
    Query(q): Query<PreviewQuery>,
) -> Result<Json<Preview>, ApiError> {
    if !q.x.is_finite() || !q.y.is_finite() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "position must be finite"));
    }
    let slot = state.slot(&sid)?;
    let doc = slot.doc.lock().await;
    let s = doc.current();
    let position = s.canvas.clamp(Point::new(q.x, q.y));
    let weight = s.preview_weight(position);
    Ok(Json(Preview {
        position,
        distance: position.distance(s.target_position()),
        weight: weight.value(),
        line: LineStyle::for_weight(weight),
    }))
}

#[derive(Serialize, Deserialize)]
pub struct Generated {
    pub job: JobRecord,
    pub entry: HistoryView,
    pub session: SessionView,
}

async fn generate(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Response, ApiError> {
    let slot = state.slot(&sid)?;
    let (plan, snapshot) = {
        let doc = slot.doc.lock().await;
        (doc.transfer_plan()?, doc.current().clone())
    };
    let job = JobRecord::queued();
    slot.jobs.lock().push(job.clone());
    slot.save_jobs().map_err(ApiError::storage)?;

    let task = tokio::spawn(jobs::run(
        state.clone(),
        slot.clone(),
        job.id.clone(),
        plan,
        snapshot,
    ));
    if state.inner.kind == BackendKind::Real {
        return Ok((StatusCode::ACCEPTED, Json(job)).into_response());
    }

    let history_id = task
        .await
        .map_err(|e| ApiError::storage(format!("generation task: {e}")))??;
    let doc = slot.doc.lock().await;
    let entry = doc
        .history_entry(history_id)
        .expect("committed by the job")
        .into();
    let job = slot.job(&job.id).expect("job recorded");
    Ok(Json(Generated {
        job,
        entry,
        session: SessionView::from(&*doc),
    })
    .into_response())
}

async fn job_status(
    State(state): State<AppState>,
    Path((sid, job)): Path<(String, String)>,
) -> Result<Json<JobRecord>, ApiError> {
    let slot = state.slot(&sid)?;
    slot.job(&job).map(Json).ok_or_else(|| ApiError::job_not_found(&job))
}

async fn list_history(
    State(state): State<AppState>,
    Path(sid): Path<String>,
) -> Result<Json<Vec<HistoryView>>, ApiError> {
    let slot = state.slot(&sid)?;
    let doc = slot.doc.lock().await;
    Ok(Json(doc.history().iter().map(HistoryView::from).collect()))
}

async fn history_image(
    State(state): State<AppState>,
    Path((sid, id)): Path<(String, u64)>,
) -> Result<Response, ApiError> {
    let slot = state.slot(&sid)?;
    let image = {
        let doc = slot.doc.lock().await;
        doc.history_entry(id)
            .ok_or(crate::session::SessionError::HistoryNotFound(id))?
            .result_image()
            .clone()
    };
    let bytes = slot.store.get(&image).map_err(ApiError::storage)?;
    Ok(image_response(bytes))
}

async fn restore_history(
    State(state): State<AppState>,
    Path((sid, id)): Path<(String, u64)>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(&state, &sid, |doc| Ok(doc.restore_history(id).map(drop)?)).await
}
