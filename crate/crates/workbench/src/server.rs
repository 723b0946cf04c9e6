//! HTTP labeling service over a manifest.
//!
//! Reads share a lock; every label write takes it exclusively, rewrites the
//! manifest atomically and only then answers. Each response carries the
//! manifest revision in the `x-manifest-revision` header and, for JSON
//! bodies, a `revision` field.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::manifest::{LabelUpdate, Manifest, ManifestRecord, Status, CLASS_TABLE, NUM_CLASSES};
use crate::{Result, WorkbenchError};

pub const PAGE_SIZE: usize = 24;
pub const REVISION_HEADER: &str = "x-manifest-revision";

pub struct AppState {
    manifest_path: PathBuf,
    /// Directory the manifest's relative image paths resolve against.
    root: PathBuf,
    manifest: RwLock<Manifest>,
}

impl AppState {
    pub fn open(manifest_path: &Path) -> Result<Arc<Self>> {
        let manifest = Manifest::load(manifest_path)?;
        let root = manifest_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok(Arc::new(AppState {
            manifest_path: manifest_path.to_path_buf(),
            root,
            manifest: RwLock::new(manifest),
        }))
    }
}

fn reply(status: StatusCode, revision: u64, mut body: Value) -> Response {
    if let Value::Object(map) = &mut body {
        map.insert("revision".into(), json!(revision));
    }
    let mut resp = (status, axum::Json(body)).into_response();
    resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(revision));
    resp
}

fn error(status: StatusCode, revision: u64, message: impl Into<String>) -> Response {
    reply(
        status,
        revision,
        json!({ "error": message.into(), "retryable": status == StatusCode::CONFLICT }),
    )
}

fn object_json(r: &ManifestRecord) -> Value {
    let mut v = serde_json::to_value(r).expect("records serialize");
    let id = &r.object_id;
    v["status"] = json!(r.label.status());
    v["images"] = json!({
        "crop": format!("/api/objects/{id}/image?kind=crop"),
        "mask": format!("/api/objects/{id}/image?kind=mask"),
        "green": format!("/api/objects/{id}/image?kind=green"),
    });
    v
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
    page: Option<usize>,
}

async fn list_objects(State(st): State<Arc<AppState>>, Query(q): Query<ListQuery>) -> Response {
    let m = st.manifest.read().await;
    let rev = m.revision();
    let status = match q.status.as_deref().filter(|s| !s.is_empty() && *s != "all") {
        None => None,
        Some(s) => match s.parse::<Status>() {
            Ok(s) => Some(s),
            Err(e) => return error(StatusCode::BAD_REQUEST, rev, e.to_string()),
        },
    };
    let page = q.page.unwrap_or(1);
    if page == 0 {
        return error(StatusCode::BAD_REQUEST, rev, "pages start at 1");
    }
    let matching: Vec<&ManifestRecord> = m
        .records()
        .iter()
        .filter(|r| status.is_none_or(|s| r.label.status() == s))
        .collect();
    let objects: Vec<Value> = matching
        .iter()
        .skip((page - 1) * PAGE_SIZE)
        .take(PAGE_SIZE)
        .map(|r| object_json(r))
        .collect();
    reply(
        StatusCode::OK,
        rev,
        json!({
            "page": page,
            "page_size": PAGE_SIZE,
            "total": matching.len(),
            "pages": matching.len().div_ceil(PAGE_SIZE),
            "objects": objects,
        }),
    )
}

async fn get_object(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let m = st.manifest.read().await;
    match m.get(&id) {
        Some(r) => reply(StatusCode::OK, m.revision(), json!({ "object": object_json(r) })),
        None => error(StatusCode::NOT_FOUND, m.revision(), format!("unknown object {id:?}")),
    }
}

#[derive(Deserialize)]
struct ImageQuery {
    kind: Option<String>,
}

async fn get_image(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ImageQuery>,
) -> Response {
    let (rel, rev) = {
        let m = st.manifest.read().await;
        let rev = m.revision();
        let Some(r) = m.get(&id) else {
            return error(StatusCode::NOT_FOUND, rev, format!("unknown object {id:?}"));
        };
        let rel = match q.kind.as_deref().unwrap_or("crop") {
            "crop" => r.crop.clone(),
            "mask" => r.mask.clone(),
            "green" => r.green_crop.clone(),
            other => return error(StatusCode::BAD_REQUEST, rev, format!("unknown image kind {other:?}")),
        };
        (rel, rev)
    };
    match tokio::fs::read(st.root.join(&rel)).await {
        Ok(bytes) => {
            let mut resp = Response::new(Body::from(bytes));
            let h = resp.headers_mut();
            h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
            h.insert(REVISION_HEADER, HeaderValue::from(rev));
            resp
        }
        Err(e) => error(StatusCode::NOT_FOUND, rev, format!("{rel}: {e}")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    class: Option<i64>,
    #[serde(default)]
    discard: bool,
    #[serde(default)]
    unlabel: bool,
    /// Record revision the client last saw.
    revision: Option<u64>,
    /// Manifest revision the client last saw.
    manifest_revision: Option<u64>,
    annotator: Option<String>,
}

async fn post_label(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let mut m = st.manifest.write().await;
    let rev = m.revision();
    let req: LabelRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, rev, format!("bad label request: {e}")),
    };
    let update = match (req.class, req.discard, req.unlabel) {
        (Some(c), false, false) if (1..=NUM_CLASSES as i64).contains(&c) => LabelUpdate::Class(c as u8),
        (Some(c), false, false) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                rev,
                format!("class must be 1..={NUM_CLASSES} or a discard, got {c}"),
            )
        }
        (None, true, false) => LabelUpdate::Discard,
        (None, false, true) => LabelUpdate::Unlabel,
        _ => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                rev,
                "give exactly one of class, discard or unlabel",
            )
        }
    };
    let Some(before) = m.get(&id).cloned() else {
        return error(StatusCode::NOT_FOUND, rev, format!("unknown object {id:?}"));
    };
    let stale = req.revision.is_some_and(|r| r != before.revision)
        || req.manifest_revision.is_some_and(|r| r != rev);
    if stale {
        return reply(
            StatusCode::CONFLICT,
            rev,
            json!({
                "error": "stale revision, reload and retry",
                "retryable": true,
                "object": object_json(&before),
            }),
        );
    }
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    if let Err(e) = m.apply(&id, update, req.annotator.as_deref(), &now) {
        return error(StatusCode::UNPROCESSABLE_ENTITY, rev, e.to_string());
    }
    if let Err(e) = m.save(&st.manifest_path) {
        let records = m
            .records()
            .iter()
            .map(|r| if r.object_id == id { before.clone() } else { r.clone() })
            .collect();
        *m = Manifest::new(records).expect("ids unchanged");
        return error(StatusCode::INTERNAL_SERVER_ERROR, m.revision(), format!("manifest not saved: {e}"));
    }
    let r = m.get(&id).expect("just labeled");
    reply(StatusCode::OK, m.revision(), json!({ "object": object_json(r) }))
}

async fn progress(State(st): State<Arc<AppState>>) -> Response {
    let m = st.manifest.read().await;
    let p = serde_json::to_value(m.progress()).expect("progress serializes");
    reply(StatusCode::OK, m.revision(), p)
}

async fn classes(State(st): State<Arc<AppState>>) -> Response {
    let m = st.manifest.read().await;
    let classes: Vec<Value> = CLASS_TABLE
        .iter()
        .map(|c| json!({ "id": c.id, "name": c.name, "reference_count": c.reference_count, "key": c.id.to_string() }))
        .collect();
    reply(StatusCode::OK, m.revision(), json!({ "classes": classes, "discard_key": "d", "unlabel_key": "u" }))
}

/// The API, plus static files from `ui` for every other path.
pub fn router(state: Arc<AppState>, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/objects", get(list_objects))
        .route("/api/objects/{id}", get(get_object))
        .route("/api/objects/{id}/image", get(get_image))
        .route("/api/objects/{id}/label", post(post_label))
        .route("/api/progress", get(progress))
        .route("/api/classes", get(classes))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(manifest: &Path, addr: SocketAddr, ui: Option<&Path>) -> Result<()> {
    let state = AppState::open(manifest)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| WorkbenchError::Invalid(format!("cannot listen on {addr}: {e}")))?;
    eprintln!("serving {} on http://{addr}", manifest.display());
    axum::serve(listener, router(state, ui))
        .await
        .map_err(|e| WorkbenchError::Invalid(format!("server error: {e}")))
}
