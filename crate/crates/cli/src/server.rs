//! HTTP API over one immutable bundle snapshot.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cdss_core::aggregation::Scheme;
use cdss_core::dataset::FeatureKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::bundle::{BundleError, BundleMetadata, ModelBundle};
use crate::input::{instance_from_named, InputError};

/// A loaded bundle together with its fingerprint.
#[derive(Debug)]
pub struct Snapshot {
    pub bundle: ModelBundle,
    pub fingerprint: String,
}

impl Snapshot {
    pub fn new(bundle: ModelBundle) -> Self {
        let fingerprint = bundle.fingerprint();
        Self { bundle, fingerprint }
    }
}

#[derive(Debug)]
pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    source: Option<PathBuf>,
    loaded_mtime: RwLock<Option<SystemTime>>,
}

fn mtime(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

impl AppState {
    pub fn new(bundle: ModelBundle) -> Self {
        Self { current: RwLock::new(Arc::new(Snapshot::new(bundle))), source: None, loaded_mtime: RwLock::new(None) }
    }

    pub fn from_path(path: &Path) -> Result<Self, BundleError> {
        let stamp = mtime(path);
        let bundle = ModelBundle::load(path)?;
        Ok(Self {
            current: RwLock::new(Arc::new(Snapshot::new(bundle))),
            source: Some(path.to_path_buf()),
            loaded_mtime: RwLock::new(stamp),
        })
    }

    /// The snapshot in effect now. Callers keep it for the whole request.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn swap(&self, bundle: ModelBundle) {
        let next = Arc::new(Snapshot::new(bundle));
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = next;
    }

    /// Reloads the source file if its modification time changed. A bundle
    /// that fails to load leaves the current snapshot in place.
    pub fn reload_if_changed(&self) -> Result<bool, BundleError> {
        let Some(path) = &self.source else { return Ok(false) };
        let stamp = mtime(path);
        if stamp == *self.loaded_mtime.read().unwrap_or_else(|e| e.into_inner()) {
            return Ok(false);
        }
        *self.loaded_mtime.write().unwrap_or_else(|e| e.into_inner()) = stamp;
        let bundle = ModelBundle::load(path)?;
        self.swap(bundle);
        Ok(true)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

fn error(status: StatusCode, message: impl Into<String>, details: Vec<String>) -> Response {
    (status, Json(ErrorBody { error: message.into(), details })).into_response()
}

fn internal(context: &str, err: impl std::fmt::Display) -> Response {
    eprintln!("internal error in {context}: {err}");
    error(StatusCode::INTERNAL_SERVER_ERROR, "internal error", vec![])
}

fn input_error(err: InputError) -> Response {
    let status = if err.is_out_of_schema() { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::BAD_REQUEST };
    let details = match &err {
        InputError::Missing(names) | InputError::Unknown(names) => names.clone(),
        InputError::InvalidLevel { name, .. } => vec![name.clone()],
        InputError::Malformed(_) => vec![],
    };
    error(status, err.to_string(), details)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RuleSummary {
    pub text: String,
    pub global_accuracy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub format_version: u32,
    pub fingerprint: String,
    pub feature_names: Vec<String>,
    pub rules: Vec<RuleSummary>,
    pub metadata: BundleMetadata,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SchemaInfo {
    pub label: String,
    pub features: Vec<FeatureInfo>,
    pub schemes: Vec<Scheme>,
    pub default_scheme: Scheme,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub fingerprint: String,
    pub format_version: u32,
    pub n_rules: usize,
}

async fn model(State(state): State<Arc<AppState>>) -> Json<ModelInfo> {
    let snap = state.snapshot();
    let b = &snap.bundle;
    let names = b.feature_names();
    let set = &b.model.decision_set;
    let rules = set
        .rules()
        .iter()
        .zip(set.global_accuracies())
        .map(|(r, &a)| RuleSummary { text: r.render(names), global_accuracy: a })
        .collect();
    Json(ModelInfo {
        format_version: b.format_version,
        fingerprint: snap.fingerprint.clone(),
        feature_names: names.to_vec(),
        rules,
        metadata: b.metadata.clone(),
    })
}

async fn schema(State(state): State<Arc<AppState>>) -> Json<SchemaInfo> {
    let snap = state.snapshot();
    let b = &snap.bundle;
    let features = b
        .feature_summary
        .iter()
        .map(|f| FeatureInfo { name: f.name.clone(), kind: f.kind, min: f.min, max: f.max, levels: f.levels.clone() })
        .collect();
    Json(SchemaInfo {
        label: b.schema.label.name.clone(),
        features,
        schemes: Scheme::ALL.to_vec(),
        default_scheme: Scheme::Personalized,
    })
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let snap = state.snapshot();
    Json(Health {
        status: "ok".into(),
        fingerprint: snap.fingerprint.clone(),
        format_version: snap.bundle.format_version,
        n_rules: snap.bundle.model.decision_set.len(),
    })
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("request body is not valid JSON: {e}"), vec![]),
    };
    let Some(obj) = value.as_object() else {
        return error(StatusCode::BAD_REQUEST, "request body must be a JSON object", vec![]);
    };
    if let Some(extra) = obj.keys().find(|k| *k != "features" && *k != "scheme") {
        return error(StatusCode::BAD_REQUEST, format!("unexpected field {extra:?}"), vec![]);
    }
    let Some(Value::Object(features)) = obj.get("features") else {
        return error(StatusCode::BAD_REQUEST, "\"features\" must be an object keyed by feature name", vec![]);
    };
    let scheme = match obj.get("scheme") {
        None | Some(Value::Null) => Scheme::Personalized,
        Some(Value::String(s)) => match s.parse::<Scheme>() {
            Ok(s) => s,
            Err(_) => {
                let known = Scheme::ALL.iter().map(|s| s.name().to_string()).collect();
                return error(StatusCode::BAD_REQUEST, format!("unknown scheme {s:?}"), known);
            }
        },
        Some(_) => return error(StatusCode::BAD_REQUEST, "\"scheme\" must be a string", vec![]),
    };
    let snap = state.snapshot();
    let instance = match instance_from_named(&snap.bundle, features) {
        Ok(x) => x,
        Err(e) => return input_error(e),
    };
    match snap.bundle.predict(&instance, scheme) {
        Ok(result) => Json(result).into_response(),
        Err(e) => internal("predict", e),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "not found", vec![])
}

fn panic_response(_: Box<dyn std::any::Any + Send + 'static>) -> Response {
    eprintln!("internal error: request handler panicked");
    error(StatusCode::INTERNAL_SERVER_ERROR, "internal error", vec![])
}

/// The API routes, with static files served from `static_dir` when given.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/model", get(model))
        .route("/api/schema", get(schema))
        .route("/api/health", get(health))
        .route("/api/predict", post(predict))
        .route("/api/{*rest}", get(not_found).post(not_found));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    app.layer(tower_http::catch_panic::CatchPanicLayer::custom(panic_response)).with_state(state)
}

/// Polls the bundle file and swaps in new versions.
pub fn spawn_reloader(state: Arc<AppState>, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tick.tick().await;
            let st = Arc::clone(&state);
            match tokio::task::spawn_blocking(move || st.reload_if_changed()).await {
                Ok(Ok(true)) => eprintln!("reloaded bundle, fingerprint {}", state.snapshot().fingerprint),
                Ok(Ok(false)) => {}
                Ok(Err(e)) => eprintln!("bundle reload failed, keeping previous snapshot: {e}"),
                Err(e) => eprintln!("bundle reload task failed: {e}"),
            }
        }
    })
}

pub async fn serve(
    state: Arc<AppState>,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    reload_every: Option<Duration>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    let reloader = reload_every.map(|d| spawn_reloader(Arc::clone(&state), d));
    let app = router(state, static_dir.as_deref());
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    if let Some(handle) = reloader {
        handle.abort();
    }
    result
}
