//! Local HTTP API backing the mesh builder UI.
//!
//! Every response echoes the parsed request under `request`. Validation
//! failures return 400 with per-field messages, numerical failures 422.

use crate::error::{CliError, CliResult};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gfield::fem::{assemble_precision, assess_correlation, AssessOptions, MaternParams};
use gfield::mesh::{build_mesh_zoned, Mesh, MeshConfig, Point};
use gfield::Gmrf;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use tower_http::services::ServeDir;

/// Number of factorized fields kept in memory.
pub const CACHE_CAPACITY: usize = 16;

const INDEX_HTML: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>gfield</title></head>
<body><h1>gfield</h1>
<p>API endpoints: <code>POST /api/mesh</code>, <code>POST /api/assess</code>, <code>POST /api/sample</code>.</p>
<p>Start with <code>--static-dir</code> to serve the mesh builder.</p>
</body></html>
"#;

/// Bounded FIFO cache from (mesh, parameters) digest to a factorized field.
#[derive(Default)]
struct FactorCache {
    entries: VecDeque<(String, Arc<Gmrf>)>,
}

impl FactorCache {
    fn get(&self, key: &str) -> Option<Arc<Gmrf>> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, g)| g.clone())
    }

    fn insert(&mut self, key: String, g: Arc<Gmrf>) {
        if self.get(&key).is_some() {
            return;
        }
        if self.entries.len() == CACHE_CAPACITY {
            self.entries.pop_front();
        }
        self.entries.push_back((key, g));
    }
}

#[derive(Clone, Default)]
struct AppState {
    cache: Arc<Mutex<FactorCache>>,
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn fields(errors: Vec<(String, String)>) -> Self {
        let fields: Vec<Value> = errors.iter().map(|(f, m)| json!({"field": f, "message": m})).collect();
        ApiError { status: StatusCode::BAD_REQUEST, body: json!({"error": "ValidationError", "message": "invalid request", "fields": fields}) }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self::fields(vec![(field.to_string(), message.into())])
    }
}

impl From<gfield::Error> for ApiError {
    fn from(e: gfield::Error) -> Self {
        let status = if e.is_numerical() { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::BAD_REQUEST };
        ApiError { status, body: json!({"error": e.kind(), "message": e.to_string()}) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Parsed JSON object whose fields are taken one at a time, collecting
/// errors per field.
struct Body {
    map: Map<String, Value>,
    errors: Vec<(String, String)>,
}

impl Body {
    fn parse(bytes: &[u8]) -> Result<Self, ApiError> {
        match serde_json::from_slice::<Value>(bytes) {
            Ok(Value::Object(map)) => Ok(Body { map, errors: vec![] }),
            Ok(_) => Err(ApiError::field("body", "expected a JSON object")),
            Err(e) => Err(ApiError::field("body", e.to_string())),
        }
    }

    fn take<T: DeserializeOwned>(&mut self, name: &str, required: bool) -> Option<T> {
        match self.map.get(name) {
            None | Some(Value::Null) => {
                if required {
                    self.errors.push((name.into(), "is required".into()));
                }
                None
            }
            Some(v) => match T::deserialize(v) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.errors.push((name.into(), e.to_string()));
                    None
                }
            },
        }
    }

    fn check(&mut self, name: &str, result: gfield::Result<()>) {
        if let Err(e) = result {
            self.errors.push((name.into(), e.to_string()));
        }
    }

    fn finish(self) -> Result<Value, ApiError> {
        if self.errors.is_empty() {
            Ok(Value::Object(self.map))
        } else {
            Err(ApiError::fields(self.errors))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigPatch {
    max_edge_inner: Option<f64>,
    max_edge_outer: Option<f64>,
    extension_distance: Option<f64>,
    min_angle: Option<f64>,
}

impl ConfigPatch {
    fn apply(self) -> MeshConfig {
        let d = MeshConfig::default();
        let inner = self.max_edge_inner.unwrap_or(d.max_edge_inner);
        MeshConfig {
            max_edge_inner: inner,
            max_edge_outer: self.max_edge_outer.unwrap_or(2.0 * inner),
            extension_distance: self.extension_distance.unwrap_or(d.extension_distance),
            min_angle: self.min_angle.unwrap_or(d.min_angle),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaternInput {
    range: f64,
    sigma: f64,
    #[serde(default = "one")]
    nu: f64,
}

fn one() -> f64 {
    1.0
}

fn take_mesh(body: &mut Body) -> Option<Mesh> {
    let mesh: Option<Mesh> = body.take("mesh", true);
    if let Some(m) = &mesh {
        body.check("mesh", m.validate());
    }
    mesh
}

fn take_matern(body: &mut Body) -> Option<MaternParams> {
    let p: Option<MaternInput> = body.take("matern_params", true);
    p.and_then(|p| match MaternParams::new(p.range, p.sigma, p.nu) {
        Ok(m) => Some(m),
        Err(e) => {
            body.errors.push(("matern_params".into(), e.to_string()));
            None
        }
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, body: json!({"error": "InternalError", "message": e.to_string()}) })?
}

async fn api_mesh(body: Bytes) -> ApiResult {
    let mut b = Body::parse(&body)?;
    let points: Option<Vec<Point>> = b.take("points", true);
    let boundary: Option<Vec<Point>> = b.take("boundary", false);
    let config = b.take::<ConfigPatch>("config", false).map_or_else(MeshConfig::default, ConfigPatch::apply);
    b.check("config", config.validate());
    let request = b.finish()?;
    let points = points.unwrap_or_default();
    blocking(move || {
        let built = build_mesh_zoned(&points, boundary.as_deref(), &config)?;
        let quality = built.mesh.quality(Some(&built.inner_triangle));
        Ok(Json(json!({
            "request": request,
            "mesh": built.mesh,
            "quality": quality,
            "inner_triangle": built.inner_triangle,
        })))
    })
    .await
}

/// Default assessment: 20 distance bins on `[0, 3 r]`, 40 reference nodes.
pub fn default_assess_options(range: f64) -> AssessOptions {
    AssessOptions { d_min: 0.0, d_max: 3.0 * range, n_bins: 20, max_refs: 40, region: None }
}

async fn api_assess(body: Bytes) -> ApiResult {
    let mut b = Body::parse(&body)?;
    let mesh = take_mesh(&mut b);
    let params = take_matern(&mut b);
    let options: Option<AssessOptions> = b.take("options", false);
    let request = b.finish()?;
    let (mesh, params) = (mesh.unwrap(), params.unwrap());
    let options = options.unwrap_or_else(|| default_assess_options(params.range));
    blocking(move || {
        let a = assess_correlation(&mesh, &params, &options)?;
        let mut v = serde_json::to_value(a).map_err(|e| ApiError::field("body", e.to_string()))?;
        v["request"] = request;
        v["metric"] = json!("mean_abs_error");
        Ok(Json(v))
    })
    .await
}

fn cache_key(mesh: &Mesh, params: &MaternParams) -> String {
    let text = serde_json::to_string(&(mesh, params)).unwrap_or_default();
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

async fn api_sample(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let mut b = Body::parse(&body)?;
    let mesh = take_mesh(&mut b);
    let params = take_matern(&mut b);
    let seed: Option<u64> = b.take("seed", true);
    let request = b.finish()?;
    let (mesh, params, seed) = (mesh.unwrap(), params.unwrap(), seed.unwrap());
    blocking(move || {
        let key = cache_key(&mesh, &params);
        let cached = state.cache.lock().expect("cache lock").get(&key);
        let gmrf = match cached {
            Some(g) => g,
            None => {
                let q = assemble_precision(&mesh, &params.to_spde()?, None, None)?;
                let g = Arc::new(Gmrf::new(q)?);
                state.cache.lock().expect("cache lock").insert(key, g.clone());
                g
            }
        };
        let field = gmrf.sample(1, seed).pop().unwrap_or_default();
        Ok(Json(json!({"request": request, "field": field})))
    })
    .await
}

/// Router with all endpoints; `static_dir` replaces the embedded index page.
pub fn router(static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/mesh", post(api_mesh))
        .route("/api/assess", post(api_assess))
        .route("/api/sample", post(api_sample))
        .with_state(AppState::default());
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    }
}

pub fn serve_blocking(host: &str, port: u16, static_dir: Option<PathBuf>) -> CliResult<()> {
    if let Some(d) = &static_dir {
        if !d.is_dir() {
            return Err(CliError::input(format!("{}: not a directory", d.display())));
        }
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::input(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(|e| CliError::input(format!("bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::input(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, router(static_dir)).await.map_err(|e| CliError::input(e.to_string()))
    })
}
