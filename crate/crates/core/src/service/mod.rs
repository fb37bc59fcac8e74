//! HTTP job service: mesh upload, region sets, asynchronous decomposition,
//! error and benchmark jobs, error heatmaps and zip export.
//!
//! | route | |
//! |---|---|
//! | `POST /meshes` | upload OBJ/STL (raw body or multipart `file` field) |
//! | `GET /meshes/{id}` | metadata; `GET /meshes/{id}/file` downloads the upload |
//! | `PUT /meshes/{id}/regions` | store a regions file after validation |
//! | `POST /jobs` | `{mesh_id, kind, params}` with kind `decompose`, `error_eval` or `bench` |
//! | `GET /jobs/{id}` | job status |
//! | `GET /jobs/{id}/result` | manifest and part URLs, or the report |
//! | `POST /evaluate/error` | coloured error samples of a finished decomposition |
//! | `GET /export/{job_id}` | zip of the part OBJ files and manifest |
//!
//! Errors are JSON `{"error": kind, "detail": message}` with status 404 for
//! unknown ids, 422 for invalid input, 409 for results of unfinished jobs
//! and 413 for uploads above the size limit.

mod store;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use store::{Job, JobKind, JobState, MeshRecord, Store};

use crate::bench::{build_scene, run_bench};
use crate::error::Error;
use crate::mesh::MeshFormat;
use crate::metrics::{error_samples_for, evaluate_regions, evaluation_regions, Colormap, ErrorSampleParams, DEFAULT_SAMPLES};
use crate::pipeline::{
    interactive_decomposition, read_decomposition, validate_regions, write_decomposition, Decomposition, Manifest,
    PipelineParams, RegionBox, MANIFEST_FILE,
};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD: usize = 100 * 1024 * 1024;
const MAX_SAMPLES: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Jobs allowed to run at once; the rest wait queued.
    pub max_jobs: usize,
    pub max_upload_bytes: usize,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("regacd-data"),
            max_jobs: 2,
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: Store,
    slots: Arc<Semaphore>,
    config: ServiceConfig,
}

impl AppState {
    pub fn open(config: ServiceConfig) -> crate::Result<AppState> {
        if config.max_jobs == 0 {
            return Err(Error::InvalidParams("max_jobs must be at least 1".into()));
        }
        let store = Store::open(&config.data_dir)?;
        let slots = Arc::new(Semaphore::new(config.max_jobs));
        Ok(AppState { inner: Arc::new(Inner { store, slots, config }) })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }
}

/// The service's routes with CORS and the upload size limit applied.
pub fn router(state: AppState) -> Router {
    let cors = match &state.inner.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(AllowOrigin::exact(v)),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let limit = state.inner.config.max_upload_bytes;
    Router::new()
        .route("/meshes", post(upload_mesh))
        .route("/meshes/{id}", get(get_mesh))
        .route("/meshes/{id}/file", get(get_mesh_file))
        .route("/meshes/{id}/regions", put(put_regions))
        .route("/jobs", post(submit_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/result", get(get_result))
        .route("/jobs/{id}/files/{name}", get(get_job_file))
        .route("/evaluate/error", post(evaluate_error))
        .route("/export/{job_id}", get(export_job))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

/// Runs the service until the process is stopped.
pub async fn serve(config: ServiceConfig) -> crate::Result<()> {
    let addr = format!("{}:{}", config.host, config.port);
    let app = router(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Error::io(&addr, e))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, app).await.map_err(|e| Error::io(&addr, e))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, detail: impl Into<String>) -> Self {
        ApiError { status, kind: kind.into(), detail: detail.into() }
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("unknown {what} {id:?}"))
    }

    fn invalid(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest", detail)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() || matches!(e, Error::NoSamplesInRegion(_) | Error::ClearanceViolation(_)) {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "detail": self.detail }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct UploadQuery {
    format: Option<MeshFormat>,
    name: Option<String>,
    force: bool,
}

async fn upload_mesh(State(st): State<AppState>, Query(q): Query<UploadQuery>, req: Request) -> ApiResult<Json<Value>> {
    let multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let (bytes, file_name) = if multipart {
        let mut mp = Multipart::from_request(req, &st)
            .await
            .map_err(|e| ApiError::new(e.status(), "InvalidUpload", e.body_text()))?;
        loop {
            let field = mp.next_field().await.map_err(|e| ApiError::new(e.status(), "InvalidUpload", e.body_text()))?;
            let Some(field) = field else {
                return Err(ApiError::invalid("multipart upload has no file field"));
            };
            if field.file_name().is_some() || field.name() == Some("file") {
                let name = field.file_name().map(str::to_owned);
                let data = field.bytes().await.map_err(|e| ApiError::new(e.status(), "InvalidUpload", e.body_text()))?;
                break (data, name);
            }
        }
    } else {
        let data = Bytes::from_request(req, &st)
            .await
            .map_err(|e| ApiError::new(e.status(), "InvalidUpload", e.body_text()))?;
        (data, None)
    };
    let ext_format = file_name
        .as_deref()
        .and_then(|n| Path::new(n).extension()?.to_str()?.parse::<MeshFormat>().ok());
    let format = q.format.or(ext_format).unwrap_or(MeshFormat::Auto);
    let name = q.name.or(file_name);
    let state = st.clone();
    let rec = blocking(move || state.store().add_mesh(&bytes, format, name, q.force)).await?;
    Ok(Json(json!({ "mesh_id": rec.id, "validation": rec.validation })))
}

fn mesh_record(st: &AppState, id: &str) -> ApiResult<MeshRecord> {
    st.store().mesh(id).ok_or_else(|| ApiError::not_found("mesh", id))
}

async fn get_mesh(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let rec = mesh_record(&st, &id)?;
    let mut v = serde_json::to_value(&rec).expect("record serializes");
    v["download"] = json!(format!("/meshes/{id}/file"));
    Ok(Json(v))
}

async fn get_mesh_file(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let rec = mesh_record(&st, &id)?;
    let state = st.clone();
    let r = rec.clone();
    let bytes = blocking(move || state.store().mesh_bytes(&r)).await?;
    let (mime, ext) = match rec.format {
        MeshFormat::Stl => ("model/stl", "stl"),
        _ => ("model/obj", "obj"),
    };
    let disposition = format!("attachment; filename=\"{id}.{ext}\"");
    Ok(([(header::CONTENT_TYPE, mime.to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes).into_response())
}

async fn put_regions(State(st): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let rec = mesh_record(&st, &id)?;
    let params = PipelineParams::from_json(std::str::from_utf8(&body).map_err(|e| ApiError::invalid(e.to_string()))?)?;
    let state = st.clone();
    let report = blocking(move || {
        let mesh = state.store().load_mesh(&rec)?;
        params.validate()?;
        let report = validate_regions(&mesh, &params.regions)?;
        state.store().set_regions(&rec.id, params)?;
        Ok(report)
    })
    .await?;
    Ok(Json(json!({ "valid": true, "warnings": report.warnings(), "report": report })))
}

#[derive(Debug, Deserialize)]
struct JobRequest {
    mesh_id: String,
    kind: JobKind,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(default)]
struct EvalJobParams {
    /// Id of a finished decompose job.
    decomposition: String,
    n: usize,
    seed: u64,
}

impl Default for EvalJobParams {
    fn default() -> Self {
        EvalJobParams { decomposition: String::new(), n: DEFAULT_SAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(default)]
struct BenchJobParams {
    decomposition: String,
    steps: usize,
    seed: u64,
}

impl Default for BenchJobParams {
    fn default() -> Self {
        BenchJobParams { decomposition: String::new(), steps: 100, seed: 0 }
    }
}

/// Checks that `id` names a finished decompose job of `mesh_id`.
fn finished_decomposition(st: &AppState, id: &str, mesh_id: &str) -> ApiResult<Job> {
    let job = st.store().job(id).ok_or_else(|| ApiError::invalid(format!("unknown decomposition job {id:?}")))?;
    if job.kind != JobKind::Decompose {
        return Err(ApiError::invalid(format!("job {id:?} is not a decompose job")));
    }
    if job.mesh_id != mesh_id {
        return Err(ApiError::invalid(format!("job {id:?} decomposed a different mesh")));
    }
    if job.state != JobState::Done {
        return Err(ApiError::new(StatusCode::CONFLICT, "JobNotDone", format!("decomposition {id:?} is not done")));
    }
    Ok(job)
}

async fn submit_job(State(st): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: JobRequest = parse_json(&body)?;
    let rec = mesh_record(&st, &req.mesh_id)?;
    let params = match req.kind {
        JobKind::Decompose => {
            let params: PipelineParams = if req.params.is_null() {
                rec.regions.clone().unwrap_or_default()
            } else {
                serde_json::from_value(req.params).map_err(|e| ApiError::invalid(e.to_string()))?
            };
            let state = st.clone();
            let p = params.clone();
            blocking(move || {
                p.validate()?;
                let mesh = state.store().load_mesh(&rec)?;
                validate_regions(&mesh, &p.regions).map(|_| ())
            })
            .await?;
            serde_json::to_value(params)
        }
        JobKind::ErrorEval => {
            let p: EvalJobParams = serde_json::from_value(req.params).map_err(|e| ApiError::invalid(e.to_string()))?;
            if p.n == 0 || p.n > MAX_SAMPLES {
                return Err(ApiError::invalid(format!("n must be in 1..={MAX_SAMPLES}")));
            }
            finished_decomposition(&st, &p.decomposition, &req.mesh_id)?;
            serde_json::to_value(p)
        }
        JobKind::Bench => {
            let p: BenchJobParams = serde_json::from_value(req.params).map_err(|e| ApiError::invalid(e.to_string()))?;
            finished_decomposition(&st, &p.decomposition, &req.mesh_id)?;
            serde_json::to_value(p)
        }
    }
    .expect("params serialize");
    let job = Job {
        id: uuid::Uuid::new_v4().simple().to_string(),
        kind: req.kind,
        state: JobState::Queued,
        progress: 0.0,
        mesh_id: req.mesh_id,
        params,
        result: None,
        error: None,
    };
    let id = job.id.clone();
    st.store().insert_job(job)?;
    spawn_job(st, id.clone());
    Ok(Json(json!({ "job_id": id })))
}

fn spawn_job(st: AppState, id: String) {
    tokio::spawn(async move {
        let Ok(_permit) = st.inner.slots.clone().acquire_owned().await else { return };
        if let Err(e) = st.store().update_job(&id, |j| j.state = JobState::Running) {
            log::error!("job {id}: {e}");
        }
        let state = st.clone();
        let job_id = id.clone();
        let outcome = tokio::task::spawn_blocking(move || run_job(state.store(), &job_id)).await;
        let outcome = match outcome {
            Ok(r) => r.map_err(|e| e.to_string()),
            Err(e) => Err(format!("job panicked: {e}")),
        };
        let update = st.store().update_job(&id, |j| match outcome {
            Ok(path) => {
                j.state = JobState::Done;
                j.progress = 1.0;
                j.result = Some(path);
            }
            Err(msg) => {
                log::warn!("job {}: {msg}", j.id);
                j.state = JobState::Failed;
                j.error = Some(msg);
            }
        });
        if let Err(e) = update {
            log::error!("job {id}: {e}");
        }
    });
}

fn load_job_decomposition(store: &Store, id: &str) -> crate::Result<Decomposition> {
    read_decomposition(&store.dir().join(Store::job_dir(id)))
}

/// Runs a job to completion and returns its result path relative to the
/// data directory.
fn run_job(store: &Store, id: &str) -> crate::Result<String> {
    let job = store.job(id).ok_or_else(|| Error::InvalidParams(format!("job {id} vanished")))?;
    let rec = store.mesh(&job.mesh_id).ok_or_else(|| Error::InvalidParams("mesh vanished".into()))?;
    let mesh = store.load_mesh(&rec)?;
    let params_err = |e: serde_json::Error| Error::InvalidParams(e.to_string());
    let dir = Store::job_dir(id);
    let abs = store.dir().join(&dir);
    let write_report = |value: Value| -> crate::Result<String> {
        std::fs::create_dir_all(&abs).map_err(|e| Error::io(&abs, e))?;
        let path = abs.join("result.json");
        std::fs::write(&path, serde_json::to_string_pretty(&value).expect("report serializes"))
            .map_err(|e| Error::io(&path, e))?;
        Ok(format!("{dir}/result.json"))
    };
    match job.kind {
        JobKind::Decompose => {
            let params: PipelineParams = serde_json::from_value(job.params).map_err(params_err)?;
            let decomp = interactive_decomposition(&mesh, &params)?;
            write_decomposition(&decomp, &abs)?;
            Ok(format!("{dir}/{MANIFEST_FILE}"))
        }
        JobKind::ErrorEval => {
            let p: EvalJobParams = serde_json::from_value(job.params).map_err(params_err)?;
            let decomp = load_job_decomposition(store, &p.decomposition)?;
            let regions = evaluation_regions(&mesh, &decomp)?;
            let report = evaluate_regions(&mesh, &decomp, &regions, p.n, p.seed)?;
            write_report(serde_json::to_value(report).expect("report serializes"))
        }
        JobKind::Bench => {
            let p: BenchJobParams = serde_json::from_value(job.params).map_err(params_err)?;
            let decomp = load_job_decomposition(store, &p.decomposition)?;
            let scene = build_scene(&decomp, p.seed)?;
            let report = run_bench(&scene, p.steps, p.seed)?;
            write_report(serde_json::to_value(report).expect("report serializes"))
        }
    }
}

fn job_record(st: &AppState, id: &str) -> ApiResult<Job> {
    st.store().job(id).ok_or_else(|| ApiError::not_found("job", id))
}

fn done_job(st: &AppState, id: &str) -> ApiResult<Job> {
    let job = job_record(st, id)?;
    match job.state {
        JobState::Done => Ok(job),
        JobState::Failed => Err(ApiError::new(
            StatusCode::CONFLICT,
            "JobFailed",
            job.error.unwrap_or_else(|| "job failed".into()),
        )),
        s => Err(ApiError::new(StatusCode::CONFLICT, "JobNotDone", format!("job is {s:?}").to_lowercase())),
    }
}

async fn get_job(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Job>> {
    job_record(&st, &id).map(Json)
}

fn read_manifest(store: &Store, id: &str) -> crate::Result<Manifest> {
    let path = store.dir().join(Store::job_dir(id)).join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

async fn get_result(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let job = done_job(&st, &id)?;
    let state = st.clone();
    if job.kind == JobKind::Decompose {
        let manifest = blocking(move || read_manifest(state.store(), &job.id)).await?;
        let files: Vec<String> = manifest
            .parts
            .iter()
            .map(|p| &p.file)
            .chain(manifest.exact_meshes.iter().map(|e| &e.file))
            .map(|f| format!("/jobs/{id}/files/{f}"))
            .collect();
        return Ok(Json(json!({ "job_id": id, "manifest": manifest, "files": files })).into_response());
    }
    let rel = job.result.unwrap_or_default();
    let text = blocking(move || {
        let path = state.store().dir().join(rel);
        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

fn plain_file_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !name.starts_with('.')
}

async fn get_job_file(State(st): State<AppState>, UrlPath((id, name)): UrlPath<(String, String)>) -> ApiResult<Response> {
    let job = done_job(&st, &id)?;
    if !plain_file_name(&name) {
        return Err(ApiError::not_found("file", &name));
    }
    let path = st.store().dir().join(Store::job_dir(&job.id)).join(&name);
    let bytes = tokio::fs::read(&path).await.map_err(|_| ApiError::not_found("file", &name))?;
    let mime = if name.ends_with(".json") { "application/json" } else { "model/obj" };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

fn zip_decomposition(dir: &Path, manifest: &Manifest) -> crate::Result<Vec<u8>> {
    let mut zip = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    let zip_err = |e: zip::result::ZipError| Error::io(dir, std::io::Error::other(e));
    let files = std::iter::once(MANIFEST_FILE)
        .chain(manifest.parts.iter().map(|p| p.file.as_str()))
        .chain(manifest.exact_meshes.iter().map(|e| e.file.as_str()));
    for name in files {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        zip.start_file(name, opts).map_err(zip_err)?;
        zip.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(zip.finish().map_err(zip_err)?.into_inner())
}

async fn export_job(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let job = done_job(&st, &id)?;
    if job.kind != JobKind::Decompose {
        return Err(ApiError::invalid(format!("job {id:?} has no parts to export")));
    }
    let state = st.clone();
    let bytes = blocking(move || {
        let manifest = read_manifest(state.store(), &job.id)?;
        zip_decomposition(&state.store().dir().join(Store::job_dir(&job.id)), &manifest)
    })
    .await?;
    let disposition = format!("attachment; filename=\"{id}.zip\"");
    Ok(([(header::CONTENT_TYPE, "application/zip".to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes)
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ErrorRequest {
    mesh_id: String,
    /// Id of a finished decompose job.
    decomposition: String,
    /// Boxes the samples are restricted to when `on_approx` is false.
    #[serde(default)]
    regions: Vec<RegionBox>,
    #[serde(default)]
    on_approx: bool,
    #[serde(default = "default_samples")]
    n: usize,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    colormap: Colormap,
    #[serde(default)]
    seed: u64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

async fn evaluate_error(State(st): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: ErrorRequest = parse_json(&body)?;
    let rec = mesh_record(&st, &req.mesh_id)?;
    if req.n == 0 || req.n > MAX_SAMPLES {
        return Err(ApiError::invalid(format!("n must be in 1..={MAX_SAMPLES}")));
    }
    let job = finished_decomposition(&st, &req.decomposition, &req.mesh_id)?;
    let filter_boxes = req.regions.iter().map(|r| r.aabb()).collect::<crate::Result<Vec<_>>>()?;
    let params = ErrorSampleParams {
        n: req.n,
        colormap: req.colormap,
        alpha: req.alpha,
        beta: req.beta,
        filter_boxes,
        on_approx: req.on_approx,
        seed: req.seed,
    };
    let state = st.clone();
    let set = blocking(move || {
        let mesh = state.store().load_mesh(&rec)?;
        let decomp = load_job_decomposition(state.store(), &job.id)?;
        error_samples_for(&mesh, &decomp, &params)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], set.to_json()).into_response())
}
