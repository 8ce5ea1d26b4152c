//! HTTP API backing the review UI. Reads run concurrently; dataset edits,
//! settings changes and jobs are serialized by one writer lock.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use srm_core::dataset::{dataset_stats, merge_records, DataOut, Dataset, DatasetError, Discovery, MethodRecord};
use srm_core::labels::{Label, LabelSet};
use srm_core::ml::ModelConfig;
use srm_core::program::parse_signature;
use srm_core::taint::{AnalysisConfig, Finding};
use tokio::sync::Mutex;

use crate::config::{load_settings, prepare_output, require_dir, save_settings, write_atomic, ConfigError, PipelineConfig, Settings};
use crate::jobs::{Job, JobError, JobObserver, JobTable};
use crate::pipeline::{self, check_dataset_file, JobKind, RunOutput};
use crate::project::{read_excerpt, ProjectError};

/// Error body shared by every route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub path: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, path: Option<String>) -> ApiError {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            path,
        }
    }

    fn bad_request(message: impl Into<String>, path: Option<&str>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message, path.map(Into::into))
    }

    fn validation(message: impl Into<String>, path: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message, Some(path.into()))
    }

    fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message, None)
    }

    fn conflict(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, "conflict", message, None)
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        match e {
            JobError::NotFound(_) => ApiError::not_found(e.to_string()),
            JobError::Conflict(..) | JobError::Transition { .. } => ApiError::conflict(e.to_string()),
        }
    }
}

fn config_error(e: &ConfigError, prefix: &str) -> ApiError {
    let field = match e {
        ConfigError::Missing { field, .. }
        | ConfigError::NotADirectory { field, .. }
        | ConfigError::NotAFile { field, .. } => field,
        ConfigError::NotCwe(_) => "cwe_filter",
        ConfigError::Output { .. } => "output_dir",
        ConfigError::File { .. } | ConfigError::Required(_) => "",
    };
    let path = match (prefix.is_empty(), field.is_empty()) {
        (_, true) => prefix.to_string(),
        (true, false) => field.to_string(),
        (false, false) => format!("{prefix}.{field}"),
    };
    ApiError::validation(e.to_string(), path)
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}"), None))
}

/// One dataset record as the review table shows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodRow {
    pub signature: String,
    /// Declaring class, the table's group key.
    pub class: String,
    pub labels: LabelSet,
    /// Per-label scores from the latest detection, when it scored the method.
    pub scores: Option<BTreeMap<Label, f64>>,
    pub discovery: Discovery,
    pub data_in: Vec<usize>,
    pub data_out: DataOut,
    pub note: Option<String>,
}

/// Results of the latest finished jobs.
#[derive(Debug, Default)]
pub struct LastRun {
    pub findings: Vec<Finding>,
    pub sarif: Option<String>,
    pub scores: BTreeMap<String, BTreeMap<Label, f64>>,
}

pub struct AppState {
    /// Project, dataset and output locations plus defaults for job options.
    pub base: PipelineConfig,
    pub dataset: RwLock<Dataset>,
    /// Held by dataset edits, settings writes and running jobs.
    pub writer: Arc<Mutex<()>>,
    pub jobs: JobTable,
    pub last: RwLock<LastRun>,
}

impl AppState {
    pub fn new(base: PipelineConfig) -> Result<Arc<AppState>, String> {
        require_dir("project_root", &base.project_root).map_err(|e| e.to_string())?;
        prepare_output(&base.output_dir).map_err(|e| e.to_string())?;
        let dataset = check_dataset_file(&base.dataset_path)?;
        Ok(Arc::new(AppState {
            base,
            dataset: RwLock::new(dataset),
            writer: Arc::new(Mutex::new(())),
            jobs: JobTable::default(),
            last: RwLock::new(LastRun::default()),
        }))
    }

    fn row(&self, r: &MethodRecord) -> MethodRow {
        let class = parse_signature(&r.signature)
            .map(|p| p.class)
            .unwrap_or_default();
        MethodRow {
            signature: r.signature.clone(),
            class,
            labels: r.labels,
            scores: self.last.read().expect("last lock").scores.get(&r.signature).cloned(),
            discovery: r.discovery,
            data_in: r.data_in.clone(),
            data_out: r.data_out,
            note: r.note.clone(),
        }
    }

    /// Server defaults, then project settings, then the request's options.
    fn job_config(&self, req: Option<JobConfig>) -> Result<PipelineConfig, ApiError> {
        let mut cfg = self.base.clone();
        match load_settings(&self.base.project_root) {
            Ok(Some(s)) => cfg.apply_settings(&s),
            Ok(None) => {}
            Err(e) => return Err(ApiError::internal(e.to_string())),
        }
        if let Some(r) = req {
            if r.model_path.is_some() {
                cfg.model_path = r.model_path.map(|p| self.resolve(p));
            }
            if r.cwe_filter.is_some() {
                cfg.cwe_filter = r.cwe_filter;
            }
            if let Some(a) = r.analysis {
                cfg.analysis = a;
            }
            if let Some(t) = r.training {
                cfg.training = t;
            }
        }
        cfg.validate().map_err(|e| config_error(&e, "config"))?;
        Ok(cfg)
    }

    fn resolve(&self, p: PathBuf) -> PathBuf {
        if p.is_relative() {
            self.base.project_root.join(p)
        } else {
            p
        }
    }
}

/// Options a job request may set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub model_path: Option<PathBuf>,
    pub cwe_filter: Option<Vec<Label>>,
    pub analysis: Option<AnalysisConfig>,
    pub training: Option<ModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsView {
    pub exists: bool,
    pub settings: Settings,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/methods", get(list_methods))
        .route("/api/methods/{sig}", get(get_method).patch(patch_method))
        .route("/api/jobs", get(list_jobs).post(post_job))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/cancel", post(cancel_job))
        .route("/api/findings", get(findings))
        .route("/api/export/sarif", get(export_sarif))
        .route("/api/settings", get(get_settings).put(put_settings))
        .route("/api/stats", get(stats))
        .route("/api/source", get(source))
        .fallback(|uri: Uri| async move { ApiError::not_found(format!("no route for {uri}")) })
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("srm-forge: listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn param<'a>(q: &'a HashMap<String, String>, name: &str) -> Option<&'a str> {
    q.get(name).map(String::as_str).filter(|v| !v.is_empty())
}

async fn list_methods(
    State(s): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<MethodRow>>, ApiError> {
    let label = match param(&q, "label") {
        Some(id) => Some(
            Label::from_id(id).ok_or_else(|| ApiError::bad_request(format!("unknown label `{id}`"), Some("label")))?,
        ),
        None => None,
    };
    let discovery = match param(&q, "discovery") {
        Some(id) => Some(Discovery::from_id(id).ok_or_else(|| {
            ApiError::bad_request(format!("unknown discovery `{id}`"), Some("discovery"))
        })?),
        None => None,
    };
    let class = param(&q, "class");
    let ds = s.dataset.read().expect("dataset lock").clone();
    let rows = ds
        .records()
        .iter()
        .filter(|r| label.is_none_or(|l| r.labels.contains(l)))
        .filter(|r| discovery.is_none_or(|d| r.discovery == d))
        .map(|r| s.row(r))
        .filter(|row| class.is_none_or(|c| row.class == c))
        .collect();
    Ok(Json(rows))
}

async fn get_method(State(s): State<Arc<AppState>>, Path(sig): Path<String>) -> Result<Json<MethodRow>, ApiError> {
    let ds = s.dataset.read().expect("dataset lock").clone();
    ds.get(&sig)
        .map(|r| Json(s.row(r)))
        .ok_or_else(|| ApiError::not_found(format!("no record for `{sig}`")))
}

fn dataset_error(e: DatasetError) -> ApiError {
    match e.format_errors().first() {
        Some(f) => {
            let path = f
                .path
                .split_once('.')
                .filter(|(head, _)| head.starts_with("edits["))
                .map_or(f.path.as_str(), |(_, rest)| rest);
            ApiError::validation(f.reason.clone(), path)
        }
        None => ApiError::validation(e.to_string(), ""),
    }
}

/// Applies `labels`, `dataIn`, `dataOut` and `note` from a patch object to
/// a record.
fn apply_patch(r: &mut MethodRecord, patch: &Value) -> Result<(), ApiError> {
    let obj = patch
        .as_object()
        .ok_or_else(|| ApiError::bad_request("expected a JSON object", None))?;
    for (k, v) in obj {
        match k.as_str() {
            "labels" => {
                let items = v
                    .as_array()
                    .ok_or_else(|| ApiError::validation("expected an array of label ids", "labels"))?;
                let mut set = LabelSet::EMPTY;
                for (i, item) in items.iter().enumerate() {
                    let l = item
                        .as_str()
                        .and_then(Label::from_id)
                        .ok_or_else(|| ApiError::validation(format!("unknown label {item}"), format!("labels[{i}]")))?;
                    set.insert(l);
                }
                r.labels = set;
            }
            "dataIn" => {
                let items = v
                    .as_array()
                    .ok_or_else(|| ApiError::validation("expected an array of parameter indices", "dataIn"))?;
                r.data_in = items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x.as_u64().map(|n| n as usize).ok_or_else(|| {
                            ApiError::validation(format!("expected a parameter index, found {x}"), format!("dataIn[{i}]"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
            }
            "dataOut" => {
                r.data_out = DataOut::from_value(v).map_err(|m| ApiError::validation(m, "dataOut"))?;
            }
            "note" => {
                r.note = match v {
                    Value::Null => None,
                    Value::String(s) => Some(s.clone()),
                    _ => return Err(ApiError::validation("expected a string or null", "note")),
                };
            }
            other => return Err(ApiError::validation("unknown field", other)),
        }
    }
    Ok(())
}

async fn patch_method(
    State(s): State<Arc<AppState>>,
    Path(sig): Path<String>,
    body: Bytes,
) -> Result<Json<MethodRow>, ApiError> {
    let patch: Value = parse_body(&body)?;
    let _w = s.writer.lock().await;
    let base = s.dataset.read().expect("dataset lock").clone();
    let mut record = base
        .get(&sig)
        .cloned()
        .unwrap_or_else(|| MethodRecord::new(sig.clone(), LabelSet::EMPTY));
    apply_patch(&mut record, &patch)?;
    let merged = merge_records(&base, std::slice::from_ref(&record)).map_err(dataset_error)?;
    write_atomic(&s.base.dataset_path, &merged.save())
        .map_err(|e| ApiError::internal(format!("cannot save the dataset: {e}")))?;
    let row = s.row(merged.get(&sig).expect("merged record"));
    *s.dataset.write().expect("dataset lock") = merged;
    Ok(Json(row))
}

async fn post_job(State(s): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Job>), ApiError> {
    let req: Value = parse_body(&body)?;
    let obj = req
        .as_object()
        .ok_or_else(|| ApiError::bad_request("expected a JSON object", None))?;
    if let Some(k) = obj.keys().find(|k| *k != "kind" && *k != "config") {
        return Err(ApiError::validation("unknown field", k.clone()));
    }
    let kind: JobKind = obj
        .get("kind")
        .cloned()
        .ok_or_else(|| ApiError::validation("missing job kind", "kind"))
        .and_then(|v| {
            serde_json::from_value(v)
                .map_err(|_| ApiError::validation("expected detect, train, pipeline or analyze", "kind"))
        })?;
    let overrides: Option<JobConfig> = match obj.get("config") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| ApiError::validation(e.to_string(), "config"))?),
    };
    let cfg = s.job_config(overrides)?;
    let job = s.jobs.submit(kind)?;
    tokio::spawn(run_job(s.clone(), job.id.clone(), kind, cfg));
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn run_job(s: Arc<AppState>, id: String, kind: JobKind, cfg: PipelineConfig) {
    let _w = s.writer.clone().lock_owned().await;
    let cancel = match s.jobs.start(&id) {
        Ok(Some(c)) => c,
        _ => return,
    };
    let st = s.clone();
    let job_id = id.clone();
    let result = tokio::task::spawn_blocking(move || {
        let obs = JobObserver {
            table: &st.jobs,
            id: job_id,
            cancel,
        };
        pipeline::run(kind, &cfg, &obs)
            .map_err(|e| e.to_string())
            .and_then(|out| publish(&st, &cfg, out))
    })
    .await
    .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
    let _ = s.jobs.finish(&id, result);
}

/// Makes a finished run visible to the API and persists merged detections.
fn publish(s: &AppState, cfg: &PipelineConfig, out: RunOutput) -> Result<Option<PathBuf>, String> {
    if matches!(out.kind, JobKind::Detect | JobKind::Pipeline) {
        write_atomic(&cfg.dataset_path, &out.dataset.save()).map_err(|e| format!("cannot save the dataset: {e}"))?;
        *s.dataset.write().expect("dataset lock") = out.dataset.clone();
        s.last.write().expect("last lock").scores = out
            .predictions
            .iter()
            .map(|p| (p.signature.clone(), p.scores.clone()))
            .collect();
    }
    if matches!(out.kind, JobKind::Analyze | JobKind::Pipeline) {
        let mut last = s.last.write().expect("last lock");
        last.findings = out.findings.clone();
        last.sarif = out.sarif.clone();
    }
    Ok(out.result_ref())
}

async fn list_jobs(State(s): State<Arc<AppState>>) -> Json<Vec<Job>> {
    Json(s.jobs.list())
}

async fn get_job(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    Ok(Json(s.jobs.get(&id)?))
}

async fn cancel_job(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    Ok(Json(s.jobs.cancel(&id)?))
}

async fn findings(State(s): State<Arc<AppState>>) -> Json<Vec<Finding>> {
    Json(s.last.read().expect("last lock").findings.clone())
}

async fn export_sarif(State(s): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let sarif = s.last.read().expect("last lock").sarif.clone();
    match sarif {
        Some(text) => Ok(([(header::CONTENT_TYPE, "application/sarif+json")], text).into_response()),
        None => Err(ApiError::not_found("no analysis has finished yet")),
    }
}

async fn get_settings(State(s): State<Arc<AppState>>) -> Result<Json<SettingsView>, ApiError> {
    match load_settings(&s.base.project_root) {
        Ok(found) => Ok(Json(SettingsView {
            exists: found.is_some(),
            settings: found.unwrap_or_default(),
        })),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

async fn put_settings(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Json<SettingsView>, ApiError> {
    let v: Value = parse_body(&body)?;
    let mut settings: Settings = serde_json::from_value(v).map_err(|e| ApiError::validation(e.to_string(), ""))?;
    settings.model_path = settings.model_path.map(|p| s.resolve(p));
    settings.validate().map_err(|e| config_error(&e, ""))?;
    let _w = s.writer.lock().await;
    save_settings(&s.base.project_root, &settings)
        .map_err(|e| ApiError::internal(format!("cannot save settings: {e}")))?;
    Ok(Json(SettingsView {
        exists: true,
        settings,
    }))
}

async fn stats(State(s): State<Arc<AppState>>) -> Json<srm_core::dataset::DatasetStats> {
    Json(dataset_stats(&s.dataset.read().expect("dataset lock")))
}

async fn source(
    State(s): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<crate::project::Excerpt>, ApiError> {
    let uri = param(&q, "uri").ok_or_else(|| ApiError::bad_request("missing uri", Some("uri")))?;
    let number = |name: &str, default: Option<u32>| -> Result<u32, ApiError> {
        match param(&q, name) {
            Some(v) => v
                .parse()
                .map_err(|_| ApiError::bad_request(format!("`{v}` is not a line count"), Some(name))),
            None => default.ok_or_else(|| ApiError::bad_request(format!("missing {name}"), Some(name))),
        }
    };
    let line = number("line", None)?;
    let context = number("context", Some(3))?;
    read_excerpt(&s.base.project_root, uri, line, context)
        .map(Json)
        .map_err(|e| match e {
            ProjectError::BadUri(_) => ApiError::bad_request(e.to_string(), Some("uri")),
            ProjectError::NoLine { .. } => ApiError::not_found(e.to_string()),
            _ => ApiError::not_found(e.to_string()),
        })
}
