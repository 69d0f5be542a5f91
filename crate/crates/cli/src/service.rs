//! Local labeling API backing the browser labeler.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, put};
use axum::{Json, Router};
use kpi_anomaly::detector::AnalysisWindow;
use kpi_anomaly::evaluation::{LabelEntry, LabelFile};
use kpi_anomaly::Label;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Environment variable holding the default service port.
pub const PORT_ENV: &str = "KPI_LABEL_PORT";
pub const DEFAULT_PORT: u16 = 8377;

/// Windows plus their label assignments, persisted to `out` on every write.
#[derive(Debug)]
pub struct LabelStore {
    windows: Vec<AnalysisWindow>,
    assignments: BTreeMap<usize, (Vec<Label>, u64)>,
    out: PathBuf,
}

impl LabelStore {
    /// Loads prior assignments from `out` when the file exists.
    pub fn open(windows: Vec<AnalysisWindow>, out: impl Into<PathBuf>) -> kpi_anomaly::Result<Self> {
        let out = out.into();
        let mut assignments = BTreeMap::new();
        if out.exists() {
            let prior = LabelFile::read(&out)?;
            let mut probe = windows.clone();
            prior.apply(&mut probe)?;
            for e in prior.windows {
                assignments.insert(e.id, (e.labels, e.version));
            }
        }
        Ok(Self { windows, assignments, out })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn export(&self) -> LabelFile {
        LabelFile {
            windows: self
                .assignments
                .iter()
                .filter(|(_, (labels, _))| !labels.is_empty())
                .map(|(&id, (labels, version))| LabelEntry {
                    id,
                    series_id: self.windows[id].series_id.clone(),
                    start_index: self.windows[id].start_index,
                    labels: labels.clone(),
                    version: *version,
                })
                .collect(),
        }
    }

    fn labels(&self, id: usize) -> (&[Label], u64) {
        match self.assignments.get(&id) {
            Some((l, v)) => (l, *v),
            None => (&[], 0),
        }
    }

    /// Replaces the label set of `id`, bumps its version and persists.
    pub fn assign(&mut self, id: usize, mut labels: Vec<Label>) -> std::io::Result<u64> {
        labels.sort();
        labels.dedup();
        let version = self.labels(id).1 + 1;
        self.assignments.insert(id, (labels, version));
        write_atomic(&self.out, &serde_json::to_vec_pretty(&self.export()).map_err(std::io::Error::other)?)?;
        Ok(version)
    }
}

/// Writes next to `path` and renames over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

pub type SharedStore = Arc<Mutex<LabelStore>>;

#[derive(Debug, Serialize)]
struct WindowView<'a> {
    id: usize,
    series_id: &'a str,
    fold: usize,
    start_index: i64,
    end_index: i64,
    source_index: usize,
    padded: bool,
    noise_bin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    labels: &'a [Label],
    version: u64,
    values: &'a [f64],
}

fn view(store: &LabelStore, id: usize) -> WindowView<'_> {
    let w = &store.windows[id];
    let (labels, version) = store.labels(id);
    WindowView {
        id,
        series_id: &w.series_id,
        fold: w.fold,
        start_index: w.start_index,
        end_index: w.end_index(),
        source_index: w.source_index,
        padded: w.padded,
        noise_bin: w.noise_bin.to_string(),
        sigma: w.sigma,
        labels,
        version,
        values: &w.values,
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    #[serde(default)]
    status: Option<String>,
    #[serde(default)]
    offset: Option<usize>,
    #[serde(default)]
    limit: Option<usize>,
}

async fn list(State(store): State<SharedStore>, Query(q): Query<ListQuery>) -> Response {
    let store = store.lock().expect("store lock");
    let keep: Box<dyn Fn(usize) -> bool> = match q.status.as_deref() {
        None | Some("all") => Box::new(|_| true),
        Some("unlabeled") => Box::new(|i| store.labels(i).0.is_empty()),
        Some("labeled") => Box::new(|i| !store.labels(i).0.is_empty()),
        Some(other) => return error(StatusCode::BAD_REQUEST, format!("unknown status `{other}`")),
    };
    let ids: Vec<usize> = (0..store.len()).filter(|&i| keep(i)).collect();
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(50);
    let items: Vec<WindowView> = ids.iter().skip(offset).take(limit).map(|&i| view(&store, i)).collect();
    Json(json!({ "total": ids.len(), "offset": offset, "items": items })).into_response()
}

async fn one(State(store): State<SharedStore>, UrlPath(id): UrlPath<usize>) -> Response {
    let store = store.lock().expect("store lock");
    if id >= store.len() {
        return error(StatusCode::NOT_FOUND, format!("no window {id}"));
    }
    Json(view(&store, id)).into_response()
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    labels: Vec<String>,
}

async fn put_labels(
    State(store): State<SharedStore>,
    UrlPath(id): UrlPath<usize>,
    Json(body): Json<LabelBody>,
) -> Response {
    let mut store = store.lock().expect("store lock");
    if id >= store.len() {
        return error(StatusCode::NOT_FOUND, format!("no window {id}"));
    }
    let mut labels = Vec::with_capacity(body.labels.len());
    for s in &body.labels {
        match s.parse::<Label>() {
            Ok(l) => labels.push(l),
            Err(_) => return error(StatusCode::UNPROCESSABLE_ENTITY, format!("label `{s}` is not in the vocabulary")),
        }
    }
    if let Err(e) = store.assign(id, labels) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, format!("could not persist labels: {e}"));
    }
    Json(view(&store, id)).into_response()
}

async fn progress(State(store): State<SharedStore>) -> Response {
    let store = store.lock().expect("store lock");
    let total = store.len();
    let labeled = (0..total).filter(|&i| !store.labels(i).0.is_empty()).count();
    let other = (0..total).filter(|&i| store.labels(i).0.contains(&Label::Other)).count();
    let other_fraction = if total == 0 { 0.0 } else { other as f64 / total as f64 };
    Json(json!({ "total": total, "labeled": labeled, "other_fraction": other_fraction })).into_response()
}

async fn export(State(store): State<SharedStore>) -> Response {
    Json(store.lock().expect("store lock").export()).into_response()
}

async fn vocabulary() -> Response {
    Json(Label::ALL.iter().map(|l| l.as_str()).collect::<Vec<_>>()).into_response()
}

pub fn router(store: SharedStore, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/windows", get(list))
        .route("/windows/{id}", get(one))
        .route("/windows/{id}/labels", put(put_labels))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .route("/vocabulary", get(vocabulary))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves on `127.0.0.1:port` until the process is stopped.
pub async fn serve(store: SharedStore, port: u16, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("labeling service on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, static_dir.as_deref())).await
}
