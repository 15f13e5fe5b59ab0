//! HTTP facade over a run directory: list slides, fetch representatives, post
//! labels, and read heatmaps and metrics for the current labels.

use std::collections::{BTreeMap, HashMap};
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use image::RgbImage;
use patchclust_core::classify::{ClassifyError, Label, LabelMap, DEFAULT_GRID};
use patchclust_core::clustering::{ClusterModel, RepresentativeSet};
use patchclust_core::pipeline::{evaluate_slide, files, slide_heatmap, Config, MetricsRecord, PipelineError, Run, SlideInfo};
use patchclust_core::preprocess::Region;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

/// Error body: `{"error": category, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    category: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, category: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            category,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::UnknownSlide(_) => StatusCode::NOT_FOUND,
            PipelineError::MissingStage { .. } | PipelineError::NoGroundTruth(_) => StatusCode::CONFLICT,
            PipelineError::Classify(ClassifyError::UnknownCluster { .. } | ClassifyError::InvalidLabel(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            PipelineError::Io { .. } | PipelineError::Format { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let category = if status == StatusCode::INTERNAL_SERVER_ERROR {
            "Internal"
        } else {
            e.category()
        };
        Self::new(status, category, e.to_string())
    }
}

impl From<ClassifyError> for ApiError {
    fn from(e: ClassifyError) -> Self {
        PipelineError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.category, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Labels of one slide and the number of changes applied so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub revision: u64,
    pub labels: LabelMap,
}

struct SlideData {
    model: ClusterModel,
    representatives: RepresentativeSet,
    silhouette_mean: Option<f64>,
    session: RwLock<Session>,
}

struct Loaded {
    config: Config,
    /// Sorted by slide id.
    slides: Vec<SlideInfo>,
    clustered: BTreeMap<String, SlideData>,
    /// Region id to (slide id, region).
    regions: HashMap<String, (String, Region)>,
}

/// Shared service state. The run is loaded on the first request that finds it
/// complete; until then every route answers `NoRun`.
pub struct AppState {
    run: Run,
    loaded: RwLock<Option<Arc<Loaded>>>,
    /// Serializes label writes.
    writer: Mutex<()>,
}

fn load(run: &Run) -> Result<Loaded, PipelineError> {
    let config = run.config()?;
    let mut slides = run.slides()?;
    slides.sort_by(|a, b| a.slide_id.cmp(&b.slide_id));
    let mut clustered = BTreeMap::new();
    let mut regions = HashMap::new();
    for info in &slides {
        let id = info.slide_id.as_str();
        for r in run.regions(id)? {
            regions.insert(r.region_id.clone(), (id.to_owned(), r));
        }
        let model = match run.cluster(id) {
            Ok(m) => m,
            Err(PipelineError::MissingStage { .. }) => continue,
            Err(e) => return Err(e),
        };
        let representatives = run.representatives(id)?;
        let silhouette_mean = match run.silhouette(id) {
            Ok(r) => Some(r.mean_score),
            Err(PipelineError::MissingStage { .. }) => None,
            Err(e) => return Err(e),
        };
        let session = load_session(run, id)?;
        clustered.insert(
            id.to_owned(),
            SlideData {
                model,
                representatives,
                silhouette_mean,
                session: RwLock::new(session),
            },
        );
    }
    Ok(Loaded {
        config,
        slides,
        clustered,
        regions,
    })
}

/// Resumes the persisted session, or starts at revision 0 from the stored
/// label file.
fn load_session(run: &Run, slide: &str) -> Result<Session, PipelineError> {
    let path = run.slide_path(slide, files::SESSION);
    match std::fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| PipelineError::Format {
            path,
            message: e.to_string(),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Session {
            revision: 0,
            labels: run.labels(slide)?,
        }),
        Err(source) => Err(PipelineError::Io { path, source }),
    }
}

impl AppState {
    pub fn new(run: Run) -> Arc<Self> {
        Arc::new(Self {
            run,
            loaded: RwLock::new(None),
            writer: Mutex::new(()),
        })
    }

    fn loaded(&self) -> ApiResult<Arc<Loaded>> {
        if let Some(l) = self.loaded.read().unwrap().as_ref() {
            return Ok(l.clone());
        }
        let mut slot = self.loaded.write().unwrap();
        if let Some(l) = slot.as_ref() {
            return Ok(l.clone());
        }
        match load(&self.run) {
            Ok(l) => {
                let l = Arc::new(l);
                *slot = Some(l.clone());
                Ok(l)
            }
            Err(PipelineError::MissingStage { path, .. }) => Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "NoRun",
                format!("no completed run in {} ({} missing)", self.run.dir().display(), path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

fn slide<'a>(loaded: &'a Loaded, id: &str) -> ApiResult<&'a SlideData> {
    if let Some(s) = loaded.clustered.get(id) {
        return Ok(s);
    }
    if loaded.slides.iter().any(|s| s.slide_id == id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "MissingStage",
            format!("slide {id:?} has not been clustered"),
        ));
    }
    Err(ApiError::new(StatusCode::NOT_FOUND, "UnknownSlide", format!("unknown slide {id:?}")))
}

fn snapshot(data: &SlideData) -> Session {
    data.session.read().unwrap().clone()
}

#[derive(Serialize)]
struct SlideSummary {
    slide_id: String,
    region_count: usize,
    k: Option<usize>,
    silhouette_mean: Option<f64>,
    revision: u64,
}

async fn list_slides(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<SlideSummary>>> {
    let loaded = state.loaded()?;
    let out = loaded
        .slides
        .iter()
        .map(|info| {
            let data = loaded.clustered.get(&info.slide_id);
            SlideSummary {
                slide_id: info.slide_id.clone(),
                region_count: info.region_count,
                k: data.map(|d| d.model.k),
                silhouette_mean: data.and_then(|d| d.silhouette_mean),
                revision: data.map_or(0, |d| snapshot(d).revision),
            }
        })
        .collect();
    Ok(Json(out))
}

#[derive(Serialize)]
struct RepresentativeCard {
    cluster_index: usize,
    region_id: String,
    thumbnail: String,
    label: Label,
    cluster_size: usize,
    distance: f64,
}

#[derive(Serialize)]
struct RepresentativesResponse {
    slide_id: String,
    revision: u64,
    k: usize,
    representatives: Vec<RepresentativeCard>,
}

async fn get_representatives(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<RepresentativesResponse>> {
    let loaded = state.loaded()?;
    let data = slide(&loaded, &id)?;
    let session = snapshot(data);
    let sizes = data.model.cluster_sizes();
    let representatives = data
        .representatives
        .per_cluster
        .iter()
        .map(|r| RepresentativeCard {
            cluster_index: r.cluster,
            region_id: r.region_id.clone(),
            thumbnail: format!("/api/patches/{}", r.region_id),
            label: session.labels.get(r.cluster),
            cluster_size: sizes[r.cluster],
            distance: r.distance,
        })
        .collect();
    Ok(Json(RepresentativesResponse {
        slide_id: id,
        revision: session.revision,
        k: data.model.k,
        representatives,
    }))
}

#[derive(Deserialize)]
struct LabelRequest {
    cluster_index: usize,
    label: String,
}

#[derive(Serialize)]
struct LabelResponse {
    slide_id: String,
    revision: u64,
    cluster_index: usize,
    label: Label,
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<LabelResponse>> {
    let loaded = state.loaded()?;
    let data = slide(&loaded, &id)?;
    let req: LabelRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.to_string()))?;
    let label: Label = req.label.parse()?;
    if req.cluster_index >= data.model.k {
        return Err(ClassifyError::UnknownCluster {
            index: req.cluster_index,
            k: data.model.k,
        }
        .into());
    }

    let _guard = state.writer.lock().await;
    let mut next = snapshot(data);
    next.labels.set(req.cluster_index, label);
    next.revision += 1;
    persist(&state.run, &id, &next)?;
    *data.session.write().unwrap() = next.clone();
    Ok(Json(LabelResponse {
        slide_id: id,
        revision: next.revision,
        cluster_index: req.cluster_index,
        label,
    }))
}

/// Writes the label file and session before the post is acknowledged.
fn persist(run: &Run, slide: &str, session: &Session) -> ApiResult<()> {
    run.write_labels(slide, &session.labels)?;
    let path = run.slide_path(slide, files::SESSION);
    let mut bytes = serde_json::to_vec_pretty(session).expect("session serializes");
    bytes.push(b'\n');
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, &bytes)
        .and_then(|_| std::fs::rename(&tmp, &path))
        .map_err(|source| PipelineError::Io { path, source })?;
    Ok(())
}

#[derive(Deserialize)]
struct HeatmapQuery {
    grid: Option<usize>,
}

async fn get_heatmap(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HeatmapQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let loaded = state.loaded()?;
    let data = slide(&loaded, &id)?;
    let session = snapshot(data);
    let grid = q.grid.unwrap_or(DEFAULT_GRID);
    let heat = slide_heatmap(&state.run, &id, &session.labels, grid)?;
    Ok(Json(json!({
        "slide_id": id,
        "revision": session.revision,
        "rows": heat.rows,
        "cols": heat.cols,
        "values": heat.value_rows(),
        "positive": heat.positive,
        "total": heat.total,
    })))
}

#[derive(Serialize)]
struct MetricsResponse {
    slide_id: String,
    revision: u64,
    /// `ok`, or `no_labeled_regions` when every region is unlabeled.
    status: &'static str,
    metrics: Option<MetricsRecord>,
}

async fn get_metrics(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<MetricsResponse>> {
    let loaded = state.loaded()?;
    let data = slide(&loaded, &id)?;
    let session = snapshot(data);
    let rois = state
        .run
        .rois()?
        .ok_or_else(|| PipelineError::NoGroundTruth(id.clone()))?;
    let (status, metrics) = match evaluate_slide(&state.run, &id, &session.labels, &rois, &loaded.config) {
        Ok(m) => ("ok", Some(m)),
        Err(PipelineError::Classify(ClassifyError::EmptyEvaluation)) => ("no_labeled_regions", None),
        Err(e) => return Err(e.into()),
    };
    Ok(Json(MetricsResponse {
        slide_id: id,
        revision: session.revision,
        status,
        metrics,
    }))
}

async fn get_patch(State(state): State<Arc<AppState>>, Path(region_id): Path<String>) -> ApiResult<Response> {
    let loaded = state.loaded()?;
    let (slide_id, region) = loaded
        .regions
        .get(&region_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownRegion", format!("unknown region {region_id:?}")))?;
    let pixels = read_patch(&state.run, slide_id, &region_id)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "MissingStage",
            format!("no stored pixels for region {region_id:?}"),
        )
    })?;
    let img = RgbImage::from_raw(region.size, region.size, pixels)
        .ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", "patch size mismatch"))?;
    let mut png = Cursor::new(Vec::new());
    img.write_to(&mut png, image::ImageFormat::Png)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png.into_inner()).into_response())
}

fn read_patch(run: &Run, slide: &str, region_id: &str) -> Result<Option<Vec<u8>>, PipelineError> {
    if !run.slide_path(slide, files::PATCHES).exists() {
        return Ok(None);
    }
    let regions = run.regions_with_pixels(slide)?;
    Ok(regions.into_iter().find(|r| r.region_id == region_id).and_then(|r| r.pixels))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/slides", get(list_slides))
        .route("/api/slides/{id}/representatives", get(get_representatives))
        .route("/api/slides/{id}/labels", axum::routing::post(post_label))
        .route("/api/slides/{id}/heatmap", get(get_heatmap))
        .route("/api/slides/{id}/metrics", get(get_metrics))
        .route("/api/patches/{region_id}", get(get_patch))
        .with_state(state)
}

/// Serves until the listener fails or the process receives Ctrl-C.
pub async fn serve(run: Run, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(run)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
