use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use patchclust::service::{router, AppState};
use patchclust_core::classify::LabelMap;
use patchclust_core::features::{write_csv, FeatureMatrix};
use patchclust_core::pipeline::{evaluate_slide, files, ingest_features, run_all, run_cluster, run_pca, AllOptions, Config, Run};
use patchclust_testkit::data::gaussian_blobs;
use patchclust_testkit::slide::{four_texture_slide, in_rect, FourTextureSlide};
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Server {
    base: String,
    client: reqwest::Client,
}

impl Server {
    async fn start(run: Run) -> Self {
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router(AppState::new(run))).await.unwrap() });
        Self {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
        }
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn post_raw(&self, path: &str, body: String) -> (StatusCode, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn label(&self, slide: &str, cluster: usize, label: &str) -> (StatusCode, Value) {
        self.post_raw(
            &format!("/api/slides/{slide}/labels"),
            json!({ "cluster_index": cluster, "label": label }).to_string(),
        )
        .await
    }
}

fn small_config() -> Config {
    Config {
        seed: 7,
        patch_size: 64,
        tile_size: 512,
        k_min: 2,
        k_max: 8,
        ..Config::default()
    }
}

fn texture_run(root: &Path) -> (Run, FourTextureSlide) {
    let config = small_config();
    let slide = four_texture_slide(&root.join("input"), "tex", 512, 64, 3);
    let run = Run::create(root.join("run"), &config).unwrap();
    let opts = AllOptions {
        manifest: Some(slide.manifest.clone()),
        rois: Some(slide.rois.clone()),
        ..AllOptions::default()
    };
    run_all(&run, &config, &opts).unwrap();
    (run, slide)
}

/// Seven slides from one feature file, listed out of order.
fn seven_slide_run(root: &Path) -> Run {
    let names = ["g", "c", "a", "f", "b", "e", "d"];
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (s, name) in names.iter().enumerate() {
        let (points, _) = gaussian_blobs(3, 10, 0.1, 10.0, 5, s as u64);
        for (i, p) in points.into_iter().enumerate() {
            ids.push(format!("slide_{name}_{}_{}", (i % 6) * 64, (i / 6) * 64));
            rows.push(p);
        }
    }
    let input = root.join("features.csv");
    let mut buf = Vec::new();
    write_csv(&FeatureMatrix::from_rows(ids, &rows).unwrap(), &mut buf).unwrap();
    std::fs::write(&input, buf).unwrap();
    let config = Config {
        patch_size: 64,
        pca_dim: 4,
        k_max: 6,
        ..Config::default()
    };
    let run = Run::create(root.join("run"), &config).unwrap();
    ingest_features(&run, &input, &config).unwrap();
    run_pca(&run, &config).unwrap();
    run_cluster(&run, &config).unwrap();
    run
}

fn roi_cluster(run: &Run, slide: &FourTextureSlide) -> usize {
    let regions = run.regions(&slide.slide_id).unwrap();
    let reps = run.representatives(&slide.slide_id).unwrap();
    let inside: Vec<usize> = reps
        .per_cluster
        .iter()
        .filter(|r| in_rect(regions[r.index].center(), &slide.roi))
        .map(|r| r.cluster)
        .collect();
    assert_eq!(inside.len(), 1);
    inside[0]
}

#[tokio::test(flavor = "multi_thread")]
async fn empty_directory_reports_no_run() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(Run::open(dir.path())).await;
    assert_eq!(server.get("/api/health").await.0, StatusCode::OK);
    let (status, body) = server.get("/api/slides").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "NoRun");
    assert_eq!(server.get("/api/slides/x/representatives").await.1["error"], "NoRun");
}

#[tokio::test(flavor = "multi_thread")]
async fn lists_seven_slides_sorted_with_representatives() {
    let dir = tempfile::tempdir().unwrap();
    let run = seven_slide_run(dir.path());
    let server = Server::start(run).await;
    let (status, body) = server.get("/api/slides").await;
    assert_eq!(status, StatusCode::OK);
    let list = body.as_array().unwrap();
    let ids: Vec<&str> = list.iter().map(|s| s["slide_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["slide_a", "slide_b", "slide_c", "slide_d", "slide_e", "slide_f", "slide_g"]);
    for s in list {
        assert_eq!(s["region_count"], 30);
        assert_eq!(s["revision"], 0);
        let k = s["k"].as_u64().unwrap();
        let (status, reps) = server.get(&format!("/api/slides/{}/representatives", s["slide_id"].as_str().unwrap())).await;
        assert_eq!(status, StatusCode::OK);
        let cards = reps["representatives"].as_array().unwrap();
        assert_eq!(cards.len() as u64, k);
        for (i, c) in cards.iter().enumerate() {
            assert_eq!(c["cluster_index"], i);
            assert_eq!(c["label"], "unlabeled");
            assert_eq!(c["thumbnail"], format!("/api/patches/{}", c["region_id"].as_str().unwrap()));
        }
    }

    let (status, body) = server.get("/api/slides/nope/representatives").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownSlide")));
    let (status, body) = server.get("/api/patches/nope_0_0").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownRegion")));
    // Feature-file runs keep no pixels.
    let (status, body) = server.get("/api/patches/slide_a_0_0").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("MissingStage")));
    // No annotations were supplied.
    let (status, body) = server.get("/api/slides/slide_a/metrics").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("NoGroundTruth")));
}

#[tokio::test(flavor = "multi_thread")]
async fn labeling_updates_heatmap_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (run, slide) = texture_run(dir.path());
    let positive = roi_cluster(&run, &slide);
    let k = run.cluster("tex").unwrap().k;
    let server = Server::start(run.clone()).await;

    let (status, body) = server.get("/api/slides/tex/metrics").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "no_labeled_regions");
    assert!(body["metrics"].is_null());

    let (_, before) = server.get("/api/slides/tex/heatmap?grid=8").await;
    assert_eq!(before["revision"], 0);
    assert_eq!((before["rows"].as_u64(), before["cols"].as_u64()), (Some(8), Some(8)));
    let sum = |v: &Value| -> f64 { v["values"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|x| x.as_f64().unwrap()).sum() };
    assert_eq!(sum(&before), 0.0);

    let (status, body) = server.label("tex", positive, "positive").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 1);
    let (_, after) = server.get("/api/slides/tex/heatmap?grid=8").await;
    assert_eq!(after["revision"], 1);
    assert!(sum(&after) > 0.0);

    let other = (positive + 1) % k;
    assert_eq!(server.label("tex", other, "negative").await.1["revision"], 2);
    let (_, reps) = server.get("/api/slides/tex/representatives").await;
    assert_eq!(reps["revision"], 2);
    assert_eq!(reps["representatives"][positive]["label"], "positive");
    assert_eq!(reps["representatives"][other]["label"], "negative");

    // Metrics match the batch evaluator on the same labels.
    let mut labels = LabelMap::new();
    labels.set(positive, "positive".parse().unwrap());
    labels.set(other, "negative".parse().unwrap());
    let rois = run.rois().unwrap().unwrap();
    let expected = evaluate_slide(&run, "tex", &labels, &rois, &small_config()).unwrap();
    let (status, body) = server.get("/api/slides/tex/metrics").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["revision"], 2);
    assert_eq!(body["metrics"], serde_json::to_value(&expected).unwrap());
    assert_eq!(run.labels("tex").unwrap(), labels);

    let (status, body) = server.label("tex", k, "positive").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("UnknownCluster")));
    let (status, body) = server.label("tex", 0, "maybe").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("InvalidLabel")));
    let (status, body) = server.post_raw("/api/slides/tex/labels", "{\"cluster\":1}".into()).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("BadRequest")));
    let (status, body) = server.label("nope", 0, "positive").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownSlide")));
    // Rejected posts leave the revision alone.
    assert_eq!(server.get("/api/slides").await.1[0]["revision"], 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_posts_get_distinct_revisions() {
    let dir = tempfile::tempdir().unwrap();
    let (run, _) = texture_run(dir.path());
    let k = run.cluster("tex").unwrap().k;
    let server = Arc::new(Server::start(run.clone()).await);
    let mut tasks = Vec::new();
    for i in 0..24 {
        let s = server.clone();
        let label = if i % 2 == 0 { "positive" } else { "negative" };
        tasks.push(tokio::spawn(async move { s.label("tex", i % k, label).await }));
    }
    let mut revisions = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        revisions.push(body["revision"].as_u64().unwrap());
    }
    revisions.sort_unstable();
    assert_eq!(revisions, (1..=24).collect::<Vec<_>>());
    let session: Value = serde_json::from_slice(&std::fs::read(run.slide_path("tex", files::SESSION)).unwrap()).unwrap();
    assert_eq!(session["revision"], 24);
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_resumes_session() {
    let dir = tempfile::tempdir().unwrap();
    let (run, _) = texture_run(dir.path());
    {
        let server = Server::start(run.clone()).await;
        server.label("tex", 0, "positive").await;
        server.label("tex", 1, "negative").await;
        server.label("tex", 1, "unlabeled").await;
    }
    let server = Server::start(Run::open(run.dir())).await;
    let (_, reps) = server.get("/api/slides/tex/representatives").await;
    assert_eq!(reps["revision"], 3);
    assert_eq!(reps["representatives"][0]["label"], "positive");
    assert_eq!(reps["representatives"][1]["label"], "unlabeled");
    assert_eq!(server.label("tex", 2, "negative").await.1["revision"], 4);
}

#[tokio::test(flavor = "multi_thread")]
async fn serves_patch_png() {
    let dir = tempfile::tempdir().unwrap();
    let (run, _) = texture_run(dir.path());
    let server = Server::start(run.clone()).await;
    let (_, reps) = server.get("/api/slides/tex/representatives").await;
    let thumb = reps["representatives"][0]["thumbnail"].as_str().unwrap().to_owned();
    let r = server.client.get(format!("{}{thumb}", server.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "image/png");
    let bytes = r.bytes().await.unwrap();
    let img = image::load_from_memory(&bytes).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (64, 64));
    let rid = reps["representatives"][0]["region_id"].as_str().unwrap();
    let stored = run.regions_with_pixels("tex").unwrap().into_iter().find(|r| r.region_id == rid).unwrap();
    assert_eq!(img.into_raw(), stored.pixels.unwrap());
}
