use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use patchclust_core::pipeline::{files, Run};
use patchclust_testkit::slide::{four_texture_slide, in_rect};

const SMALL: [&str; 10] = ["--seed", "7", "--patch-size", "64", "--tile-size", "512", "--k-min", "2", "--k-max", "8"];

fn patchclust(run_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchclust"))
        .arg("--run-dir")
        .arg(run_dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fails_with(o: &Output, category: &str) {
    assert_eq!(o.status.code(), Some(1), "{}", stderr(o));
    let line = stderr(o);
    assert!(line.starts_with(&format!("error: {category}: ")), "{line}");
    assert_eq!(line.trim_end().lines().count(), 1, "{line}");
}

#[test]
fn errors_exit_one_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    fails_with(&patchclust(&run, &["preprocess", "--manifest", "/nonexistent/manifest.toml"]), "Io");
    fails_with(&patchclust(&run, &["pca"]), "MissingStage");
    fails_with(&patchclust(&run, &["--k-min", "5", "--k-max", "3", "cluster"]), "Config");

    fs::write(run.join(files::LOCK), "1\n").unwrap();
    fails_with(&patchclust(&run, &["pca"]), "Locked");
    fs::remove_file(run.join(files::LOCK)).unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "unknown_key = 1\n").unwrap();
    fails_with(&patchclust(&run, &["--config", bad.to_str().unwrap(), "pca"]), "Format");
}

#[test]
fn stages_run_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    let slide = four_texture_slide(&dir.path().join("input"), "tex", 512, 64, 3);
    let run_dir = dir.path().join("run");
    let step = |args: &[&str]| {
        let mut all: Vec<&str> = SMALL.to_vec();
        all.extend_from_slice(args);
        let o = patchclust(&run_dir, &all);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(step(&["preprocess", "--manifest", slide.manifest.to_str().unwrap()]), "tex\t36 regions\n");
    step(&["ingest-features"]);
    step(&["pca"]);
    assert_eq!(step(&["cluster"]), "tex\tk=4\n");

    let run = Run::open(&run_dir);
    let config = run.config().unwrap();
    assert_eq!((config.seed, config.patch_size, config.k_max), (7, 64, 8));

    let regions = run.regions("tex").unwrap();
    let reps = run.representatives("tex").unwrap();
    let labels: String = reps
        .per_cluster
        .iter()
        .map(|r| {
            let l = if in_rect(regions[r.index].center(), &slide.roi) { "positive" } else { "negative" };
            format!("{},{l}\n", r.cluster)
        })
        .collect();
    let label_file = dir.path().join("labels.csv");
    fs::write(&label_file, &labels).unwrap();
    step(&["label", "--labels", label_file.to_str().unwrap()]);
    let table = step(&["evaluate", "--roi", slide.rois.to_str().unwrap()]);
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("slide,k,cluster_set,accuracy,f1"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((row[0], row[1], row[3], row[4]), ("tex", "4", "1", "1"));
    step(&["heatmap"]);
    assert!(run.slide_path("tex", files::HEATMAP_PNG).exists());
    assert!(!run_dir.join(files::LOCK).exists());

    fs::write(&label_file, "9,positive\n").unwrap();
    fails_with(&patchclust(&run_dir, &["label", "--labels", label_file.to_str().unwrap()]), "UnknownCluster");
    fs::write(&label_file, "0,perhaps\n").unwrap();
    fails_with(&patchclust(&run_dir, &["label", "--labels", label_file.to_str().unwrap()]), "InvalidLabel");
    fs::write(&label_file, "0,positive\n").unwrap();
    fails_with(
        &patchclust(&run_dir, &["label", "--labels", label_file.to_str().unwrap(), "--slide", "other"]),
        "UnknownSlide",
    );
}

#[test]
fn all_with_labels_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let slide = four_texture_slide(&dir.path().join("input"), "tex", 512, 64, 3);
    let run_dir = dir.path().join("run");
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "0,positive\n").unwrap();
    let mut args: Vec<&str> = SMALL.to_vec();
    args.extend_from_slice(&[
        "all",
        "--manifest",
        slide.manifest.to_str().unwrap(),
        "--roi",
        slide.rois.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
    ]);
    let o = patchclust(&run_dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("slide,k,cluster_set,accuracy,f1\ntex,4,0,"), "{stdout}");
    assert!(run_dir.join(files::METRICS_TABLE).exists());
    assert!(run_dir.join("slides/tex").join(files::HEATMAP_CSV).exists());
}
