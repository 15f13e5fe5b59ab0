use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchclust_core::classify::LabelMap;
use patchclust_core::clustering::Init;
use patchclust_core::pipeline::{
    apply_label_file, files, ingest_features, ingest_stand_in, metrics_table, run_all, run_cluster, run_evaluate,
    run_heatmap, run_pca, run_preprocess, AllOptions, Config, Manifest, PipelineError, Run, RunLock,
};

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Parser)]
#[command(name = "patchclust", version, about = "Cluster tissue patches and label slides from cluster representatives")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    PlusPlus,
}

impl From<InitArg> for Init {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Random => Init::Random,
            InitArg::PlusPlus => Init::PlusPlus,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run directory holding every stage's artifacts.
    #[arg(long, global = true, default_value = "run")]
    pub run_dir: PathBuf,
    /// Config file. Defaults to the run's snapshot, then built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fixed cluster count; disables the silhouette sweep.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub k_min: Option<usize>,
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long, global = true)]
    pub patch_size: Option<u32>,
    #[arg(long, global = true)]
    pub tile_size: Option<u32>,
    #[arg(long, global = true)]
    pub pca_dim: Option<usize>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub silhouette_sample: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate tissue from background, normalize color and cut patches.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Normalization target statistics (TOML).
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Load a feature file (TCF1 or CSV), or compute stand-in features from the stored patches.
    IngestFeatures {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit the projection and reduce every feature vector.
    Pca,
    /// Cluster each slide and pick its representatives.
    Cluster,
    /// Store a `cluster_index,label` file for a slide.
    Label {
        #[arg(long)]
        labels: PathBuf,
        /// Required when the run has more than one slide.
        #[arg(long)]
        slide: Option<String>,
    },
    /// Score the stored labels against ROI annotations.
    Evaluate {
        #[arg(long)]
        roi: Option<PathBuf>,
    },
    /// Render per-slide heatmaps from the stored labels.
    Heatmap,
    /// Serve the labeling API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Run every stage in order.
    All {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        roi: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        slide: Option<String>,
    },
}

impl GlobalArgs {
    /// Explicit file, else the run's snapshot, else defaults; flags override.
    pub fn resolve_config(&self) -> Result<Config> {
        let snapshot = self.run_dir.join(files::CONFIG);
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None if snapshot.exists() => Config::load(&snapshot)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        set!(seed, k_min, k_max, restarts, patch_size, tile_size, pca_dim, grid, silhouette_sample);
        if self.k.is_some() {
            c.k = self.k;
        }
        if let Some(i) = self.init {
            c.init = i.into();
        }
        c.validate()?;
        Ok(c)
    }
}

fn pick_slide(run: &Run, slide: Option<String>) -> Result<String> {
    if let Some(s) = slide {
        return Ok(s);
    }
    let slides = run.slides()?;
    match slides.as_slice() {
        [only] => Ok(only.slide_id.clone()),
        _ => Err(PipelineError::Config(format!(
            "--slide is required when the run has {} slides",
            slides.len()
        ))),
    }
}

fn read_labels(path: &Path) -> Result<LabelMap> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(LabelMap::parse(&text)?)
}

fn print_metrics(run: &Run, config: &Config, roi: Option<&Path>) -> Result<()> {
    let records = run_evaluate(run, config, roi)?;
    print!("{}", metrics_table(&records));
    Ok(())
}

/// Executes one command against the run directory.
pub fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let _lock = RunLock::acquire(&g.run_dir)?;
    if let Command::Serve { bind, port } = cli.command {
        let run = Run::open(&g.run_dir);
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|source| PipelineError::Io {
                path: g.run_dir.clone(),
                source,
            })?;
        return rt
            .block_on(crate::service::serve(run, SocketAddr::new(bind, port)))
            .map_err(|source| PipelineError::Io {
                path: g.run_dir.clone(),
                source,
            });
    }

    let mut config = g.resolve_config()?;
    if let Command::Preprocess { target: Some(t), .. } = &cli.command {
        config.target = Some(t.clone());
    }
    let run = Run::create(&g.run_dir, &config)?;
    match cli.command {
        Command::Preprocess { manifest, .. } => {
            for s in run_preprocess(&run, &Manifest::load(&manifest)?, &config)? {
                println!("{}\t{} regions", s.slide_id, s.region_count);
            }
        }
        Command::IngestFeatures { input } => {
            let m = match input {
                Some(path) => ingest_features(&run, &path, &config)?,
                None => ingest_stand_in(&run)?,
            };
            println!("{} regions x {} features", m.len(), m.dim());
        }
        Command::Pca => {
            let m = run_pca(&run, &config)?;
            println!("{} -> {} dimensions", m.input_dim(), m.output_dim());
        }
        Command::Cluster => {
            for (s, m) in run.slides()?.iter().filter(|s| s.region_count > 0).zip(run_cluster(&run, &config)?) {
                println!("{}\tk={}", s.slide_id, m.k);
            }
        }
        Command::Label { labels, slide } => {
            let slide = pick_slide(&run, slide)?;
            apply_label_file(&run, &slide, &read_labels(&labels)?)?;
        }
        Command::Evaluate { roi } => print_metrics(&run, &config, roi.as_deref())?,
        Command::Heatmap => {
            run_heatmap(&run, &config)?;
        }
        Command::All {
            manifest,
            features,
            roi,
            labels,
            slide,
        } => {
            let opts = AllOptions {
                manifest,
                features,
                rois: roi,
                ..AllOptions::default()
            };
            run_all(&run, &config, &opts)?;
            if let Some(path) = labels {
                let slide = pick_slide(&run, slide)?;
                apply_label_file(&run, &slide, &read_labels(&path)?)?;
                if run.rois()?.is_some() {
                    print_metrics(&run, &config, None)?;
                }
                run_heatmap(&run, &config)?;
            }
        }
        Command::Serve { .. } => unreachable!(),
    }
    Ok(())
}
