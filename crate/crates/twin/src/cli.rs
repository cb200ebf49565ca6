//! Command-line entry point. Exit codes: 0 success, 2 configuration or
//! usage error, 1 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use twin_core::omics::{default_gene_sets, synth_counts, CountMatrix, CrosstalkConfig, SynthConfig};
use twin_core::physio::{physio_topology, SplitSizes};

use crate::error::{Result, TwinError};
use crate::formats::bundle::{save_bundle, save_summary};
use crate::formats::checkpoint::{load_gan_checkpoint, load_gnn_checkpoint, save_gan_checkpoint, save_gnn_checkpoint};
use crate::formats::manifest::{save_manifest, RunManifest};
use crate::formats::omics::{load_counts, load_gene_sets, save_counts, save_gene_sets, save_report, save_samples, CrosstalkReportFile};
use crate::formats::topology::save_topology;
use crate::formats::trajectory::save_trajectory;
use crate::formats::{read_bytes, read_json, read_scenario, sha256_hex, write_json};
use crate::pipeline::gnn::{forecast, train_gnn_pipeline, ForecastConfig, GnnPipelineConfig};
use crate::pipeline::omics::{run_crosstalk, sample_gan, train_gan_pipeline, GanPipelineConfig, SampleConfig};
use crate::pipeline::simulate;
use crate::service::{self, ServeOptions};

pub const DATA_DIR_ENV: &str = "TWIN_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "twin", version, about = "Digital-twin simulation, forecasting and omics toolkit")]
pub struct Cli {
    /// Root for models, run directories and the service index.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "twin-data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the surrogate physiology for a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate the training corpus and train the graph-network forecaster.
    TrainGnn(TrainGnnArgs),
    /// Monte Carlo dropout forecast from a scenario's final window.
    Forecast(ForecastArgs),
    /// Train the conditional WGAN-GP on preprocessed expression.
    TrainGan(TrainGanArgs),
    /// Generate expression profiles from a trained GAN.
    Sample(SampleArgs),
    /// Bootstrapped ridge crosstalk between blood signalling and tissue RAS genes.
    Crosstalk(CrosstalkArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Run directory (default: <data-dir>/runs/<command>-<timestamp>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainGnnArgs {
    /// Pipeline configuration JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Window length τ in rows.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Node attribute width.
    #[arg(long)]
    pub latent: Option<usize>,
    /// Seconds simulated per training scenario.
    #[arg(long)]
    pub horizon_s: Option<f64>,
    /// Window counts as TRAIN,VAL,TEST.
    #[arg(long, value_parser = parse_split)]
    pub windows: Option<SplitSizes>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Trained checkpoint (default: <data-dir>/models/gnn.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub passes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Band coverage.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CountsArgs {
    /// Long-format counts CSV; synthetic counts are generated when absent.
    #[arg(long, requires = "gene_lengths")]
    pub counts: Option<PathBuf>,
    #[arg(long, requires = "counts")]
    pub gene_lengths: Option<PathBuf>,
    /// Seed of the synthetic counts.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainGanArgs {
    #[command(flatten)]
    pub data: CountsArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Trained checkpoint (default: <data-dir>/models/gan.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated levels of the swept covariate.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CrosstalkArgs {
    #[command(flatten)]
    pub data: CountsArgs,
    /// Gene sets JSON `{pathway: [genes]}`; built-in fixtures when absent.
    #[arg(long)]
    pub gene_sets: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Concurrent run workers.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    /// Forecaster checkpoint (default: <data-dir>/models/gnn.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Built UI assets to serve at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<SplitSizes, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("`{p}` is not a count")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [train, val, test] => Ok(SplitSizes { train, val, test }),
        _ => Err("expected TRAIN,VAL,TEST".into()),
    }
}

pub fn default_gnn_checkpoint(data_dir: &Path) -> PathBuf {
    data_dir.join("models").join("gnn.json")
}

pub fn default_gan_checkpoint(data_dir: &Path) -> PathBuf {
    data_dir.join("models").join("gan.json")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    fn new(data_dir: &Path, out: &OutArg, kind: &str, seed: u64, config: impl Serialize) -> Self {
        let dir = out.out.clone().unwrap_or_else(|| {
            let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
            data_dir.join("runs").join(format!("{kind}-{ms}"))
        });
        let config = serde_json::to_value(config).expect("configs serialise");
        Self { dir, manifest: RunManifest::new(kind, seed, config) }
    }

    fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let digest = sha256_hex(&read_bytes(path)?);
        self.manifest.inputs.insert(name.into(), digest);
        Ok(())
    }

    /// Records the digest of a freshly written artifact and prints its path.
    fn wrote(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let digest = sha256_hex(&read_bytes(&path)?);
        self.manifest.artifacts.insert(name.into(), digest);
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn finish(self) -> Result<()> {
        let path = self.dir.join("manifest.json");
        save_manifest(&path, &self.manifest)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let data_dir = &cli.data_dir;
    match &cli.command {
        Command::Simulate { scenario, out } => {
            let s = read_scenario(scenario)?;
            let mut run = RunDir::new(data_dir, out, "simulate", s.seed, &s);
            run.input("scenario", scenario)?;
            let traj = simulate(&s)?;
            save_trajectory(&run.path("trajectory.csv"), &traj)?;
            run.wrote("trajectory.csv")?;
            save_topology(&run.path("topology.json"), &physio_topology()?)?;
            run.wrote("topology.json")?;
            run.manifest.diagnostics = json!({ "rows": traj.len(), "variables": traj.width() });
            run.finish()
        }
        Command::TrainGnn(a) => train_gnn_cmd(data_dir, a),
        Command::Forecast(a) => forecast_cmd(data_dir, a),
        Command::TrainGan(a) => train_gan_cmd(data_dir, a),
        Command::Sample(a) => sample_cmd(data_dir, a),
        Command::Crosstalk(a) => crosstalk_cmd(data_dir, a),
        Command::Serve(a) => {
            let opts = ServeOptions {
                data_dir: data_dir.clone(),
                host: a.host.clone(),
                port: a.port,
                workers: a.workers,
                checkpoint: a.checkpoint.clone().unwrap_or_else(|| default_gnn_checkpoint(data_dir)),
                ui_dir: a.ui_dir.clone(),
            };
            service::serve_blocking(opts)
        }
    }
}

fn train_gnn_cmd(data_dir: &Path, a: &TrainGnnArgs) -> Result<()> {
    let mut cfg: GnnPipelineConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GnnPipelineConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.train.lr = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.tau {
        cfg.model.tau = v;
    }
    if let Some(v) = a.latent {
        cfg.model.latent = v;
    }
    if let Some(v) = a.horizon_s {
        cfg.corpus.horizon_s = v;
    }
    if let Some(v) = a.windows {
        cfg.corpus.split = v;
    }
    cfg.model.validate()?;
    let mut run = RunDir::new(data_dir, &a.out, "train-gnn", cfg.seed, &cfg);
    if let Some(p) = &a.config {
        run.input("config", p)?;
    }
    let trained = train_gnn_pipeline(&cfg)?;
    save_gnn_checkpoint(&run.path("checkpoint.json"), &trained.checkpoint)?;
    run.wrote("checkpoint.json")?;
    write_json(&run.path("loss_curves.json"), &trained.curves)?;
    run.wrote("loss_curves.json")?;
    let installed = default_gnn_checkpoint(data_dir);
    save_gnn_checkpoint(&installed, &trained.checkpoint)?;
    println!("installed {}", installed.display());
    run.manifest.diagnostics = json!({
        "windows": trained.windows,
        "epochs": trained.curves.train.len(),
        "final_train_loss": trained.curves.train.last(),
        "final_val_loss": trained.curves.val.last(),
        "test_loss": trained.test_loss,
    });
    run.finish()
}

fn forecast_cmd(data_dir: &Path, a: &ForecastArgs) -> Result<()> {
    let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| default_gnn_checkpoint(data_dir));
    let ckpt = load_gnn_checkpoint(&ckpt_path)?;
    let scenario = read_scenario(&a.scenario)?;
    let cfg = ForecastConfig { steps: a.steps, passes: a.passes, seed: a.seed, level: a.level, ..ForecastConfig::default() };
    cfg.validate()?;
    let mut run = RunDir::new(data_dir, &a.out, "forecast", cfg.seed, json!({ "forecast": cfg, "scenario": scenario }));
    run.input("scenario", &a.scenario)?;
    run.input("checkpoint", &ckpt_path)?;
    let out = forecast(&ckpt, &scenario, &cfg)?;
    save_bundle(&run.path("bundle.csv"), &out.bundle, &out.names)?;
    run.wrote("bundle.csv")?;
    save_summary(&run.path("bundle_summary.json"), &out.summary)?;
    run.wrote("bundle_summary.json")?;
    run.manifest.diagnostics = json!({ "passes": out.bundle.passes, "steps": out.bundle.steps, "variables": out.bundle.vars });
    run.finish()
}

fn load_or_synth(a: &CountsArgs, run: &mut RunDir) -> Result<CountMatrix> {
    match (&a.counts, &a.gene_lengths) {
        (Some(c), Some(l)) => {
            run.input("counts", c)?;
            run.input("gene_lengths", l)?;
            load_counts(c, l)
        }
        _ => {
            let counts = synth_counts(&SynthConfig { seed: a.data_seed, ..SynthConfig::default() })?;
            save_counts(&run.path("counts.csv"), &run.path("gene_lengths.csv"), &counts)?;
            run.wrote("counts.csv")?;
            run.wrote("gene_lengths.csv")?;
            Ok(counts)
        }
    }
}

fn train_gan_cmd(data_dir: &Path, a: &TrainGanArgs) -> Result<()> {
    let mut cfg: GanPipelineConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GanPipelineConfig::default(),
    };
    if let Some(v) = a.iterations {
        cfg.gan.iterations = v;
    }
    if let Some(v) = a.seed {
        cfg.gan.seed = v;
    }
    let mut run = RunDir::new(data_dir, &a.out, "train-gan", cfg.gan.seed, &cfg);
    if let Some(p) = &a.config {
        run.input("config", p)?;
    }
    let counts = load_or_synth(&a.data, &mut run)?;
    let trained = train_gan_pipeline(&counts, &cfg)?;
    save_gan_checkpoint(&run.path("checkpoint.json"), &trained.checkpoint)?;
    run.wrote("checkpoint.json")?;
    write_json(&run.path("diagnostics.json"), &trained.diagnostics)?;
    run.wrote("diagnostics.json")?;
    let installed = default_gan_checkpoint(data_dir);
    save_gan_checkpoint(&installed, &trained.checkpoint)?;
    println!("installed {}", installed.display());
    run.manifest.config = json!({ "pipeline": cfg, "gan": trained.checkpoint.config });
    run.manifest.diagnostics = trained.summary();
    run.finish()
}

fn sample_cmd(data_dir: &Path, a: &SampleArgs) -> Result<()> {
    let path = a.checkpoint.clone().unwrap_or_else(|| default_gan_checkpoint(data_dir));
    let ckpt = load_gan_checkpoint(&path)?;
    let cfg = SampleConfig { count: a.count, seed: a.seed, sweep: a.sweep.clone() };
    let mut run = RunDir::new(data_dir, &a.out, "sample", cfg.seed, &cfg);
    run.input("checkpoint", &path)?;
    let s = sample_gan(&ckpt, &cfg)?;
    save_samples(&run.path("samples.csv"), &run.path("samples.json"), &s.rows, &s.sidecar)?;
    run.wrote("samples.csv")?;
    run.wrote("samples.json")?;
    run.manifest.diagnostics = json!({ "samples": s.sidecar.samples.len(), "rows": s.rows.len() });
    run.finish()
}

fn crosstalk_cmd(data_dir: &Path, a: &CrosstalkArgs) -> Result<()> {
    let mut cfg: CrosstalkConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CrosstalkConfig::default(),
    };
    if let Some(v) = a.replicates {
        cfg.bootstrap.replicates = v;
    }
    if let Some(v) = a.seed {
        cfg.bootstrap.seed = v;
    }
    if cfg.bootstrap.replicates < 10 {
        return Err(TwinError::Config(format!("need ≥ 10 bootstrap replicates, got {}", cfg.bootstrap.replicates)));
    }
    let mut run = RunDir::new(data_dir, &a.out, "crosstalk", cfg.bootstrap.seed, &cfg);
    let sets = match &a.gene_sets {
        Some(p) => {
            run.input("gene_sets", p)?;
            load_gene_sets(p)?
        }
        None => {
            let sets = default_gene_sets();
            save_gene_sets(&run.path("gene_sets.json"), &sets)?;
            run.wrote("gene_sets.json")?;
            sets
        }
    };
    let counts = load_or_synth(&a.data, &mut run)?;
    let report = run_crosstalk(&counts, &sets, &cfg)?;
    let file = CrosstalkReportFile::new(&report, cfg.bootstrap.replicates, cfg.bootstrap.seed);
    save_report(&run.path("crosstalk.json"), &file)?;
    run.wrote("crosstalk.json")?;
    run.manifest.diagnostics = json!({ "tissues": file.tissues.len(), "warnings": file.warnings.len() });
    run.finish()
}
