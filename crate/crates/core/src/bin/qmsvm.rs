use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use qmsvm::experiments::{self, Bundle, ConcentrationConfig, DatasetRef, ExperimentConfig, KernelChoice, KernelName, NOISE_SWEEP};
use qmsvm::svm::Strategy;
use qmsvm::{Error, Result};

/// Quantum-kernel multiclass SVM experiments.
#[derive(Parser)]
#[command(name = "qmsvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shipped dataset name (iris, penguin, tae, glass, ecoli, vowel) when no config is given.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Kernels by abbreviation, comma-separated (e.g. xqk,fqk,gk).
    #[arg(long, global = true, value_delimiter = ',')]
    kernel: Vec<KernelName>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default runs/<command>-<dataset>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exact kernel values (the default).
    #[arg(long, global = true, conflicts_with = "shots")]
    exact: bool,
    /// Estimate kernel values from this many measurement shots.
    #[arg(long, global = true)]
    shots: Option<u32>,
    /// Depolarizing probability applied to each qubit.
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// ova or cs.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Also evaluate quantum kernels at p = 0.01, 0.05, 0.1, 0.2.
    #[arg(long, global = true)]
    noise_sweep: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute (or load from cache) the Gram matrix of each kernel.
    KernelMatrix,
    /// Stratified k-fold accuracy per kernel.
    Crossvalidate,
    /// Train/test evaluation with metrics, ROC curves and confusion matrices.
    Evaluate,
    /// Accuracy against training-set size.
    LearningCurve,
    /// Relative test loss of shot-based kernels on random data.
    Concentration,
    /// Frobenius norms, Rademacher estimates and bounds.
    Generalization,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelMatrix => "kernel-matrix",
            Command::Crossvalidate => "crossvalidate",
            Command::Evaluate => "evaluate",
            Command::LearningCurve => "learning-curve",
            Command::Concentration => "concentration",
            Command::Generalization => "generalization",
        }
    }
}

fn experiment_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match (&g.config, &g.dataset) {
        (Some(path), _) => ExperimentConfig::from_json_file(path)?,
        (None, Some(name)) => ExperimentConfig::new(DatasetRef::Builtin(name.clone())),
        (None, None) => return Err(Error::invalid("give --config <file> or --dataset <name>")),
    };
    if let (Some(_), Some(name)) = (&g.config, &g.dataset) {
        cfg.dataset = DatasetRef::Builtin(name.clone());
    }
    if !g.kernel.is_empty() {
        cfg.kernels = Some(g.kernel.iter().copied().map(KernelChoice::Named).collect());
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if g.exact {
        cfg.shots = None;
    }
    if g.shots.is_some() {
        cfg.shots = g.shots;
    }
    if let Some(p) = g.noise {
        cfg.noise = p;
    }
    if let Some(s) = g.strategy {
        cfg.strategy = s;
    }
    if g.noise_sweep {
        cfg.noise_sweep = NOISE_SWEEP.to_vec();
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn concentration_config(g: &Global) -> Result<ConcentrationConfig> {
    let mut cfg = match &g.config {
        Some(path) => ConcentrationConfig::from_json_file(path)?,
        None => ConcentrationConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(z) = g.shots {
        cfg.shots = z;
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<PathBuf> {
    let g = &cli.global;
    let command = cli.command.name();
    if let Command::Concentration = cli.command {
        let cfg = concentration_config(g)?;
        let out = cfg.out.clone().unwrap_or_else(|| experiments::default_out(command, "random"));
        let report = experiments::concentration(&cfg)?;
        let mut b = Bundle::new(&cfg)?;
        b.concentration(&report)?;
        b.write(&out)?;
        return Ok(out);
    }
    let cfg = experiment_config(g)?;
    let out = cfg.out.clone().unwrap_or_else(|| experiments::default_out(command, &cfg.dataset.name()));
    let mut b = Bundle::new(&cfg)?;
    match cli.command {
        Command::KernelMatrix => {
            let cache = cfg.cache_dir.clone().unwrap_or_else(|| out.join("cache"));
            b.kernel_matrix(&experiments::kernel_matrix(&cfg, &cache)?)?;
        }
        Command::Crossvalidate => b.crossvalidate(&experiments::crossvalidate(&cfg)?)?,
        Command::Evaluate => b.evaluate(&experiments::evaluate(&cfg)?)?,
        Command::LearningCurve => b.learning_curve(&experiments::learning_curve(&cfg)?)?,
        Command::Generalization => b.generalization(&experiments::generalization(&cfg)?)?,
        Command::Concentration => unreachable!(),
    }
    b.write(&out)?;
    if let Ok(text) = std::fs::read_to_string(out.join("report.txt")) {
        // A closed stdout (e.g. piped into `head`) is not an error here.
        let _ = std::io::stdout().write_all(text.as_bytes());
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let _ = writeln!(std::io::stdout(), "wrote {}", Path::new(&out).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
