use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gnn_unify::propagation::{Mode, Model, ModelParams, PropagationConfig};

mod commands;
mod output;

#[derive(Parser)]
#[command(
    name = "gnn-unify",
    version,
    about = "Graph propagation as objective minimization: train, sweep and verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train seeded trials of an MLP followed by propagation and report test accuracy.
    Train(TrainArgs),
    /// Emit the frequency response of a model's filter over λ ∈ [0, 2].
    Spectrum(SpectrumArgs),
    /// Run the numerical verification battery.
    Verify(VerifyArgs),
    /// Train at several propagation depths.
    DepthSweep(SweepArgs),
    /// Sweep (alpha, mu) for gnn-lf or (alpha, beta) for gnn-hf.
    ParamGrid(GridArgs),
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "gnn-lf", value_parser = parse_model)]
    pub model: Model,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Smoothing weight for jknet-fixed and dagnn-fixed; derived from alpha elsewhere.
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Defaults to the model's own form (iter for sgc and appnp, closed otherwise).
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
}

impl ModelArgs {
    pub fn config(&self) -> PropagationConfig {
        let params = ModelParams {
            alpha: self.alpha,
            mu: self.mu,
            beta: self.beta,
            xi: self.xi,
            depth: self.depth,
        };
        let cfg = PropagationConfig::from_params(self.model, params).with_depth(self.depth);
        match self.mode {
            Some(mode) => cfg.with_mode(mode),
            None => cfg,
        }
    }
}

#[derive(Args, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["bundle", "sbm_preset"])))]
pub struct DataArgs {
    /// Graph bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Synthetic stochastic block model: easy, medium or hard.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(gnn_unify::SbmConfig::PRESETS))]
    pub sbm_preset: Option<String>,
    /// Scale feature rows to unit L1 norm.
    #[arg(long)]
    pub row_normalize: bool,
}

#[derive(Args, Clone)]
pub struct FitArgs {
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Base seed; also seeds the synthetic graph.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run trials concurrently; results match the sequential order.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// L2 penalty on the first layer.
    #[arg(long, default_value_t = 5e-3)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    #[arg(long, default_value_t = 1500)]
    pub max_epochs: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResponseKind {
    Rational,
    Polynomial,
    Both,
}

#[derive(Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ResponseKind::Rational)]
    pub kind: ResponseKind,
    /// Polynomial order K; defaults to --depth.
    #[arg(long)]
    pub order: Option<usize>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Use this bundle's graph and features instead of a random graph.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub edge_prob: f64,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, value_delimiter = ',', default_values_t = gnn_unify::verify::DEFAULT_DEPTHS)]
    pub depths: Vec<usize>,
    /// Corrupt one coefficient table; the run must then fail.
    #[arg(long)]
    pub inject_coefficient_error: bool,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, value_delimiter = ',', default_values_t = gnn_unify::verify::DEFAULT_DEPTHS)]
    pub depths: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.2, 0.5])]
    pub alphas: Vec<f64>,
    /// Second axis: mu for gnn-lf, beta for gnn-hf.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.7, 0.9])]
    pub mus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0])]
    pub betas: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|_| {
        let names: Vec<_> = Model::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: gnn_unify::Error| e.to_string())
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameter values; exit 2.
    Usage(String),
    /// Training, I/O or verification failure; exit 1.
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<gnn_unify::Error> for Failure {
    fn from(e: gnn_unify::Error) -> Self {
        match e {
            gnn_unify::Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Run(other.into()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("GNN_UNIFY_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "GNN_UNIFY_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Run(e.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::DepthSweep(a) => commands::depth_sweep(&a),
        Command::ParamGrid(a) => commands::param_grid(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
