use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lgmml::data::SynthConfig;
use lgmml::warp::TrainConfig;

use crate::report::ReportFormat;

#[derive(Debug, Parser)]
#[command(
    name = "lgmml",
    version,
    about = "Learning to rank with localized geometric mean metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a LETOR file and save it.
    Train(TrainArgs),
    /// Score and order every query's candidates with a saved model.
    Rank(RankArgs),
    /// Report per-query and mean NDCG@k and MAP of a saved model.
    Eval(EvalArgs),
    /// Train and evaluate one model per number of local metrics.
    Sweep(SweepArgs),
    /// Write a synthetic Gaussian-class dataset in LETOR format.
    Synth(SynthArgs),
}

/// Training hyperparameters shared by the subcommands that fit weights.
#[derive(Debug, Clone, Args)]
pub struct Hyper {
    /// SGD iterations.
    #[arg(long, default_value_t = 10_000)]
    pub iters: u64,
    /// SGD step size.
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    /// Hinge margin.
    #[arg(long, default_value_t = 0.1)]
    pub zeta: f64,
    /// Identity regularization added to both scatter matrices.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Initial value of every weight.
    #[arg(long = "phi-init", default_value_t = 1.0)]
    pub phi_init: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the basis-metric fits. Results do not depend on it.
    #[arg(long, env = "LGMML_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Fraction of the queries pooled for each basis metric.
    #[arg(long = "subset-fraction", default_value_t = 0.2)]
    pub subset_fraction: f64,
    /// Minimum label of anchor candidates; defaults to each query's top label.
    #[arg(long = "hi-label")]
    pub hi_label: Option<u32>,
}

impl Hyper {
    pub fn config(&self, m: usize) -> TrainConfig {
        TrainConfig {
            m,
            iters: self.iters,
            mu: self.mu,
            zeta: self.zeta,
            lambda: self.lambda,
            phi_init: self.phi_init,
            seed: self.seed,
            threads: self.threads,
            subset_fraction: self.subset_fraction,
            hi_label_threshold: self.hi_label,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of local metrics.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Candidates to rank; labels are read but ignored.
    #[arg(long)]
    pub test: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub report: ReportFormat,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// NDCG cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub report: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refit the weights on the labeled test queries before evaluating.
    #[arg(long)]
    pub transductive: bool,
    /// Use the label itself as gain instead of 2^label - 1.
    #[arg(long = "linear-gain")]
    pub linear_gain: bool,
    /// Hyperparameters for the transductive refit.
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Numbers of local metrics to try.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    pub report: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "linear-gain")]
    pub linear_gain: bool,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    /// Output LETOR file (the training part when --test-out is given).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a held-out split with the same query ids.
    #[arg(long = "test-out")]
    pub test_out: Option<PathBuf>,
    #[arg(long = "test-fraction", default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    /// Side of the cube the class centers are drawn from.
    #[arg(long, default_value_t = 10.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Omit the query that mixes every class.
    #[arg(long = "no-mixed")]
    pub no_mixed: bool,
    /// Keep raw coordinates instead of unit-norm columns.
    #[arg(long = "no-normalize")]
    pub no_normalize: bool,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            num_classes: self.classes,
            points_per_class: self.points,
            dim: self.dim,
            center_spread: self.spread,
            seed: self.seed,
            mixed_query: !self.no_mixed,
            normalize: !self.no_normalize,
        }
    }
}
