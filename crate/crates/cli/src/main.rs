//! `forcealign`: align ASR output to manual transcripts, estimate alignment
//! quality, and build speaker-disjoint speech corpora.

mod commands;
mod config;
mod error;
mod logging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "forcealign", about = "Forced sentence alignment and speech corpus building")]
pub struct Cli {
    /// Key-value file of option defaults (`key = value` per line); flags given
    /// on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Documents processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align documents and write aligned sentences and feature rows.
    #[command(args_override_self = true)]
    Align(AlignArgs),
    /// Train the IoU estimator on feature and label rows.
    #[command(args_override_self = true)]
    TrainIou(TrainArgs),
    /// Apply the corpus filters to aligned sentences.
    #[command(args_override_self = true)]
    Filter(FilterCmdArgs),
    /// Score aligned sentences against gold timings.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Assign speaker-disjoint train and test splits to a manifest.
    #[command(args_override_self = true)]
    Split(SplitArgs),
    /// Search alignment parameters on a labeled corpus.
    #[command(args_override_self = true)]
    Tune(TuneArgs),
    /// Build train and test manifests from aligned documents.
    #[command(args_override_self = true)]
    Build(BuildArgs),
    /// Generate a synthetic labeled corpus.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
}

/// Alignment settings shared by `align` and `tune`.
#[derive(Debug, Args)]
pub struct AlignFlags {
    /// Built-in parameter set: optimized (alias appendix_a) or semi_global
    /// (alias appendix_b).
    #[arg(long, conflicts_with = "params")]
    pub preset: Option<String>,
    /// Parameter file with the 14 `key = value` scores.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long, default_value = "char", value_parser = ["char", "word"])]
    pub granularity: String,
    /// full_dp or linear_memory; chosen by problem size when omitted.
    #[arg(long, value_parser = ["full_dp", "linear_memory"])]
    pub mode: Option<String>,
    /// Restrict full DP to a diagonal band of this width.
    #[arg(long, value_name = "W")]
    pub band: Option<usize>,
    /// Reject documents whose transcript and ASR lengths differ by more
    /// than this factor.
    #[arg(long, default_value_t = 6.0)]
    pub max_length_ratio: f64,
    #[arg(long)]
    pub no_length_ratio: bool,
    /// Abbreviation list, one token per line, replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub abbrev: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub align: AlignFlags,
    /// Directory of `<id>.asr.json` + `<id>.txt` (+ `<id>.speakers.tsv`).
    #[arg(long, conflicts_with_all = ["asr", "transcript"], required_unless_present = "asr")]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "transcript")]
    pub asr: Option<PathBuf>,
    #[arg(long, requires = "asr")]
    pub transcript: Option<PathBuf>,
    /// Speaker spans for `--transcript`.
    #[arg(long, requires = "transcript")]
    pub speakers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Time calibration JSON (`start_offset`, `end_offset`) to apply.
    #[arg(long, value_name = "FILE")]
    pub calibration: Option<PathBuf>,
    /// IoU estimator; adds `iou_estimate` to aligned sentences.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Also write the run-length encoded alignment path per document.
    #[arg(long)]
    pub dump_alignment: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature JSON-lines files, or directories of `<id>.features.jsonl`.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Label files (or directories of `<id>.labels.jsonl`), one per `--in`
    /// entry, in the same order.
    #[arg(long, required = true, num_args = 1..)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub num_leaves: usize,
    #[arg(long, default_value_t = 7)]
    pub min_child_samples: usize,
    #[arg(long, default_value_t = 7597)]
    pub max_bin: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub num_trees: usize,
    /// Also report k-fold cross-validated mean absolute error.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
}

/// Filter settings shared by `filter` and `build`.
#[derive(Debug, Args)]
pub struct FilterFlags {
    #[arg(long, default_value_t = 6.0)]
    pub cps_min: f64,
    #[arg(long, default_value_t = 23.0)]
    pub cps_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_audio: f64,
    #[arg(long, default_value_t = 15.0)]
    pub max_audio: f64,
    #[arg(long, default_value = "de")]
    pub language: String,
    /// Keep duplicate sentences in test sets.
    #[arg(long)]
    pub allow_duplicates: bool,
    /// External language detector: reads one sentence per line, answers one
    /// language code per line.
    #[arg(long, value_name = "CMD")]
    pub lang_detector: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Role {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct FilterCmdArgs {
    /// Aligned-sentence JSON-lines with IoU estimates.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Role::Train)]
    pub role: Role,
    #[arg(long, default_value_t = 0.7)]
    pub iou_threshold: f64,
    #[command(flatten)]
    pub filters: FilterFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Aligned-sentence file, or directory of `<id>.aligned.jsonl`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold file, or directory of `<id>.gold.jsonl`.
    #[arg(long)]
    pub gold: PathBuf,
    /// Write IoU training labels for the predicted sentences (a directory
    /// of `<id>.labels.jsonl` when `--pred` is a directory).
    #[arg(long, value_name = "PATH")]
    pub labels_out: Option<PathBuf>,
    /// Fit a time calibration on these predictions and write it as JSON.
    #[arg(long, value_name = "FILE")]
    pub fit_calibration: Option<PathBuf>,
    /// Fit the calibration by IoU grid search instead of mean residuals.
    #[arg(long, requires = "fit_calibration")]
    pub grid: bool,
    /// Write an IoU-estimate threshold sweep as JSON-lines.
    #[arg(long, value_name = "FILE")]
    pub sweep_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.6,0.7,0.8,0.9")]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SplitFlags {
    /// Target test set size in hours.
    #[arg(long)]
    pub test_hours: f64,
    /// Maximum share of the test set per speaker (exclusive).
    #[arg(long, default_value_t = 0.1)]
    pub speaker_cap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the cut list (recording id to sorted spans) as JSON.
    #[arg(long, value_name = "FILE")]
    pub cuts_out: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub align: AlignFlags,
    /// Directory of documents with `<id>.gold.jsonl` labels.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Best parameters, written in the `--params` file format.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub budget: usize,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub grid_calibration: bool,
    /// Every trial's parameters and score as JSON-lines.
    #[arg(long, value_name = "FILE")]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Output directory of `align`.
    #[arg(long)]
    pub aligned: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.9")]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub test_threshold: f64,
    #[command(flatten)]
    pub split: SplitFlags,
    #[command(flatten)]
    pub filters: FilterFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub docs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub speaker_pool: usize,
}

fn version() -> String {
    format!("{} (format version {})", env!("CARGO_PKG_VERSION"), forcealign::FORMAT_VERSION)
}

fn parse() -> Result<Cli, clap::Error> {
    let argv = config::expand_args(std::env::args_os().collect(), &Cli::command())
        .map_err(|e| Cli::command().error(clap::error::ErrorKind::Io, e))?;
    let matches = Cli::command().version(version()).try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::INPUT } else { error::OK });
        }
    };
    logging::init(cli.log_level);
    match commands::run(&cli) {
        Ok(()) => ExitCode::from(error::OK),
        Err(CliError { code, message }) => {
            if matches!(cli.log_level, LogLevel::Off) {
                eprintln!("error: {message}");
            } else {
                log::error!("{message}");
            }
            ExitCode::from(code)
        }
    }
}
