//! Command-line front end. Every projection or example run writes a
//! manifest next to its output that embeds the resolved configuration, so
//! `--config <manifest>` repeats the run.

mod config;
mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{AlignmentConfig, CacheConfig, ContextualConfig, RunConfig, TranslatorConfig};
pub use pipeline::{manifest_path, Manifest};

use crate::backends::{BackendError, CacheMode};
use crate::baselines::AlignmentError;
use crate::contextual::ExampleError;
use crate::corpus::{CorpusError, Method};
use crate::evaluation::EvaluationError;
use crate::projection::ProjectionError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Io(e.to_string()),
            CorpusError::Registry(_) => CliError::Config(e.to_string()),
            CorpusError::Parse { .. } | CorpusError::Invalid { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Table(_) => CliError::Config(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::Backend { .. } => CliError::Backend(e.to_string()),
            ProjectionError::Invalid { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ExampleError> for CliError {
    fn from(e: ExampleError) -> Self {
        match e {
            ExampleError::Backend { .. } => CliError::Backend(e.to_string()),
            ExampleError::Prompt(_) => CliError::Config(e.to_string()),
            ExampleError::EmptyPool | ExampleError::Insufficient { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        match e {
            AlignmentError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "labelproj",
    version,
    about = "Project span labels into machine-translated sentences"
)]
pub struct Cli {
    /// Run config JSON, or a manifest from an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "NAME")]
    pub method: Option<Method>,
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub cache: Option<PathBuf>,
    #[arg(long, value_name = "MODE")]
    pub cache_mode: Option<CacheMode>,
    /// Seed for in-context example selection.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project a corpus with the configured method.
    Project(RunArgs),
    /// Generate verified in-context examples from a pool corpus.
    Examples(RunArgs),
    /// Keep only fully faithful datapoints as a target-language corpus.
    Filter {
        #[arg(long, visible_alias = "projected", value_name = "PATH")]
        corpus: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Faithfulness report for one or more projected files.
    Metrics {
        #[arg(long, visible_alias = "projected", value_name = "PATH", required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Export blinded A/B pairs from two projected runs.
    AbExport {
        #[arg(long, value_name = "PATH")]
        run_a: PathBuf,
        #[arg(long, value_name = "PATH")]
        run_b: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Annotation file handed to judges.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Side assignment; must live in a different directory from --out.
        #[arg(long, value_name = "PATH")]
        sealed: PathBuf,
    },
    /// Score judged A/B pairs against the sealed assignment.
    AbScore {
        #[arg(long, value_name = "PATH")]
        verdicts: PathBuf,
        #[arg(long, value_name = "PATH")]
        sealed: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Summarize a replay cache file.
    CacheStats {
        #[arg(long, value_name = "PATH")]
        cache: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = cli.config;
    match cli.command {
        Command::Project(args) => pipeline::cmd_project(config.as_deref(), &args),
        Command::Examples(args) => pipeline::cmd_examples(config.as_deref(), &args),
        Command::Filter { corpus, out } => pipeline::cmd_filter(&corpus, &out),
        Command::Metrics { corpus, out } => pipeline::cmd_metrics(&corpus, out.as_deref()),
        Command::AbExport {
            run_a,
            run_b,
            n,
            seed,
            out,
            sealed,
        } => pipeline::cmd_ab_export(&run_a, &run_b, n, seed, &out, &sealed),
        Command::AbScore { verdicts, sealed, out } => pipeline::cmd_ab_score(&verdicts, &sealed, out.as_deref()),
        Command::CacheStats { cache } => pipeline::cmd_cache_stats(&cache),
    }
}
