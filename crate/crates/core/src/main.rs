use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bottleneck::cli::{self, CliError, Overrides, RunConfig};
use bottleneck::eval::ReportFormat;
use bottleneck::heads::HeadKind;

/// Train and evaluate classifier heads on cached image embeddings.
#[derive(Parser)]
#[command(name = "bottleneck", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and models
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated train-test labels, e.g. 80-10,60-30
    #[arg(long, global = true)]
    splits: Option<String>,
    /// Comma-separated heads: softmax,svm,knn
    #[arg(long, global = true)]
    heads: Option<String>,
    /// Embedding dimension
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Embedding cache file
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest and print its class distribution
    Ingest { manifest: Option<PathBuf> },
    /// Compute (or reuse) the embedding cache
    Extract,
    /// Train one head on one split and save it
    Train {
        #[arg(long)]
        head: Option<HeadKind>,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a saved head on a split's test partition
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        split: Option<String>,
    },
    /// Run every split x head cell and write reports
    Sweep,
    /// Re-emit a sweep JSON as csv and plot data
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "format", value_delimiter = ',')]
        formats: Vec<ReportFormat>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Extract => "extract",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep => "sweep",
            Command::Report { .. } => "report",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = cli.shared;
    let overrides = Overrides {
        config: s.config,
        manifest: s.manifest,
        seed: s.seed,
        out: s.out,
        splits: s.splits,
        heads: s.heads,
        dim: s.dim,
        cache: s.cache,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { manifest } => {
            let path = match manifest.or(overrides.manifest.clone()) {
                Some(p) => p,
                None => RunConfig::load(&overrides)?
                    .manifest_path
                    .ok_or_else(|| CliError::input("no manifest given"))?,
            };
            cli::cmd_ingest(&path, &mut out)
        }
        Command::Extract => cli::cmd_extract(&RunConfig::load(&overrides)?, &mut out),
        Command::Train { head, split, model } => {
            let config = RunConfig::load(&overrides)?;
            cli::cmd_train(&config, head, split.as_deref(), model.as_deref(), &mut out).map(|_| ())
        }
        Command::Eval { model, split } => {
            let config = RunConfig::load(&overrides)?;
            cli::cmd_eval(&config, &model, split.as_deref(), &mut out)
        }
        Command::Sweep => {
            let config = RunConfig::load(&overrides)?;
            cli::cmd_sweep(&config, &mut out, &mut std::io::stderr()).map(|_| ())
        }
        Command::Report { input, formats } => {
            let formats = if formats.is_empty() {
                vec![ReportFormat::Csv, ReportFormat::PlotData]
            } else {
                formats
            };
            let out_dir = overrides
                .out
                .clone()
                .or_else(|| input.parent().map(PathBuf::from))
                .unwrap_or_default();
            cli::cmd_report(&input, &formats, &out_dir, &mut out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let _ = writeln!(std::io::stdout(), "RESULT: {name} failed exit={} {}", e.code, e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
