//! `spforge`: story-point estimation from story text, screenshots and
//! severity, end to end.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid data, 3 I/O or network failure.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigArg, Overrides, SeverityArgs, SplitArgs};
use failure::EXIT_USAGE;

#[derive(Parser, Debug)]
#[command(name = "spforge", version, about = "Multimodal story-point estimation with gradient-boosted trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Inputs {
    /// Records file (JSON Lines).
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Embeddings file (JSON Lines, optional header line).
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct OutArg {
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch bugs from Bugzilla and write a records file.
    Ingest {
        /// CSV with header `id,story_point`.
        #[arg(long, value_name = "FILE")]
        annotations: PathBuf,
        /// Bug ids to fetch (comma separated); defaults to every annotated id.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<u64>,
        /// Base URL; overrides SPFORGE_BUGZILLA_URL.
        #[arg(long, value_name = "URL")]
        base_url: Option<String>,
        /// Concurrent requests.
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fuse records and embeddings into a feature matrix (JSON).
    Fuse {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        severity: SeverityArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Pearson correlations between embedding means, severity and story points.
    Correlate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        severity: SeverityArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stratified train/test split of a records file.
    Split {
        /// Records file (JSON Lines).
        #[arg(long, value_name = "FILE")]
        records: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train a model on the training side of a split.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        /// Split file from `split`; computed from the seed when omitted.
        #[arg(long, value_name = "FILE")]
        split_file: Option<PathBuf>,
        /// Where to write the model.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        severity: SeverityArgs,
        #[command(flatten)]
        config: ConfigArg,
        /// Training report output; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Predict story points (JSON Lines, one prediction per story).
    Predict {
        #[command(flatten)]
        inputs: Inputs,
        /// Model file written by `train`.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Restrict to the test side of this split file.
        #[arg(long, value_name = "FILE")]
        split_file: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate a model, or the bundled 22-story prediction table with --table5.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        /// Model file written by `train`.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Restrict to the test side of this split file.
        #[arg(long, value_name = "FILE")]
        split_file: Option<PathBuf>,
        /// Score the bundled 22-story prediction table instead of a model.
        #[arg(long, conflicts_with_all = ["model", "records", "embeddings", "split_file"])]
        table5: bool,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train and evaluate with and without severity on one shared split.
    Ablate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Write a seeded synthetic corpus (records and embeddings).
    Synth {
        /// Records output.
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        /// Embeddings output.
        #[arg(long, value_name = "FILE")]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn overrides(
    config: ConfigArg,
    inputs: Option<Inputs>,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
    split: Option<SplitArgs>,
    severity: Option<SeverityArgs>,
) -> Overrides {
    let (records, embeddings) = inputs.map(|i| (i.records, i.embeddings)).unwrap_or_default();
    Overrides {
        config: config.config,
        records,
        embeddings,
        model,
        out,
        split: split.unwrap_or_default(),
        severity: severity.unwrap_or_default(),
    }
}

fn run(command: Command) -> failure::CmdResult {
    use Command::*;
    match command {
        Ingest { annotations, ids, base_url, parallelism, out } => {
            commands::ingest(&annotations, &ids, base_url, parallelism, out.out.as_deref())
        }
        Fuse { inputs, severity, config, out } => {
            commands::fuse(&config::resolve(&overrides(config, Some(inputs), None, out.out, None, Some(severity)))?)
        }
        Correlate { inputs, severity, config, out } => {
            commands::correlate(&config::resolve(&overrides(config, Some(inputs), None, out.out, None, Some(severity)))?)
        }
        Split { records, split, config, out } => {
            let inputs = Inputs { records, embeddings: None };
            commands::split(&config::resolve(&overrides(config, Some(inputs), None, out.out, Some(split), None))?)
        }
        Train { inputs, split_file, model, split, severity, config, out } => {
            let cfg = config::resolve(&overrides(config, Some(inputs), model, out, Some(split), Some(severity)))?;
            commands::train(&cfg, split_file.as_deref())
        }
        Predict { inputs, model, split_file, config, out } => {
            let cfg = config::resolve(&overrides(config, Some(inputs), model, out.out, None, None))?;
            commands::predict(&cfg, split_file.as_deref())
        }
        Evaluate { inputs, model, split_file, table5, config, out } => {
            let cfg = config::resolve(&overrides(config, Some(inputs), model, out.out, None, None))?;
            if table5 {
                commands::evaluate_table5(&cfg)
            } else {
                commands::evaluate(&cfg, split_file.as_deref())
            }
        }
        Ablate { inputs, split, config, out } => {
            commands::ablate(&config::resolve(&overrides(config, Some(inputs), None, out.out, Some(split), None))?)
        }
        Synth { records, embeddings, seed } => commands::synth(&records, &embeddings, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
