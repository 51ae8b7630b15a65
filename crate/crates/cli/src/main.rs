//! `subprof`: expert finding over topic subprofiles, one pipeline stage per
//! subcommand. Every stage reads and writes a working directory.

mod commands;
mod config;
mod workdir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subprof::eval::System;
use subprof::topicselect::Strategy;

use commands::{Context, SearchArgs};
use config::RunConfig;
use workdir::Workdir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    Missing(String),
    #[error(transparent)]
    Data(subprof::Error),
    #[error("working directory is locked by {}; remove it if no other run is active", .0.display())]
    Locked(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<subprof::Error> for CliError {
    fn from(e: subprof::Error) -> Self {
        match e {
            subprof::Error::Io(io) => CliError::Io(io),
            other => CliError::Data(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Missing(_) => 4,
            CliError::Data(_) => 5,
            CliError::Locked(_) => 6,
            CliError::Io(_) => 7,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "subprof",
    version,
    about = "Expert finding with topic subprofiles"
)]
struct Cli {
    /// Working directory holding every artifact.
    #[arg(long, global = true, env = "SUBPROF_WORKDIR", default_value = ".")]
    workdir: PathBuf,
    /// Run configuration; defaults to <workdir>/config.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the LDA, partition and generator seeds.
    #[arg(long, global = true, env = "SUBPROF_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted topics and committees.
    Synth {
        /// TOML generator parameters; built-in defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output directory, the working directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the corpus, vocabulary and train/test partitions.
    Ingest {
        /// Records file, overriding paths.corpus.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the topic model of each split.
    Train {
        #[arg(long)]
        split: Option<usize>,
    },
    /// Split training documents into topic subdocuments.
    SplitDocs {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        split: Option<usize>,
    },
    /// Build the profiles of a strategy or baseline.
    Profile {
        #[arg(long)]
        system: System,
        #[arg(long)]
        split: Option<usize>,
    },
    /// Index term profiles for query-likelihood search.
    Index {
        #[arg(long)]
        system: System,
        #[arg(long)]
        split: Option<usize>,
    },
    /// Rank profiles for a free-text query or for every test initiative.
    Search {
        #[arg(long)]
        system: System,
        #[arg(long, default_value_t = 0)]
        split: usize,
        /// Print a run for this text to stdout.
        #[arg(
            long,
            conflicts_with = "test_queries",
            required_unless_present = "test_queries"
        )]
        query: Option<String>,
        /// Run every test initiative of the split and write qrels.
        #[arg(long)]
        test_queries: bool,
        /// Hits per query, retrieval.depth by default.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Fuse profile runs into candidate rankings.
    Fuse {
        #[arg(long)]
        system: System,
        #[arg(long, default_value_t = 0)]
        split: usize,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the full experiment over the saved partitions.
    Evaluate {
        /// Skip the pairwise significance tests.
        #[arg(long)]
        no_p_values: bool,
    },
    /// Subprofile statistics of every configured strategy.
    Stats {
        #[arg(long)]
        split: Option<usize>,
    },
    /// Score every selection measure on a topic distribution.
    Measures {
        /// Comma-separated probabilities, e.g. 0.5,0.3,0.2
        #[arg(long, allow_hyphen_values = true)]
        dist: String,
    },
}

impl Command {
    fn writes_workdir(&self) -> bool {
        !matches!(
            self,
            Command::Measures { .. } | Command::Search { query: Some(_), .. }
        )
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let default = cli.workdir.join("config.toml");
            if default.exists() {
                RunConfig::load(&default)?
            } else {
                let mut config = RunConfig::default();
                config.paths.corpus = cli.workdir.join(&config.paths.corpus);
                config
            }
        }
    };
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Measures { dist } = &cli.command {
        return commands::measures(dist);
    }
    let ctx = Context {
        workdir: Workdir::new(&cli.workdir),
        config: load_config(&cli)?,
        seed: cli.seed,
    };
    let _lock = if cli.command.writes_workdir() {
        Some(ctx.workdir.lock()?)
    } else {
        None
    };
    match cli.command {
        Command::Synth { params, out } => commands::synth(&ctx, params.as_deref(), out.as_deref()),
        Command::Ingest { input } => commands::ingest(&ctx, input.as_deref()),
        Command::Train { split } => commands::train(&ctx, split),
        Command::SplitDocs { strategy, split } => commands::split_docs(&ctx, strategy, split),
        Command::Profile { system, split } => commands::profile(&ctx, system, split),
        Command::Index { system, split } => commands::index(&ctx, system, split),
        Command::Search {
            system,
            split,
            query,
            top,
            ..
        } => commands::search_cmd(
            &ctx,
            SearchArgs {
                system,
                split,
                query: query.as_deref(),
                top,
            },
        ),
        Command::Fuse {
            system,
            split,
            input,
            output,
        } => commands::fuse(&ctx, system, split, input.as_deref(), output.as_deref()),
        Command::Evaluate { no_p_values } => commands::evaluate(&ctx, !no_p_values),
        Command::Stats { split } => commands::stats(&ctx, split),
        Command::Measures { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
