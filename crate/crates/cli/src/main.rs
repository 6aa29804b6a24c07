mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dytag_core::generation::GenMode;

use crate::commands::{EvalArgs, UsageError};
use crate::config::{PolicyKind, RunConfig, SuiteKind};

#[derive(Parser)]
#[command(name = "dytag", version, about = "Generate and evaluate dynamic text-attributed graphs")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw edge/node CSVs and write a graph directory.
    Ingest {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bipartite: bool,
    },
    /// Split a graph into a seed prefix and its continuation.
    SliceSeed {
        #[arg(long)]
        graph: PathBuf,
        /// Seed size in edges.
        #[arg(long)]
        edges: usize,
        #[arg(long)]
        seed_out: PathBuf,
        #[arg(long)]
        continuation_out: PathBuf,
    },
    /// Grow a seed graph with agents.
    Generate {
        #[arg(long)]
        seed_dir: PathBuf,
        /// Ground-truth continuation (required for tdgg).
        #[arg(long)]
        continuation: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyKind>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<GenMode>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        edges_per_round: Option<usize>,
    },
    /// Compare a generated graph with the ground truth.
    Evaluate {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        suites: Option<Vec<SuiteKind>>,
        /// Leading edges treated as seed (default: from the run manifest).
        #[arg(long)]
        skip: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a saved report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        markdown: bool,
    },
}

fn parse_mode(s: &str) -> Result<GenMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "tdgg" => Ok(GenMode::Tdgg),
        "idgg" => Ok(GenMode::Idgg),
        other => Err(format!("unknown mode `{other}` (expected tdgg or idgg)")),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(UsageError)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.resolve(cli.seed, cli.jobs);
    if let Some(j) = cfg.jobs {
        // ignore the error if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    match cli.command {
        Command::Ingest { edges, nodes, out, bipartite } => commands::ingest(&edges, &nodes, &out, bipartite),
        Command::SliceSeed { graph, edges, seed_out, continuation_out } => {
            commands::slice(&graph, edges, &seed_out, &continuation_out)
        }
        Command::Generate { seed_dir, continuation, out, policy, mode, rounds, edges_per_round } => {
            if let Some(p) = policy {
                cfg.agent.policy = p;
            }
            if let Some(m) = mode {
                cfg.generation.mode = m;
            }
            if let Some(k) = rounds {
                cfg.generation.rounds = k;
            }
            if let Some(s) = edges_per_round {
                cfg.generation.edges_per_round = s;
            }
            commands::generate(&cfg, &seed_dir, continuation.as_deref(), &out)
        }
        Command::Evaluate { generated, truth, suites, skip, out } => {
            if let Some(s) = suites {
                cfg.evaluation.suites = s;
            }
            let suites = cfg.evaluation.suites.clone();
            commands::evaluate(&cfg, EvalArgs { generated: &generated, truth: &truth, suites, skip, out })
        }
        Command::Report { input, markdown } => commands::report(&input, markdown),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
