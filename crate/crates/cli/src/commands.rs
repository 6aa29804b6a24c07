use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use dytag_core::discriminative::discriminative_report;
use dytag_core::embedding::embedding_report;
use dytag_core::generation::{
    run_generation, AgentPolicy, GenMode, LlmPolicy, RecallLog, RecencyPolicy, RunManifest, UniformPolicy,
};
use dytag_core::io::{ingest_csv, load_graph_dir, save_graph_dir, write_jsonl};
use dytag_core::report::{GraphStats, MetricReport, Suite};
use dytag_core::structural::structural_report;
use dytag_core::textual::evaluate_textual;
use dytag_core::{slice_seed, DyTag, GraphError};
use dytag_llm::{CachedEndpoint, ChatEndpoint, HttpChatClient, Scenario, ScenarioKind};

use crate::config::{PolicyKind, RunConfig, SuiteKind};

pub const RECALL_LOGS_FILE: &str = "recall_logs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const STATS_FILE: &str = "stats.json";

/// Failures that map to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn graph_err(e: GraphError) -> anyhow::Error {
    match &e {
        GraphError::Io(msg) if msg.contains("file not found") || msg.contains("not a graph directory") => {
            UsageError(msg.clone()).into()
        }
        _ => e.into(),
    }
}

fn load(dir: &Path) -> anyhow::Result<DyTag> {
    load_graph_dir(dir).map_err(graph_err)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn ingest(edges: &Path, nodes: &Path, out: &Path, bipartite: bool) -> anyhow::Result<()> {
    for (path, what) in [(nodes, "node"), (edges, "edge")] {
        if !path.exists() {
            return Err(UsageError(format!("{what} file not found: {}", path.display())).into());
        }
    }
    let stats = ingest_csv(edges, nodes, bipartite, out).map_err(graph_err)?;
    write_json(&out.join(STATS_FILE), &stats)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

pub fn slice(graph: &Path, n: usize, seed_out: &Path, continuation_out: &Path) -> anyhow::Result<()> {
    let g = load(graph)?;
    let split = slice_seed(&g, n).map_err(|e| UsageError(e.to_string()))?;
    save_graph_dir(seed_out, &split.seed)?;
    save_graph_dir(continuation_out, &split.remainder)?;
    eprintln!(
        "seed: {} nodes, {} edges; continuation: {} edges",
        split.seed.node_count(),
        split.seed.edge_count(),
        split.remainder.edge_count()
    );
    Ok(())
}

fn endpoint(cfg: &RunConfig) -> anyhow::Result<Arc<dyn ChatEndpoint>> {
    let client = HttpChatClient::new(cfg.endpoint.clone().with_env())?;
    Ok(match &cfg.paths.llm_cache_dir {
        Some(dir) => Arc::new(CachedEndpoint::new(client, dir.clone(), cfg.endpoint.model.clone())?),
        None => Arc::new(client),
    })
}

fn scenario(cfg: &RunConfig, bipartite: bool) -> Scenario {
    match cfg.agent.scenario {
        ScenarioKind::Generic => Scenario::generic(&cfg.agent.descriptors, bipartite),
        kind => Scenario::from_kind(kind, &cfg.agent.descriptors),
    }
}

fn policy(cfg: &RunConfig, bipartite: bool) -> anyhow::Result<Box<dyn AgentPolicy>> {
    Ok(match cfg.agent.policy {
        PolicyKind::Recency => Box::new(RecencyPolicy),
        PolicyKind::Uniform => Box::new(UniformPolicy),
        PolicyKind::Llm => Box::new(
            LlmPolicy::new(endpoint(cfg)?, scenario(cfg, bipartite))
                .with_parse_attempts(cfg.agent.parse_attempts)
                .with_time_format(cfg.generation.time_format),
        ),
    })
}

pub fn generate(cfg: &RunConfig, seed_dir: &Path, continuation: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    cfg.generation.validate().map_err(|e| UsageError(e.to_string()))?;
    let seed = load(seed_dir)?;
    let truth = match (cfg.generation.mode, continuation) {
        (GenMode::Tdgg, None) => return Err(UsageError("tdgg needs --continuation".into()).into()),
        (_, Some(p)) => Some(load(p)?),
        (_, None) => None,
    };
    let policy = policy(cfg, seed.is_bipartite())?;
    let outcome = run_generation(&seed, truth.as_ref(), &cfg.generation, policy.as_ref())?;

    std::fs::create_dir_all(out)?;
    save_graph_dir(out, &outcome.graph)?;
    write_jsonl(BufWriter::new(File::create(out.join(RECALL_LOGS_FILE))?), &outcome.recall_logs)?;
    write_json(&out.join(MANIFEST_FILE), &outcome.manifest)?;
    write_json(&out.join(TIMINGS_FILE), &outcome.timings)?;
    cfg.write_beside(out)?;
    eprintln!(
        "generated {} edges and {} nodes in {} round(s)",
        outcome.manifest.edges_added, outcome.manifest.nodes_added, outcome.manifest.rounds_completed
    );
    if let dytag_core::generation::RunStatus::Aborted { round, reason } = &outcome.status {
        bail!("round {round} aborted: {reason} (partial graph written to {})", out.display());
    }
    Ok(())
}

fn read_recall_logs(path: &Path) -> anyhow::Result<Vec<RecallLog>> {
    let file = File::open(path).with_context(|| format!("recall logs {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
        }
    }
    Ok(out)
}

/// Seed size recorded by the generator, else the configured one.
fn resolve_skip(generated_dir: &Path, cfg: &RunConfig) -> usize {
    std::fs::read_to_string(generated_dir.join(MANIFEST_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok())
        .map_or(cfg.generation.seed_edges, |m| m.seed_edges)
}

pub struct EvalArgs<'a> {
    pub generated: &'a Path,
    pub truth: &'a Path,
    pub suites: Vec<SuiteKind>,
    pub skip: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn evaluate(cfg: &RunConfig, args: EvalArgs) -> anyhow::Result<()> {
    let generated = load(args.generated)?;
    let full_truth = load(args.truth)?;
    let truth = full_truth.truncated(generated.edge_count());
    let skip = args.skip.unwrap_or_else(|| resolve_skip(args.generated, cfg));
    let mut report = MetricReport {
        generated: Some(GraphStats::of(&generated)),
        truth: Some(GraphStats::of(&truth)),
        ..Default::default()
    };
    for suite in &args.suites {
        match suite {
            SuiteKind::Structural => {
                let r = structural_report(&generated, &truth, &cfg.structural);
                report.structural = Some(if r.degree_mmd.is_none() && r.spectra_mmd.is_none() {
                    Suite::Failed { error: r.errors.join("; ") }
                } else {
                    Suite::Ok { report: r }
                });
            }
            SuiteKind::Embedding => {
                let r = cfg
                    .embedding
                    .encoder()
                    .and_then(|enc| embedding_report(&generated, &truth, enc.as_ref(), &cfg.embedding));
                report.embedding = Some(Suite::from_result(r));
            }
            SuiteKind::Textual => {
                let r = endpoint(cfg).map_err(|e| e.to_string()).and_then(|ep| {
                    evaluate_textual(&generated, skip.min(generated.edge_count()), ep.as_ref(), &cfg.textual)
                        .map_err(|e| e.to_string())
                });
                report.textual = Some(Suite::from_result(r));
            }
            SuiteKind::Discriminative => {
                let r = read_recall_logs(&args.generated.join(RECALL_LOGS_FILE)).map_err(|e| e.to_string()).and_then(
                    |logs| {
                        discriminative_report(&generated, &truth, &logs, skip, &cfg.discriminative)
                            .map_err(|e| e.to_string())
                    },
                );
                report.discriminative = Some(Suite::from_result(r));
            }
        }
    }
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
                cfg.write_beside(dir)?;
            }
            std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
        }
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    if report.all_failed() {
        bail!("every requested suite failed");
    }
    Ok(())
}

pub fn report(input: &Path, markdown: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| UsageError(format!("report {}: {e}", input.display())))?;
    let report: MetricReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    if markdown {
        print!("{}", report.to_markdown());
    } else {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}
