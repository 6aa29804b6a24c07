use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::memory::{build_memory_with, reflect_memory, NodeMemory};
use super::policy::random_node_id;
use super::{
    derive_node_rates, recall_candidates_with, AgentPolicy, Candidate, GenConfig, GenError, GenMode, GraphIndex,
    NodeGenContext, SelectionContext, SourceSelection,
};
use crate::graph::{DyTag, NodeRecord, Role, TemporalEdge};
use crate::rng::substream;
use crate::timestamp::Timestamp;

const ID_ATTEMPTS: usize = 5;
const RECENT_NODES: usize = 5;
const CANDIDATE_RECENT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallLog {
    /// Position of the generated edge in the output edge list.
    pub edge_index: usize,
    pub round: usize,
    pub src: String,
    pub candidates: Vec<String>,
    /// 1-based rank of the chosen destination.
    pub chosen_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { round: usize, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub round: usize,
    pub seconds: f64,
}

/// Everything needed to reproduce a run. Contains no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: GenConfig,
    pub policy: String,
    pub seed_edges: usize,
    pub rounds_completed: usize,
    pub edges_added: usize,
    pub nodes_added: usize,
    pub timestamp_clamps: usize,
    pub policy_retries: usize,
    pub reflection_failures: usize,
    pub id_regenerations: usize,
    /// TDGG rounds that padded sources uniformly after the continuation ran out.
    pub padded_source_rounds: usize,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub graph: DyTag,
    pub recall_logs: Vec<RecallLog>,
    pub manifest: RunManifest,
    pub timings: Vec<RoundTiming>,
    pub status: RunStatus,
}

struct SlotOut {
    edge: TemporalEdge,
    rank: usize,
    candidates: Vec<usize>,
    retries: usize,
    clamped: bool,
    reflection_failed: bool,
}

#[derive(Default)]
struct Counters {
    clamps: usize,
    retries: usize,
    reflection_failures: usize,
    id_regenerations: usize,
    padded: usize,
}

struct Engine<'a> {
    cfg: &'a GenConfig,
    policy: &'a dyn AgentPolicy,
    pool: rayon::ThreadPool,
    allow_self: bool,
    median_gap: f64,
    label_counts: Vec<(String, u64)>,
    counters: Counters,
    logs: Vec<RecallLog>,
    timings: Vec<RoundTiming>,
}

fn median_gap(g: &DyTag) -> f64 {
    let mut gaps: Vec<f64> = g.edges().windows(2).map(|w| w[1].timestamp.as_f64() - w[0].timestamp.as_f64()).collect();
    if gaps.is_empty() {
        return 1.0;
    }
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len() / 2;
    if gaps.len() % 2 == 1 {
        gaps[m]
    } else {
        (gaps[m - 1] + gaps[m]) / 2.0
    }
}

fn render_recent(g: &DyTag, index: &GraphIndex, node: usize, codec: super::TimeCodec) -> String {
    index.incidence[node]
        .iter()
        .rev()
        .take(CANDIDATE_RECENT)
        .map(|&i| {
            let e = &g.edges()[i];
            let text: String = e.text.chars().take(80).collect();
            format!("[{}] {}: {}", codec.render(e.timestamp), e.label, text)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl<'a> Engine<'a> {
    fn new(seed: &DyTag, cfg: &'a GenConfig, policy: &'a dyn AgentPolicy) -> Result<Self, GenError> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism.max(1))
            .build()
            .map_err(|e| GenError::Pool(e.to_string()))?;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for e in seed.edges() {
            *counts.entry(e.label.clone()).or_default() += 1;
        }
        Ok(Self {
            cfg,
            policy,
            pool,
            allow_self: !seed.is_bipartite() && seed.edges().iter().any(|e| e.src == e.dst),
            median_gap: median_gap(seed),
            label_counts: counts.into_iter().collect(),
            counters: Counters::default(),
            logs: Vec::new(),
            timings: Vec::new(),
        })
    }

    fn slot(
        &self,
        g: &DyTag,
        index: &GraphIndex,
        round: usize,
        slot: usize,
        src: usize,
        dst_pool: &[usize],
        floor: Timestamp,
    ) -> Result<SlotOut, String> {
        let cfg = self.cfg;
        let (r, s) = (round as u64, slot as u64);
        let nodes = g.nodes();
        let source = &nodes[src];
        let mut memory = if cfg.use_memory {
            build_memory_with(g, index, src, cfg, &mut substream(cfg.rng_seed, "memory", &[r, s]))
        } else {
            NodeMemory::empty(source.node_id.clone())
        };
        let mut reflection_failed = false;
        if cfg.reflection && cfg.use_memory {
            let (m, err) = reflect_memory(self.policy, source, memory, cfg.memory_cap_chars);
            memory = m;
            reflection_failed = err.is_some();
        }
        let cands = recall_candidates_with(
            g,
            index,
            src,
            dst_pool,
            cfg.recall_k,
            self.allow_self,
            &mut substream(cfg.rng_seed, "recall", &[r, s]),
        );
        if cands.is_empty() {
            return Err(format!("no destination candidates for {}", source.node_id));
        }
        let mut prior: Vec<&str> = Vec::new();
        for &d in index.out_dst[src].iter().rev() {
            let id = nodes[d].node_id.as_str();
            if !prior.contains(&id) {
                prior.push(id);
            }
        }
        let history_labels: Vec<&str> = index.incidence[src]
            .iter()
            .map(|&i| &g.edges()[i])
            .filter(|e| e.src == source.node_id)
            .map(|e| e.label.as_str())
            .collect();
        let ctx = SelectionContext {
            round,
            slot,
            source,
            memory: &memory,
            candidates: cands
                .iter()
                .map(|&c| Candidate { node: &nodes[c], recent: render_recent(g, index, c, cfg.time_format) })
                .collect(),
            prior_destinations: prior,
            history_labels,
            label_counts: &self.label_counts,
            floor,
            median_gap: self.median_gap,
            time_format: cfg.time_format,
        };

        let mut last_err = String::new();
        for attempt in 0..=cfg.max_policy_retries {
            let mut rng = substream(cfg.rng_seed, "policy", &[r, s, attempt as u64]);
            match self.policy.select_destination(&ctx, &mut rng) {
                Ok(action) => {
                    let Some(pos) = cands.iter().position(|&c| nodes[c].node_id == action.chosen_dst) else {
                        last_err = format!("destination {} is not in the recall list", action.chosen_dst);
                        continue;
                    };
                    let mut ts = Timestamp::like(floor, action.timestamp.as_f64());
                    let clamped = ts < floor;
                    if clamped {
                        log::warn!(
                            "round {round} slot {slot}: timestamp {} moved forward to {floor}",
                            action.timestamp
                        );
                        ts = floor;
                    }
                    return Ok(SlotOut {
                        edge: TemporalEdge::new(
                            source.node_id.clone(),
                            action.chosen_dst,
                            ts,
                            action.label,
                            action.edge_text,
                        ),
                        rank: pos + 1,
                        candidates: cands,
                        retries: attempt,
                        clamped,
                        reflection_failed,
                    });
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(format!("agent {} failed after {} attempts: {last_err}", source.node_id, cfg.max_policy_retries + 1))
    }

    /// Run one interaction round on `g` and commit it, or leave `g` untouched.
    fn interact(
        &mut self,
        g: &mut DyTag,
        index: &mut GraphIndex,
        round: usize,
        sources: &[usize],
        dst_pool: &[usize],
    ) -> Result<(), String> {
        let floor = g.time_range().map_or(Timestamp::Int(0), |(_, hi)| hi);
        let results: Vec<Result<SlotOut, String>> = {
            let (gr, ir) = (&*g, &*index);
            self.pool.install(|| {
                sources
                    .par_iter()
                    .enumerate()
                    .map(|(slot, &src)| self.slot(gr, ir, round, slot, src, dst_pool, floor))
                    .collect()
            })
        };
        let mut outs = Vec::with_capacity(results.len());
        for r in results {
            outs.push(r?);
        }
        let mut order: Vec<usize> = (0..outs.len()).collect();
        order.sort_by(|&a, &b| {
            outs[a].edge.src.cmp(&outs[b].edge.src).then(outs[a].rank.cmp(&outs[b].rank)).then(a.cmp(&b))
        });
        order.sort_by(|&a, &b| outs[a].edge.timestamp.cmp(&outs[b].edge.timestamp));

        let base = g.edge_count();
        let batch: Vec<TemporalEdge> = order.iter().map(|&i| outs[i].edge.clone()).collect();
        g.append_edges(batch).map_err(|e| e.to_string())?;
        for (pos, &i) in order.iter().enumerate() {
            let o = &outs[i];
            let at = base + pos;
            let s = g.node_index(&o.edge.src).expect("validated");
            let d = g.node_index(&o.edge.dst).expect("validated");
            index.incidence[s].push(at);
            if d != s {
                index.incidence[d].push(at);
            }
            index.degree[s] += 1;
            index.degree[d] += 1;
            index.out_dst[s].push(d);
            self.counters.retries += o.retries;
            self.counters.clamps += o.clamped as usize;
            self.counters.reflection_failures += o.reflection_failed as usize;
            self.logs.push(RecallLog {
                edge_index: at,
                round,
                src: o.edge.src.clone(),
                candidates: o.candidates.iter().map(|&c| g.nodes()[c].node_id.clone()).collect(),
                chosen_rank: o.rank,
            });
        }
        Ok(())
    }

    fn finish(
        self,
        graph: DyTag,
        seed_edges: usize,
        rounds_completed: usize,
        nodes_added: usize,
        config: GenConfig,
        status: RunStatus,
    ) -> GenerationOutcome {
        let manifest = RunManifest {
            config,
            policy: self.policy.name(),
            seed_edges,
            rounds_completed,
            edges_added: graph.edge_count() - seed_edges,
            nodes_added,
            timestamp_clamps: self.counters.clamps,
            policy_retries: self.counters.retries,
            reflection_failures: self.counters.reflection_failures,
            id_regenerations: self.counters.id_regenerations,
            padded_source_rounds: self.counters.padded,
            status: status.clone(),
        };
        GenerationOutcome { graph, recall_logs: self.logs, manifest, timings: self.timings, status }
    }
}

fn sample_nodes(rng: &mut impl Rng, from: &[usize], n: usize) -> Vec<usize> {
    if from.is_empty() {
        return Vec::new();
    }
    if from.len() >= n {
        sample(rng, from.len(), n).into_iter().map(|i| from[i]).collect()
    } else {
        (0..n).map(|_| from[rng.random_range(0..from.len())]).collect()
    }
}

fn add_to_pool(pool: &mut Vec<usize>, member: &mut Vec<bool>, nodes: impl IntoIterator<Item = usize>) {
    for n in nodes {
        if n >= member.len() {
            member.resize(n + 1, false);
        }
        if !member[n] {
            member[n] = true;
            pool.push(n);
        }
    }
    pool.sort_unstable();
}

/// Ground-truth-driven generation over a fixed node registry.
///
/// `continuation` supplies the registry and, in replay mode, the active
/// sources of every round (S consecutive edges per round).
pub fn run_tdgg(
    seed: &DyTag,
    continuation: &DyTag,
    cfg: &GenConfig,
    policy: &dyn AgentPolicy,
) -> Result<GenerationOutcome, GenError> {
    let mut engine = Engine::new(seed, cfg, policy)?;
    if let Some(n) = seed.nodes().iter().find(|n| !continuation.contains(&n.node_id)) {
        return Err(GenError::UnknownNode(n.node_id.clone()));
    }
    let mut g = DyTag::from_records(continuation.nodes().to_vec(), seed.edges().to_vec(), seed.is_bipartite())?;
    let mut index = GraphIndex::new(&g);
    let seed_edges = g.edge_count();
    // same registry order as `g`
    let idx = |id: &str| continuation.node_index(id).expect("registry node");

    let mut member = vec![false; g.node_count()];
    let mut dst_pool = Vec::new();
    let initial: Vec<usize> = if g.is_bipartite() {
        g.edges().iter().map(|e| idx(&e.dst)).collect()
    } else {
        g.edges().iter().flat_map(|e| [idx(&e.src), idx(&e.dst)]).collect()
    };
    add_to_pool(&mut dst_pool, &mut member, initial);
    let src_capable: Vec<usize> = (0..g.node_count()).filter(|&i| g.nodes()[i].role.can_source()).collect();
    let dst_capable: Vec<usize> = (0..g.node_count()).filter(|&i| g.nodes()[i].role.can_receive()).collect();

    let s = cfg.edges_per_round;
    let truth = continuation.edges();
    let mut status = RunStatus::Completed;
    let mut done = 0;
    for round in 0..cfg.rounds {
        let started = Instant::now();
        let mut rng = substream(cfg.rng_seed, "sources", &[round as u64]);
        let (sources, new_dsts) = match cfg.source_selection {
            SourceSelection::ReplayGroundTruth => {
                let block = truth.get(round * s..truth.len().min((round + 1) * s)).unwrap_or(&[]);
                let mut srcs: Vec<usize> = block.iter().map(|e| idx(&e.src)).collect();
                let dsts: Vec<usize> = block.iter().map(|e| idx(&e.dst)).collect();
                if srcs.len() < s {
                    engine.counters.padded += 1;
                    srcs.extend(sample_nodes(&mut rng, &src_capable, s - srcs.len()));
                }
                (srcs, dsts)
            }
            SourceSelection::Uniform => {
                (sample_nodes(&mut rng, &src_capable, s), sample_nodes(&mut rng, &dst_capable, s))
            }
        };
        let mut pool_member = member.clone();
        let mut pool = dst_pool.clone();
        add_to_pool(&mut pool, &mut pool_member, new_dsts);
        if sources.is_empty() {
            status = RunStatus::Aborted { round, reason: "no source-capable nodes".into() };
            break;
        }
        match engine.interact(&mut g, &mut index, round, &sources, &pool) {
            Ok(()) => {
                dst_pool = pool;
                member = pool_member;
                done += 1;
            }
            Err(reason) => {
                log::error!("round {round} aborted: {reason}");
                status = RunStatus::Aborted { round, reason };
                break;
            }
        }
        engine.timings.push(RoundTiming { round, seconds: started.elapsed().as_secs_f64() });
    }
    Ok(engine.finish(g, seed_edges, done, 0, cfg.clone(), status))
}

/// The most recently active distinct nodes that satisfy `keep`, newest first.
fn recent_active(g: &DyTag, keep: impl Fn(&TemporalEdge) -> Vec<&str>) -> Vec<usize> {
    let mut out = Vec::new();
    for e in g.edges().iter().rev() {
        for id in keep(e) {
            let i = g.node_index(id).expect("validated");
            if !out.contains(&i) {
                out.push(i);
            }
        }
        if out.len() >= RECENT_NODES {
            break;
        }
    }
    out.truncate(RECENT_NODES);
    out
}

/// Generation that also grows the node registry every round.
pub fn run_idgg(seed: &DyTag, cfg: &GenConfig, policy: &dyn AgentPolicy) -> Result<GenerationOutcome, GenError> {
    let mut engine = Engine::new(seed, cfg, policy)?;
    let (r_src, r_dst) = match (cfg.r_src, cfg.r_dst) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let (da, db) = derive_node_rates(seed, cfg.edges_per_round);
            (a.unwrap_or(da), b.unwrap_or(db))
        }
    };
    let resolved = GenConfig { r_src: Some(r_src), r_dst: Some(r_dst), ..cfg.clone() };
    let mut g = seed.clone();
    let mut index = GraphIndex::new(&g);
    let seed_edges = g.edge_count();
    let bip = g.is_bipartite();
    let roles: Vec<(Role, usize)> =
        if bip { vec![(Role::Source, r_src), (Role::Destination, r_dst)] } else { vec![(Role::Both, r_src + r_dst)] };
    let mut last_generated: Vec<Vec<usize>> = vec![Vec::new(); roles.len()];
    let mut status = RunStatus::Completed;
    let mut done = 0;
    let mut nodes_added = 0;

    for round in 0..cfg.rounds {
        let started = Instant::now();
        match idgg_round(&mut engine, &g, &index, round, &roles, &last_generated) {
            Ok((next, next_index, generated)) => {
                nodes_added += generated.iter().map(Vec::len).sum::<usize>();
                last_generated = generated;
                g = next;
                index = next_index;
                done += 1;
            }
            Err(reason) => {
                log::error!("round {round} aborted: {reason}");
                status = RunStatus::Aborted { round, reason };
                break;
            }
        }
        engine.timings.push(RoundTiming { round, seconds: started.elapsed().as_secs_f64() });
    }
    Ok(engine.finish(g, seed_edges, done, nodes_added, resolved, status))
}

type RoundResult = (DyTag, GraphIndex, Vec<Vec<usize>>);

fn idgg_round(
    engine: &mut Engine,
    g: &DyTag,
    index: &GraphIndex,
    round: usize,
    roles: &[(Role, usize)],
    last_generated: &[Vec<usize>],
) -> Result<RoundResult, String> {
    let cfg = engine.cfg;
    let r = round as u64;
    let mut jobs: Vec<(usize, Role, usize, Vec<&NodeRecord>)> = Vec::new();
    for (ri, &(role, count)) in roles.iter().enumerate() {
        let recent_ids: Vec<usize> = if round > 0 && !last_generated[ri].is_empty() {
            last_generated[ri].clone()
        } else {
            recent_active(g, |e| match role {
                Role::Source => vec![e.src.as_str()],
                Role::Destination => vec![e.dst.as_str()],
                Role::Both => vec![e.src.as_str(), e.dst.as_str()],
            })
        };
        let recent: Vec<&NodeRecord> = recent_ids.iter().map(|&i| &g.nodes()[i]).collect();
        for i in 0..count {
            jobs.push((ri, role, i, recent.clone()));
        }
    }
    let policy = engine.policy;
    let drafts: Vec<Result<NodeRecord, String>> = engine.pool.install(|| {
        jobs.par_iter()
            .map(|(ri, role, i, recent)| {
                let ctx = NodeGenContext { round, index: *i, role: *role, recent: recent.clone() };
                let mut rng = substream(cfg.rng_seed, "node", &[r, *ri as u64, *i as u64]);
                policy.generate_node(&ctx, &mut rng).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut next = g.clone();
    let mut generated: Vec<Vec<usize>> = vec![Vec::new(); roles.len()];
    let mut taken: HashSet<String> = HashSet::new();
    for ((ri, role, i, _), draft) in jobs.iter().zip(drafts) {
        let mut node = draft?;
        node.role = *role;
        node.origin = crate::graph::Origin::Generated;
        let mut attempt = 0;
        while node.node_id.trim().is_empty() || next.contains(&node.node_id) || taken.contains(&node.node_id) {
            if attempt == ID_ATTEMPTS {
                return Err(format!("could not find a fresh id for new node {i} after {ID_ATTEMPTS} attempts"));
            }
            let mut rng = substream(cfg.rng_seed, "node-id", &[r, *ri as u64, *i as u64, attempt as u64]);
            node.node_id = random_node_id(&mut rng);
            attempt += 1;
            engine.counters.id_regenerations += 1;
        }
        taken.insert(node.node_id.clone());
        next.add_node(node).map_err(|e| e.to_string())?;
        generated[*ri].push(next.node_count() - 1);
    }

    let mut next_index = index.clone();
    let added = next.node_count() - g.node_count();
    next_index.incidence.extend(std::iter::repeat_with(Vec::new).take(added));
    next_index.degree.extend(std::iter::repeat_n(0, added));
    next_index.out_dst.extend(std::iter::repeat_with(Vec::new).take(added));

    let src_capable: Vec<usize> = (0..next.node_count()).filter(|&i| next.nodes()[i].role.can_source()).collect();
    let dst_pool: Vec<usize> = (0..next.node_count()).filter(|&i| next.nodes()[i].role.can_receive()).collect();
    let mut rng = substream(cfg.rng_seed, "sources", &[r]);
    let sources = sample_nodes(&mut rng, &src_capable, cfg.edges_per_round);
    if sources.is_empty() {
        return Err("no source-capable nodes".into());
    }
    engine.interact(&mut next, &mut next_index, round, &sources, &dst_pool)?;
    Ok((next, next_index, generated))
}

/// Dispatch on `cfg.mode`. TDGG needs the ground-truth continuation.
pub fn run_generation(
    seed: &DyTag,
    continuation: Option<&DyTag>,
    cfg: &GenConfig,
    policy: &dyn AgentPolicy,
) -> Result<GenerationOutcome, GenError> {
    match cfg.mode {
        GenMode::Tdgg => {
            let truth = continuation
                .ok_or_else(|| GenError::InvalidConfig("TDGG needs the ground-truth continuation".into()))?;
            run_tdgg(seed, truth, cfg, policy)
        }
        GenMode::Idgg => run_idgg(seed, cfg, policy),
    }
}
