use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentPolicy, GenConfig, GenError, GraphIndex, TimeCodec};
use crate::graph::{DyTag, NodeRecord};
use crate::rng::{hash_str, substream};
use crate::timestamp::Timestamp;

const EXCERPT_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub timestamp: Timestamp,
    pub counterpart: String,
    pub counterpart_excerpt: String,
    pub label: String,
    pub text: String,
}

impl MemoryEntry {
    pub fn render(&self, codec: TimeCodec) -> String {
        let mut s = format!("[{}] with {}", codec.render(self.timestamp), self.counterpart);
        if !self.counterpart_excerpt.is_empty() {
            s.push_str(&format!(" ({})", self.counterpart_excerpt));
        }
        if !self.label.is_empty() {
            s.push_str(&format!(" label={}", self.label));
        }
        if !self.text.is_empty() {
            s.push_str(": ");
            s.push_str(&self.text);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeMemory {
    pub node_id: String,
    /// Records in walk order.
    pub entries: Vec<MemoryEntry>,
    pub reflected_summary: Option<String>,
}

impl NodeMemory {
    pub fn empty(node_id: impl Into<String>) -> Self {
        Self { node_id: node_id.into(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per entry.
    pub fn render(&self, codec: TimeCodec) -> String {
        self.entries.iter().map(|e| e.render(codec)).collect::<Vec<_>>().join("\n")
    }

    /// What an agent sees: the reflected summary when present, else the entries.
    pub fn prompt_text(&self, codec: TimeCodec) -> String {
        match &self.reflected_summary {
            Some(s) if !s.is_empty() => s.clone(),
            _ => self.render(codec),
        }
    }

    pub fn max_timestamp(&self) -> Option<Timestamp> {
        self.entries.iter().map(|e| e.timestamp).max()
    }

    /// Entries newest first; ties keep the later walk position first.
    pub fn most_recent(&self, n: usize) -> Vec<&MemoryEntry> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| self.entries[b].timestamp.cmp(&self.entries[a].timestamp).then(b.cmp(&a)));
        order.into_iter().take(n).map(|i| &self.entries[i]).collect()
    }

    fn rendered_len(&self, codec: TimeCodec) -> usize {
        self.render(codec).chars().count()
    }

    /// Drop the oldest entries until the rendering fits in `cap` characters.
    /// A lone oversized entry has its text cut instead.
    pub fn truncate_to(&mut self, cap: usize, codec: TimeCodec) {
        while self.entries.len() > 1 && self.rendered_len(codec) > cap {
            let oldest = (0..self.entries.len())
                .min_by(|&a, &b| self.entries[a].timestamp.cmp(&self.entries[b].timestamp).then(a.cmp(&b)))
                .expect("non-empty");
            self.entries.remove(oldest);
        }
        let len = self.entries.len();
        if let Some(e) = self.entries.first_mut() {
            let over = e.render(codec).chars().count();
            if len == 1 && over > cap {
                let excess = over - cap;
                let keep = e.text.chars().count().saturating_sub(excess);
                e.text = e.text.chars().take(keep).collect();
                if e.render(codec).chars().count() > cap {
                    self.entries.clear();
                }
            }
        }
    }
}

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_CHARS).collect()
}

/// Temporal random walks from `node` over edges visible at the graph's
/// current state, using the given RNG.
///
/// Each step picks uniformly among the current node's incident edges with
/// timestamp at most the previous step's timestamp and moves to the other
/// endpoint; a walk stops early when no such edge exists.
pub fn build_memory_with(
    graph: &DyTag,
    index: &GraphIndex,
    node: usize,
    config: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> NodeMemory {
    let nodes = graph.nodes();
    let edges = graph.edges();
    let mut mem = NodeMemory::empty(nodes[node].node_id.clone());
    let mut seen: HashSet<(usize, usize, u64)> = HashSet::new();
    for _ in 0..config.walks {
        let mut at = node;
        let mut bound: Option<Timestamp> = None;
        for _ in 0..config.walk_len {
            let inc = &index.incidence[at];
            let n_ok = match bound {
                None => inc.len(),
                Some(b) => inc.partition_point(|&i| edges[i].timestamp <= b),
            };
            if n_ok == 0 {
                break;
            }
            let e = &edges[inc[rng.random_range(0..n_ok)]];
            let s = graph.node_index(&e.src).expect("validated edge");
            let d = graph.node_index(&e.dst).expect("validated edge");
            let next = if s == at { d } else { s };
            if seen.insert((s.min(d), s.max(d), e.timestamp.as_f64().to_bits())) {
                mem.entries.push(MemoryEntry {
                    timestamp: e.timestamp,
                    counterpart: nodes[next].node_id.clone(),
                    counterpart_excerpt: excerpt(&nodes[next].text),
                    label: e.label.clone(),
                    text: e.text.clone(),
                });
            }
            at = next;
            bound = Some(e.timestamp);
        }
    }
    mem.truncate_to(config.memory_cap_chars, config.time_format);
    mem
}

/// Memory of `node` with an RNG derived from the config seed and the node id.
pub fn build_memory(graph: &DyTag, node: &str, config: &GenConfig) -> Result<NodeMemory, GenError> {
    let i = graph.node_index(node).ok_or_else(|| GenError::UnknownNode(node.to_string()))?;
    let mut rng = substream(config.rng_seed, "memory", &[hash_str(node)]);
    Ok(build_memory_with(graph, &GraphIndex::new(graph), i, config, &mut rng))
}

/// Ask the policy to summarize a memory. Empty memories skip the policy.
/// On failure the memory is returned unreflected together with the error.
pub fn reflect_memory(
    policy: &dyn AgentPolicy,
    source: &NodeRecord,
    mut memory: NodeMemory,
    cap: usize,
) -> (NodeMemory, Option<String>) {
    if memory.is_empty() {
        memory.reflected_summary = Some(String::new());
        return (memory, None);
    }
    match policy.reflect(source, &memory) {
        Ok(summary) => {
            memory.reflected_summary = Some(summary.chars().take(cap).collect());
            (memory, None)
        }
        Err(e) => {
            log::warn!("reflection failed for {}: {e}", source.node_id);
            (memory, Some(e.to_string()))
        }
    }
}
