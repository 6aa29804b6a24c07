use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NodeMemory, TimeCodec};
use crate::graph::{NodeRecord, Role};
use crate::timestamp::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("endpoint failure: {0}")]
    Endpoint(String),
    #[error("policy failure: {0}")]
    Failed(String),
}

/// One destination an agent may choose.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub node: &'a NodeRecord,
    /// Recent interactions of the candidate, rendered.
    pub recent: String,
}

/// Everything an agent sees when choosing one interaction.
#[derive(Debug, Clone)]
pub struct SelectionContext<'a> {
    pub round: usize,
    pub slot: usize,
    pub source: &'a NodeRecord,
    pub memory: &'a NodeMemory,
    /// Recall list, rank 1 first.
    pub candidates: Vec<Candidate<'a>>,
    /// Previous destinations of the source, most recent first.
    pub prior_destinations: Vec<&'a str>,
    /// Labels of the source's own past interactions, oldest first.
    pub history_labels: Vec<&'a str>,
    /// Seed label counts, sorted by label.
    pub label_counts: &'a [(String, u64)],
    /// Earliest timestamp the engine accepts for this interaction.
    pub floor: Timestamp,
    /// Median gap between consecutive seed timestamps.
    pub median_gap: f64,
    pub time_format: TimeCodec,
}

impl SelectionContext<'_> {
    /// Default next timestamp: one median gap after the later of the memory
    /// and the floor.
    pub fn next_timestamp(&self) -> Timestamp {
        let base = self.memory.max_timestamp().map_or(self.floor, |m| m.max(self.floor));
        base.offset(self.median_gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub chosen_dst: String,
    pub timestamp: Timestamp,
    pub label: String,
    pub edge_text: String,
    /// 1-based position of `chosen_dst` in the recall list.
    pub confidence_rank: usize,
}

#[derive(Debug, Clone)]
pub struct NodeGenContext<'a> {
    pub round: usize,
    /// Position among the round's new nodes of this role.
    pub index: usize,
    pub role: Role,
    /// Recently active nodes of the same role, shown as examples.
    pub recent: Vec<&'a NodeRecord>,
}

/// Decision-making for generation agents. Implementations must be
/// deterministic given the RNG they are handed.
pub trait AgentPolicy: Send + Sync {
    /// Identity recorded in run manifests.
    fn name(&self) -> String;
    fn select_destination(&self, ctx: &SelectionContext, rng: &mut ChaCha8Rng) -> Result<AgentAction, PolicyError>;
    fn generate_node(&self, ctx: &NodeGenContext, rng: &mut ChaCha8Rng) -> Result<NodeRecord, PolicyError>;
    fn reflect(&self, source: &NodeRecord, memory: &NodeMemory) -> Result<String, PolicyError>;
}

pub(crate) fn random_node_id(rng: &mut ChaCha8Rng) -> String {
    format!("G{:05}", rng.random_range(0..100_000u32))
}

fn sample_label(ctx: &SelectionContext, rng: &mut ChaCha8Rng) -> String {
    if !ctx.history_labels.is_empty() {
        return ctx.history_labels[rng.random_range(0..ctx.history_labels.len())].to_string();
    }
    let total: u64 = ctx.label_counts.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return String::new();
    }
    let mut pick = rng.random_range(0..total);
    for (label, c) in ctx.label_counts {
        if pick < *c {
            return label.clone();
        }
        pick -= c;
    }
    unreachable!("pick below total")
}

fn templated_action(ctx: &SelectionContext, rank: usize, label: String) -> AgentAction {
    let dst = ctx.candidates[rank - 1].node;
    let mut text = format!("{} interacted with {}", ctx.source.node_id, dst.node_id);
    if !label.is_empty() {
        text.push_str(&format!(" ({label})"));
    }
    AgentAction {
        chosen_dst: dst.node_id.clone(),
        timestamp: ctx.next_timestamp(),
        label,
        edge_text: text,
        confidence_rank: rank,
    }
}

fn templated_node(ctx: &NodeGenContext, rng: &mut ChaCha8Rng) -> NodeRecord {
    let id = random_node_id(rng);
    let mut text = format!("generated {} node", ctx.role.as_str());
    if let Some(like) = ctx.recent.first() {
        let excerpt: String = like.text.chars().take(80).collect();
        text.push_str(&format!(" resembling {}: {excerpt}", like.node_id));
    }
    NodeRecord::generated(id, ctx.role, text)
}

/// Repeats the most recent prior destination when it was recalled,
/// otherwise takes the top candidate.
#[derive(Debug, Clone, Default)]
pub struct RecencyPolicy;

impl AgentPolicy for RecencyPolicy {
    fn name(&self) -> String {
        "stub-recency".into()
    }

    fn select_destination(&self, ctx: &SelectionContext, rng: &mut ChaCha8Rng) -> Result<AgentAction, PolicyError> {
        if ctx.candidates.is_empty() {
            return Err(PolicyError::Failed("empty recall list".into()));
        }
        let rank = ctx
            .prior_destinations
            .iter()
            .find_map(|p| ctx.candidates.iter().position(|c| c.node.node_id == *p))
            .map_or(1, |i| i + 1);
        let label = sample_label(ctx, rng);
        Ok(templated_action(ctx, rank, label))
    }

    fn generate_node(&self, ctx: &NodeGenContext, rng: &mut ChaCha8Rng) -> Result<NodeRecord, PolicyError> {
        Ok(templated_node(ctx, rng))
    }

    fn reflect(&self, _source: &NodeRecord, memory: &NodeMemory) -> Result<String, PolicyError> {
        Ok(memory.most_recent(3).iter().map(|e| e.label.as_str()).collect::<Vec<_>>().join(", "))
    }
}

/// Picks uniformly from the recall list.
#[derive(Debug, Clone, Default)]
pub struct UniformPolicy;

impl AgentPolicy for UniformPolicy {
    fn name(&self) -> String {
        "stub-uniform".into()
    }

    fn select_destination(&self, ctx: &SelectionContext, rng: &mut ChaCha8Rng) -> Result<AgentAction, PolicyError> {
        if ctx.candidates.is_empty() {
            return Err(PolicyError::Failed("empty recall list".into()));
        }
        let rank = rng.random_range(0..ctx.candidates.len()) + 1;
        let label = sample_label(ctx, rng);
        Ok(templated_action(ctx, rank, label))
    }

    fn generate_node(&self, ctx: &NodeGenContext, rng: &mut ChaCha8Rng) -> Result<NodeRecord, PolicyError> {
        Ok(templated_node(ctx, rng))
    }

    fn reflect(&self, source: &NodeRecord, memory: &NodeMemory) -> Result<String, PolicyError> {
        RecencyPolicy.reflect(source, memory)
    }
}
