//! The DyTAG data model: a node registry with text attributes plus a
//! timestamp-ordered stream of labeled, text-attributed edges.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timestamp::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("row {row}: {reason}")]
    Malformed { row: usize, reason: String },

    #[error("edge {row} references undeclared node `{node_id}`")]
    DanglingEndpoint { row: usize, node_id: String },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("bipartite violation at {context}: {detail}")]
    BipartiteViolation { context: String, detail: String },

    #[error("seed size {requested} out of range 1..={available}")]
    SeedOutOfRange { requested: usize, available: usize },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Destination,
    Both,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Destination => "destination",
            Role::Both => "both",
        }
    }

    pub fn can_source(self) -> bool {
        matches!(self, Role::Source | Role::Both)
    }

    pub fn can_receive(self) -> bool {
        matches!(self, Role::Destination | Role::Both)
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "source" | "src" => Ok(Role::Source),
            "destination" | "dst" => Ok(Role::Destination),
            "both" => Ok(Role::Both),
            other => Err(format!("unknown role `{other}` (expected source, destination or both)")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Dataset,
    Generated,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Dataset => "dataset",
            Origin::Generated => "generated",
        }
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "dataset" => Ok(Origin::Dataset),
            "generated" => Ok(Origin::Generated),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: String,
    pub role: Role,
    pub text: String,
    #[serde(default)]
    pub origin: Origin,
}

impl NodeRecord {
    pub fn new(node_id: impl Into<String>, role: Role, text: impl Into<String>) -> Self {
        Self { node_id: node_id.into(), role, text: text.into(), origin: Origin::Dataset }
    }

    pub fn generated(node_id: impl Into<String>, role: Role, text: impl Into<String>) -> Self {
        Self { node_id: node_id.into(), role, text: text.into(), origin: Origin::Generated }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub src: String,
    pub dst: String,
    #[serde(rename = "ts")]
    pub timestamp: Timestamp,
    pub label: String,
    pub text: String,
}

impl TemporalEdge {
    pub fn new(
        src: impl Into<String>,
        dst: impl Into<String>,
        timestamp: Timestamp,
        label: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Self { src: src.into(), dst: dst.into(), timestamp, label: label.into(), text: text.into() }
    }
}

/// Which nodes a degree query covers and which edge direction it counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Every node, total degree.
    All,
    /// Nodes with role source/both, out-degree.
    Source,
    /// Nodes with role destination/both, in-degree.
    Destination,
}

/// A dynamic text-attributed graph.
///
/// Nodes keep first-seen order. Edges are kept in nondecreasing timestamp
/// order with ties in insertion order; multi-edges and self-loops are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DyTag {
    nodes: Vec<NodeRecord>,
    index: HashMap<String, usize>,
    edges: Vec<TemporalEdge>,
    bipartite: bool,
}

impl DyTag {
    pub fn new(bipartite: bool) -> Self {
        Self { nodes: Vec::new(), index: HashMap::new(), edges: Vec::new(), bipartite }
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartite
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn add_node(&mut self, node: NodeRecord) -> Result<(), GraphError> {
        if self.index.contains_key(&node.node_id) {
            return Err(GraphError::DuplicateNode(node.node_id));
        }
        if self.bipartite && node.role == Role::Both {
            return Err(GraphError::BipartiteViolation {
                context: format!("node `{}`", node.node_id),
                detail: "role `both` is not allowed in a bipartite graph".into(),
            });
        }
        self.index.insert(node.node_id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    fn check_edge(&self, edge: &TemporalEdge, row: usize) -> Result<(), GraphError> {
        let src =
            self.node(&edge.src).ok_or_else(|| GraphError::DanglingEndpoint { row, node_id: edge.src.clone() })?;
        let dst =
            self.node(&edge.dst).ok_or_else(|| GraphError::DanglingEndpoint { row, node_id: edge.dst.clone() })?;
        if self.bipartite && (src.role != Role::Source || dst.role != Role::Destination) {
            return Err(GraphError::BipartiteViolation {
                context: format!("edge {row}"),
                detail: format!(
                    "`{}` ({}) -> `{}` ({}) must run source -> destination",
                    edge.src, src.role, edge.dst, dst.role
                ),
            });
        }
        Ok(())
    }

    /// Insert one edge after every edge with timestamp <= its own.
    pub fn push_edge(&mut self, edge: TemporalEdge) -> Result<(), GraphError> {
        self.check_edge(&edge, self.edges.len())?;
        let at = self.edges.partition_point(|e| e.timestamp <= edge.timestamp);
        self.edges.insert(at, edge);
        Ok(())
    }

    /// Validate every edge first, then merge them in (stable on ties).
    /// Either all edges are added or none.
    pub fn append_edges(&mut self, mut batch: Vec<TemporalEdge>) -> Result<(), GraphError> {
        for (i, e) in batch.iter().enumerate() {
            self.check_edge(e, self.edges.len() + i)?;
        }
        batch.sort_by_key(|e| e.timestamp);
        let in_order = match (self.edges.last(), batch.first()) {
            (Some(last), Some(first)) => last.timestamp <= first.timestamp,
            _ => true,
        };
        if in_order {
            self.edges.extend(batch);
        } else {
            let old = std::mem::take(&mut self.edges);
            let mut merged = Vec::with_capacity(old.len() + batch.len());
            let mut new_iter = batch.into_iter().peekable();
            for e in old {
                while new_iter.peek().is_some_and(|n| n.timestamp < e.timestamp) {
                    merged.push(new_iter.next().unwrap());
                }
                merged.push(e);
            }
            merged.extend(new_iter);
            self.edges = merged;
        }
        Ok(())
    }

    /// Build from parts that are already validated and sorted.
    pub(crate) fn from_parts(nodes: Vec<NodeRecord>, edges: Vec<TemporalEdge>, bipartite: bool) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.node_id.clone(), i)).collect();
        Self { nodes, index, edges, bipartite }
    }

    /// Build and fully validate: unique ids, resolvable endpoints, bipartite
    /// roles. Edges are stably sorted by timestamp.
    pub fn from_records(
        nodes: Vec<NodeRecord>,
        mut edges: Vec<TemporalEdge>,
        bipartite: bool,
    ) -> Result<Self, GraphError> {
        let mut g = DyTag::new(bipartite);
        for n in nodes {
            g.add_node(n)?;
        }
        for (row, e) in edges.iter().enumerate() {
            g.check_edge(e, row)?;
        }
        edges.sort_by_key(|e| e.timestamp);
        g.edges = edges;
        Ok(g)
    }

    /// Same registry, first `n` edges.
    pub fn truncated(&self, n: usize) -> DyTag {
        let mut g = self.clone();
        g.edges.truncate(n);
        g
    }

    /// Smallest and largest timestamp, if any edges exist.
    pub fn time_range(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.edges.first()?.timestamp, self.edges.last()?.timestamp))
    }

    /// Edge positions touching each node, indexed like `nodes()`, in stream order.
    /// A self-loop appears once in its node's list.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            let s = self.index[&e.src];
            let d = self.index[&e.dst];
            inc[s].push(i);
            if d != s {
                inc[d].push(i);
            }
        }
        inc
    }

    /// Total degree of every node in registry order (self-loops count twice).
    pub fn total_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes.len()];
        for e in &self.edges {
            deg[self.index[&e.src]] += 1;
            deg[self.index[&e.dst]] += 1;
        }
        deg
    }
}

/// A seed prefix and the ground-truth continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSplit {
    /// First `n` edges and exactly their endpoints.
    pub seed: DyTag,
    /// Remaining edges over the full node registry.
    pub remainder: DyTag,
}

pub fn slice_seed(graph: &DyTag, n_edges: usize) -> Result<SeedSplit, GraphError> {
    let available = graph.edge_count();
    if n_edges == 0 || n_edges > available {
        return Err(GraphError::SeedOutOfRange { requested: n_edges, available });
    }
    let (head, tail) = graph.edges.split_at(n_edges);
    let mut used = vec![false; graph.node_count()];
    for e in head {
        used[graph.index[&e.src]] = true;
        used[graph.index[&e.dst]] = true;
    }
    let seed_nodes: Vec<NodeRecord> =
        graph.nodes.iter().zip(&used).filter(|(_, u)| **u).map(|(n, _)| n.clone()).collect();
    Ok(SeedSplit {
        seed: DyTag::from_parts(seed_nodes, head.to_vec(), graph.bipartite),
        remainder: DyTag::from_parts(graph.nodes.clone(), tail.to_vec(), graph.bipartite),
    })
}

/// Per-node degree counts in registry order for the requested side.
pub fn degree_sequence(graph: &DyTag, side: Side) -> Vec<u64> {
    let n = graph.node_count();
    let mut out_deg = vec![0u64; n];
    let mut in_deg = vec![0u64; n];
    for e in graph.edges() {
        out_deg[graph.index[&e.src]] += 1;
        in_deg[graph.index[&e.dst]] += 1;
    }
    graph
        .nodes()
        .iter()
        .enumerate()
        .filter_map(|(i, node)| match side {
            Side::All => Some(out_deg[i] + in_deg[i]),
            Side::Source => node.role.can_source().then_some(out_deg[i]),
            Side::Destination => node.role.can_receive().then_some(in_deg[i]),
        })
        .collect()
}
