//! Multi-agent dynamic graph generation.

mod config;
mod engine;
mod llm_policy;
mod memory;
mod policy;
mod rates;
mod recall;

use thiserror::Error;

use crate::graph::{DyTag, GraphError};

pub use config::{GenConfig, GenMode, SourceSelection, TimeCodec};
pub use engine::{
    run_generation, run_idgg, run_tdgg, GenerationOutcome, RecallLog, RoundTiming, RunManifest, RunStatus,
};
pub use llm_policy::LlmPolicy;
pub use memory::{build_memory, build_memory_with, reflect_memory, MemoryEntry, NodeMemory};
pub use policy::{
    AgentAction, AgentPolicy, Candidate, NodeGenContext, PolicyError, RecencyPolicy, SelectionContext, UniformPolicy,
};
pub use rates::derive_node_rates;
pub use recall::{recall_candidates, recall_candidates_with};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Pool(String),
}

/// Incidence lists and total degrees kept in step with a growing graph.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub incidence: Vec<Vec<usize>>,
    pub degree: Vec<u64>,
    /// Destinations of each node's outgoing edges, oldest first.
    pub out_dst: Vec<Vec<usize>>,
}

impl GraphIndex {
    pub fn new(g: &DyTag) -> Self {
        let mut idx = Self { incidence: Vec::new(), degree: Vec::new(), out_dst: Vec::new() };
        idx.rebuild(g);
        idx
    }

    pub fn rebuild(&mut self, g: &DyTag) {
        self.incidence = g.incidence();
        self.degree = g.total_degrees();
        self.out_dst = vec![Vec::new(); g.node_count()];
        for e in g.edges() {
            let s = g.node_index(&e.src).expect("validated edge");
            let d = g.node_index(&e.dst).expect("validated edge");
            self.out_dst[s].push(d);
        }
    }
}
