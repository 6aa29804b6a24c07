pub mod discriminative;
pub mod embedding;
pub mod generation;
pub mod graph;
pub mod io;
pub mod report;
pub mod rng;
pub mod structural;
pub mod textual;
pub mod timestamp;

pub use graph::{
    degree_sequence, slice_seed, DyTag, GraphError, NodeRecord, Origin, Role, SeedSplit, Side, TemporalEdge,
};
pub use timestamp::Timestamp;
