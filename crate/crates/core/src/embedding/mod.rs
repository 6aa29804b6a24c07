//! Graph similarity through randomly projected, text- and time-aware node
//! embeddings compared by Frobenius cosine.
//!
//! A node embedding concatenates one block per interaction (normalized
//! timestamp, edge-text vector, counterpart-text vector) and ends with the
//! node's own text vector, so its length varies with the node's history. Each
//! embedding is projected to `d_cols` with a Gaussian map whose entries are a
//! pure function of (seed, input position, output column), which lets vectors
//! of any length share one projection. A second seeded ±1/√k reduction over
//! the node axis gives every graph the same `k_rows × d_cols` shape.

mod encoder;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DyTag;
use crate::rng::{derive, gaussian_at, hash_str, splitmix64};
use crate::timestamp::Timestamp;

pub use encoder::{encode_text_hashed, HashingEncoder, PrecomputedEncoder, TextEncoder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("embeddings are not comparable: {0}")]
    Mismatch(String),
    #[error("{0} embedding has zero norm")]
    ZeroNorm(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("encoder: {0}")]
    Encoder(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub d_cols: usize,
    pub k_rows: usize,
    pub seed: u64,
    /// Dimension of the hashing encoder.
    pub encoder_dim: usize,
    /// JSONL file of precomputed node vectors; replaces the hashing encoder for node texts.
    pub precomputed: Option<std::path::PathBuf>,
    /// Skip registry nodes without any interaction.
    pub active_only: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { d_cols: 1024, k_rows: 256, seed: 0, encoder_dim: 256, precomputed: None, active_only: false }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.d_cols == 0 || self.k_rows == 0 || self.encoder_dim == 0 {
            return Err(EmbeddingError::InvalidConfig("d_cols, k_rows and encoder_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn encoder(&self) -> Result<Box<dyn TextEncoder>, EmbeddingError> {
        self.validate()?;
        Ok(match &self.precomputed {
            Some(p) => Box::new(PrecomputedEncoder::from_jsonl(p)?),
            None => Box::new(HashingEncoder::new(self.encoder_dim)),
        })
    }
}

/// Affine map of timestamps onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale {
    pub min: f64,
    pub max: f64,
}

impl TimeScale {
    pub fn of(graphs: &[&DyTag]) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for g in graphs {
            if let Some((lo, hi)) = g.time_range() {
                min = min.min(lo.as_f64());
                max = max.max(hi.as_f64());
            }
        }
        if !min.is_finite() {
            min = 0.0;
            max = 0.0;
        }
        Self { min, max }
    }

    pub fn apply(&self, t: Timestamp) -> f64 {
        if self.max > self.min {
            (t.as_f64() - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }
}

type Sparse = Vec<(usize, f64)>;

fn sparse(v: Vec<f64>) -> Sparse {
    v.into_iter().enumerate().filter(|(_, x)| *x != 0.0).collect()
}

/// Encoded texts of one graph, computed once and shared by every node.
struct Features {
    dim: usize,
    node_text: Vec<Sparse>,
    edge_text: Vec<Sparse>,
    incidence: Vec<Vec<usize>>,
}

impl Features {
    fn build(g: &DyTag, encoder: &dyn TextEncoder) -> Self {
        let node_text = g.nodes().par_iter().map(|n| sparse(encoder.encode_node(n))).collect();
        let edge_text = g.edges().par_iter().map(|e| sparse(encoder.encode(&e.text))).collect();
        Self { dim: encoder.dim(), node_text, edge_text, incidence: g.incidence() }
    }

    fn embedding_len(&self, node: usize) -> usize {
        self.incidence[node].len() * (1 + 2 * self.dim) + self.dim
    }

    fn node_sparse(&self, g: &DyTag, node: usize, scale: &TimeScale) -> Sparse {
        let block = 1 + 2 * self.dim;
        let mut out = Vec::new();
        for (i, &ei) in self.incidence[node].iter().enumerate() {
            let e = &g.edges()[ei];
            let base = i * block;
            let t = scale.apply(e.timestamp);
            if t != 0.0 {
                out.push((base, t));
            }
            out.extend(self.edge_text[ei].iter().map(|(j, x)| (base + 1 + j, *x)));
            let s = g.node_index(&e.src).unwrap();
            let other = if s == node { g.node_index(&e.dst).unwrap() } else { s };
            out.extend(self.node_text[other].iter().map(|(j, x)| (base + 1 + self.dim + j, *x)));
        }
        let base = self.incidence[node].len() * block;
        out.extend(self.node_text[node].iter().map(|(j, x)| (base + j, *x)));
        out
    }
}

/// Concatenated embedding of one node with timestamps scaled by `scale`.
pub fn node_embedding_scaled(
    g: &DyTag,
    node_id: &str,
    encoder: &dyn TextEncoder,
    scale: &TimeScale,
) -> Result<Vec<f64>, EmbeddingError> {
    let idx = g.node_index(node_id).ok_or_else(|| EmbeddingError::UnknownNode(node_id.to_string()))?;
    let f = Features::build(g, encoder);
    let mut v = vec![0.0; f.embedding_len(idx)];
    for (j, x) in f.node_sparse(g, idx, scale) {
        v[j] = x;
    }
    Ok(v)
}

/// Node embedding with timestamps normalized over this graph's own range.
pub fn node_embedding(g: &DyTag, node_id: &str, encoder: &dyn TextEncoder) -> Result<Vec<f64>, EmbeddingError> {
    node_embedding_scaled(g, node_id, encoder, &TimeScale::of(&[g]))
}

fn position_key(seed: u64, position: usize) -> u64 {
    splitmix64(derive(seed, "jl-projection", &[]) ^ splitmix64(position as u64))
}

fn project_sparse(x: &[(usize, f64)], d: usize, seed: u64) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for &(pos, val) in x {
        let key = position_key(seed, pos);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += val * gaussian_at(key ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
    }
    let s = 1.0 / (d as f64).sqrt();
    y.iter_mut().for_each(|v| *v *= s);
    y
}

/// Gaussian random projection of an arbitrary-length vector to `d` columns,
/// scaled by 1/√d. Inner products are preserved in expectation.
pub fn project(x: &[f64], d: usize, seed: u64) -> Vec<f64> {
    let nz: Sparse = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    project_sparse(&nz, d, seed)
}

fn aggregation_weight(seed: u64, node_id: &str, row: usize, k: usize) -> f64 {
    let h = derive(seed, "jl-aggregate", &[hash_str(node_id), row as u64]);
    let s = 1.0 / (k as f64).sqrt();
    if h >> 63 == 0 {
        s
    } else {
        -s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEmbedding {
    pub k_rows: usize,
    pub d_cols: usize,
    pub projection_seed: u64,
    /// Row-major `k_rows × d_cols`.
    pub matrix: Vec<f64>,
}

impl GraphEmbedding {
    pub fn negated(&self) -> Self {
        Self { matrix: self.matrix.iter().map(|x| -x).collect(), ..self.clone() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

const AGG_CHUNK: usize = 256;

pub fn graph_embedding_scaled(
    g: &DyTag,
    encoder: &dyn TextEncoder,
    config: &EmbeddingConfig,
    scale: &TimeScale,
) -> Result<GraphEmbedding, EmbeddingError> {
    config.validate()?;
    let features = Features::build(g, encoder);
    let mut order: Vec<usize> =
        (0..g.node_count()).filter(|&i| !config.active_only || !features.incidence[i].is_empty()).collect();
    if order.is_empty() {
        return Err(EmbeddingError::EmptyGraph);
    }
    // summation order by node id makes the result independent of registry order
    order.sort_by(|&a, &b| g.nodes()[a].node_id.cmp(&g.nodes()[b].node_id));

    let (k, d) = (config.k_rows, config.d_cols);
    let mut matrix = vec![0.0; k * d];
    for chunk in order.chunks(AGG_CHUNK) {
        let projected: Vec<Vec<f64>> =
            chunk.par_iter().map(|&i| project_sparse(&features.node_sparse(g, i, scale), d, config.seed)).collect();
        for (&i, p) in chunk.iter().zip(&projected) {
            let id = &g.nodes()[i].node_id;
            for r in 0..k {
                let w = aggregation_weight(config.seed, id, r, k);
                let row = &mut matrix[r * d..(r + 1) * d];
                for (m, v) in row.iter_mut().zip(p) {
                    *m += w * v;
                }
            }
        }
    }
    Ok(GraphEmbedding { k_rows: k, d_cols: d, projection_seed: config.seed, matrix })
}

/// Embedding with timestamps normalized over this graph's own range.
pub fn graph_embedding(
    g: &DyTag,
    encoder: &dyn TextEncoder,
    config: &EmbeddingConfig,
) -> Result<GraphEmbedding, EmbeddingError> {
    graph_embedding_scaled(g, encoder, config, &TimeScale::of(&[g]))
}

/// Frobenius cosine similarity in [-1, 1].
pub fn embedding_similarity(a: &GraphEmbedding, b: &GraphEmbedding) -> Result<f64, EmbeddingError> {
    if (a.k_rows, a.d_cols) != (b.k_rows, b.d_cols) {
        return Err(EmbeddingError::Mismatch(format!("shape {}x{} vs {}x{}", a.k_rows, a.d_cols, b.k_rows, b.d_cols)));
    }
    if a.projection_seed != b.projection_seed {
        return Err(EmbeddingError::Mismatch(format!("seed {} vs {}", a.projection_seed, b.projection_seed)));
    }
    let na = a.frobenius_norm();
    let nb = b.frobenius_norm();
    if na == 0.0 {
        return Err(EmbeddingError::ZeroNorm("first"));
    }
    if nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm("second"));
    }
    let dot: f64 = a.matrix.iter().zip(&b.matrix).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub graph_embedding_score: f64,
    pub rho: f64,
    pub seed: u64,
    pub k_rows: usize,
    pub d_cols: usize,
    pub encoder: String,
}

/// Score a generated graph against the truth; timestamps are normalized
/// over the union of both graphs' time ranges.
pub fn embedding_report(
    generated: &DyTag,
    truth: &DyTag,
    encoder: &dyn TextEncoder,
    config: &EmbeddingConfig,
) -> Result<EmbeddingReport, EmbeddingError> {
    let scale = TimeScale::of(&[generated, truth]);
    let a = graph_embedding_scaled(generated, encoder, config, &scale)?;
    let b = graph_embedding_scaled(truth, encoder, config, &scale)?;
    let score = embedding_similarity(&a, &b)?;
    Ok(EmbeddingReport {
        graph_embedding_score: score,
        rho: 1.0 - score,
        seed: config.seed,
        k_rows: config.k_rows,
        d_cols: config.d_cols,
        encoder: encoder.name().to_string(),
    })
}
