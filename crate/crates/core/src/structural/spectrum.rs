//! Eigenvalues of the symmetric normalized Laplacian of a graph's undirected
//! simple projection.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StructuralError;
use crate::graph::DyTag;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Largest node count solved with a dense eigendecomposition.
    pub dense_limit: usize,
    /// Above `dense_limit`, how many of the smallest and of the largest
    /// eigenvalues to approximate.
    pub tail_count: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { dense_limit: 5000, tail_count: 512 }
    }
}

/// Undirected simple graph on the nodes that have at least one edge.
/// Self-loops are dropped; parallel edges collapse to weight 1.
pub struct SimpleGraph {
    pub n: usize,
    pub adj: Vec<Vec<usize>>,
}

impl SimpleGraph {
    pub fn from_dytag(g: &DyTag) -> Self {
        let deg = g.total_degrees();
        let mut compact = vec![usize::MAX; g.node_count()];
        let mut n = 0;
        for (i, d) in deg.iter().enumerate() {
            if *d > 0 {
                compact[i] = n;
                n += 1;
            }
        }
        let mut sets = vec![BTreeSet::new(); n];
        for e in g.edges() {
            let s = compact[g.node_index(&e.src).unwrap()];
            let d = compact[g.node_index(&e.dst).unwrap()];
            if s != d {
                sets[s].insert(d);
                sets[d].insert(s);
            }
        }
        Self { n, adj: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        Self { n, adj: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    fn inv_sqrt_deg(&self) -> Vec<f64> {
        self.adj.iter().map(|a| if a.is_empty() { 0.0 } else { 1.0 / (a.len() as f64).sqrt() }).collect()
    }

    /// y = L x with L = I - D^{-1/2} A D^{-1/2}; isolated nodes have L_ii = 0.
    fn laplacian_apply(&self, w: &[f64], x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            if self.adj[i].is_empty() {
                y[i] = 0.0;
                continue;
            }
            let s: f64 = self.adj[i].iter().map(|&j| w[j] * x[j]).sum();
            y[i] = x[i] - w[i] * s;
        }
    }

    pub fn dense_laplacian(&self) -> DMatrix<f64> {
        let w = self.inv_sqrt_deg();
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            if !self.adj[i].is_empty() {
                m[(i, i)] = 1.0;
            }
            for &j in &self.adj[i] {
                m[(i, j)] = -w[i] * w[j];
            }
        }
        m
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn dense_spectrum(g: &SimpleGraph) -> Result<Vec<f64>, StructuralError> {
    if g.n == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(g.dense_laplacian(), f64::EPSILON, 0)
        .ok_or_else(|| StructuralError::Eigen("dense eigendecomposition did not converge".into()))?;
    Ok(sorted(eig.eigenvalues.iter().copied().collect()))
}

/// Lanczos with full reorthogonalization. Returns the `tail` smallest and
/// `tail` largest Ritz values of an m-step run, m = min(n, 2 tail + 128).
pub fn lanczos_extremes(g: &SimpleGraph, tail: usize, seed: u64) -> Result<Vec<f64>, StructuralError> {
    let n = g.n;
    let m = n.min(2 * tail + 128);
    if m == 0 {
        return Ok(Vec::new());
    }
    let w = g.inv_sqrt_deg();
    let mut rng = substream(seed, "lanczos", &[n as u64]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);

    let fresh = |rng: &mut rand_chacha::ChaCha8Rng, basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..4 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            for _ in 0..2 {
                for q in basis {
                    let d = dot(q, &v);
                    axpy(-d, q, &mut v);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                return Some(v);
            }
        }
        None
    };

    let mut q = fresh(&mut rng, &basis).ok_or_else(|| StructuralError::Eigen("could not start Lanczos".into()))?;
    let mut y = vec![0.0; n];
    for step in 0..m {
        g.laplacian_apply(&w, &q, &mut y);
        let a = dot(&q, &y);
        alpha.push(a);
        basis.push(q);
        for _ in 0..2 {
            for b in &basis {
                let d = dot(b, &y);
                axpy(-d, b, &mut y);
            }
        }
        if step + 1 == m {
            break;
        }
        let b = dot(&y, &y).sqrt();
        if b > 1e-10 {
            beta.push(b);
            q = y.iter().map(|x| x / b).collect();
        } else {
            // invariant subspace found; continue in a fresh orthogonal direction
            beta.push(0.0);
            match fresh(&mut rng, &basis) {
                Some(v) => q = v,
                None => break,
            }
        }
    }
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let ritz = sorted(
        SymmetricEigen::try_new(t, f64::EPSILON, 0)
            .ok_or_else(|| StructuralError::Eigen("tridiagonal eigendecomposition did not converge".into()))?
            .eigenvalues
            .iter()
            .copied()
            .collect(),
    );
    if ritz.len() <= 2 * tail {
        return Ok(ritz);
    }
    let mut out = ritz[..tail].to_vec();
    out.extend_from_slice(&ritz[ritz.len() - tail..]);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Normalized-Laplacian eigenvalues of the graph's active-node projection,
/// ascending. Exact up to `dense_limit` nodes, extremal approximation above.
pub fn laplacian_spectrum(g: &DyTag, config: &SpectrumConfig) -> Result<Vec<f64>, StructuralError> {
    let simple = SimpleGraph::from_dytag(g);
    if simple.n <= config.dense_limit {
        dense_spectrum(&simple)
    } else {
        lanczos_extremes(&simple, config.tail_count, 0)
    }
}
