use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use super::{GenError, GraphIndex};
use crate::graph::DyTag;
use crate::rng::{hash_str, substream};

/// Up to `k` destination candidates for `src`, drawn from `pool`.
///
/// Order: `src`'s prior destinations (most recent first), then
/// ⌈(k − h)/2⌉ top-degree pool nodes (ties by node id), then a uniform fill
/// from the rest of the pool. `src` itself is left out unless `allow_self`.
pub fn recall_candidates_with(
    graph: &DyTag,
    index: &GraphIndex,
    src: usize,
    pool: &[usize],
    k: usize,
    allow_self: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = graph.node_count();
    let mut in_pool = vec![false; n];
    for &p in pool {
        if p != src || allow_self {
            in_pool[p] = true;
        }
    }
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(k);

    for &d in index.out_dst[src].iter().rev() {
        if out.len() == k {
            break;
        }
        if in_pool[d] && !taken[d] {
            taken[d] = true;
            out.push(d);
        }
    }

    let mut rest: Vec<usize> = pool.iter().copied().filter(|&p| in_pool[p]).collect();
    rest.sort_unstable();
    rest.dedup();
    rest.retain(|&p| !taken[p]);

    let nodes = graph.nodes();
    let quota = (k - out.len()).div_ceil(2);
    if quota > 0 && !rest.is_empty() {
        let mut by_degree = rest.clone();
        by_degree.sort_by(|&a, &b| {
            index.degree[b].cmp(&index.degree[a]).then_with(|| nodes[a].node_id.cmp(&nodes[b].node_id))
        });
        for &d in by_degree.iter().take(quota) {
            taken[d] = true;
            out.push(d);
        }
        rest.retain(|&p| !taken[p]);
    }

    let fill = (k - out.len()).min(rest.len());
    if fill > 0 {
        out.extend(sample(rng, rest.len(), fill).into_iter().map(|i| rest[i]));
    }
    out
}

/// Id-based wrapper seeded from `seed` and the source id.
pub fn recall_candidates(
    graph: &DyTag,
    src: &str,
    pool: &[String],
    k: usize,
    seed: u64,
) -> Result<Vec<String>, GenError> {
    let lookup = |id: &str| graph.node_index(id).ok_or_else(|| GenError::UnknownNode(id.to_string()));
    let s = lookup(src)?;
    let pool = pool.iter().map(|p| lookup(p)).collect::<Result<Vec<_>, _>>()?;
    let allow_self = !graph.is_bipartite() && graph.edges().iter().any(|e| e.src == e.dst);
    let mut rng = substream(seed, "recall", &[hash_str(src)]);
    let picked = recall_candidates_with(graph, &GraphIndex::new(graph), s, &pool, k, allow_self, &mut rng);
    Ok(picked.into_iter().map(|i| graph.nodes()[i].node_id.clone()).collect())
}
