use std::collections::HashSet;

use crate::graph::DyTag;

/// Per-round node arrival rates `(r_src, r_dst)` observed in `seed`.
///
/// The edge stream is cut into blocks of `s` edges. In each block we count
/// nodes appearing for the first time as a source (resp. destination), and
/// each rate is `max(1, round(mean count per block))`. Only full blocks are
/// used unless the stream is shorter than one block.
pub fn derive_node_rates(seed: &DyTag, s: usize) -> (usize, usize) {
    let s = s.max(1);
    let edges = seed.edges();
    let full = edges.len() / s;
    let blocks = if full == 0 { usize::from(!edges.is_empty()) } else { full };
    if blocks == 0 {
        return (1, 1);
    }
    let mut seen_src = HashSet::new();
    let mut seen_dst = HashSet::new();
    let (mut new_src, mut new_dst) = (0usize, 0usize);
    for e in &edges[..edges.len().min(blocks * s)] {
        new_src += seen_src.insert(e.src.as_str()) as usize;
        new_dst += seen_dst.insert(e.dst.as_str()) as usize;
    }
    let rate = |n: usize| ((n as f64 / blocks as f64).round() as usize).max(1);
    (rate(new_src), rate(new_dst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeRecord, Role, TemporalEdge};
    use crate::timestamp::Timestamp;

    fn graph(pairs: &[(String, String)]) -> DyTag {
        let mut nodes: Vec<NodeRecord> = Vec::new();
        for (a, b) in pairs {
            for (id, role) in [(a, Role::Source), (b, Role::Destination)] {
                if !nodes.iter().any(|n| &n.node_id == id) {
                    nodes.push(NodeRecord::new(id.clone(), role, ""));
                }
            }
        }
        let edges = pairs
            .iter()
            .enumerate()
            .map(|(t, (a, b))| TemporalEdge::new(a, b, Timestamp::Int(t as i64), "", ""))
            .collect();
        DyTag::from_records(nodes, edges, true).unwrap()
    }

    #[test]
    fn all_new_sources() {
        let pairs: Vec<_> = (0..100).map(|i| (format!("s{i}"), "d0".to_string())).collect();
        assert_eq!(derive_node_rates(&graph(&pairs), 50), (50, 1));
    }

    #[test]
    fn partial_block_ignored_unless_alone() {
        let mut pairs: Vec<_> = (0..50).map(|i| (format!("s{}", i % 5), format!("d{}", i % 2))).collect();
        // trailing partial block full of new sources does not count
        pairs.extend((0..20).map(|i| (format!("x{i}"), "d0".to_string())));
        assert_eq!(derive_node_rates(&graph(&pairs), 50), (5, 2));
        let short: Vec<_> = (0..10).map(|i| (format!("s{i}"), "d0".to_string())).collect();
        assert_eq!(derive_node_rates(&graph(&short), 50), (10, 1));
        assert_eq!(derive_node_rates(&DyTag::new(true), 50), (1, 1));
    }
}
