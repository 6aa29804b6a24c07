//! Node retrieval, edge classification and hub analysis on generated graphs.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::RecallLog;
use crate::graph::{DyTag, Origin};

const HUB_EXCERPT_CHARS: usize = 120;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscError {
    #[error("skip ({skip}) must be smaller than the generated edge count ({edges})")]
    SkipTooLarge { skip: usize, edges: usize },
    #[error("no recall log for generated edge {0}")]
    MissingRecallLog(usize),
    #[error("no matched edge pairs")]
    EmptyAlignment,
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("k must be positive")]
    InvalidK,
}

/// Indices into the generated and ground-truth edge lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePair {
    pub generated: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeAlignment {
    pub pairs: Vec<EdgePair>,
    pub unmatched_generated: usize,
    pub unmatched_truth: usize,
}

fn by_source(g: &DyTag, skip: usize) -> BTreeMap<&str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in g.edges().iter().enumerate().skip(skip) {
        m.entry(e.src.as_str()).or_default().push(i);
    }
    m
}

/// Pair the i-th post-seed edge of each source in `generated` with the i-th
/// post-seed edge of the same source in `truth`.
pub fn align_edges(generated: &DyTag, truth: &DyTag, skip: usize) -> Result<EdgeAlignment, DiscError> {
    if skip >= generated.edge_count() {
        return Err(DiscError::SkipTooLarge { skip, edges: generated.edge_count() });
    }
    let gen = by_source(generated, skip);
    let tru = by_source(truth, skip);
    let mut out = EdgeAlignment::default();
    for (src, g_edges) in &gen {
        let t_edges = tru.get(src).map_or(&[][..], Vec::as_slice);
        let n = g_edges.len().min(t_edges.len());
        out.pairs.extend((0..n).map(|i| EdgePair { generated: g_edges[i], truth: t_edges[i] }));
        out.unmatched_generated += g_edges.len() - n;
        out.unmatched_truth += t_edges.len() - n;
    }
    for (src, t_edges) in &tru {
        if !gen.contains_key(src) {
            out.unmatched_truth += t_edges.len();
        }
    }
    out.pairs.sort_by_key(|p| p.generated);
    Ok(out)
}

/// 1-based rank of each pair's true destination in the generator's recall
/// list, `None` when it was not recalled.
pub fn truth_ranks(
    truth: &DyTag,
    alignment: &EdgeAlignment,
    logs: &[RecallLog],
) -> Result<Vec<Option<usize>>, DiscError> {
    let by_edge: HashMap<usize, &RecallLog> = logs.iter().map(|l| (l.edge_index, l)).collect();
    alignment
        .pairs
        .iter()
        .map(|p| {
            let log = by_edge.get(&p.generated).ok_or(DiscError::MissingRecallLog(p.generated))?;
            let want = &truth.edges()[p.truth].dst;
            Ok(log.candidates.iter().position(|c| c == want).map(|i| i + 1))
        })
        .collect()
}

/// Share of matched pairs whose true destination sits at rank ≤ k; unmatched
/// ground-truth edges count as misses.
pub fn hit_at_k_from_ranks(ranks: &[Option<usize>], unmatched_truth: usize, k: usize) -> Result<f64, DiscError> {
    if k == 0 {
        return Err(DiscError::InvalidK);
    }
    let total = ranks.len() + unmatched_truth;
    if total == 0 {
        return Err(DiscError::EmptyAlignment);
    }
    let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
    Ok(hits as f64 / total as f64)
}

pub fn hit_at_k(truth: &DyTag, alignment: &EdgeAlignment, logs: &[RecallLog], k: usize) -> Result<f64, DiscError> {
    let ranks = truth_ranks(truth, alignment, logs)?;
    hit_at_k_from_ranks(&ranks, alignment.unmatched_truth, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub samples: usize,
    pub per_class: Vec<ClassMetrics>,
}

/// Support-weighted precision, recall and F1. Classes that are never
/// predicted get precision 0; undefined F1 is 0.
pub fn classification_report<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<ClassificationReport, DiscError> {
    if truth.len() != predicted.len() {
        return Err(DiscError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(DiscError::EmptyAlignment);
    }
    // (support, predicted, true positives)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        let (t, p) = (t.as_ref(), p.as_ref());
        counts.entry(t).or_default().0 += 1;
        counts.entry(p).or_default().1 += 1;
        if t == p {
            counts.get_mut(t).unwrap().2 += 1;
        }
    }
    let n = truth.len() as f64;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = Vec::with_capacity(counts.len());
    let (mut wp, mut wr, mut wf, mut correct) = (0.0, 0.0, 0.0, 0);
    for (label, (support, pred, tp)) in counts {
        let precision = ratio(tp, pred);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let w = support as f64 / n;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        correct += tp;
        per_class.push(ClassMetrics { label: label.to_string(), precision, recall, f1, support });
    }
    Ok(ClassificationReport {
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        accuracy: correct as f64 / n,
        samples: truth.len(),
        per_class,
    })
}

/// Ground-truth labels against generated labels over the matched pairs.
pub fn edge_classification_report(
    generated: &DyTag,
    truth: &DyTag,
    alignment: &EdgeAlignment,
) -> Result<ClassificationReport, DiscError> {
    let t: Vec<&str> = alignment.pairs.iter().map(|p| truth.edges()[p.truth].label.as_str()).collect();
    let g: Vec<&str> = alignment.pairs.iter().map(|p| generated.edges()[p.generated].label.as_str()).collect();
    classification_report(&t, &g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubEntry {
    pub node_id: String,
    pub degree: u64,
    pub origin: Origin,
    pub excerpt: String,
}

/// Highest-degree nodes, ties by node id.
pub fn hub_report(graph: &DyTag, top_k: usize, generated_only: bool) -> Vec<HubEntry> {
    let deg = graph.total_degrees();
    let mut order: Vec<usize> =
        (0..graph.node_count()).filter(|&i| !generated_only || graph.nodes()[i].origin == Origin::Generated).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then_with(|| graph.nodes()[a].node_id.cmp(&graph.nodes()[b].node_id)));
    order
        .into_iter()
        .take(top_k)
        .map(|i| {
            let n = &graph.nodes()[i];
            HubEntry {
                node_id: n.node_id.clone(),
                degree: deg[i],
                origin: n.origin,
                excerpt: n.text.chars().take(HUB_EXCERPT_CHARS).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminativeConfig {
    pub hit_ks: Vec<usize>,
    pub hub_top_k: usize,
    pub hubs_generated_only: bool,
}

impl Default for DiscriminativeConfig {
    fn default() -> Self {
        Self { hit_ks: vec![1, 10], hub_top_k: 10, hubs_generated_only: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeReport {
    /// `(k, Hit@k)` for each requested k.
    pub hit_at: Vec<(usize, f64)>,
    pub classification: Option<ClassificationReport>,
    pub matched: usize,
    pub unmatched_generated: usize,
    pub unmatched_truth: usize,
    pub hubs: Vec<HubEntry>,
    pub errors: Vec<String>,
}

impl DiscriminativeReport {
    pub fn hit(&self, k: usize) -> Option<f64> {
        self.hit_at.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

pub fn discriminative_report(
    generated: &DyTag,
    truth: &DyTag,
    logs: &[RecallLog],
    skip: usize,
    config: &DiscriminativeConfig,
) -> Result<DiscriminativeReport, DiscError> {
    let alignment = align_edges(generated, truth, skip)?;
    let mut errors = Vec::new();
    let mut hit_at = Vec::new();
    match truth_ranks(truth, &alignment, logs) {
        Ok(ranks) => {
            for &k in &config.hit_ks {
                match hit_at_k_from_ranks(&ranks, alignment.unmatched_truth, k) {
                    Ok(v) => hit_at.push((k, v)),
                    Err(e) => errors.push(format!("Hit@{k}: {e}")),
                }
            }
        }
        Err(e) => errors.push(format!("node retrieval: {e}")),
    }
    let classification = edge_classification_report(generated, truth, &alignment)
        .map_err(|e| errors.push(format!("edge classification: {e}")))
        .ok();
    Ok(DiscriminativeReport {
        hit_at,
        classification,
        matched: alignment.pairs.len(),
        unmatched_generated: alignment.unmatched_generated,
        unmatched_truth: alignment.unmatched_truth,
        hubs: hub_report(generated, config.hub_top_k, config.hubs_generated_only),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeRecord, Role, TemporalEdge};
    use crate::timestamp::Timestamp;
    use proptest::prelude::*;

    fn graph(edges: &[(&str, &str, &str)]) -> DyTag {
        let mut nodes: Vec<NodeRecord> = Vec::new();
        for (s, d, _) in edges {
            for id in [s, d] {
                if !nodes.iter().any(|n| n.node_id == *id) {
                    nodes.push(NodeRecord::new(*id, Role::Both, format!("about {id}")));
                }
            }
        }
        let es = edges
            .iter()
            .enumerate()
            .map(|(t, (s, d, l))| TemporalEdge::new(*s, *d, Timestamp::Int(t as i64), *l, ""))
            .collect();
        DyTag::from_records(nodes, es, false).unwrap()
    }

    #[test]
    fn hand_enumerated_alignment() {
        // three seed edges then sources a,a,b vs a,b,b
        let seed = [("s", "x", ""), ("s", "y", ""), ("s", "z", "")];
        let mut g = seed.to_vec();
        g.extend([("a", "x", ""), ("a", "y", ""), ("b", "z", "")]);
        let mut t = seed.to_vec();
        t.extend([("a", "x", ""), ("b", "y", ""), ("b", "z", "")]);
        let al = align_edges(&graph(&g), &graph(&t), 3).unwrap();
        assert_eq!(al.pairs, vec![EdgePair { generated: 3, truth: 3 }, EdgePair { generated: 5, truth: 4 }]);
        assert_eq!((al.unmatched_generated, al.unmatched_truth), (1, 1));
        let swapped = align_edges(&graph(&t), &graph(&g), 3).unwrap();
        assert_eq!((swapped.unmatched_generated, swapped.unmatched_truth), (1, 1));

        let same = align_edges(&graph(&g), &graph(&g), 0).unwrap();
        assert_eq!((same.pairs.len(), same.unmatched_generated, same.unmatched_truth), (6, 0, 0));
        let disjoint = align_edges(&graph(&[("p", "q", "")]), &graph(&[("r", "q", "")]), 0).unwrap();
        assert_eq!((disjoint.pairs.len(), disjoint.unmatched_generated, disjoint.unmatched_truth), (0, 1, 1));
        assert!(align_edges(&graph(&g), &graph(&t), 6).is_err());
    }

    #[test]
    fn hits_by_definition() {
        let ranks = [Some(1), Some(5), Some(12)];
        assert!((hit_at_k_from_ranks(&ranks, 0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((hit_at_k_from_ranks(&ranks, 0, 10).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hit_at_k_from_ranks(&[Some(1), Some(1)], 0, 1).unwrap(), 1.0);
        assert_eq!(hit_at_k_from_ranks(&[Some(1), None], 2, 10).unwrap(), 0.25);
        assert!(hit_at_k_from_ranks(&ranks, 0, 0).is_err());
    }

    #[test]
    fn hits_from_recall_logs() {
        let g = graph(&[("a", "x", ""), ("b", "y", "")]);
        let t = graph(&[("a", "y", ""), ("b", "y", "")]);
        let al = align_edges(&g, &t, 0).unwrap();
        let logs = vec![
            RecallLog {
                edge_index: 0,
                round: 0,
                src: "a".into(),
                candidates: vec!["x".into(), "y".into()],
                chosen_rank: 1,
            },
            RecallLog { edge_index: 1, round: 0, src: "b".into(), candidates: vec!["y".into()], chosen_rank: 1 },
        ];
        assert_eq!(hit_at_k(&t, &al, &logs, 1).unwrap(), 0.5);
        assert_eq!(hit_at_k(&t, &al, &logs, 2).unwrap(), 1.0);
        assert_eq!(hit_at_k(&t, &al, &logs[..1], 2), Err(DiscError::MissingRecallLog(1)));
    }

    #[test]
    fn weighted_report_by_hand() {
        let r = classification_report(&["A", "A", "B"], &["A", "B", "B"]).unwrap();
        assert!((r.weighted_precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.weighted_recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.weighted_f1 - 2.0 / 3.0).abs() < 1e-12);
        let perfect = classification_report(&["A", "B", "C"], &["A", "B", "C"]).unwrap();
        assert_eq!((perfect.weighted_precision, perfect.weighted_recall, perfect.weighted_f1), (1.0, 1.0, 1.0));
        // a class never predicted contributes precision 0
        let r = classification_report(&["A", "B"], &["A", "A"]).unwrap();
        assert!((r.weighted_precision - 0.25).abs() < 1e-12);
        assert!(classification_report::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn hubs() {
        let g = graph(&[("c", "a", ""), ("c", "b", ""), ("c", "d", ""), ("a", "b", "")]);
        let h = hub_report(&g, 1, false);
        assert_eq!((h[0].node_id.as_str(), h[0].degree), ("c", 3));
        assert_eq!(hub_report(&g, 3, false).iter().map(|h| h.node_id.as_str()).collect::<Vec<_>>(), ["c", "a", "b"]);
        assert!(hub_report(&g, 5, true).is_empty());
    }

    proptest! {
        #[test]
        fn recall_is_accuracy(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..60)) {
            let t: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| p.1.to_string()).collect();
            let r = classification_report(&t, &p).unwrap();
            prop_assert!((r.weighted_recall - r.accuracy).abs() < 1e-12);
            for v in [r.weighted_precision, r.weighted_recall, r.weighted_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn hit_monotone(ranks in proptest::collection::vec(proptest::option::of(1usize..20), 1..50), un in 0usize..10) {
            let mut prev = 0.0;
            for k in 1..25 {
                let h = hit_at_k_from_ranks(&ranks, un, k).unwrap();
                prop_assert!(h >= prev && (0.0..=1.0).contains(&h));
                prev = h;
            }
        }
    }
}
