//! Consolidated metric report and its markdown rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discriminative::DiscriminativeReport;
use crate::embedding::EmbeddingReport;
use crate::graph::DyTag;
use crate::structural::{PowerLawSummary, StructuralReport};
use crate::textual::TextualReport;

/// Outcome of one evaluation suite: a report or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Suite<T> {
    Ok { report: T },
    Failed { error: String },
}

impl<T> Suite<T> {
    pub fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(report) => Suite::Ok { report },
            Err(e) => Suite::Failed { error: e.to_string() },
        }
    }

    pub fn report(&self) -> Option<&T> {
        match self {
            Suite::Ok { report } => Some(report),
            Suite::Failed { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Suite::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub bipartite: bool,
    pub first_timestamp: Option<String>,
    pub last_timestamp: Option<String>,
    pub labels: BTreeMap<String, usize>,
}

impl GraphStats {
    pub fn of(g: &DyTag) -> Self {
        let mut labels = BTreeMap::new();
        for e in g.edges() {
            *labels.entry(e.label.clone()).or_insert(0) += 1;
        }
        let range = g.time_range();
        Self {
            nodes: g.node_count(),
            edges: g.edge_count(),
            bipartite: g.is_bipartite(),
            first_timestamp: range.map(|r| r.0.to_string()),
            last_timestamp: range.map(|r| r.1.to_string()),
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub generated: Option<GraphStats>,
    pub truth: Option<GraphStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structural: Option<Suite<StructuralReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Suite<EmbeddingReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub textual: Option<Suite<TextualReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminative: Option<Suite<DiscriminativeReport>>,
}

impl MetricReport {
    fn outcomes(&self) -> Vec<bool> {
        let mut v = Vec::new();
        if let Some(s) = &self.structural {
            v.push(s.is_ok());
        }
        if let Some(s) = &self.embedding {
            v.push(s.is_ok());
        }
        if let Some(s) = &self.textual {
            v.push(s.is_ok());
        }
        if let Some(s) = &self.discriminative {
            v.push(s.is_ok());
        }
        v
    }

    /// True when suites were requested and none succeeded.
    pub fn all_failed(&self) -> bool {
        let o = self.outcomes();
        !o.is_empty() && o.iter().all(|ok| !ok)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let (Some(g), Some(t)) = (&self.generated, &self.truth) {
            out.push_str("## Graphs\n\n| | Generated | Truth |\n|---|---|---|\n");
            let _ = writeln!(out, "| Nodes | {} | {} |", g.nodes, t.nodes);
            let _ = writeln!(out, "| Edges | {} | {} |", g.edges, t.edges);
            out.push('\n');
        }
        if let Some(s) = &self.structural {
            out.push_str("## Structural\n\n");
            match s {
                Suite::Ok { report } => structural_table(&mut out, report),
                Suite::Failed { error } => failed(&mut out, error),
            }
        }
        if let Some(s) = &self.embedding {
            out.push_str("## Embedding\n\n");
            match s {
                Suite::Ok { report } => {
                    out.push_str("| Metric | Value |\n|---|---|\n");
                    let _ = writeln!(out, "| Graph embedding score | {} |", num(Some(report.graph_embedding_score)));
                    let _ = writeln!(out, "| ρ | {} |", num(Some(report.rho)));
                    let _ =
                        writeln!(out, "| Projection | {}×{} (seed {}) |", report.k_rows, report.d_cols, report.seed);
                    let _ = writeln!(out, "| Encoder | {} |\n", report.encoder);
                }
                Suite::Failed { error } => failed(&mut out, error),
            }
        }
        if let Some(s) = &self.textual {
            out.push_str("## Textual\n\n");
            match s {
                Suite::Ok { report } => {
                    let m = &report.summary;
                    out.push_str("| CF | PD | DA | IQ | CR | Average | n |\n|---|---|---|---|---|---|---|\n");
                    let _ = writeln!(
                        out,
                        "| {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {} |\n",
                        m.contextual_fidelity,
                        m.personality_depth,
                        m.dynamic_adaptability,
                        m.immersive_quality,
                        m.content_richness,
                        m.average,
                        m.count
                    );
                }
                Suite::Failed { error } => failed(&mut out, error),
            }
        }
        if let Some(s) = &self.discriminative {
            out.push_str("## Discriminative\n\n");
            match s {
                Suite::Ok { report } => disc_tables(&mut out, report),
                Suite::Failed { error } => failed(&mut out, error),
            }
        }
        out
    }
}

fn failed(out: &mut String, error: &str) {
    let _ = writeln!(out, "_failed: {error}_\n");
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x != 0.0 && x.abs() < 1e-3 => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    }
}

fn structural_table(out: &mut String, r: &StructuralReport) {
    let pl = |p: &PowerLawSummary| (num(p.fit.as_ref().map(|f| f.d_k)), num(p.fit.as_ref().map(|f| f.alpha)), p.valid);
    let (gd, ga, gv) = pl(&r.generated_power_law);
    let (td, ta, tv) = pl(&r.truth_power_law);
    out.push_str("| Metric | Generated | Truth |\n|---|---|---|\n");
    let _ = writeln!(out, "| Degree MMD | {} | |", num(r.degree_mmd));
    let _ = writeln!(out, "| Spectra MMD | {} | |", num(r.spectra_mmd));
    let _ = writeln!(out, "| D_k | {gd} | {td} |");
    let _ = writeln!(out, "| α | {ga} | {ta} |");
    let mark = |v: bool| if v { "✓" } else { "✗" };
    let _ = writeln!(out, "| Valid | {} | {} |", mark(gv), mark(tv));
    for e in &r.errors {
        let _ = writeln!(out, "\n_{e}_");
    }
    out.push('\n');
}

fn disc_tables(out: &mut String, r: &DiscriminativeReport) {
    out.push_str("| Metric | Value |\n|---|---|\n");
    for (k, v) in &r.hit_at {
        let _ = writeln!(out, "| Hit@{k} | {} |", num(Some(*v)));
    }
    if let Some(c) = &r.classification {
        let _ = writeln!(out, "| Weighted precision | {} |", num(Some(c.weighted_precision)));
        let _ = writeln!(out, "| Weighted recall | {} |", num(Some(c.weighted_recall)));
        let _ = writeln!(out, "| Weighted F1 | {} |", num(Some(c.weighted_f1)));
    }
    let _ = writeln!(out, "| Matched pairs | {} |", r.matched);
    let _ = writeln!(out, "| Unmatched (generated / truth) | {} / {} |\n", r.unmatched_generated, r.unmatched_truth);
    if !r.hubs.is_empty() {
        out.push_str("| Hub | Degree | Origin | Excerpt |\n|---|---|---|---|\n");
        for h in &r.hubs {
            let excerpt = h.excerpt.replace('|', "\\|").replace('\n', " ");
            let _ = writeln!(out, "| {} | {} | {} | {} |", h.node_id, h.degree, h.origin.as_str(), excerpt);
        }
        out.push('\n');
    }
    for e in &r.errors {
        let _ = writeln!(out, "_{e}_\n");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structural::{structural_report, StructuralConfig};

    #[test]
    fn json_round_trip_and_markdown() {
        let nodes =
            (0..4).map(|i| crate::graph::NodeRecord::new(format!("n{i}"), crate::graph::Role::Both, "")).collect();
        let edges = vec![
            crate::graph::TemporalEdge::new("n0", "n1", crate::Timestamp::Int(0), "a", ""),
            crate::graph::TemporalEdge::new("n1", "n2", crate::Timestamp::Int(1), "b", ""),
            crate::graph::TemporalEdge::new("n2", "n3", crate::Timestamp::Int(2), "a", ""),
        ];
        let g = DyTag::from_records(nodes, edges, false).unwrap();
        let report = MetricReport {
            generated: Some(GraphStats::of(&g)),
            truth: Some(GraphStats::of(&g)),
            structural: Some(Suite::Ok { report: structural_report(&g, &g, &StructuralConfig::default()) }),
            embedding: Some(Suite::Failed { error: "boom".into() }),
            ..Default::default()
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(!json.contains("textual"));
        let md = report.to_markdown();
        assert!(md.contains("| Degree MMD | 0.0000 | |"));
        assert!(md.contains("_failed: boom_"));
        assert!(!report.all_failed());
        assert_eq!(GraphStats::of(&g).labels["a"], 2);
    }

    #[test]
    fn all_failed_needs_requested_suites() {
        assert!(!MetricReport::default().all_failed());
        let r = MetricReport { embedding: Some(Suite::Failed { error: "x".into() }), ..Default::default() };
        assert!(r.all_failed());
    }
}
