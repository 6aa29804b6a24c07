use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dytag_core::generation::{run_idgg, run_tdgg, GenConfig, GenMode, LlmPolicy, RunStatus};
use dytag_core::{slice_seed, DyTag, NodeRecord, Origin, Role, TemporalEdge, Timestamp};
use dytag_llm::{ChatEndpoint, ChatMessage, ChatReply, LlmError, Scenario};

/// Replies computed from the prompt alone, so answers do not depend on call order.
struct Mock {
    calls: AtomicUsize,
    fail_endpoint: bool,
}

impl Mock {
    fn new() -> Self {
        Self { calls: AtomicUsize::new(0), fail_endpoint: false }
    }
}

fn first_item(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|l| l.strip_prefix("Item ID: ")).map(str::trim)
}

impl ChatEndpoint for Mock {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if self.fail_endpoint {
            return Err(LlmError::Network { attempts: 1, message: "connection refused".into() });
        }
        let p = &messages.last().unwrap().content;
        let content = if p.contains("generate ONE new") {
            r#"{"node": {"node_id": "G12345", "node_type": "x", "description": "a fresh profile"}}"#.to_string()
        } else if p.contains("ID: u3") {
            // agents u3, u30..u39 always get prose
            "I would rather not pick anything today.".to_string()
        } else if let Some(item) = first_item(p) {
            if p.contains("weibo") || p.contains("Weibo") {
                format!(r#"{{"item_id": "{item}"}}"#)
            } else {
                format!(
                    r#"Here you go: {{"review": {{"item_id": "{item}", "timestamp": "5", "rating": 4, "review_title": "Nice", "review_text": "Works well"}}}}"#
                )
            }
        } else if p.contains("ID: ") && (p.contains("weibo") || p.contains("Weibo")) {
            r#"{"interact": {"timestamp": "1000000", "label": "repost", "src_text": "look", "dst_text": "thanks"}}"#
                .to_string()
        } else {
            "summary of preferences".to_string()
        };
        Ok(ChatReply { content, retries: 0 })
    }

    fn describe(&self) -> String {
        "mock".into()
    }
}

fn bipartite(n_edges: usize) -> DyTag {
    let mut nodes: Vec<NodeRecord> =
        (0..40).map(|i| NodeRecord::new(format!("u{i}"), Role::Source, format!("user number {i}"))).collect();
    nodes.extend((0..25).map(|i| NodeRecord::new(format!("p{i}"), Role::Destination, format!("product {i}"))));
    let edges = (0..n_edges)
        .map(|t| {
            TemporalEdge::new(
                format!("u{}", (t * 7) % 40),
                format!("p{}", (t * 3 + t / 5) % 25),
                Timestamp::Int(100 + t as i64),
                format!("{}", t % 5 + 1),
                format!("text {t}"),
            )
        })
        .collect();
    DyTag::from_records(nodes, edges, true).unwrap()
}

fn config(rounds: usize) -> GenConfig {
    GenConfig { rounds, edges_per_round: 10, rng_seed: 5, parallelism: 4, ..Default::default() }
}

#[test]
fn sephora_round_parses_or_falls_back() {
    let full = bipartite(200);
    let split = slice_seed(&full, 100).unwrap();
    let mock = Arc::new(Mock::new());
    let policy = LlmPolicy::new(mock.clone(), Scenario::sephora());
    let out = run_tdgg(&split.seed, &split.remainder, &config(1), &policy).unwrap();
    assert!(out.status.is_completed());
    assert_eq!(out.graph.edge_count(), 110);
    let fallback_sources = out.recall_logs.iter().filter(|l| l.src.starts_with("u3")).count();
    assert_eq!(policy.fallback_count(), fallback_sources);
    assert_eq!(policy.parse_retry_count(), fallback_sources * 2);
    for e in &out.graph.edges()[100..] {
        if e.src.starts_with("u3") {
            assert_ne!(e.text, "Nice\nWorks well");
        } else {
            assert_eq!((e.label.as_str(), e.text.as_str()), ("4", "Nice\nWorks well"));
        }
    }
    // the model's timestamp ("5") predates the seed and is clamped
    assert_eq!(out.manifest.timestamp_clamps, 10 - fallback_sources);
    assert!(out.manifest.policy.starts_with("llm:sephora@mock"));
}

#[test]
fn reflection_goes_through_endpoint() {
    let full = bipartite(200);
    let split = slice_seed(&full, 100).unwrap();
    let mock = Arc::new(Mock::new());
    let policy = LlmPolicy::new(mock.clone(), Scenario::sephora());
    let plain = run_tdgg(&split.seed, &split.remainder, &config(1), &policy).unwrap();
    let before = mock.calls.load(Ordering::Relaxed);
    let cfg = GenConfig { reflection: true, ..config(1) };
    let reflected = run_tdgg(&split.seed, &split.remainder, &cfg, &policy).unwrap();
    assert!(reflected.status.is_completed());
    assert!(mock.calls.load(Ordering::Relaxed) - before > before);
    assert_eq!(plain.graph.edge_count(), reflected.graph.edge_count());
}

#[test]
fn endpoint_failure_aborts_the_round() {
    let full = bipartite(200);
    let split = slice_seed(&full, 100).unwrap();
    let mock = Arc::new(Mock { calls: AtomicUsize::new(0), fail_endpoint: true });
    let policy = LlmPolicy::new(mock, Scenario::sephora());
    let out = run_tdgg(&split.seed, &split.remainder, &config(2), &policy).unwrap();
    assert!(matches!(out.status, RunStatus::Aborted { round: 0, .. }));
    assert_eq!(out.graph.edge_count(), 100);
}

#[test]
fn generated_node_ids_are_made_unique() {
    let seed = bipartite(100);
    let policy = LlmPolicy::new(Arc::new(Mock::new()), Scenario::sephora());
    let cfg = GenConfig { mode: GenMode::Idgg, r_src: Some(3), r_dst: Some(2), ..config(2) };
    let out = run_idgg(&seed, &cfg, &policy).unwrap();
    assert!(out.status.is_completed(), "{:?}", out.status);
    let new: Vec<&NodeRecord> = out.graph.nodes().iter().filter(|n| n.origin == Origin::Generated).collect();
    assert_eq!(new.len(), 10);
    assert!(new.iter().any(|n| n.node_id == "G12345"));
    assert_eq!(out.manifest.id_regenerations, 9);
    assert!(new.iter().all(|n| n.text.contains("description: a fresh profile")));
    assert!(new.iter().all(|n| !n.text.contains("node_type")));
}

#[test]
fn weibo_uses_two_calls() {
    let nodes: Vec<NodeRecord> =
        (0..30).map(|i| NodeRecord::new(format!("w{i}"), Role::Both, format!("weibo user {i}"))).collect();
    let edges: Vec<TemporalEdge> = (0..150)
        .map(|t| {
            TemporalEdge::new(
                format!("w{}", (t * 7) % 30),
                format!("w{}", (t * 11 + 1) % 30),
                Timestamp::Int(t as i64),
                "post",
                "hi",
            )
        })
        .collect();
    let full = DyTag::from_records(nodes, edges, false).unwrap();
    let split = slice_seed(&full, 100).unwrap();
    let mock = Arc::new(Mock::new());
    let policy = LlmPolicy::new(mock.clone(), Scenario::weibo());
    let out = run_tdgg(&split.seed, &split.remainder, &config(1), &policy).unwrap();
    assert!(out.status.is_completed());
    assert_eq!(mock.calls.load(Ordering::Relaxed), 20);
    for e in &out.graph.edges()[100..] {
        assert_eq!(
            (e.label.as_str(), e.text.as_str(), e.timestamp),
            ("repost", "look\nthanks", Timestamp::Int(1_000_000))
        );
        assert_ne!(e.src, e.dst);
    }
}
