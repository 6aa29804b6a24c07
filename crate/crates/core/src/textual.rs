//! LLM-as-evaluator scoring of generated texts on five 1-5 criteria.

use std::collections::HashMap;

use dytag_llm::{parse_agent_json, ChatEndpoint, ChatMessage, FieldKind, LlmError, ParseError};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DyTag, NodeRecord, Origin, TemporalEdge};
use crate::rng::substream;

/// (JSON key, display name, rubric line shown to the evaluator).
pub const CRITERIA: [(&str, &str, &str); 5] = [
    (
        "contextual_fidelity",
        "Contextual Fidelity",
        "Do the node and edge texts agree with what this node did and said in its earlier interactions?",
    ),
    (
        "personality_depth",
        "Personality Depth",
        "Do the profiles carry a distinct, detailed persona with varied vocabulary and style?",
    ),
    (
        "dynamic_adaptability",
        "Dynamic Adaptability",
        "Does the text fit its point in time, changing plausibly as the interaction history grows?",
    ),
    (
        "immersive_quality",
        "Immersive Quality",
        "Does the text read as something a real participant on the platform would write?",
    ),
    (
        "content_richness",
        "Content Richness",
        "Is the edge text specific and informative rather than generic filler, and does it stay on topic?",
    ),
];

const SYSTEM_PROMPT: &str = "You are a careful, consistent judge of synthetic social and commerce data. \
Answer with a single JSON object and nothing else.";

#[derive(Debug, Error)]
pub enum TextualError {
    #[error("no samples to score")]
    Empty,
    #[error("evaluator endpoint: {0}")]
    Endpoint(#[from] LlmError),
    #[error("evaluator reply unusable after {attempts} attempts: {last}")]
    Unparseable { attempts: usize, last: ParseError },
    #[error("every sample failed; first error: {0}")]
    AllFailed(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Edges,
    NodeProfiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextualConfig {
    pub sample_size: usize,
    pub history_cap_chars: usize,
    pub seed: u64,
    /// Extra attempts after a malformed reply.
    pub max_parse_retries: usize,
    pub parallelism: usize,
    pub mode: EvalMode,
}

impl Default for TextualConfig {
    fn default() -> Self {
        Self {
            sample_size: 200,
            history_cap_chars: 1000,
            seed: 0,
            max_parse_retries: 3,
            parallelism: 4,
            mode: EvalMode::Edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextualSample {
    pub edge: TemporalEdge,
    pub src_profile: String,
    pub dst_profile: String,
    pub src_history_excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSample {
    pub node: NodeRecord,
    pub history_excerpt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub contextual_fidelity: u8,
    pub personality_depth: u8,
    pub dynamic_adaptability: u8,
    pub immersive_quality: u8,
    pub content_richness: u8,
}

impl CriterionScores {
    pub fn uniform(v: u8) -> Self {
        Self::from_array([v; 5])
    }

    pub fn from_array(a: [u8; 5]) -> Self {
        Self {
            contextual_fidelity: a[0],
            personality_depth: a[1],
            dynamic_adaptability: a[2],
            immersive_quality: a[3],
            content_richness: a[4],
        }
    }

    pub fn as_array(&self) -> [u8; 5] {
        [
            self.contextual_fidelity,
            self.personality_depth,
            self.dynamic_adaptability,
            self.immersive_quality,
            self.content_richness,
        ]
    }

    pub fn average(&self) -> f64 {
        self.as_array().iter().map(|v| f64::from(*v)).sum::<f64>() / 5.0
    }
}

/// Keep the tail of `text` so it is at most `cap` characters.
pub fn keep_recent(text: &str, cap: usize) -> String {
    let n = text.chars().count();
    if n <= cap {
        return text.to_string();
    }
    let mut s: String = text.chars().skip(n - cap).collect();
    // drop a partial first line when a later line boundary exists
    if let Some(i) = s.find('\n') {
        if i + 1 < s.len() {
            s = s[i + 1..].to_string();
        }
    }
    s
}

fn keep_head(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        text.to_string()
    } else {
        let mut s: String = text.chars().take(cap).collect();
        s.push_str(" ...");
        s
    }
}

fn history_line(e: &TemporalEdge, me: &str) -> String {
    let (dir, other) = if e.src == me { ("->", &e.dst) } else { ("<-", &e.src) };
    format!("[{}] {} {} (label {}): {}", e.timestamp, dir, other, e.label, e.text.replace('\n', " "))
}

/// Sample up to `sample_size` edges from `graph.edges()[skip..]`, seeded,
/// returned in stream order, each with its source's prior history.
pub fn build_samples(graph: &DyTag, skip: usize, config: &TextualConfig) -> Vec<TextualSample> {
    let pool = graph.edge_count().saturating_sub(skip);
    let take = pool.min(config.sample_size);
    let mut rng = substream(config.seed, "textual-sample", &[]);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool, take).into_iter().map(|i| i + skip).collect();
    picked.sort_unstable();

    let mut history: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut next = picked.iter().peekable();
    let mut out = Vec::with_capacity(take);
    for (i, e) in graph.edges().iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            let lines: Vec<String> = history
                .get(e.src.as_str())
                .map(|h| h.iter().map(|&j| history_line(&graph.edges()[j], &e.src)).collect())
                .unwrap_or_default();
            let profile = |id: &str| graph.node(id).map(|n| n.text.clone()).unwrap_or_default();
            out.push(TextualSample {
                edge: e.clone(),
                src_profile: profile(&e.src),
                dst_profile: profile(&e.dst),
                src_history_excerpt: keep_recent(&lines.join("\n"), config.history_cap_chars),
            });
        }
        history.entry(e.src.as_str()).or_default().push(i);
        if e.dst != e.src {
            history.entry(e.dst.as_str()).or_default().push(i);
        }
    }
    out
}

/// Sample generated nodes (or all nodes when none are marked generated).
pub fn build_node_samples(graph: &DyTag, config: &TextualConfig) -> Vec<NodeSample> {
    let generated: Vec<usize> =
        (0..graph.node_count()).filter(|&i| graph.nodes()[i].origin == Origin::Generated).collect();
    let candidates: Vec<usize> = if generated.is_empty() { (0..graph.node_count()).collect() } else { generated };
    let take = candidates.len().min(config.sample_size);
    let mut rng = substream(config.seed, "textual-node-sample", &[]);
    let mut picked: Vec<usize> =
        index::sample(&mut rng, candidates.len(), take).into_iter().map(|i| candidates[i]).collect();
    picked.sort_unstable();
    let incidence = graph.incidence();
    picked
        .into_iter()
        .map(|i| {
            let node = &graph.nodes()[i];
            let lines: Vec<String> =
                incidence[i].iter().map(|&j| history_line(&graph.edges()[j], &node.node_id)).collect();
            NodeSample { node: node.clone(), history_excerpt: keep_recent(&lines.join("\n"), config.history_cap_chars) }
        })
        .collect()
}

fn rubric() -> String {
    let mut s = String::new();
    for (i, (key, name, def)) in CRITERIA.iter().enumerate() {
        s.push_str(&format!("{}. {} (`{}`): {}\n", i + 1, name, key, def));
    }
    s
}

fn reply_format() -> String {
    let keys: Vec<String> = CRITERIA.iter().map(|(k, _, _)| format!("\"{k}\": <1-5>")).collect();
    format!(
        "Score each criterion with an integer from 1 (poor) to 5 (excellent). Reply with exactly this JSON object and no other text:\n{{{}}}",
        keys.join(", ")
    )
}

pub fn build_eval_prompt(sample: &TextualSample, history_cap: usize) -> String {
    let e = &sample.edge;
    let history = keep_recent(&sample.src_history_excerpt, history_cap);
    format!(
        "Evaluate the quality of one generated interaction in a dynamic text-attributed graph.\n\n\
         ## Source node profile\n{}\n\n\
         ## Destination node profile\n{}\n\n\
         ## Source's earlier interactions (most recent last)\n{}\n\n\
         ## Interaction under evaluation\n\
         time: {}\nlabel: {}\ntext: {}\n\n\
         ## Criteria\n{}\n{}\n",
        keep_head(&sample.src_profile, history_cap),
        keep_head(&sample.dst_profile, history_cap),
        if history.is_empty() { "(none)".to_string() } else { history },
        e.timestamp,
        e.label,
        keep_head(&e.text, 4 * history_cap),
        rubric(),
        reply_format()
    )
}

pub fn build_node_prompt(sample: &NodeSample, history_cap: usize) -> String {
    let history = keep_recent(&sample.history_excerpt, history_cap);
    format!(
        "Evaluate the quality of one generated node profile in a dynamic text-attributed graph.\n\n\
         ## Node profile under evaluation\nid: {}\nrole: {}\n{}\n\n\
         ## The node's interactions (most recent last)\n{}\n\n\
         ## Criteria\n{}\n{}\n",
        sample.node.node_id,
        sample.node.role,
        keep_head(&sample.node.text, 4 * history_cap),
        if history.is_empty() { "(none)".to_string() } else { history },
        rubric(),
        reply_format()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub scores: CriterionScores,
    /// Criterion values that were outside 1..=5 and got clamped.
    pub clamped: usize,
    pub attempts: usize,
}

/// Parse one evaluator reply, clamping out-of-range scores.
pub fn parse_scores(reply: &str) -> Result<(CriterionScores, usize), ParseError> {
    let expected: Vec<(&str, FieldKind)> = CRITERIA.iter().map(|(k, _, _)| (*k, FieldKind::Int)).collect();
    let parsed = parse_agent_json(reply, &expected)?;
    let mut clamped = 0;
    let mut vals = [0u8; 5];
    for (slot, (key, _, _)) in vals.iter_mut().zip(CRITERIA.iter()) {
        let raw = parsed.fields[*key].as_i64().unwrap_or(0);
        let c = raw.clamp(1, 5);
        if c != raw {
            clamped += 1;
            log::warn!("evaluator score {key}={raw} clamped to {c}");
        }
        *slot = c as u8;
    }
    Ok((CriterionScores::from_array(vals), clamped))
}

fn score_prompt(endpoint: &dyn ChatEndpoint, prompt: &str, retries: usize) -> Result<ScoredSample, TextualError> {
    let messages = [ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(prompt)];
    let mut last = ParseError::NoObject;
    for attempt in 1..=retries + 1 {
        let reply = endpoint.chat(&messages)?;
        match parse_scores(&reply.content) {
            Ok((scores, clamped)) => return Ok(ScoredSample { scores, clamped, attempts: attempt }),
            Err(e) => {
                log::warn!("evaluator reply attempt {attempt} unusable: {e}");
                last = e;
            }
        }
    }
    Err(TextualError::Unparseable { attempts: retries + 1, last })
}

pub fn score_sample(
    endpoint: &dyn ChatEndpoint,
    sample: &TextualSample,
    config: &TextualConfig,
) -> Result<ScoredSample, TextualError> {
    score_prompt(endpoint, &build_eval_prompt(sample, config.history_cap_chars), config.max_parse_retries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextualSummary {
    pub contextual_fidelity: f64,
    pub personality_depth: f64,
    pub dynamic_adaptability: f64,
    pub immersive_quality: f64,
    pub content_richness: f64,
    pub average: f64,
    pub count: usize,
}

/// Per-criterion means and their mean. Sums are over integers, so the
/// result does not depend on sample order.
pub fn aggregate_scores(scores: &[CriterionScores]) -> Result<TextualSummary, TextualError> {
    if scores.is_empty() {
        return Err(TextualError::Empty);
    }
    let mut sums = [0u64; 5];
    for s in scores {
        for (acc, v) in sums.iter_mut().zip(s.as_array()) {
            *acc += u64::from(v);
        }
    }
    let n = scores.len() as f64;
    let m = sums.map(|s| s as f64 / n);
    Ok(TextualSummary {
        contextual_fidelity: m[0],
        personality_depth: m[1],
        dynamic_adaptability: m[2],
        immersive_quality: m[3],
        content_richness: m[4],
        average: sums.iter().sum::<u64>() as f64 / (5.0 * n),
        count: scores.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextualReport {
    #[serde(flatten)]
    pub summary: TextualSummary,
    pub mode: EvalMode,
    pub failed: usize,
    pub clamp_warnings: usize,
    pub parse_retries: usize,
}

/// Sample texts from `graph` (edges after `skip`, or node profiles) and
/// score them concurrently with at most `config.parallelism` requests in flight.
pub fn evaluate_textual(
    graph: &DyTag,
    skip: usize,
    endpoint: &dyn ChatEndpoint,
    config: &TextualConfig,
) -> Result<TextualReport, TextualError> {
    let prompts: Vec<String> = match config.mode {
        EvalMode::Edges => {
            build_samples(graph, skip, config).iter().map(|s| build_eval_prompt(s, config.history_cap_chars)).collect()
        }
        EvalMode::NodeProfiles => {
            build_node_samples(graph, config).iter().map(|s| build_node_prompt(s, config.history_cap_chars)).collect()
        }
    };
    if prompts.is_empty() {
        return Err(TextualError::Empty);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .map_err(|e| TextualError::Pool(e.to_string()))?;
    let results: Vec<Result<ScoredSample, TextualError>> =
        pool.install(|| prompts.par_iter().map(|p| score_prompt(endpoint, p, config.max_parse_retries)).collect());

    let mut scores = Vec::new();
    let mut failed = 0;
    let mut first_error = None;
    let (mut clamp_warnings, mut parse_retries) = (0, 0);
    for r in results {
        match r {
            Ok(s) => {
                clamp_warnings += s.clamped;
                parse_retries += s.attempts - 1;
                scores.push(s.scores);
            }
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if scores.is_empty() {
        return Err(TextualError::AllFailed(first_error.unwrap_or_default()));
    }
    Ok(TextualReport { summary: aggregate_scores(&scores)?, mode: config.mode, failed, clamp_warnings, parse_retries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Role;
    use crate::timestamp::Timestamp;
    use dytag_llm::ChatReply;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        replies: Vec<String>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: &[&str]) -> Self {
            Self { replies: replies.iter().map(|s| s.to_string()).collect(), calls: AtomicUsize::new(0) }
        }
    }

    impl ChatEndpoint for Scripted {
        fn chat(&self, _: &[ChatMessage]) -> Result<ChatReply, LlmError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(ChatReply { content: self.replies[i.min(self.replies.len() - 1)].clone(), retries: 0 })
        }
        fn describe(&self) -> String {
            "scripted".into()
        }
    }

    fn sample(history: &str) -> TextualSample {
        TextualSample {
            edge: TemporalEdge::new("u1", "p1", Timestamp::Int(3), "5", "Great moisturizer."),
            src_profile: "Skin type: dry".into(),
            dst_profile: "Product: Night Cream".into(),
            src_history_excerpt: history.into(),
        }
    }

    #[test]
    fn prompt_names_every_criterion_and_caps_history() {
        let p = build_eval_prompt(&sample("x"), 1000);
        for (key, name, _) in CRITERIA {
            assert!(p.contains(name));
            assert!(p.contains(key));
        }
        let long = "y".repeat(10_000);
        let short_len = build_eval_prompt(&sample(""), 1000).len();
        let p = build_eval_prompt(&sample(&long), 1000);
        assert!(p.len() <= short_len + 1000);
    }

    #[test]
    fn all_fives() {
        let ep = Scripted::new(&[
            r#"{"contextual_fidelity":5,"personality_depth":5,"dynamic_adaptability":5,"immersive_quality":5,"content_richness":5}"#,
        ]);
        let s = score_sample(&ep, &sample(""), &TextualConfig::default()).unwrap();
        assert_eq!(s.scores.average(), 5.0);
        assert_eq!(s.clamped, 0);
    }

    #[test]
    fn out_of_range_is_clamped() {
        let ep = Scripted::new(&[
            r#"{"contextual_fidelity":6,"personality_depth":0,"dynamic_adaptability":3,"immersive_quality":4.0,"content_richness":"2"}"#,
        ]);
        let s = score_sample(&ep, &sample(""), &TextualConfig::default()).unwrap();
        assert_eq!(s.scores.as_array(), [5, 1, 3, 4, 2]);
        assert_eq!(s.clamped, 2);
    }

    #[test]
    fn prose_then_json() {
        // recorded evaluator style: explanation first, fenced JSON after
        let reply = "The review is consistent with the user's history and reads naturally.\n\n```json\n{\n  \"contextual_fidelity\": 4,\n  \"personality_depth\": 3,\n  \"dynamic_adaptability\": 4,\n  \"immersive_quality\": 5,\n  \"content_richness\": 4\n}\n```";
        let (s, c) = parse_scores(reply).unwrap();
        assert_eq!(s.as_array(), [4, 3, 4, 5, 4]);
        assert_eq!(c, 0);
    }

    #[test]
    fn malformed_replies_are_retried_then_fail() {
        let good = r#"{"contextual_fidelity":2,"personality_depth":2,"dynamic_adaptability":2,"immersive_quality":2,"content_richness":2}"#;
        let ep = Scripted::new(&["nope", "{\"contextual_fidelity\": 3}", good]);
        let s = score_sample(&ep, &sample(""), &TextualConfig::default()).unwrap();
        assert_eq!(s.attempts, 3);
        let ep = Scripted::new(&["never json"]);
        assert!(matches!(
            score_sample(&ep, &sample(""), &TextualConfig::default()),
            Err(TextualError::Unparseable { attempts: 4, .. })
        ));
        assert_eq!(ep.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn aggregation() {
        let one = CriterionScores::from_array([1, 2, 3, 4, 5]);
        let a = aggregate_scores(&[one]).unwrap();
        assert_eq!(a.contextual_fidelity, 1.0);
        assert_eq!(a.content_richness, 5.0);
        assert_eq!(a.average, 3.0);
        let b = aggregate_scores(&[CriterionScores::uniform(4), CriterionScores::uniform(5)]).unwrap();
        assert_eq!(b.average, 4.5);
        assert!(matches!(aggregate_scores(&[]), Err(TextualError::Empty)));
    }

    #[test]
    fn keep_recent_prefers_whole_lines() {
        assert_eq!(keep_recent("abc", 10), "abc");
        assert_eq!(keep_recent("old line\nnew", 6), "new");
        assert_eq!(keep_recent("abcdef", 3), "def");
    }

    fn line_graph(n: usize) -> DyTag {
        let mut g = DyTag::new(false);
        g.add_node(NodeRecord::new("a", Role::Both, "A")).unwrap();
        g.add_node(NodeRecord::new("b", Role::Both, "B")).unwrap();
        for t in 0..n {
            g.push_edge(TemporalEdge::new("a", "b", Timestamp::Int(t as i64), "1", format!("msg {t}"))).unwrap();
        }
        g
    }

    #[test]
    fn sampling_respects_skip_and_cap() {
        let g = line_graph(500);
        let cfg = TextualConfig { seed: 3, ..Default::default() };
        let s = build_samples(&g, 100, &cfg);
        assert_eq!(s.len(), 200);
        assert!(s.iter().all(|x| x.edge.timestamp >= Timestamp::Int(100)));
        assert!(s.windows(2).all(|w| w[0].edge.timestamp < w[1].edge.timestamp));
        assert!(s.iter().all(|x| x.src_history_excerpt.chars().count() <= 1000));
        assert_eq!(s, build_samples(&g, 100, &cfg));
        assert_eq!(build_samples(&line_graph(30), 10, &cfg).len(), 20);
    }

    #[test]
    fn pipeline_counts_failures_and_clamps() {
        let g = line_graph(20);
        let ep = Scripted::new(&[
            r#"{"contextual_fidelity":9,"personality_depth":4,"dynamic_adaptability":4,"immersive_quality":4,"content_richness":4}"#,
        ]);
        let cfg = TextualConfig { parallelism: 3, ..Default::default() };
        let r = evaluate_textual(&g, 0, &ep, &cfg).unwrap();
        assert_eq!(r.summary.count, 20);
        assert_eq!(r.clamp_warnings, 20);
        assert_eq!(r.summary.contextual_fidelity, 5.0);
        assert!((r.summary.average - 4.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant_and_bounded(
            raw in proptest::collection::vec(proptest::array::uniform5(-3i64..9), 1..40),
            rot in 0usize..40,
        ) {
            let scores: Vec<CriterionScores> = raw.iter().map(|a| {
                let reply = format!(
                    r#"{{"contextual_fidelity":{},"personality_depth":{},"dynamic_adaptability":{},"immersive_quality":{},"content_richness":{}}}"#,
                    a[0], a[1], a[2], a[3], a[4]
                );
                parse_scores(&reply).unwrap().0
            }).collect();
            let mut shuffled = scores.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            shuffled.reverse();
            let a = aggregate_scores(&scores).unwrap();
            let b = aggregate_scores(&shuffled).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((1.0..=5.0).contains(&a.average));
        }
    }
}
