use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use dytag_llm::{parse_agent_json, ChatEndpoint, ChatMessage, FieldKind, ParsedReply, PromptTemplate, Scenario};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use super::policy::random_node_id;
use super::{
    AgentAction, AgentPolicy, NodeGenContext, NodeMemory, PolicyError, RecencyPolicy, SelectionContext, TimeCodec,
};
use crate::graph::{NodeRecord, Role};

const PROFILE_CHARS: usize = 300;
const NO_HISTORY: &str = "(no previous interactions)";

/// Agents backed by a chat endpoint and a scenario's prompt templates.
///
/// Each call is retried until its reply parses (up to `parse_attempts`);
/// after that the affected decision falls back to [`RecencyPolicy`].
/// Endpoint errors are returned as policy failures.
pub struct LlmPolicy {
    endpoint: Arc<dyn ChatEndpoint>,
    scenario: Scenario,
    parse_attempts: usize,
    fallback: RecencyPolicy,
    fallbacks: AtomicUsize,
    parse_retries: AtomicUsize,
    time_format: TimeCodec,
}

impl LlmPolicy {
    pub fn new(endpoint: Arc<dyn ChatEndpoint>, scenario: Scenario) -> Self {
        Self {
            endpoint,
            scenario,
            parse_attempts: 3,
            fallback: RecencyPolicy,
            fallbacks: AtomicUsize::new(0),
            parse_retries: AtomicUsize::new(0),
            time_format: TimeCodec::Numeric,
        }
    }

    pub fn with_parse_attempts(mut self, n: usize) -> Self {
        self.parse_attempts = n.max(1);
        self
    }

    /// Timestamp rendering used in reflection prompts.
    pub fn with_time_format(mut self, codec: TimeCodec) -> Self {
        self.time_format = codec;
        self
    }

    /// Decisions that used the stub after unparseable replies.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn parse_retry_count(&self) -> usize {
        self.parse_retries.load(Ordering::Relaxed)
    }

    fn ask(&self, template: &PromptTemplate, slots: &[(&str, &str)]) -> Result<String, PolicyError> {
        let rendered = template.render_pairs(slots).map_err(|e| PolicyError::Failed(e.to_string()))?;
        self.endpoint
            .chat(&[ChatMessage::user(rendered.text)])
            .map(|r| r.content)
            .map_err(|e| PolicyError::Endpoint(e.to_string()))
    }

    /// Ask until `accept` yields a value. `Ok(None)` means every attempt failed to parse.
    fn ask_parsed<T>(
        &self,
        template: &PromptTemplate,
        slots: &[(&str, &str)],
        keys: &[(&str, FieldKind)],
        mut accept: impl FnMut(ParsedReply) -> Option<T>,
    ) -> Result<Option<T>, PolicyError> {
        for attempt in 0..self.parse_attempts {
            if attempt > 0 {
                self.parse_retries.fetch_add(1, Ordering::Relaxed);
            }
            let reply = self.ask(template, slots)?;
            match parse_agent_json(&reply, keys) {
                Ok(parsed) => {
                    if let Some(v) = accept(parsed) {
                        return Ok(Some(v));
                    }
                    log::warn!("{}: reply rejected (attempt {})", template.id, attempt + 1);
                }
                Err(e) => log::warn!("{}: {e} (attempt {})", template.id, attempt + 1),
            }
        }
        Ok(None)
    }

    fn example(&self, ctx: &SelectionContext, keys: &[(&str, FieldKind)]) -> String {
        let schema = &self.scenario.reply;
        let recent = ctx.memory.most_recent(1);
        let mut obj = Map::new();
        for (k, kind) in keys {
            let v = if *k == schema.destination_key {
                Value::from(ctx.candidates.first().map_or("", |c| c.node.node_id.as_str()))
            } else if *k == schema.time_key {
                Value::from(ctx.time_format.render(ctx.next_timestamp()))
            } else if *k == schema.label_key {
                let label = recent.first().map(|e| e.label.clone()).unwrap_or_default();
                match (kind, label.parse::<i64>()) {
                    (FieldKind::Int, Ok(n)) => Value::from(n),
                    _ => Value::from(label),
                }
            } else {
                Value::from(recent.first().map_or("...".to_string(), |e| e.text.chars().take(200).collect()))
            };
            obj.insert(k.to_string(), v);
        }
        Value::Object(obj).to_string()
    }

    fn details(&self, parsed: &ParsedReply, ctx: &SelectionContext) -> (crate::timestamp::Timestamp, String, String) {
        let schema = &self.scenario.reply;
        let ts = parsed
            .fields
            .get(schema.time_key)
            .and_then(|v| ctx.time_format.parse(&v.to_text(), ctx.floor))
            .unwrap_or_else(|| ctx.next_timestamp());
        let label = parsed.fields.get(schema.label_key).map(|v| v.to_text()).unwrap_or_default();
        let text = schema
            .text_keys
            .iter()
            .filter_map(|k| parsed.fields.get(*k).map(|v| v.to_text()))
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n");
        (ts, label, text)
    }
}

fn node_info(n: &NodeRecord) -> String {
    format!("ID: {}\n{}", n.node_id, n.text.chars().take(PROFILE_CHARS).collect::<String>())
}

fn memory_text(m: &NodeMemory, ctx: &SelectionContext) -> String {
    let s = m.prompt_text(ctx.time_format);
    if s.is_empty() {
        NO_HISTORY.to_string()
    } else {
        s
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl AgentPolicy for LlmPolicy {
    fn name(&self) -> String {
        format!("llm:{}@{}", self.scenario.id, self.endpoint.describe())
    }

    fn select_destination(&self, ctx: &SelectionContext, rng: &mut ChaCha8Rng) -> Result<AgentAction, PolicyError> {
        if ctx.candidates.is_empty() {
            return Err(PolicyError::Failed("empty recall list".into()));
        }
        let schema = &self.scenario.reply;
        let info = node_info(ctx.source);
        let memory = memory_text(ctx.memory, ctx);
        let items = ctx
            .candidates
            .iter()
            .map(|c| {
                let mut s = format!(
                    "Item ID: {}\n  Profile: {}",
                    c.node.node_id,
                    c.node.text.chars().take(PROFILE_CHARS).collect::<String>()
                );
                if !c.recent.is_empty() {
                    s.push_str(&format!("\n  Recent: {}", c.recent));
                }
                s
            })
            .collect::<Vec<_>>()
            .join("\n");
        let example = self.example(ctx, &schema.select_keys);
        let rank_of = |p: &ParsedReply| {
            let id = p.fields.get(schema.destination_key)?.to_text();
            ctx.candidates.iter().position(|c| c.node.node_id == id.trim()).map(|i| i + 1)
        };
        let picked = self.ask_parsed(
            &self.scenario.select,
            &[
                ("node_info", &info),
                ("node_memory", &memory),
                ("node_items", &items),
                ("interaction_example", &example),
            ],
            &schema.select_keys,
            |p| rank_of(&p).map(|r| (r, p)),
        )?;
        let Some((rank, parsed)) = picked else {
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
            return self.fallback.select_destination(ctx, rng);
        };
        let dst = ctx.candidates[rank - 1].node;
        let (timestamp, label, edge_text) = match &self.scenario.request {
            None => self.details(&parsed, ctx),
            Some(request) => {
                let item_info = node_info(dst);
                let item_memory = ctx.candidates[rank - 1].recent.clone();
                let item_memory = if item_memory.is_empty() { NO_HISTORY.to_string() } else { item_memory };
                let example = self.example(ctx, &schema.request_keys);
                let detailed = self.ask_parsed(
                    request,
                    &[
                        ("node_info", &info),
                        ("node_memory", &memory),
                        ("item_info", &item_info),
                        ("item_memory", &item_memory),
                        ("interaction_example", &example),
                    ],
                    &schema.request_keys,
                    Some,
                )?;
                match detailed {
                    Some(p) => self.details(&p, ctx),
                    None => {
                        self.fallbacks.fetch_add(1, Ordering::Relaxed);
                        let stub = self.fallback.select_destination(ctx, rng)?;
                        (stub.timestamp, stub.label, stub.edge_text)
                    }
                }
            }
        };
        Ok(AgentAction { chosen_dst: dst.node_id.clone(), timestamp, label, edge_text, confidence_rank: rank })
    }

    fn generate_node(&self, ctx: &NodeGenContext, rng: &mut ChaCha8Rng) -> Result<NodeRecord, PolicyError> {
        let template = match ctx.role {
            Role::Destination => &self.scenario.destination_generation,
            _ => &self.scenario.source_generation,
        };
        let recent = ctx.recent.iter().map(|n| node_info(n)).collect::<Vec<_>>().join("\n\n");
        let parsed =
            self.ask_parsed(template, &[("recent_node_info", &recent)], &[("node_id", FieldKind::Str)], |p| {
                let id = p.fields["node_id"].to_text().trim().to_string();
                let profile = p
                    .object
                    .iter()
                    .filter(|(k, _)| k.as_str() != "node_id" && k.as_str() != "node_type")
                    .map(|(k, v)| format!("{k}: {}", value_text(v)))
                    .collect::<Vec<_>>()
                    .join("\n");
                (!id.is_empty()).then_some((id, profile))
            })?;
        match parsed {
            Some((id, profile)) => Ok(NodeRecord::generated(id, ctx.role, profile)),
            None => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                let mut n = self.fallback.generate_node(ctx, rng)?;
                n.node_id = random_node_id(rng);
                Ok(n)
            }
        }
    }

    fn reflect(&self, source: &NodeRecord, memory: &NodeMemory) -> Result<String, PolicyError> {
        let info = node_info(source);
        let mem = memory.render(self.time_format);
        let reply = self.ask(&self.scenario.reflection, &[("node_info", &info), ("node_memory", &mem)])?;
        Ok(reply.trim().to_string())
    }
}
