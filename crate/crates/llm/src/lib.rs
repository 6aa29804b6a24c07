//! Chat-completion plumbing for DyTAG generation agents and text evaluators.
//!
//! * [`client`]: blocking OpenAI-compatible `/chat/completions` client with
//!   retry and backoff, plus the [`ChatEndpoint`] trait that policies and
//!   evaluators are written against.
//! * [`cache`]: on-disk response cache keyed by a request hash.
//! * [`parse`]: extraction of the first balanced JSON object from a model
//!   reply and typed validation of its fields.
//! * [`template`] / [`scenarios`]: slot-based prompt templates and the
//!   shipped scenario library (bipartite review platform, non-bipartite
//!   social platform, generic).

pub mod cache;
pub mod client;
pub mod config;
pub mod parse;
pub mod scenarios;
pub mod template;

pub use cache::CachedEndpoint;
pub use client::{ChatEndpoint, ChatMessage, ChatReply, HttpChatClient, LlmError, Role};
pub use config::ChatConfig;
pub use parse::{parse_agent_json, FieldKind, FieldMap, FieldValue, ParseError, ParsedReply};
pub use scenarios::{Scenario, ScenarioDescriptors, ScenarioKind};
pub use template::{PromptTemplate, RenderError, Rendered};
