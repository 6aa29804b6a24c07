use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ChatConfig;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid chat config: {0}")]
    InvalidConfig(String),

    #[error("request timed out after {elapsed_ms} ms")]
    Timeout { elapsed_ms: u64 },

    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },

    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("endpoint returned no choices")]
    EmptyChoices,

    #[error("malformed response body: {0}")]
    MalformedResponse(String),

    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}

impl LlmError {
    /// Whether a fresh attempt could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Timeout { .. } | LlmError::Network { .. } => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// First-choice content plus how many transient failures were retried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub retries: u32,
}

/// Anything that can answer a chat request: the HTTP client, a cache
/// wrapper, or a scripted mock in tests.
pub trait ChatEndpoint: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError>;

    /// Identity recorded in run manifests.
    fn describe(&self) -> String;
}

#[derive(Debug, Serialize)]
pub(crate) struct CompletionRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetition_penalty: Option<f64>,
}

impl<'a> CompletionRequest<'a> {
    pub(crate) fn new(config: &'a ChatConfig, messages: &'a [ChatMessage]) -> Self {
        Self {
            model: &config.model,
            messages,
            temperature: config.temperature,
            top_p: config.top_p,
            max_tokens: config.max_tokens,
            repetition_penalty: Some(config.repetition_penalty),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking client for OpenAI-compatible chat-completion endpoints.
///
/// Holds no per-request state; one instance can be shared across worker
/// threads.
pub struct HttpChatClient {
    config: ChatConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: ChatConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::InvalidConfig(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    fn send_once(
        &self,
        body: &CompletionRequest<'_>,
        started: Instant,
        attempt: u32,
    ) -> Result<(String, Option<u64>), (LlmError, Option<u64>)> {
        let mut req = self.http.post(self.config.completions_url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            let err = if e.is_timeout() {
                LlmError::Timeout { elapsed_ms: started.elapsed().as_millis() as u64 }
            } else {
                LlmError::Network { attempts: attempt + 1, message: e.to_string() }
            };
            (err, None)
        })?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok());
        let text = resp.text().map_err(|e| {
            let err = if e.is_timeout() {
                LlmError::Timeout { elapsed_ms: started.elapsed().as_millis() as u64 }
            } else {
                LlmError::Network { attempts: attempt + 1, message: e.to_string() }
            };
            (err, None)
        })?;
        if !status.is_success() {
            return Err((LlmError::Http { status: status.as_u16(), body: text }, retry_after));
        }
        Ok((text, retry_after))
    }

    fn backoff(&self, retry: u32, retry_after_secs: Option<u64>) -> Duration {
        let exp = self.config.backoff_base_ms.saturating_mul(1u64 << retry.min(20)).min(self.config.backoff_max_ms);
        let hinted = retry_after_secs.map(|s| s.saturating_mul(1000)).unwrap_or(0);
        Duration::from_millis(exp.max(hinted.min(self.config.backoff_max_ms)))
    }
}

/// Servers that reject unknown sampling keys answer 400/422 naming the field.
fn rejects_repetition_penalty(err: &LlmError) -> bool {
    match err {
        LlmError::Http { status, body } => (*status == 400 || *status == 422) && body.contains("repetition_penalty"),
        _ => false,
    }
}

pub(crate) fn extract_content(body: &str) -> Result<String, LlmError> {
    let parsed: CompletionResponse =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    let first = parsed.choices.into_iter().next().ok_or(LlmError::EmptyChoices)?;
    Ok(first.message.content.unwrap_or_default())
}

impl ChatEndpoint for HttpChatClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<ChatReply, LlmError> {
        let started = Instant::now();
        let mut body = CompletionRequest::new(&self.config, messages);
        let mut retries = 0u32;
        loop {
            match self.send_once(&body, started, retries) {
                Ok((text, _)) => {
                    let content = extract_content(&text)?;
                    return Ok(ChatReply { content, retries });
                }
                Err((err, _)) if body.repetition_penalty.is_some() && rejects_repetition_penalty(&err) => {
                    log::warn!("endpoint rejected repetition_penalty; resending without it");
                    body.repetition_penalty = None;
                }
                Err((err, retry_after)) => {
                    if !err.is_transient() || retries >= self.config.max_retries {
                        return Err(match err {
                            LlmError::Timeout { .. } => {
                                LlmError::Timeout { elapsed_ms: started.elapsed().as_millis() as u64 }
                            }
                            LlmError::Network { message, .. } => LlmError::Network { attempts: retries + 1, message },
                            other => other,
                        });
                    }
                    let wait = self.backoff(retries, retry_after);
                    log::debug!("transient chat failure ({err}); retry {} in {wait:?}", retries + 1);
                    std::thread::sleep(wait);
                    retries += 1;
                }
            }
        }
    }

    fn describe(&self) -> String {
        format!("openai-compatible:{}@{}", self.config.model, self.config.base_url)
    }
}
