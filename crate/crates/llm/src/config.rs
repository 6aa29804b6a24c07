use serde::{Deserialize, Serialize};

use crate::client::LlmError;

/// Environment variable holding the endpoint base URL.
pub const ENV_BASE_URL: &str = "DYTAG_LLM_BASE_URL";
/// Environment variable holding the bearer token.
pub const ENV_API_KEY: &str = "DYTAG_LLM_API_KEY";
/// Environment variable overriding the model name.
pub const ENV_MODEL: &str = "DYTAG_LLM_MODEL";

/// Sampling and transport settings for one chat endpoint.
///
/// Defaults follow the inference setup used for the benchmarked backends:
/// temperature 0.8, nucleus 0.9, repetition penalty 1.1, 2,000 max tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    /// Never serialized; read from the environment or set programmatically.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model: "gpt-4o-mini".to_string(),
            api_key: None,
            temperature: 0.8,
            top_p: 0.9,
            repetition_penalty: 1.1,
            max_tokens: 2_000,
            timeout_ms: 120_000,
            max_retries: 3,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
        }
    }
}

impl ChatConfig {
    /// Overlay endpoint URL, key and model from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            if !url.trim().is_empty() {
                self.base_url = url;
            }
        }
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            if !key.trim().is_empty() {
                self.api_key = Some(key);
            }
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            if !model.trim().is_empty() {
                self.model = model;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidConfig(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::InvalidConfig(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::InvalidConfig("base_url is empty".into()));
        }
        Ok(())
    }

    pub(crate) fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_inference_setup() {
        let c = ChatConfig::default();
        assert_eq!(c.temperature, 0.8);
        assert_eq!(c.top_p, 0.9);
        assert_eq!(c.repetition_penalty, 1.1);
        assert_eq!(c.max_tokens, 2_000);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_sampling_params() {
        let c = ChatConfig { top_p: 0.0, ..ChatConfig::default() };
        assert!(c.validate().is_err());
        let c = ChatConfig { top_p: 1.2, ..ChatConfig::default() };
        assert!(c.validate().is_err());
        let c = ChatConfig { temperature: -0.1, ..ChatConfig::default() };
        assert!(c.validate().is_err());
        let c = ChatConfig { temperature: f64::NAN, ..ChatConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn completions_url_is_normalized() {
        let mut c = ChatConfig { base_url: "http://h/v1/".into(), ..ChatConfig::default() };
        assert_eq!(c.completions_url(), "http://h/v1/chat/completions");
        c.base_url = "http://h/v1/chat/completions".into();
        assert_eq!(c.completions_url(), "http://h/v1/chat/completions");
    }
}
