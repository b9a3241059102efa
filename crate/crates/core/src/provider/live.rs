//! Client for OpenAI-compatible chat-completion endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionProvider, RawCompletion};
use crate::error::{Error, Result};
use crate::operators::PromptRequest;

pub const DEFAULT_API_KEY_ENV: &str = "COEVO_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    /// Refuse to start without the credential. Turn off for local
    /// endpoints that take no key.
    pub require_api_key: bool,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            require_api_key: true,
            max_retries: 3,
            backoff_ms: 500,
            timeout_ms: 120_000,
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

enum Attempt {
    Done(RawCompletion),
    Retry(String),
}

pub struct LiveProvider {
    config: LiveConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for LiveProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveProvider")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl LiveProvider {
    /// Reads the credential from the configured environment variable.
    pub fn from_env(config: LiveConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() && config.require_api_key {
            return Err(Error::Config(format!(
                "environment variable {} is not set",
                config.api_key_env
            )));
        }
        Self::new(config, api_key)
    }

    pub fn new(config: LiveConfig, api_key: Option<String>) -> Result<Self> {
        if config.endpoint.trim().is_empty() {
            return Err(Error::Config("live provider needs an endpoint".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            api_key,
            agent,
        })
    }

    fn attempt(&self, request: &PromptRequest) -> Result<Attempt> {
        let mut messages = Vec::with_capacity(2);
        if !request.system_text.is_empty() {
            messages.push(ChatMessage {
                role: "system",
                content: &request.system_text,
            });
        }
        messages.push(ChatMessage {
            role: "user",
            content: &request.user_text,
        });
        let body = ChatRequest {
            model: &self.config.model,
            messages,
            temperature: request.temperature_hint,
        };
        let mut call = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match call.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(format!("transport: {e}"))),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading body: {e}"))),
        };
        if status == 429 || status >= 500 {
            return Ok(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::Protocol(format!(
                "HTTP {status}: {}",
                crate::text::tail_truncate(&text, 512)
            )));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("malformed completion payload: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Protocol("completion has no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        Ok(Attempt::Done(RawCompletion {
            text: content,
            prompt_tokens: parsed.usage.as_ref().map(|u| u.prompt_tokens),
            completion_tokens: parsed.usage.as_ref().map(|u| u.completion_tokens),
        }))
    }
}

impl CompletionProvider for LiveProvider {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &PromptRequest) -> Result<RawCompletion> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(request)? {
                Attempt::Done(c) => return Ok(c),
                Attempt::Retry(reason) => {
                    log::warn!(
                        "{} call for {} failed (attempt {}): {reason}",
                        request.kind,
                        request.problem_id,
                        attempt + 1
                    );
                    last = reason;
                }
            }
        }
        Err(Error::Provider {
            kind: request.kind,
            problem_id: request.problem_id.clone(),
            message: format!(
                "gave up after {} attempts: {last}",
                self.config.max_retries + 1
            ),
        })
    }
}
