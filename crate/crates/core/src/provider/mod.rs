//! Text-completion gateway: provider backends plus token accounting.

mod ledger;
mod live;
mod scripted;

use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use ledger::{estimate_tokens, Counters, LedgerSummary, TokenLedger};
pub use live::{LiveConfig, LiveProvider, DEFAULT_API_KEY_ENV};
pub use scripted::{request_fingerprint, Matcher, Script, ScriptRecord, ScriptedProvider};

use crate::error::{Error, Result};
use crate::operators::PromptRequest;

/// What a backend returns before accounting. Missing token counts are
/// estimated by the gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &PromptRequest) -> Result<RawCompletion>;

    /// Whether calls may be issued concurrently without changing results.
    fn supports_parallel(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated: bool,
    pub latency_ms: u64,
    pub provider_name: String,
}

/// Wraps a provider with a ledger. Every call, failed or not, is recorded
/// before `complete` returns.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    ledger: Arc<Mutex<TokenLedger>>,
    max_inflight: usize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("max_inflight", &self.max_inflight)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, max_inflight: usize) -> Self {
        Self {
            provider,
            ledger: Arc::new(Mutex::new(TokenLedger::new())),
            max_inflight: max_inflight.max(1),
        }
    }

    /// Same provider, fresh ledger.
    pub fn fork(&self) -> Self {
        Self {
            provider: Arc::clone(&self.provider),
            ledger: Arc::new(Mutex::new(TokenLedger::new())),
            max_inflight: self.max_inflight,
        }
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn supports_parallel(&self) -> bool {
        self.provider.supports_parallel()
    }

    pub fn ledger(&self) -> TokenLedger {
        self.ledger.lock().expect("ledger lock").clone()
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<ProviderResponse> {
        let started = Instant::now();
        let outcome = self.provider.complete(request);
        let latency_ms = started.elapsed().as_millis() as u64;
        let mut ledger = self.ledger.lock().expect("ledger lock");
        match outcome {
            Ok(raw) => {
                let estimated = raw.prompt_tokens.is_none() || raw.completion_tokens.is_none();
                let prompt_tokens = raw.prompt_tokens.unwrap_or_else(|| {
                    estimate_tokens(&request.system_text) + estimate_tokens(&request.user_text)
                });
                let completion_tokens = raw
                    .completion_tokens
                    .unwrap_or_else(|| estimate_tokens(&raw.text));
                ledger.record_success(request.kind, prompt_tokens, completion_tokens, estimated);
                Ok(ProviderResponse {
                    text: raw.text,
                    prompt_tokens,
                    completion_tokens,
                    estimated,
                    latency_ms,
                    provider_name: self.provider.name().to_string(),
                })
            }
            Err(e) => {
                ledger.record_failure(request.kind);
                Err(match e {
                    e @ Error::Provider { .. } => e,
                    other => Error::Provider {
                        kind: request.kind,
                        problem_id: request.problem_id.clone(),
                        message: other.to_string(),
                    },
                })
            }
        }
    }

    /// Completes every request; results keep the input order. Providers that
    /// do not support parallel calls are driven sequentially in order.
    pub fn complete_all(&self, requests: &[PromptRequest]) -> Vec<Result<ProviderResponse>> {
        if !self.provider.supports_parallel() || self.max_inflight == 1 || requests.len() < 2 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.max_inflight) {
            let results: Vec<Result<ProviderResponse>> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|r| s.spawn(move || self.complete(r)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("provider thread panicked"))
                    .collect()
            });
            out.extend(results);
        }
        out
    }
}
