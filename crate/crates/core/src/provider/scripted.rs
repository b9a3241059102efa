//! Deterministic replay provider.
//!
//! A script is a JSON list of records (or an object `{"strict": bool,
//! "records": [...]}`). Each record pairs a matcher with a canned response:
//!
//! ```json
//! {"match": {"fingerprint": "9f2c..."}, "text": "...", "prompt_tokens": 12, "completion_tokens": 40}
//! {"match": {"kind": "program_init", "seq": 3}, "text": "..."}
//! {"match": {"kind": "program_mutation", "contains": "# variant b"}, "text": "..."}
//! {"match": {"kind": "test_augment"}, "text": "..."}
//! ```
//!
//! Matching order: exact fingerprint, then (kind, seq), then (kind,
//! contains), then a kind-only default. `seq` is the 1-based ordinal of the
//! call among calls of the same kind; every call advances its kind's counter,
//! whichever record ends up answering it.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionProvider, RawCompletion};
use crate::error::{Error, Result};
use crate::operators::PromptRequest;
use crate::types::PromptKind;

/// Stable request fingerprint over (kind, user_text). The system text and
/// temperature are deliberately left out.
pub fn request_fingerprint(request: &PromptRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.kind.as_str().as_bytes());
    h.update(b"\n");
    h.update(request.user_text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    Fingerprint {
        fingerprint: String,
    },
    Sequence {
        kind: PromptKind,
        seq: u64,
    },
    Contains {
        kind: PromptKind,
        contains: String,
    },
    Kind {
        kind: PromptKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRecord {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl ScriptRecord {
    pub fn new(matcher: Matcher, text: impl Into<String>) -> Self {
        Self {
            matcher,
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }

    pub fn with_tokens(mut self, prompt: u64, completion: u64) -> Self {
        self.prompt_tokens = Some(prompt);
        self.completion_tokens = Some(completion);
        self
    }
}

fn default_strict() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default = "default_strict")]
    pub strict: bool,
    pub records: Vec<ScriptRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Bare(Vec<ScriptRecord>),
    Full(Script),
}

impl Script {
    pub fn new(records: Vec<ScriptRecord>) -> Self {
        Self {
            strict: true,
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

#[derive(Debug)]
pub struct ScriptedProvider {
    script: Script,
    counters: [AtomicU64; 5],
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            counters: Default::default(),
        }
    }

    /// Loads a script file.
    pub fn load(path: &Path) -> Result<Self> {
        let fail = |message: String| Error::ScriptLoad {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let parsed: ScriptFile = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        Ok(Self::new(match parsed {
            ScriptFile::Bare(records) => Script::new(records),
            ScriptFile::Full(script) => script,
        }))
    }

    pub fn calls_of(&self, kind: PromptKind) -> u64 {
        self.counters[kind.index()].load(Ordering::SeqCst)
    }

    fn lookup(&self, request: &PromptRequest, seq: u64) -> Result<Option<&ScriptRecord>> {
        let records = &self.script.records;
        let fingerprint = request_fingerprint(request);
        let kind = request.kind;
        let by_fingerprint = records.iter().find(
            |r| matches!(&r.matcher, Matcher::Fingerprint { fingerprint: f } if *f == fingerprint),
        );
        let by_seq = || {
            records.iter().find(
                |r| matches!(&r.matcher, Matcher::Sequence { kind: k, seq: s } if *k == kind && *s == seq),
            )
        };
        let by_contains = || {
            records.iter().find(|r| {
                matches!(&r.matcher, Matcher::Contains { kind: k, contains }
                    if *k == kind && request.user_text.contains(contains.as_str()))
            })
        };
        let by_kind = || {
            records
                .iter()
                .find(|r| matches!(&r.matcher, Matcher::Kind { kind: k } if *k == kind))
        };
        if let Some(r) = by_fingerprint.or_else(by_seq).or_else(by_contains).or_else(by_kind) {
            return Ok(Some(r));
        }
        let has_sequence = records
            .iter()
            .any(|r| matches!(&r.matcher, Matcher::Sequence { kind: k, .. } if *k == kind));
        if has_sequence {
            return Err(Error::ScriptExhausted { kind, seq });
        }
        if self.script.strict {
            return Err(Error::Unscripted { kind, fingerprint });
        }
        Ok(None)
    }
}

impl CompletionProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn supports_parallel(&self) -> bool {
        false
    }

    fn complete(&self, request: &PromptRequest) -> Result<RawCompletion> {
        let seq = self.counters[request.kind.index()].fetch_add(1, Ordering::SeqCst) + 1;
        Ok(match self.lookup(request, seq)? {
            Some(r) => RawCompletion {
                text: r.text.clone(),
                prompt_tokens: r.prompt_tokens,
                completion_tokens: r.completion_tokens,
            },
            None => RawCompletion {
                text: String::new(),
                prompt_tokens: None,
                completion_tokens: None,
            },
        })
    }
}
