use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::PromptKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub calls: u64,
    pub failed_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Calls whose token counts were estimated from text length.
    pub estimated_calls: u64,
}

impl Counters {
    fn add(&mut self, other: &Counters) {
        self.calls += other.calls;
        self.failed_calls += other.failed_calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.estimated_calls += other.estimated_calls;
    }
}

/// Per-kind token and call accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenLedger {
    per_kind: [Counters; 5],
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_success(
        &mut self,
        kind: PromptKind,
        prompt_tokens: u64,
        completion_tokens: u64,
        estimated: bool,
    ) {
        let c = &mut self.per_kind[kind.index()];
        c.calls += 1;
        c.prompt_tokens += prompt_tokens;
        c.completion_tokens += completion_tokens;
        if estimated {
            c.estimated_calls += 1;
        }
    }

    pub fn record_failure(&mut self, kind: PromptKind) {
        let c = &mut self.per_kind[kind.index()];
        c.calls += 1;
        c.failed_calls += 1;
    }

    pub fn kind(&self, kind: PromptKind) -> Counters {
        self.per_kind[kind.index()]
    }

    pub fn program_generation_calls(&self) -> u64 {
        PromptKind::ALL
            .iter()
            .filter(|k| k.is_program_generation())
            .map(|&k| self.kind(k).calls)
            .sum()
    }

    pub fn test_generation_calls(&self) -> u64 {
        PromptKind::ALL
            .iter()
            .filter(|k| k.is_test_generation())
            .map(|&k| self.kind(k).calls)
            .sum()
    }

    pub fn merge(&mut self, other: &TokenLedger) {
        for (mine, theirs) in self.per_kind.iter_mut().zip(other.per_kind.iter()) {
            mine.add(theirs);
        }
    }

    pub fn report(&self) -> LedgerSummary {
        let mut total = Counters::default();
        let mut per_kind = BTreeMap::new();
        for k in PromptKind::ALL {
            let c = self.kind(k);
            total.add(&c);
            per_kind.insert(k.as_str().to_string(), c);
        }
        LedgerSummary {
            per_kind,
            total,
            program_generation_calls: self.program_generation_calls(),
            test_generation_calls: self.test_generation_calls(),
        }
    }
}

/// Serializable view of a ledger, written as `ledger.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub per_kind: BTreeMap<String, Counters>,
    pub total: Counters,
    pub program_generation_calls: u64,
    pub test_generation_calls: u64,
}

impl LedgerSummary {
    pub fn to_ledger(&self) -> TokenLedger {
        let mut l = TokenLedger::new();
        for k in PromptKind::ALL {
            if let Some(c) = self.per_kind.get(k.as_str()) {
                l.per_kind[k.index()] = *c;
            }
        }
        l
    }
}

/// Token estimate used when an endpoint does not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}
