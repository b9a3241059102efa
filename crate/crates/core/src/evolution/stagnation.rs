use serde::{Deserialize, Serialize};

use crate::types::{bits_to_string, CandidateProgram};

/// Population summary compared across generations for early stopping.
/// Ids are ignored: only the multiset of fitness values and the multiset of
/// pass vectors matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagnationFingerprint {
    pub fitness_multiset: Vec<f64>,
    pub pass_multiset: Vec<String>,
}

impl StagnationFingerprint {
    pub fn of(programs: &[CandidateProgram]) -> Self {
        let mut fitness_multiset: Vec<f64> =
            programs.iter().map(CandidateProgram::fitness_or_zero).collect();
        fitness_multiset.sort_by(f64::total_cmp);
        let mut pass_multiset: Vec<String> = programs
            .iter()
            .map(|p| p.pass_vector.as_deref().map(bits_to_string).unwrap_or_default())
            .collect();
        pass_multiset.sort();
        Self {
            fitness_multiset,
            pass_multiset,
        }
    }
}

/// True iff the last `n + 1` fingerprints are all identical, i.e. the
/// population stood still for `n` consecutive generations.
pub fn stagnation_check(history: &[StagnationFingerprint], n: usize) -> bool {
    if n == 0 || history.len() < n + 1 {
        return false;
    }
    let window = &history[history.len() - (n + 1)..];
    window.windows(2).all(|w| w[0] == w[1])
}
