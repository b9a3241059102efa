//! Consensus scoring for programs and agreement/entropy scoring for tests.
//!
//! All functions are pure and recompute from the matrix; nothing is cached
//! between iterations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EvalMatrix;

/// Programs sharing one pass vector, and the tests that vector passes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusGroup {
    pub members: Vec<usize>,
    pub passed_tests: Vec<usize>,
    pub score: f64,
}

pub(crate) fn consensus_score(members: usize, passed: usize) -> f64 {
    (members as f64).sqrt() * passed as f64
}

/// Partitions the rows by exact equality of their pass vectors. Groups are
/// ordered by the first row that belongs to them.
pub fn consensus_groups(matrix: &EvalMatrix) -> Vec<ConsensusGroup> {
    let mut index: HashMap<&[u64], usize> = HashMap::new();
    let mut groups: Vec<ConsensusGroup> = Vec::new();
    for i in 0..matrix.rows() {
        let key = matrix.row_words(i);
        match index.get(key) {
            Some(&g) => groups[g].members.push(i),
            None => {
                index.insert(key, groups.len());
                let passed_tests = (0..matrix.cols()).filter(|&j| matrix.get(i, j)).collect();
                groups.push(ConsensusGroup {
                    members: vec![i],
                    passed_tests,
                    score: 0.0,
                });
            }
        }
    }
    for g in &mut groups {
        g.score = consensus_score(g.members.len(), g.passed_tests.len());
    }
    groups
}

/// Each program's confidence is the score of its consensus group. Rows with
/// identical source text are still separate members.
pub fn program_confidence(matrix: &EvalMatrix) -> Vec<f64> {
    let mut out = vec![0.0; matrix.rows()];
    for g in consensus_groups(matrix) {
        for &i in &g.members {
            out[i] = g.score;
        }
    }
    out
}

/// Program fitness is the consensus confidence itself.
pub fn program_fitness(confidence: &[f64]) -> Vec<f64> {
    confidence.to_vec()
}

/// Pluggable program fitness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessFunction {
    /// Consensus confidence.
    #[default]
    Confidence,
    /// Fraction of the current tests a program passes.
    PassRate,
}

impl FitnessFunction {
    pub fn evaluate(self, matrix: &EvalMatrix) -> Vec<f64> {
        match self {
            FitnessFunction::Confidence => program_fitness(&program_confidence(matrix)),
            FitnessFunction::PassRate => (0..matrix.rows())
                .map(|i| {
                    if matrix.cols() == 0 {
                        0.0
                    } else {
                        matrix.row_count_ones(i) as f64 / matrix.cols() as f64
                    }
                })
                .collect(),
        }
    }
}

/// Fraction of programs passing each test.
pub fn test_pass_rate(matrix: &EvalMatrix) -> Result<Vec<f64>> {
    if matrix.rows() == 0 {
        return Err(Error::EmptyPopulation);
    }
    let n = matrix.rows() as f64;
    Ok((0..matrix.cols())
        .map(|j| matrix.column_count_ones(j) as f64 / n)
        .collect())
}

/// Binary entropy of a pass rate, with 0·log2(0) taken as 0.
pub fn test_discrimination(pass_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pass_rate) {
        return Err(Error::InvalidArgument(format!(
            "pass rate {pass_rate} outside [0, 1]"
        )));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(pass_rate) + term(1.0 - pass_rate))
}

/// Fitness-weighted agreement: mean over programs of M[i][j]·fitness[i].
pub fn test_confidence(matrix: &EvalMatrix, fitness: &[f64]) -> Result<Vec<f64>> {
    if fitness.len() != matrix.rows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows(),
            actual: fitness.len(),
        });
    }
    if matrix.rows() == 0 {
        return Err(Error::EmptyPopulation);
    }
    let n = matrix.rows() as f64;
    Ok((0..matrix.cols())
        .map(|j| {
            let sum: f64 = (0..matrix.rows())
                .filter(|&i| matrix.get(i, j))
                .map(|i| fitness[i])
                .sum();
            sum / n
        })
        .collect())
}
