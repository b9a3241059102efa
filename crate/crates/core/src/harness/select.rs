//! Final-answer selectors for the baselines and for the evolved population.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EvalMatrix;
use crate::metrics::consensus_groups;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub score: f64,
}

fn pick<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> usize {
    candidates[rng.gen_range(0..candidates.len())]
}

/// Uniform pick from a pool of `len` programs.
pub fn select_sampling<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Selection> {
    if len == 0 {
        return Err(Error::EmptyPopulation);
    }
    Ok(Selection {
        index: rng.gen_range(0..len),
        score: 0.0,
    })
}

/// Argmax of `scores`, ties broken uniformly.
pub fn select_max<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Result<Selection> {
    let best = scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    if tied.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    Ok(Selection {
        index: pick(&tied, rng),
        score: best,
    })
}

/// Number of generated tests each program passes.
pub fn pass_counts(matrix: &EvalMatrix) -> Vec<f64> {
    (0..matrix.rows())
        .map(|i| matrix.row_count_ones(i) as f64)
        .collect()
}

/// Program passing the most generated tests.
pub fn select_sampling_filtering<R: Rng + ?Sized>(matrix: &EvalMatrix, rng: &mut R) -> Result<Selection> {
    if matrix.rows() == 0 {
        return Err(Error::EmptyPopulation);
    }
    if matrix.cols() == 0 {
        return Err(Error::NoTestCandidates);
    }
    select_max(&pass_counts(matrix), rng)
}

/// Uniform pick inside the best consensus group. Among groups with equal
/// score the first one found wins; `score` is the group's score.
pub fn select_codet<R: Rng + ?Sized>(matrix: &EvalMatrix, rng: &mut R) -> Result<Selection> {
    if matrix.rows() == 0 {
        return Err(Error::EmptyPopulation);
    }
    if matrix.cols() == 0 {
        return Err(Error::NoTestCandidates);
    }
    let groups = consensus_groups(matrix);
    let mut best = &groups[0];
    for g in &groups[1..] {
        if g.score > best.score {
            best = g;
        }
    }
    Ok(Selection {
        index: pick(&best.members, rng),
        score: best.score,
    })
}
