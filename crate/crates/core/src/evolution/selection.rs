use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::CandidateProgram;

/// One binary tournament over `pool`: two distinct entrants drawn uniformly,
/// higher fitness wins, ties go to a fair coin. A pool of one returns its
/// only member.
fn tournament<R: Rng + ?Sized>(pool: &[usize], fitness: &[f64], rng: &mut R) -> usize {
    if pool.len() == 1 {
        return pool[0];
    }
    let a = rng.gen_range(0..pool.len());
    let mut b = rng.gen_range(0..pool.len() - 1);
    if b >= a {
        b += 1;
    }
    let (a, b) = (pool[a], pool[b]);
    match fitness[a].total_cmp(&fitness[b]) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

/// Picks two distinct parents by binary tournament. The second tournament
/// runs over the population with the first parent removed, so the pair is
/// always distinct.
pub fn binary_tournament<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> Result<(usize, usize)> {
    if fitness.len() < 2 {
        return Err(Error::TournamentTooSmall);
    }
    let all: Vec<usize> = (0..fitness.len()).collect();
    let first = tournament(&all, fitness, rng);
    let rest: Vec<usize> = all.into_iter().filter(|&i| i != first).collect();
    let second = tournament(&rest, fitness, rng);
    Ok((first, second))
}

/// Ranking used wherever programs are ordered: fitness descending, then
/// earlier birth, then id.
pub fn survivor_order(a: (&CandidateProgram, f64), b: (&CandidateProgram, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0.born_iteration.cmp(&b.0.born_iteration))
        .then_with(|| a.0.id.cmp(&b.0.id))
}

/// Indices of the `keep` best programs, best first.
pub fn select_survivors(
    programs: &[CandidateProgram],
    fitness: &[f64],
    keep: usize,
) -> Result<Vec<usize>> {
    if fitness.len() != programs.len() {
        return Err(Error::DimensionMismatch {
            expected: programs.len(),
            actual: fitness.len(),
        });
    }
    if keep > programs.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {keep} of {} programs",
            programs.len()
        )));
    }
    let mut order: Vec<usize> = (0..programs.len()).collect();
    order.sort_by(|&a, &b| survivor_order((&programs[a], fitness[a]), (&programs[b], fitness[b])));
    order.truncate(keep);
    Ok(order)
}

/// Index of the best program under [`survivor_order`].
pub fn best_index(programs: &[CandidateProgram], fitness: &[f64]) -> Option<usize> {
    select_survivors(programs, fitness, programs.len().min(1))
        .ok()
        .and_then(|v| v.first().copied())
}

/// Uniform choice of one index in `0..len`.
pub fn uniform_index<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<usize> {
    if len == 0 {
        return Err(Error::InvalidArgument("cannot choose from an empty pool".into()));
    }
    Ok(rng.gen_range(0..len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ProgramOrigin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prog(id: &str, born: u32) -> CandidateProgram {
        CandidateProgram::new(id, "src", ProgramOrigin::Init, vec![], born).unwrap()
    }

    #[test]
    fn pair_with_dominant_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(binary_tournament(&[5.0, 1.0], &mut rng).unwrap(), (0, 1));
        }
    }

    #[test]
    fn too_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            binary_tournament(&[1.0], &mut rng).unwrap_err().to_string(),
            "tournament needs two individuals"
        );
    }

    #[test]
    fn replay_is_deterministic() {
        let f = [1.0, 3.0, 3.0, 0.5, 2.0];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| binary_tournament(&f, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert!(draw(42).iter().all(|(a, b)| a != b));
    }

    #[test]
    fn equal_fitness_first_parent_is_uniform() {
        let n = 5;
        let draws = 10_000;
        let f = vec![1.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[binary_tournament(&f, &mut rng).unwrap().0] += 1;
        }
        let p = 1.0 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{c} vs {mean}±{sigma}");
        }
    }

    #[test]
    fn survivors_top_k() {
        let ps = vec![prog("a", 1), prog("b", 1), prog("c", 1)];
        assert_eq!(select_survivors(&ps, &[3.0, 1.0, 2.0], 2).unwrap(), vec![0, 2]);
        assert!(select_survivors(&ps, &[3.0, 1.0, 2.0], 4).is_err());
    }

    #[test]
    fn survivors_tie_rule() {
        let ps = vec![prog("z", 2), prog("b", 1), prog("a", 2), prog("c", 1)];
        assert_eq!(select_survivors(&ps, &[1.0; 4], 2).unwrap(), vec![1, 3]);
        assert_eq!(best_index(&ps, &[1.0, 1.0, 2.0, 1.0]), Some(2));
    }
}
