use crate::error::{Error, Result};
use crate::types::TestCase;

/// Indices (ascending) of the non-dominated points when maximizing both
/// coordinates. A point is dominated if another is at least as good in both
/// and strictly better in one, so exact duplicates never dominate each
/// other.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });

    let mut front = Vec::new();
    // Best second coordinate among points with a strictly larger first one.
    let mut best_above = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let x = points[order[start]].0;
        let mut end = start;
        while end < order.len() && points[order[end]].0 == x {
            end += 1;
        }
        let group_max = points[order[start]].1;
        for &k in &order[start..end] {
            let y = points[k].1;
            if y == group_max && y > best_above {
                front.push(k);
            }
        }
        best_above = best_above.max(group_max);
        start = end;
    }
    front.sort_unstable();
    front
}

/// Outcome of picking the next test population.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSelection {
    /// Indices into the candidate list, ascending.
    pub selected: Vec<usize>,
    pub front: Vec<usize>,
    pub front_mean_confidence: f64,
    /// The below-mean filter would have removed everything, so the whole
    /// front was kept.
    pub fallback: bool,
}

/// Keeps the (confidence, discrimination) Pareto front, then drops front
/// members whose confidence is strictly below the front's mean confidence.
pub fn select_test_population(tests: &[TestCase]) -> Result<TestSelection> {
    if tests.is_empty() {
        return Err(Error::NoTestCandidates);
    }
    let points = tests
        .iter()
        .map(|t| match (t.confidence, t.discrimination) {
            (Some(c), Some(d)) => Ok((c, d)),
            _ => Err(Error::InvalidArgument(format!(
                "test {} has no confidence/discrimination",
                t.id
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let front = pareto_front(&points);
    let mean = front.iter().map(|&k| points[k].0).sum::<f64>() / front.len() as f64;
    let filtered: Vec<usize> = front
        .iter()
        .copied()
        .filter(|&k| !(points[k].0 < mean))
        .collect();
    let fallback = filtered.is_empty();
    Ok(TestSelection {
        selected: if fallback { front.clone() } else { filtered },
        front,
        front_mean_confidence: mean,
        fallback,
    })
}
