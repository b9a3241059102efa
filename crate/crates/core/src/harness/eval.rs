use crate::error::{Error, Result};
use crate::sandbox::Sandbox;
use crate::types::{CandidateProgram, Problem, ProgramOrigin, TestCase, TestOrigin};

fn ground_truth(problem: &Problem) -> Result<Vec<TestCase>> {
    if problem.ground_truth_tests.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "problem {} has no ground-truth tests",
            problem.id
        )));
    }
    problem
        .ground_truth_tests
        .iter()
        .enumerate()
        .map(|(j, a)| TestCase::new(format!("G{j:04}"), a.clone(), TestOrigin::Init, 1))
        .collect()
}

/// True iff the program passes every ground-truth assertion.
pub fn evaluate_final(program: &CandidateProgram, problem: &Problem, sandbox: &Sandbox) -> Result<bool> {
    let tests = ground_truth(problem)?;
    if program.malformed {
        return Ok(false);
    }
    let m = sandbox.cross_evaluate(
        std::slice::from_ref(program),
        &tests,
        &problem.interpreter_profile,
    )?;
    Ok(m.row_count_ones(0) == tests.len())
}

/// Fraction of `tests` that hold for the problem's reference solution.
pub fn test_accuracy(tests: &[TestCase], problem: &Problem, sandbox: &Sandbox) -> Result<f64> {
    let reference = problem
        .reference_solution
        .as_ref()
        .ok_or_else(|| Error::NoReferenceSolution(problem.id.clone()))?;
    if tests.is_empty() {
        return Err(Error::InvalidArgument("no tests to score".into()));
    }
    let program = CandidateProgram::new("reference", reference.clone(), ProgramOrigin::Init, vec![], 1)?;
    let m = sandbox.cross_evaluate(&[program], tests, &problem.interpreter_profile)?;
    Ok(m.row_count_ones(0) as f64 / tests.len() as f64)
}

/// `outcomes[p][k]`: whether problem `p` was solved in repeat `k`. Mean over
/// repeats of the solved percentage, rounded to two decimals.
pub fn pass_at_1(outcomes: &[Vec<bool>], repeats: usize) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if let Some(bad) = outcomes.iter().position(|o| o.len() != repeats) {
        return Err(Error::InvalidArgument(format!(
            "problem {bad} has {} outcomes, expected {repeats}",
            outcomes[bad].len()
        )));
    }
    if outcomes.is_empty() {
        return Ok(0.0);
    }
    let n = outcomes.len() as f64;
    let mean = (0..repeats)
        .map(|k| outcomes.iter().filter(|o| o[k]).count() as f64 / n * 100.0)
        .sum::<f64>()
        / repeats as f64;
    Ok((mean * 100.0).round() / 100.0)
}

/// Solved count per repeat.
pub fn solved_per_repeat(outcomes: &[Vec<bool>], repeats: usize) -> Vec<usize> {
    (0..repeats)
        .map(|k| outcomes.iter().filter(|o| o.get(k).copied().unwrap_or(false)).count())
        .collect()
}
