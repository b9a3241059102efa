use coevo::evolution::{
    binary_tournament, crossover_rate, operation_counts, pareto_front, select_survivors,
    select_test_population, OperationPlan, SchedulerConfig,
};
use coevo::{CandidateProgram, ProgramOrigin, TestCase, TestOrigin};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dominated_oracle(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (a, b) = points[i];
            !points.iter().any(|&(c, d)| c >= a && d >= b && (c > a || d > b))
        })
        .collect()
}

// Coarse grid so duplicates and shared coordinates show up often.
fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u8..6, 0u8..6), 1..=max)
        .prop_map(|v| v.into_iter().map(|(a, b)| (f64::from(a) / 5.0, f64::from(b) / 5.0)).collect())
}

fn tests_from(points: &[(f64, f64)]) -> Vec<TestCase> {
    points
        .iter()
        .enumerate()
        .map(|(k, &(c, d))| {
            let mut t = TestCase::new(format!("T{k}"), "assert f(1) == 1", TestOrigin::Init, 1).unwrap();
            t.confidence = Some(c);
            t.discrimination = Some(d);
            t
        })
        .collect()
}

fn programs(n: usize) -> Vec<CandidateProgram> {
    (0..n)
        .map(|k| {
            CandidateProgram::new(format!("P{k:03}"), "x = 1", ProgramOrigin::Init, vec![], 1 + (k % 3) as u32)
                .unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn schedule_is_monotone_with_exact_ends(max_iter in 2u32..60, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let cfg = SchedulerConfig { x_init: a.min(b), x_final: a.max(b), max_iter };
        let xs: Vec<f64> = (1..=max_iter).map(|r| crossover_rate(r, &cfg).unwrap()).collect();
        prop_assert_eq!(xs[0], cfg.x_init);
        prop_assert_eq!(xs[xs.len() - 1], cfg.x_final);
        for w in xs.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(crossover_rate(0, &cfg).is_err());
        prop_assert!(crossover_rate(max_iter + 1, &cfg).is_err());
    }

    #[test]
    fn counts_fill_the_population(x in 0.0f64..=1.0, n in 1usize..200) {
        let plan = operation_counts(x, n);
        prop_assert_eq!(plan.total(), n);
        prop_assert_eq!(plan.crossover_count, (x * n as f64).floor() as usize);
    }

    #[test]
    fn plan_for_iteration_agrees(r in 1u32..=10, n in 1usize..50) {
        let cfg = SchedulerConfig::default();
        let plan = OperationPlan::for_iteration(r, &cfg, n).unwrap();
        prop_assert_eq!(plan.iteration, r);
        prop_assert_eq!(plan.total(), n);
    }

    #[test]
    fn front_matches_quadratic_oracle(pts in points(64)) {
        prop_assert_eq!(pareto_front(&pts), dominated_oracle(&pts));
    }

    #[test]
    fn filter_never_empties_the_population(pts in points(32)) {
        let sel = select_test_population(&tests_from(&pts)).unwrap();
        prop_assert!(!sel.selected.is_empty());
        prop_assert!(sel.selected.iter().all(|k| sel.front.contains(k)));
        if sel.fallback {
            prop_assert_eq!(&sel.selected, &sel.front);
        } else {
            for &k in &sel.front {
                let kept = sel.selected.contains(&k);
                prop_assert_eq!(kept, pts[k].0 >= sel.front_mean_confidence);
            }
        }
    }

    #[test]
    fn tournament_is_seeded_and_distinct(fit in prop::collection::vec(0.0f64..5.0, 2..20), seed in any::<u64>()) {
        let mut a = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x = binary_tournament(&fit, &mut a).unwrap();
            let y = binary_tournament(&fit, &mut b).unwrap();
            prop_assert_eq!(x, y);
            prop_assert_ne!(x.0, x.1);
            prop_assert!(x.0 < fit.len() && x.1 < fit.len());
        }
    }

    #[test]
    fn survivors_are_elitist(fit in prop::collection::vec(0u8..6, 1..30), keep_frac in 0.0f64..=1.0) {
        let fit: Vec<f64> = fit.into_iter().map(f64::from).collect();
        let progs = programs(fit.len());
        let keep = ((fit.len() as f64) * keep_frac).round() as usize;
        let kept = select_survivors(&progs, &fit, keep).unwrap();
        prop_assert_eq!(kept.len(), keep);
        let worst_kept = kept.iter().map(|&i| fit[i]).fold(f64::INFINITY, f64::min);
        for i in 0..fit.len() {
            if !kept.contains(&i) {
                prop_assert!(fit[i] <= worst_kept);
            }
        }
        // Best first.
        for w in kept.windows(2) {
            prop_assert!(fit[w[0]] >= fit[w[1]]);
        }
    }
}

#[test]
fn tournament_needs_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(binary_tournament(&[1.0], &mut rng).is_err());
    assert_eq!(binary_tournament(&[1.0, 1.0], &mut rng).map(|(a, b)| a + b).unwrap(), 1);
}
