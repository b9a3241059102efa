//! Datasets, baseline selectors, pass@1 evaluation and reports.

mod bench;
mod dataset;
mod eval;
mod report;
mod select;

pub use bench::{derive_seed, parse_methods, run_bench, BenchConfig, Method, MethodResult};
pub use dataset::{load_problems, parse_problems, ProblemSet};
pub use eval::{evaluate_final, pass_at_1, solved_per_repeat, test_accuracy};
pub use report::{curve, curve_csv, emit_curves, emit_report, BenchReport, CurvePoint, MethodSummary};
pub use select::{pass_counts, select_codet, select_max, select_sampling, select_sampling_filtering, Selection};
