//! Selection and scheduling mechanics for both populations.

mod pareto;
mod scheduler;
mod selection;
mod stagnation;

pub use pareto::{pareto_front, select_test_population, TestSelection};
pub use scheduler::{crossover_rate, operation_counts, OperationPlan, SchedulerConfig};
pub use selection::{
    best_index, binary_tournament, select_survivors, survivor_order, uniform_index,
};
pub use stagnation::{stagnation_check, StagnationFingerprint};
