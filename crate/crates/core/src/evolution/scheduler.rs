use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine-annealed crossover rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub x_init: f64,
    pub x_final: f64,
    pub max_iter: u32,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            x_init: 0.0,
            x_final: 1.0,
            max_iter: 10,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 2 {
            return Err(Error::InvalidArgument(format!(
                "max_iter must be at least 2, got {}",
                self.max_iter
            )));
        }
        if !(0.0 <= self.x_init && self.x_init <= self.x_final && self.x_final <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= x_init <= x_final <= 1, got x_init={} x_final={}",
                self.x_init, self.x_final
            )));
        }
        Ok(())
    }
}

/// Crossover rate at iteration `r` (1-based). Rises from `x_init` at r = 1
/// to `x_final` at r = max_iter along half a cosine period.
pub fn crossover_rate(r: u32, cfg: &SchedulerConfig) -> Result<f64> {
    cfg.validate()?;
    if r < 1 || r > cfg.max_iter {
        return Err(Error::InvalidArgument(format!(
            "iteration {r} outside [1, {}]",
            cfg.max_iter
        )));
    }
    if r == 1 {
        return Ok(cfg.x_init);
    }
    if r == cfg.max_iter {
        return Ok(cfg.x_final);
    }
    let phase = PI * f64::from(r - 1) / f64::from(cfg.max_iter - 1);
    let x = cfg.x_final + 0.5 * (cfg.x_init - cfg.x_final) * (1.0 + phase.cos());
    Ok(x.clamp(cfg.x_init, cfg.x_final))
}

/// How many offspring of each kind one generation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationPlan {
    pub iteration: u32,
    pub crossover_count: usize,
    pub mutation_count: usize,
}

/// Crossover count is ⌊x·N⌋, the remainder are mutations.
pub fn operation_counts(x: f64, population_size: usize) -> OperationPlan {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    let crossover = ((x * population_size as f64).floor() as usize).min(population_size);
    OperationPlan {
        iteration: 0,
        crossover_count: crossover,
        mutation_count: population_size - crossover,
    }
}

impl OperationPlan {
    pub fn for_iteration(r: u32, cfg: &SchedulerConfig, population_size: usize) -> Result<Self> {
        let x = crossover_rate(r, cfg)?;
        Ok(OperationPlan {
            iteration: r,
            ..operation_counts(x, population_size)
        })
    }

    pub fn total(&self) -> usize {
        self.crossover_count + self.mutation_count
    }
}
