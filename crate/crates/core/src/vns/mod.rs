//! Variable neighborhood search: greedy construction, destroy-and-repair
//! shaking and an adaptive local search over order moves and exchanges.

pub mod als;
pub mod construct;
pub mod operators;
pub mod shaking;
pub mod solution;
pub mod tour_ops;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use als::{adaptive_local_search, AlsConfig};
pub use construct::initial_solution;
pub use operators::SearchCtx;
pub use solution::{objective, validate, Batch, Solution, SolveStats, Violation, ViolationKind};

use crate::instance::Instance;
use als::Operator;
use operators::{exchange_orders, move_orders};
use shaking::shaking;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no feasible batching found after raising the per-depot cap: {}", trace.join("; "))]
    Infeasible { trace: Vec<String> },
    #[error("item {0} is not stocked on any shelf with units left")]
    Unstocked(String),
    #[error("item {0} can only be picked from banned shelves")]
    Uncoverable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnsConfig {
    /// Outer iterations without improvement before stopping.
    pub gamma: usize,
    pub kappa_max: usize,
    /// Wall-clock budget in seconds.
    pub t_max: f64,
    pub seed: u64,
}

impl Default for VnsConfig {
    fn default() -> Self {
        Self { gamma: 100, kappa_max: 3, t_max: 3600.0, seed: 0 }
    }
}

impl VnsConfig {
    pub fn with_gamma(mut self, gamma: usize) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_kappa_max(mut self, kappa_max: usize) -> Self {
        self.kappa_max = kappa_max;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.gamma == 0 {
            return Err("gamma must be at least 1".into());
        }
        if self.kappa_max == 0 {
            return Err("kappa_max must be at least 1".into());
        }
        if !(self.t_max > 0.0) {
            return Err(format!("t_max must be positive, got {}", self.t_max));
        }
        Ok(())
    }
}

pub const ORDER_OPERATORS: [&str; 2] = ["move_orders", "exchange_orders"];

#[derive(Debug, Clone)]
pub struct VnsOutcome {
    pub solution: Solution,
    pub objective: f64,
    pub initial_objective: f64,
    pub stats: SolveStats,
    /// Operator weights after every order-level local search.
    pub weight_trajectory: Vec<Vec<f64>>,
    /// Best objective after every outer iteration.
    pub best_trajectory: Vec<f64>,
}

/// Runs the full search. A run is single-threaded and fully determined by
/// the seed; only `stats.time_s` depends on the machine.
pub fn vns_run(inst: &Instance, cfg: &VnsConfig, als_cfg: &AlsConfig) -> Result<VnsOutcome, SolveError> {
    cfg.validate().map_err(SolveError::Config)?;
    als_cfg.validate().map_err(SolveError::Config)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ctx = SearchCtx::new(inst, als_cfg);

    let mut x = initial_solution(inst, &mut rng)?;
    let mut fx = objective(&x, inst);
    let initial_objective = fx;
    let mut weights = vec![1.0; ORDER_OPERATORS.len()];
    let mut weight_trajectory = Vec::new();
    let mut best_trajectory = Vec::new();
    let mut unimproved = 0;
    let mut outer = 0;

    'search: while unimproved < cfg.gamma {
        outer += 1;
        let mut improved = false;
        let mut kappa = 1;
        while kappa <= cfg.kappa_max {
            if start.elapsed().as_secs_f64() >= cfg.t_max {
                best_trajectory.push(fx);
                break 'search;
            }
            let x1 = shaking(inst, &x, kappa, &mut rng)?;
            let f1 = objective(&x1, inst);
            let mut op_move = |s: &Solution, r: &mut ChaCha8Rng| {
                let n = move_orders(&ctx, s, kappa, r)?;
                let f = objective(&n, inst);
                Ok((n, f))
            };
            let mut op_exchange = |s: &Solution, r: &mut ChaCha8Rng| {
                let n = exchange_orders(&ctx, s, kappa, r)?;
                let f = objective(&n, inst);
                Ok((n, f))
            };
            let mut ops: [&mut Operator<'_, Solution, ChaCha8Rng, SolveError>; 2] = [&mut op_move, &mut op_exchange];
            let t0 = als_cfg.order_t0_factor * f1;
            let out = adaptive_local_search(x1, f1, t0, &mut ops, als_cfg, &mut rng)?;
            weights = out.weights.clone();
            weight_trajectory.push(out.weights);
            let mut x2 = out.best;
            x2.normalize();
            if out.best_f < fx - 1e-9 && x2.within_caps() && validate(&x2, inst).is_empty() {
                x = x2;
                fx = out.best_f;
                improved = true;
                kappa = 1;
            } else {
                kappa += 1;
            }
        }
        best_trajectory.push(fx);
        if improved {
            unimproved = 0;
        } else {
            unimproved += 1;
        }
    }

    let stats = SolveStats {
        iterations: outer,
        time_s: start.elapsed().as_secs_f64(),
        operator_weights: ORDER_OPERATORS.iter().map(|s| s.to_string()).zip(weights).collect(),
    };
    Ok(VnsOutcome { objective: fx, solution: x, initial_objective, stats, weight_trajectory, best_trajectory })
}
