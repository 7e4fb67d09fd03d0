//! Benchmark sweeps over storage policy, order count, order size and seed,
//! with CSV output and mixed-versus-dedicated savings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::instance::{generate_instance, GenConfig, Instance, StoragePolicy};
use crate::vns::{validate, vns_run, AlsConfig, SolveError, VnsConfig, VnsOutcome};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "SHELFROUTE_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub layout: (usize, usize, usize),
    pub n_depots: usize,
    pub policies: Vec<StoragePolicy>,
    pub orders: Vec<usize>,
    pub avg_lines: Vec<f64>,
    pub seeds: Vec<u64>,
    pub reps: usize,
    /// Defaults to the shelf count of the layout.
    pub n_skus: Option<usize>,
    pub capacity_c: f64,
    pub vns: VnsConfig,
    pub als: AlsConfig,
    /// Writes `time_s` as 0 so reruns produce identical files.
    pub omit_time: bool,
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            layout: (2, 12, 0),
            n_depots: 2,
            policies: vec![StoragePolicy::Dedicated, StoragePolicy::Mixed(5)],
            orders: vec![10],
            avg_lines: vec![1.6],
            seeds: (0..10).collect(),
            reps: 5,
            n_skus: None,
            capacity_c: GenConfig::default().capacity_c,
            vns: VnsConfig::default().with_t_max(300.0),
            als: AlsConfig::default(),
            omit_time: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Violated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub policy: String,
    pub n_orders: usize,
    pub avg_lines: f64,
    pub n_depots: usize,
    pub layout: String,
    pub seed: u64,
    pub repetition: usize,
    pub objective_m: f64,
    pub time_s: f64,
    pub batches_per_depot: usize,
    pub validator_status: RowStatus,
    #[serde(skip)]
    pub batch_counts: Vec<usize>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub policy: String,
    pub n_orders: usize,
    pub avg_lines: f64,
    /// Mean over seeds of the best repetition.
    pub mean_objective_m: f64,
    /// Percent change against dedicated storage; negative means shorter.
    pub savings_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchReport {
    pub fn succeeded(&self) -> usize {
        self.rows.iter().filter(|r| r.validator_status != RowStatus::Failed).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory csv write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8");
        out.push('\n');
        out.push_str("policy,n_orders,avg_lines,mean_objective_m,savings_vs_dedicated_pct\n");
        for a in &self.aggregates {
            let s = a.savings_pct.map_or(String::new(), |s| format!("{s:.2}"));
            let _ = writeln!(out, "{},{},{},{:.3},{}", a.policy, a.n_orders, a.avg_lines, a.mean_objective_m, s);
        }
        out
    }
}

/// Pool size: the explicit setting, else the environment cap, else rayon's default.
pub fn pool_size(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())).filter(|&n| n > 0)
}

struct Cell {
    policy: StoragePolicy,
    n_orders: usize,
    avg_lines: f64,
    seed: u64,
    rep: usize,
}

fn run_cell(cfg: &BenchConfig, cell: &Cell) -> BenchRow {
    let (a, spa, ca) = cfg.layout;
    let mut gen = GenConfig::default()
        .with_layout(a, spa, ca)
        .with_depots(cfg.n_depots)
        .with_orders(cell.n_orders)
        .with_avg_lines(cell.avg_lines)
        .with_policy(cell.policy)
        .with_capacity(cfg.capacity_c)
        .with_seed(cell.seed);
    if let Some(k) = cfg.n_skus {
        gen = gen.with_skus(k);
    }
    let layout = format!("{a}x{spa}c{ca}");
    let mut row = BenchRow {
        instance_id: format!("{layout}-{}-o{}-l{}-s{}", cell.policy, cell.n_orders, cell.avg_lines, cell.seed),
        policy: cell.policy.to_string(),
        n_orders: cell.n_orders,
        avg_lines: cell.avg_lines,
        n_depots: cfg.n_depots,
        layout,
        seed: cell.seed,
        repetition: cell.rep,
        objective_m: 0.0,
        time_s: 0.0,
        batches_per_depot: 0,
        validator_status: RowStatus::Failed,
        batch_counts: Vec::new(),
        error: None,
    };
    let inst = match generate_instance(&gen) {
        Ok(i) => i,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let vns = cfg.vns.clone().with_seed(cell.seed + cell.rep as u64);
    match vns_run(&inst, &vns, &cfg.als) {
        Ok(out) => {
            row.objective_m = out.objective;
            if !cfg.omit_time {
                row.time_s = out.stats.time_s;
            }
            row.batches_per_depot = out.solution.caps.iter().copied().max().unwrap_or(0);
            row.batch_counts = out.solution.batch_counts();
            row.validator_status = if validate(&out.solution, &inst).is_empty() { RowStatus::Ok } else { RowStatus::Violated };
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn aggregate(rows: &[BenchRow]) -> Vec<Aggregate> {
    // best repetition per instance, then mean over seeds per (policy, orders, lines)
    let mut best: BTreeMap<(String, usize, String, u64), f64> = BTreeMap::new();
    let mut order: Vec<(String, usize, String)> = Vec::new();
    for r in rows.iter().filter(|r| r.validator_status == RowStatus::Ok) {
        let group = (r.policy.clone(), r.n_orders, r.avg_lines.to_string());
        if !order.contains(&group) {
            order.push(group.clone());
        }
        let e = best.entry((group.0, group.1, group.2, r.seed)).or_insert(f64::INFINITY);
        *e = e.min(r.objective_m);
    }
    let mean_of = |g: &(String, usize, String)| -> f64 {
        let v: Vec<f64> = best.iter().filter(|(k, _)| k.0 == g.0 && k.1 == g.1 && k.2 == g.2).map(|(_, &v)| v).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let dedicated = StoragePolicy::Dedicated.to_string();
    order
        .iter()
        .map(|g| {
            let mean = mean_of(g);
            let base = (g.0 != dedicated)
                .then(|| order.iter().find(|h| h.0 == dedicated && h.1 == g.1 && h.2 == g.2))
                .flatten()
                .map(mean_of);
            Aggregate {
                policy: g.0.clone(),
                n_orders: g.1,
                avg_lines: g.2.parse().expect("formatted from f64"),
                mean_objective_m: mean,
                savings_pct: base.map(|b| 100.0 * (mean - b) / b),
            }
        })
        .collect()
}

/// Runs every cell of the sweep. Rows come back in sweep order whatever the
/// completion order.
pub fn run_bench(cfg: &BenchConfig) -> BenchReport {
    let mut cells = Vec::new();
    for &policy in &cfg.policies {
        for &n_orders in &cfg.orders {
            for &avg_lines in &cfg.avg_lines {
                for &seed in &cfg.seeds {
                    for rep in 0..cfg.reps {
                        cells.push(Cell { policy, n_orders, avg_lines, seed, rep });
                    }
                }
            }
        }
    }
    let run = || cells.par_iter().map(|c| run_cell(cfg, c)).collect::<Vec<_>>();
    let rows = match pool_size(cfg.threads) {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(run),
        None => run(),
    };
    let aggregates = aggregate(&rows);
    BenchReport { rows, aggregates }
}

/// Independent runs with seeds `seed, seed + 1, ...`, executed on the pool.
pub fn run_repetitions(
    inst: &Instance,
    vns: &VnsConfig,
    als: &AlsConfig,
    reps: usize,
    threads: Option<usize>,
) -> Vec<Result<VnsOutcome, SolveError>> {
    let run = || {
        (0..reps)
            .into_par_iter()
            .map(|r| vns_run(inst, &vns.clone().with_seed(vns.seed + r as u64), als))
            .collect::<Vec<_>>()
    };
    match pool_size(threads) {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(run),
        None => run(),
    }
}

/// Mean absolute deviation of per-depot batch counts from their mean.
pub fn batch_count_mad(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - mean).abs()).sum::<f64>() / counts.len() as f64
}
