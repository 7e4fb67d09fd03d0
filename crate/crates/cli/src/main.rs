use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use shelfroute::bench::{run_bench, run_repetitions, BenchConfig};
use shelfroute::instance::{generate_instance, read_instance, write_instance, GenConfig, Instance, StoragePolicy};
use shelfroute::milp::{build_model, evaluate_candidate, read_lp, solution_to_candidate, write_lp_file, Formulation, MilpError, ModelOptions};
use shelfroute::oracle::{exact_solve, OracleError, OracleLimits};
use shelfroute::vns::solution::{solution_from_json, solution_to_json};
use shelfroute::vns::{validate, AlsConfig, SolveError, VnsConfig};
use shelfroute::min_batches_per_depot;

#[derive(Parser)]
#[command(name = "shelfroute", version, about = "Order batching and cobot routing for mixed-shelves warehouses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve an instance with the variable neighborhood search.
    Solve(SolveArgs),
    /// Write a MILP model as an LP file.
    Export(ExportArgs),
    /// Solve a tiny instance exactly.
    Oracle(OracleArgs),
    /// Run a benchmark sweep and write CSV.
    Bench(BenchArgs),
    /// Check a solution against its instance, and optionally an LP model.
    Validate(ValidateArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    /// Aisles by shelves per aisle, e.g. 2x12.
    #[arg(long, default_value = "2x12", value_parser = parse_layout)]
    layout: (usize, usize),
    #[arg(long, default_value_t = 0)]
    cross_aisles: usize,
    #[arg(long, default_value_t = 10)]
    orders: usize,
    #[arg(long, default_value_t = 1.6)]
    avg_lines: f64,
    /// dedicated, mixed5 or mixed(5).
    #[arg(long)]
    policy: Option<StoragePolicy>,
    /// Shelves holding each SKU; same meaning as mixed(k).
    #[arg(long)]
    shelves_per_sku: Option<usize>,
    #[arg(long, default_value_t = 2)]
    depots: usize,
    /// Defaults to the shelf count.
    #[arg(long)]
    skus: Option<usize>,
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 100)]
    gamma: usize,
    #[arg(long, default_value_t = 3)]
    kappa_max: usize,
    /// Wall-clock limit per repetition in seconds.
    #[arg(long, default_value_t = 3600.0)]
    tmax: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Three,
    Two,
}

#[derive(clap::Args)]
struct ExportArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "two")]
    model: ModelKind,
    /// Batches per depot; defaults to the balanced lower bound.
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    symmetry_breaking: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 4)]
    max_orders: usize,
    #[arg(long, default_value_t = 8)]
    max_items: usize,
    #[arg(long, default_value_t = 7)]
    max_shelves_per_tour: usize,
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, default_value = "2x12", value_parser = parse_layout)]
    layout: (usize, usize),
    #[arg(long, default_value_t = 0)]
    cross_aisles: usize,
    #[arg(long, default_value_t = 2)]
    depots: usize,
    #[arg(long, value_delimiter = ',', default_value = "dedicated,mixed5")]
    policies: Vec<StoragePolicy>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.6")]
    avg_lines: Vec<f64>,
    /// Seeds as a list or a half-open range, e.g. 0..10.
    #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 100)]
    gamma: usize,
    #[arg(long, default_value_t = 3)]
    kappa_max: usize,
    /// Wall-clock limit per cell in seconds.
    #[arg(long, default_value_t = 300.0)]
    tmax: f64,
    /// Write time_s as 0 for byte-identical reruns.
    #[arg(long)]
    omit_time: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct ValidateArgs {
    instance: PathBuf,
    solution: PathBuf,
    /// Also evaluate the solution on every row of this LP model.
    #[arg(long)]
    against_lp: Option<PathBuf>,
}

fn parse_layout(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("layout {s:?} must look like 2x12"))?;
    let a = a.trim().parse().map_err(|_| format!("bad aisle count in {s:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad shelves-per-aisle in {s:?}"))?;
    Ok((a, b))
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        return Ok(Seeds((a..b).collect()));
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| format!("bad seed {t:?}"))).collect::<Result<_, _>>().map(Seeds)
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Limit(String),
    Invalid(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) | Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Limit(_) => 4,
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    read_instance(path).with_context(|| format!("reading instance {}", path.display())).map_err(Failure::Other)
}

fn solve_error(e: SolveError) -> Failure {
    match e {
        SolveError::Infeasible { .. } | SolveError::Unstocked(_) | SolveError::Uncoverable(_) => Failure::Infeasible(e.to_string()),
        SolveError::Config(m) => Failure::Usage(m),
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let policy = match (a.policy, a.shelves_per_sku) {
        (Some(p), None) => p,
        (None, Some(1)) => StoragePolicy::Dedicated,
        (None, Some(k)) => StoragePolicy::Mixed(k),
        (None, None) => StoragePolicy::Dedicated,
        (Some(StoragePolicy::Dedicated), Some(1)) => StoragePolicy::Dedicated,
        (Some(StoragePolicy::Mixed(k)), Some(n)) if k == n => StoragePolicy::Mixed(k),
        (Some(p), Some(n)) => {
            return Err(Failure::Usage(format!("--policy {p} contradicts --shelves-per-sku {n}")));
        }
    };
    let mut cfg = GenConfig::default()
        .with_layout(a.layout.0, a.layout.1, a.cross_aisles)
        .with_depots(a.depots)
        .with_orders(a.orders)
        .with_avg_lines(a.avg_lines)
        .with_policy(policy)
        .with_seed(a.seed);
    if let Some(k) = a.skus {
        cfg = cfg.with_skus(k);
    }
    if let Some(c) = a.capacity {
        cfg = cfg.with_capacity(c);
    }
    let inst = generate_instance(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_instance(&inst, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "wrote {}: {} shelves, {} depots, {} orders, {} items, policy {policy}",
        a.output.display(),
        inst.n_shelves(),
        inst.n_depots(),
        inst.n_orders(),
        inst.items().len()
    );
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<(), Failure> {
    if a.reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    let inst = load(&a.instance)?;
    let cfg = VnsConfig::default().with_gamma(a.gamma).with_kappa_max(a.kappa_max).with_t_max(a.tmax).with_seed(a.seed);
    cfg.validate().map_err(Failure::Usage)?;
    let outcomes = run_repetitions(&inst, &cfg, &AlsConfig::default(), a.reps, None);
    let mut runs = Vec::with_capacity(a.reps);
    for out in outcomes {
        runs.push(out.map_err(solve_error)?);
    }
    let mean = runs.iter().map(|r| r.objective).sum::<f64>() / runs.len() as f64;
    // lowest objective, earliest repetition on ties
    let (best_rep, best) = runs.iter().enumerate().fold((0, &runs[0]), |acc, (i, r)| if r.objective < acc.1.objective { (i, r) } else { acc });
    if let Some(path) = &a.output {
        fs::write(path, solution_to_json(&best.solution, &inst, &best.stats)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "best {:.3} m (rep {best_rep}, seed {}), mean {:.3} m over {} reps, batches per depot {:?}",
        best.objective,
        a.seed + best_rep as u64,
        mean,
        a.reps,
        best.solution.batch_counts()
    );
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<(), Failure> {
    let inst = load(&a.instance)?;
    let b = a.batches.unwrap_or_else(|| min_batches_per_depot(&inst).max(1));
    let f = match a.model {
        ModelKind::Three => Formulation::ThreeIndex,
        ModelKind::Two => Formulation::TwoCommodity,
    };
    let opts = ModelOptions { symmetry_breaking: a.symmetry_breaking, ..Default::default() };
    let model = build_model(&inst, f, b, &opts).map_err(|e| match e {
        MilpError::SubtourLimit { .. } => Failure::Limit(e.to_string()),
        e => Failure::Other(e.into()),
    })?;
    write_lp_file(&model, &a.output).map_err(|e| Failure::Other(e.into()))?;
    println!("wrote {}: {} variables, {} constraints, {b} batches per depot", a.output.display(), model.n_vars(), model.n_rows());
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let inst = load(&a.instance)?;
    let limits = OracleLimits {
        max_orders: a.max_orders,
        max_items: a.max_items,
        max_shelves_per_tour: a.max_shelves_per_tour,
        time_budget_s: a.time_budget,
    };
    let out = exact_solve(&inst, &limits).map_err(|e| match e {
        OracleError::Limit(_) | OracleError::TimeBudget(_) => Failure::Limit(e.to_string()),
        OracleError::Infeasible { .. } => Failure::Infeasible(e.to_string()),
    })?;
    if let Some(path) = &a.output {
        fs::write(path, solution_to_json(&out.solution, &inst, &Default::default())).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("optimum {:.3} m with at most {} batches per depot", out.objective, out.batches_per_depot);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let cfg = BenchConfig {
        layout: (a.layout.0, a.layout.1, a.cross_aisles),
        n_depots: a.depots,
        policies: a.policies,
        orders: a.orders,
        avg_lines: a.avg_lines,
        seeds: a.seeds.0,
        reps: a.reps,
        vns: VnsConfig::default().with_gamma(a.gamma).with_kappa_max(a.kappa_max).with_t_max(a.tmax),
        omit_time: a.omit_time,
        threads: a.threads,
        ..BenchConfig::default()
    };
    cfg.vns.validate().map_err(Failure::Usage)?;
    let report = run_bench(&cfg);
    fs::write(&a.output, report.to_csv()).with_context(|| format!("writing {}", a.output.display()))?;
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} rep {}: {}", r.instance_id, r.repetition, r.error.as_deref().unwrap_or_default());
    }
    println!("wrote {}: {} of {} runs succeeded", a.output.display(), report.succeeded(), report.rows.len());
    for ag in &report.aggregates {
        match ag.savings_pct {
            Some(s) => println!("{} o{} l{}: mean {:.3} m, {s:+.2}% vs dedicated", ag.policy, ag.n_orders, ag.avg_lines, ag.mean_objective_m),
            None => println!("{} o{} l{}: mean {:.3} m", ag.policy, ag.n_orders, ag.avg_lines, ag.mean_objective_m),
        }
    }
    if report.succeeded() == 0 {
        return Err(Failure::Other(anyhow::anyhow!("every benchmark run failed")));
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let inst = load(&a.instance)?;
    let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let (sol, _) = solution_from_json(&text, &inst).map_err(|e| Failure::Other(e.into()))?;
    let violations = validate(&sol, &inst);
    for v in &violations {
        println!("violation: {v}");
    }
    let mut clean = violations.is_empty();
    if let Some(lp) = &a.against_lp {
        let text = fs::read_to_string(lp).with_context(|| format!("reading {}", lp.display()))?;
        let model = read_lp(&text).map_err(|e| Failure::Other(e.into()))?;
        let cand = solution_to_candidate(&sol, &inst, &model).map_err(|e| Failure::Other(e.into()))?;
        let ev = evaluate_candidate(&model, &cand).map_err(|e| Failure::Other(e.into()))?;
        if !ev.feasible() {
            println!("{}", serde_json::to_string_pretty(&ev.violations).context("serializing violations")?);
            clean = false;
        }
        println!("model {} objective {:.3} m, {} violated rows", model.formulation, ev.objective, ev.violations.len());
    }
    if clean {
        println!("ok: objective {:.3} m", shelfroute::vns::objective(&sol, &inst));
        Ok(())
    } else {
        Err(Failure::Invalid("solution violates constraints".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Export(a) => cmd_export(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            match f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Infeasible(m) => eprintln!("infeasible: {m}"),
                Failure::Limit(m) => eprintln!("limit exceeded: {m}"),
                Failure::Invalid(m) => eprintln!("{m}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(code)
        }
    }
}
