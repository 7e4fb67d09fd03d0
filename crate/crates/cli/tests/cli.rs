use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shelfroute")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn objective_after(text: &str, key: &str) -> f64 {
    let rest = &text[text.find(key).expect("key present") + key.len()..];
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn gen_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--layout", "2x12", "--orders", "10", "--avg-lines", "1.6", "--policy", "mixed5", "--depots", "2", "--seed", "7", "-o", "i.json"];
    let o = run(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("24 shelves"));
    let first = std::fs::read(dir.path().join("i.json")).unwrap();
    let mut again = args;
    again[14] = "j.json";
    assert!(run(&again, dir.path()).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("j.json")).unwrap());
}

#[test]
fn contradictory_policy_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--policy", "mixed5", "--shelves-per-sku", "4", "-o", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn solve_matches_oracle_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = ["gen", "--layout", "1x6", "--orders", "3", "--avg-lines", "1.3", "--capacity", "4", "--seed", "3", "-o", "t.json"];
    assert!(run(&gen, d).status.success());
    let oracle = run(&["oracle", "t.json", "-o", "opt.json"], d);
    assert!(oracle.status.success());
    let solve = run(&["solve", "t.json", "--reps", "5", "--seed", "1", "--gamma", "30", "-o", "s.json"], d);
    assert!(solve.status.success());
    let opt = objective_after(&stdout(&oracle), "optimum ");
    let best = objective_after(&stdout(&solve), "best ");
    assert!((opt - best).abs() < 1e-3, "oracle {opt} vs solve {best}");
    for file in ["s.json", "opt.json"] {
        let v = run(&["validate", "t.json", file], d);
        assert!(v.status.success(), "{}", stdout(&v));
    }
    // same flags, same best
    let again = run(&["solve", "t.json", "--reps", "5", "--seed", "1", "--gamma", "30"], d);
    assert_eq!(objective_after(&stdout(&again), "best "), best);
}

#[test]
fn export_and_check_against_lp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["gen", "--orders", "6", "--policy", "mixed3", "--seed", "2", "-o", "i.json"], d).status.success());
    assert!(run(&["solve", "i.json", "--reps", "1", "--gamma", "5", "-o", "s.json"], d).status.success());
    let e = run(&["export", "--model", "two", "i.json", "-o", "i.lp"], d);
    assert!(e.status.success());
    let text = std::fs::read_to_string(d.join("i.lp")).unwrap();
    for section in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
        assert!(text.lines().any(|l| l == section), "{section}");
    }
    // the VNS may open more batches than the lower bound; give the model room
    let e = run(&["export", "--model", "two", "--batches", "3", "i.json", "-o", "i3.lp"], d);
    assert!(e.status.success());
    let v = run(&["validate", "i.json", "s.json", "--against-lp", "i3.lp"], d);
    assert!(v.status.success(), "{}", stdout(&v));
    assert!(stdout(&v).contains("0 violated rows"));
}

#[test]
fn three_index_refused_on_large_layout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["gen", "--layout", "6x60", "--cross-aisles", "1", "--orders", "10", "--policy", "mixed5", "-o", "big.json"], d).status.success());
    let o = run(&["export", "--model", "three", "big.json", "-o", "big.lp"], d);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn oracle_over_limits_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["gen", "--orders", "10", "-o", "i.json"], d).status.success());
    assert_eq!(run(&["oracle", "i.json"], d).status.code(), Some(4));
}

#[test]
fn infeasible_instance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // weight 0.6 per order and capacity 1 force one order per batch: twelve
    // batches are needed, the lower bound of eight plus three increments is not enough
    use shelfroute::distances::DistanceMatrix;
    use shelfroute::instance::{write_instance, Depot, Instance, Order, Shelf, Sku};
    let shelves = vec![Shelf { id: "s0".into(), node: 0, stock: [("a".to_string(), 20)].into() }];
    let depots = vec![Depot { id: "d0".into(), node: 1 }];
    let dist = DistanceMatrix::from_fn(vec!["s0".into(), "d0".into()], |i, j| if i == j { 0.0 } else { 3.0 });
    let orders = (0..12).map(|i| Order::new(format!("o{i}"), &[("a", 1)])).collect();
    let inst = Instance::from_parts(shelves, depots, orders, vec![Sku { id: "a".into(), unit_weight: 0.6 }], 1.0, dist).unwrap();
    write_instance(&inst, &d.join("inf.json")).unwrap();
    let o = run(&["solve", "inf.json", "--reps", "1"], d);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn bench_writes_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["bench", "--orders", "4", "--seeds", "0..2", "--reps", "2", "--gamma", "3", "--omit-time", "-o"];
    let mut a = args.to_vec();
    a.push("a.csv");
    let o = run(&a, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut b = args.to_vec();
    b.push("b.csv");
    assert!(run(&b, d).status.success());
    let csv_a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(d.join("b.csv")).unwrap());
    assert!(csv_a.starts_with("instance_id,policy,n_orders,avg_lines,n_depots,layout,seed,repetition,objective_m,time_s,batches_per_depot,validator_status\n"));
    assert!(csv_a.contains("savings_vs_dedicated_pct"));
}
