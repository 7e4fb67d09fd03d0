use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shelfroute::distances::{all_pairs_shortest, build_layout_graph, LayoutSpec};
use shelfroute::instance::{batch_bound, expand_picking_list, generate_instance, GenConfig, Instance, StoragePolicy};
use shelfroute::vns::operators::{exchange_orders, move_orders};
use shelfroute::vns::shaking::{reduce_batches, shaking};
use shelfroute::vns::solution::solution_to_json;
use shelfroute::vns::tour_ops::{relocate_node, swap_nodes, two_opt};
use shelfroute::vns::{initial_solution, validate, SearchCtx, Solution, SolveStats, ViolationKind};
use shelfroute::{vns_run, AlsConfig, VnsConfig};

const CASES: u32 = 1000;

fn policy_of(k: usize) -> StoragePolicy {
    if k < 2 {
        StoragePolicy::Dedicated
    } else {
        StoragePolicy::Mixed(k)
    }
}

fn tiny(seed: u64, aisles: usize, spa: usize, orders: usize, k: usize, depots: usize) -> Option<Instance> {
    let cfg = GenConfig::default()
        .with_layout(aisles, spa, 0)
        .with_orders(orders)
        .with_avg_lines(1.5)
        .with_policy(policy_of(k))
        .with_depots(depots)
        .with_capacity(6.0)
        .with_seed(seed);
    generate_instance(&cfg).ok()
}

prop_compose! {
    fn instances()(seed in any::<u64>(), aisles in 1usize..=3, half in 2usize..=4, orders in 2usize..=8, k in 1usize..=3, depots in 1usize..=3) -> Option<Instance> {
        tiny(seed, aisles, 2 * half, orders, k, depots)
    }
}

/// Every order sits in exactly one batch.
fn orders_conserved(sol: &Solution, inst: &Instance) -> bool {
    let mut all: Vec<usize> = sol.batches.iter().flat_map(|b| b.orders.iter().copied()).collect();
    all.sort_unstable();
    all == (0..inst.n_orders()).collect::<Vec<_>>()
}

fn clean(sol: &Solution, inst: &Instance, allow_over_cap: bool) -> Result<(), TestCaseError> {
    let v: Vec<_> = validate(sol, inst).into_iter().filter(|v| !(allow_over_cap && v.kind == ViolationKind::BatchCount)).collect();
    prop_assert!(v.is_empty(), "{:?}", v);
    prop_assert!(orders_conserved(sol, inst));
    for b in &sol.batches {
        prop_assert!(b.weight <= inst.capacity_c + 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn search_operators_keep_solutions_valid(inst in instances(), rng_seed in any::<u64>(), kappa in 1usize..=3) {
        let Some(inst) = inst else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let als = AlsConfig::default();
        let ctx = SearchCtx::new(&inst, &als);
        let x = initial_solution(&inst, &mut rng).unwrap();
        clean(&x, &inst, false)?;
        let shaken = shaking(&inst, &x, kappa, &mut rng).unwrap();
        clean(&shaken, &inst, true)?;
        let moved = move_orders(&ctx, &x, kappa, &mut rng).unwrap();
        clean(&moved, &inst, false)?;
        let swapped = exchange_orders(&ctx, &x, kappa, &mut rng).unwrap();
        clean(&swapped, &inst, false)?;
        let mut reduced = shaken.clone();
        reduce_batches(&inst, &mut reduced, &mut rng).unwrap();
        prop_assert!(orders_conserved(&reduced, &inst));
        prop_assert!(reduced.batches.len() <= shaken.batches.len());
        for b in &reduced.batches {
            prop_assert!(b.weight <= inst.capacity_c + 1e-9);
        }
    }

    #[test]
    fn tour_operators_keep_the_shelf_multiset(route in prop::collection::vec(0usize..50, 0..12), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut want = route.clone();
        want.sort_unstable();
        for r in [two_opt(&route, &mut rng), swap_nodes(&route, &mut rng), relocate_node(&route, &mut rng)] {
            let mut got = r.clone();
            got.sort_unstable();
            prop_assert_eq!(&got, &want);
        }
    }

    #[test]
    fn distance_matrix_is_a_metric(aisles in 1usize..=3, half in 1usize..=6, cross in 0usize..=2, depots in 1usize..=3) {
        let spec = LayoutSpec::new(aisles, 2 * half, cross, depots);
        prop_assume!(spec.validate().is_ok());
        let g = build_layout_graph(&spec).unwrap();
        let mut nodes = g.shelf_nodes.clone();
        nodes.extend(&g.depot_nodes);
        let m = all_pairs_shortest(&g, &nodes).unwrap();
        let n = nodes.len();
        for i in 0..n {
            prop_assert_eq!(m[i * n + i], 0.0);
            for j in 0..n {
                let d = m[i * n + j];
                prop_assert!(d.is_finite() && d >= 0.0);
                prop_assert_eq!(d, m[j * n + i]);
                for k in 0..n {
                    prop_assert!(d <= m[i * n + k] + m[k * n + j] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn generator_invariants(seed in any::<u64>(), orders in 1usize..=12, k in 1usize..=5, lines in 1.0f64..3.0) {
        let cfg = GenConfig::default().with_orders(orders).with_policy(policy_of(k)).with_avg_lines(lines).with_seed(seed);
        let a = generate_instance(&cfg).unwrap();
        let b = generate_instance(&cfg).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        for o in &a.orders {
            let items = expand_picking_list(o, &a.skus);
            let by_items: f64 = items.iter().map(|p| p.weight).sum();
            let by_lines: f64 = o.lines.iter().map(|l| f64::from(l.quantity) * a.skus[a.sku_index(&l.sku_id).unwrap()].unit_weight).sum();
            prop_assert!((by_items - by_lines).abs() < 1e-9);
            prop_assert!(by_items <= a.capacity_c + 1e-9);
        }
        let mut demand = vec![0u64; a.skus.len()];
        for p in 0..a.items().len() {
            demand[a.item_sku(p)] += 1;
        }
        for (sku, &need) in demand.iter().enumerate() {
            let stock: u64 = a.sku_slots(sku).iter().map(|&s| u64::from(a.slots()[s].units)).sum();
            prop_assert!(stock >= need);
        }
    }

    #[test]
    fn batch_bound_is_monotone(w in 0.0f64..200.0, dw in 0.0f64..50.0, c in 1.0f64..30.0, dc in 0.0f64..10.0, d in 1usize..5) {
        prop_assert!(batch_bound(w, d, c) <= batch_bound(w + dw, d, c));
        prop_assert!(batch_bound(w, d, c + dc) <= batch_bound(w, d, c));
        prop_assert!(batch_bound(w, d + 1, c) <= batch_bound(w, d, c));
    }

    #[test]
    fn fixed_seed_gives_identical_solution_json(seed in any::<u64>(), orders in 2usize..=6, k in 1usize..=3) {
        let Some(inst) = tiny(seed, 2, 6, orders, k, 2) else { return Ok(()) };
        let cfg = VnsConfig::default().with_gamma(2).with_seed(seed);
        let a = vns_run(&inst, &cfg, &AlsConfig::default()).unwrap();
        let b = vns_run(&inst, &cfg, &AlsConfig::default()).unwrap();
        let strip = |s: &SolveStats| SolveStats { time_s: 0.0, ..s.clone() };
        prop_assert_eq!(solution_to_json(&a.solution, &inst, &strip(&a.stats)), solution_to_json(&b.solution, &inst, &strip(&b.stats)));
        prop_assert_eq!(a.weight_trajectory, b.weight_trajectory);
        prop_assert!(a.best_trajectory.windows(2).all(|w| w[1] <= w[0]));
    }
}
