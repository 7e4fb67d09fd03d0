//! Greedy initial solution: depot assignment by savings, batching by
//! nearest orders and tours by cheapest insertion.

use rand::Rng;

use super::operators::cheapest_insertion_order;
use super::shaking::reduce_batches;
use super::solution::{route_length, Batch, Solution};
use super::SolveError;
use crate::instance::{batch_bound, min_batches_per_depot, Instance, WEIGHT_EPS};

/// How many times the per-depot cap may be raised before giving up.
pub const MAX_CAP_INCREMENTS: usize = 3;

/// Remaining units per slot plus slots excluded from shelf re-assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct StockView {
    pub remaining: Vec<i64>,
    pub banned: Vec<bool>,
}

impl StockView {
    pub fn fresh(inst: &Instance) -> Self {
        Self {
            remaining: inst.slots().iter().map(|s| i64::from(s.units)).collect(),
            banned: vec![false; inst.slots().len()],
        }
    }

    pub fn of(solution: &Solution, inst: &Instance) -> Self {
        Self { remaining: solution.remaining_stock(inst), banned: vec![false; inst.slots().len()] }
    }

    /// Returns a batch's picked units to the shelves.
    pub fn release(&mut self, batch: &Batch) {
        for &s in batch.picks.values() {
            self.remaining[s] += 1;
        }
    }

    pub fn take(&mut self, batch: &Batch) {
        for &s in batch.picks.values() {
            self.remaining[s] -= 1;
        }
    }
}

/// Sum over the order's items of the distance from the depot to the nearest
/// shelf stocking the item.
pub fn hypothetical_distance(inst: &Instance, order: usize, depot: usize) -> Result<f64, SolveError> {
    let d = inst.depot_loc(depot);
    let mut total = 0.0;
    for p in inst.order_items(order) {
        let best = inst
            .sku_slots(inst.item_sku(p))
            .iter()
            .map(|&s| inst.dist(d, inst.slots()[s].shelf))
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Err(SolveError::Unstocked(inst.items()[p].key()));
        }
        total += best;
    }
    Ok(total)
}

/// Savings `D(2) − D(1)` of the candidate distances, infinite for a single candidate.
pub fn savings(dists: &[f64]) -> f64 {
    let mut v = dists.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 | 1 => f64::INFINITY,
        _ => v[1] - v[0],
    }
}

/// Assigns orders to depots by descending savings subject to the balance
/// test `⌈(w_d + w_o)/c⌉ ≤ cap_d`. Returns `None` when some order has no
/// depot left.
pub fn assign_orders_to_depots(inst: &Instance, caps: &[usize]) -> Result<Option<Vec<Vec<usize>>>, SolveError> {
    let n_depots = inst.n_depots();
    let mut dhat = vec![vec![0.0; n_depots]; inst.n_orders()];
    for (o, row) in dhat.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            *v = hypothetical_distance(inst, o, d)?;
        }
    }
    let mut candidates: Vec<Vec<usize>> = vec![(0..n_depots).collect(); inst.n_orders()];
    let mut load = vec![0.0; n_depots];
    let mut assigned = vec![Vec::new(); n_depots];
    let mut remaining: Vec<usize> = (0..inst.n_orders()).collect();

    'outer: while !remaining.is_empty() {
        let mu: Vec<f64> = remaining
            .iter()
            .map(|&o| savings(&candidates[o].iter().map(|&d| dhat[o][d]).collect::<Vec<_>>()))
            .collect();
        let mut sorted: Vec<usize> = (0..remaining.len()).collect();
        sorted.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(remaining[a].cmp(&remaining[b])));
        let sorted: Vec<usize> = sorted.into_iter().map(|i| remaining[i]).collect();
        for o in sorted {
            let dstar = *candidates[o]
                .iter()
                .min_by(|&&a, &&b| dhat[o][a].total_cmp(&dhat[o][b]).then(a.cmp(&b)))
                .expect("candidate set is never empty here");
            let w = inst.order_weight(o);
            if batch_bound(load[dstar] + w, 1, inst.capacity_c) <= caps[dstar] {
                load[dstar] += w;
                assigned[dstar].push(o);
                remaining.retain(|&x| x != o);
            } else {
                candidates[o].retain(|&d| d != dstar);
                if candidates[o].is_empty() {
                    return Ok(None);
                }
                // savings of this order changed; re-rank what is left
                continue 'outer;
            }
        }
    }
    for a in &mut assigned {
        a.sort_unstable();
    }
    Ok(Some(assigned))
}

/// Best insertion position of `shelf` into `route` and the added distance.
fn cheapest_position(inst: &Instance, depot_loc: usize, route: &[usize], shelf: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..=route.len() {
        let prev = if j == 0 { depot_loc } else { route[j - 1] };
        let next = if j == route.len() { depot_loc } else { route[j] };
        let add = inst.dist(prev, shelf) + inst.dist(shelf, next) - inst.dist(prev, next);
        if add < best.1 {
            best = (j, add);
        }
    }
    best
}

/// Assigns every item of `order` to a stocked shelf by cheapest insertion
/// and updates the batch route. Returns the added distance.
pub fn greedy_tour_insert(
    inst: &Instance,
    batch: &mut Batch,
    order: usize,
    stock: &mut StockView,
) -> Result<f64, SolveError> {
    let depot_loc = inst.depot_loc(batch.depot);
    let mut total = 0.0;
    for p in inst.order_items(order) {
        let mut best: Option<(usize, usize, f64)> = None; // slot, position, added
        for &slot in inst.sku_slots(inst.item_sku(p)) {
            if stock.remaining[slot] <= 0 || stock.banned[slot] {
                continue;
            }
            let shelf = inst.slots()[slot].shelf;
            let (pos, add) = if batch.route.contains(&shelf) {
                (usize::MAX, 0.0)
            } else {
                cheapest_position(inst, depot_loc, &batch.route, shelf)
            };
            if best.is_none_or(|b| add < b.2) {
                best = Some((slot, pos, add));
            }
        }
        let (slot, pos, add) = best.ok_or_else(|| SolveError::Unstocked(inst.items()[p].key()))?;
        if pos != usize::MAX {
            batch.route.insert(pos, inst.slots()[slot].shelf);
        }
        stock.remaining[slot] -= 1;
        batch.picks.insert(p, slot);
        total += add;
    }
    Ok(total)
}

/// Adds an order to a batch and routes its items greedily.
pub fn insert_order(inst: &Instance, batch: &mut Batch, order: usize, stock: &mut StockView) -> Result<f64, SolveError> {
    batch.add_order(order, inst);
    greedy_tour_insert(inst, batch, order, stock)
}

/// Sum over the order's items of the distance from the closest stocked
/// shelf to the closest node of the current tour.
fn min_dist(inst: &Instance, order: usize, tour: &[usize], stock: &StockView) -> f64 {
    let mut total = 0.0;
    for p in inst.order_items(order) {
        let mut best = f64::INFINITY;
        for &slot in inst.sku_slots(inst.item_sku(p)) {
            if stock.remaining[slot] <= 0 {
                continue;
            }
            let s = inst.slots()[slot].shelf;
            for &t in tour {
                best = best.min(inst.dist(s, t));
            }
        }
        total += best;
    }
    total
}

/// Packs one depot's orders into capacity-feasible batches. The first order
/// of each batch is random; later ones are the nearest to the current tour.
pub fn assign_orders_to_batches_and_tours(
    inst: &Instance,
    depot: usize,
    orders: &[usize],
    stock: &mut StockView,
    rng: &mut impl Rng,
) -> Result<Vec<Batch>, SolveError> {
    let mut remaining: Vec<usize> = orders.to_vec();
    let mut batches = Vec::new();
    while !remaining.is_empty() {
        let mut batch = Batch::empty(depot);
        let mut infeasible: Vec<usize> = Vec::new();
        loop {
            let cand: Vec<usize> = remaining.iter().copied().filter(|o| !infeasible.contains(o)).collect();
            if cand.is_empty() {
                break;
            }
            let o = if batch.orders.is_empty() {
                cand[rng.gen_range(0..cand.len())]
            } else {
                let tour = batch.tour(inst);
                let mut best = (cand[0], f64::INFINITY);
                for &o in &cand {
                    let md = min_dist(inst, o, &tour, stock);
                    if md < best.1 {
                        best = (o, md);
                    }
                }
                best.0
            };
            if batch.weight + inst.order_weight(o) <= inst.capacity_c + WEIGHT_EPS {
                insert_order(inst, &mut batch, o, stock)?;
                remaining.retain(|&x| x != o);
            } else {
                infeasible.push(o);
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}

/// Moves whole batches from depots above their cap to depots below it,
/// each time the batch and target with the smallest added distance.
/// Picks stay; only the route is rebuilt.
pub fn rebalance_depots(inst: &Instance, sol: &mut Solution) {
    loop {
        let counts = sol.batch_counts();
        let over: Vec<bool> = counts.iter().zip(&sol.caps).map(|(n, c)| n > c).collect();
        let under: Vec<usize> = (0..counts.len()).filter(|&d| counts[d] < sol.caps[d]).collect();
        let mut best: Option<(usize, usize, Vec<usize>, f64)> = None;
        for (i, b) in sol.batches.iter().enumerate().filter(|(_, b)| over[b.depot]) {
            let now = b.length(inst);
            for &d in &under {
                let route = cheapest_insertion_order(inst, d, &b.route);
                let delta = route_length(inst, d, &route) - now;
                if best.as_ref().is_none_or(|x| delta < x.3) {
                    best = Some((i, d, route, delta));
                }
            }
        }
        let Some((i, d, route, _)) = best else { return };
        sol.batches[i].depot = d;
        sol.batches[i].route = route;
    }
}

/// Greedy construction. Caps start at the balanced bound and are raised by
/// one for every depot whenever assignment or batching cannot meet them.
pub fn initial_solution(inst: &Instance, rng: &mut impl Rng) -> Result<Solution, SolveError> {
    let base = min_batches_per_depot(inst);
    let mut trace = Vec::new();
    for inc in 0..=MAX_CAP_INCREMENTS {
        let caps = vec![base + inc; inst.n_depots()];
        let Some(assigned) = assign_orders_to_depots(inst, &caps)? else {
            trace.push(format!("cap {}: balanced depot assignment failed", base + inc));
            continue;
        };
        let mut stock = StockView::fresh(inst);
        let mut sol = Solution::new(caps);
        for (d, orders) in assigned.iter().enumerate() {
            sol.batches.extend(assign_orders_to_batches_and_tours(inst, d, orders, &mut stock, rng)?);
        }
        if !sol.within_caps() {
            reduce_batches(inst, &mut sol, rng)?;
        }
        if !sol.within_caps() {
            rebalance_depots(inst, &mut sol);
        }
        if sol.within_caps() {
            sol.normalize();
            return Ok(sol);
        }
        trace.push(format!("cap {}: batching needs {:?} batches per depot", base + inc, sol.batch_counts()));
    }
    Err(SolveError::Infeasible { trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::DistanceMatrix;
    use crate::instance::{Depot, Order, Shelf, Sku};
    use crate::vns::solution::{objective, validate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shelf(id: &str, stock: &[(&str, u32)]) -> Shelf {
        Shelf { id: id.into(), node: 0, stock: stock.iter().map(|&(k, n)| (k.to_string(), n)).collect() }
    }

    fn inst_with(
        shelves: Vec<Shelf>,
        n_depots: usize,
        orders: Vec<Order>,
        skus: &[(&str, f64)],
        c: f64,
        d: impl Fn(usize, usize) -> f64,
    ) -> Instance {
        let shelves: Vec<Shelf> = shelves.into_iter().enumerate().map(|(i, mut s)| { s.node = i; s }).collect();
        let depots: Vec<Depot> = (0..n_depots).map(|k| Depot { id: format!("d{k}"), node: 100 + k }).collect();
        let labels = shelves.iter().map(|s| s.id.clone()).chain(depots.iter().map(|d| d.id.clone())).collect();
        let skus = skus.iter().map(|&(id, w)| Sku { id: id.into(), unit_weight: w }).collect();
        Instance::from_parts(shelves, depots, orders, skus, c, DistanceMatrix::from_fn(labels, d)).unwrap()
    }

    #[test]
    fn hypothetical_distance_sums_nearest_shelves() {
        // shelves s0,s1 stock a; s2 stocks b. depot index 3.
        let d = |i: usize, j: usize| {
            let m = [[0., 1., 1., 5.], [1., 0., 1., 3.], [1., 1., 0., 4.], [5., 3., 4., 0.]];
            m[i][j]
        };
        let inst = inst_with(
            vec![shelf("s0", &[("a", 1)]), shelf("s1", &[("a", 1)]), shelf("s2", &[("b", 1)])],
            1,
            vec![Order::new("o", &[("a", 1), ("b", 1)]), Order::new("p", &[("a", 1)])],
            &[("a", 1.0), ("b", 1.0)],
            10.0,
            d,
        );
        assert_eq!(hypothetical_distance(&inst, 0, 0).unwrap(), 3.0 + 4.0);
        assert_eq!(hypothetical_distance(&inst, 1, 0).unwrap(), 3.0);
    }

    #[test]
    fn zero_distances_give_zero() {
        let inst = inst_with(vec![shelf("s0", &[("a", 1)])], 1, vec![Order::new("o", &[("a", 1)])], &[("a", 1.0)], 5.0, |_, _| 0.0);
        assert_eq!(hypothetical_distance(&inst, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn savings_uses_order_statistics() {
        assert_eq!(savings(&[7.0, 4.0, 10.0]), 3.0);
        assert_eq!(savings(&[2.0]), f64::INFINITY);
    }

    #[test]
    fn empty_tour_insertion_costs_round_trip() {
        let inst = inst_with(vec![shelf("s0", &[("a", 1)])], 1, vec![Order::new("o", &[("a", 1)])], &[("a", 1.0)], 5.0, |_, _| 5.0);
        let mut b = Batch::empty(0);
        let mut stock = StockView::fresh(&inst);
        let add = insert_order(&inst, &mut b, 0, &mut stock).unwrap();
        assert_eq!(add, 10.0);
        assert_eq!(b.tour(&inst), vec![1, 0, 1]);
        assert_eq!(stock.remaining, vec![0]);
    }

    #[test]
    fn insertion_between_depot_and_shelf() {
        // d(d,s1)=2, d(d,s2)=2, d(s1,s2)=1; tour [d,s1,d], item only at s2.
        // Both positions add 2 + 1 - 2 = 1.
        let m = [[0., 1., 2.], [1., 0., 2.], [2., 2., 0.]];
        let inst = inst_with(
            vec![shelf("s1", &[("a", 1)]), shelf("s2", &[("b", 1)])],
            1,
            vec![Order::new("o", &[("a", 1)]), Order::new("p", &[("b", 1)])],
            &[("a", 1.0), ("b", 1.0)],
            5.0,
            |i, j| m[i][j],
        );
        let mut b = Batch::empty(0);
        let mut stock = StockView::fresh(&inst);
        insert_order(&inst, &mut b, 0, &mut stock).unwrap();
        let add = insert_order(&inst, &mut b, 1, &mut stock).unwrap();
        // independent check: enumerate both positions
        let positions = [vec![0, 1], vec![1, 0]];
        let lens: Vec<f64> = positions.iter().map(|r| crate::vns::solution::route_length(&inst, 0, r)).collect();
        let best = lens.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(add, 1.0);
        assert_eq!(b.length(&inst), best);
        assert_eq!(b.length(&inst), 5.0);
    }

    #[test]
    fn shelf_already_on_tour_is_free() {
        let inst = inst_with(
            vec![shelf("s0", &[("a", 2), ("b", 1)])],
            1,
            vec![Order::new("o", &[("a", 1)]), Order::new("p", &[("b", 1)])],
            &[("a", 1.0), ("b", 1.0)],
            5.0,
            |_, _| 3.0,
        );
        let mut b = Batch::empty(0);
        let mut stock = StockView::fresh(&inst);
        insert_order(&inst, &mut b, 0, &mut stock).unwrap();
        assert_eq!(insert_order(&inst, &mut b, 1, &mut stock).unwrap(), 0.0);
        assert_eq!(b.route, vec![0]);
        assert_eq!(b.picks.len(), 2);
    }

    #[test]
    fn pairwise_overflow_forces_singletons() {
        let inst = inst_with(
            vec![shelf("s0", &[("a", 1), ("b", 1), ("c", 1)])],
            1,
            vec![Order::new("o0", &[("a", 1)]), Order::new("o1", &[("b", 1)]), Order::new("o2", &[("c", 1)])],
            &[("a", 10.0), ("b", 10.0), ("c", 10.0)],
            18.0,
            |_, _| 1.0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut stock = StockView::fresh(&inst);
        let batches = assign_orders_to_batches_and_tours(&inst, 0, &[0, 1, 2], &mut stock, &mut rng).unwrap();
        assert_eq!(batches.len(), 3);
    }

    #[test]
    fn all_fit_in_one_batch() {
        let inst = inst_with(
            vec![shelf("s0", &[("a", 1), ("b", 1)])],
            1,
            vec![Order::new("o0", &[("a", 1)]), Order::new("o1", &[("b", 1)])],
            &[("a", 1.0), ("b", 1.0)],
            18.0,
            |_, _| 1.0,
        );
        let mut stock = StockView::fresh(&inst);
        let batches =
            assign_orders_to_batches_and_tours(&inst, 0, &[0, 1], &mut stock, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(batches.len(), 1);
    }

    #[test]
    fn single_depot_takes_everything() {
        let inst = inst_with(
            vec![shelf("s0", &[("a", 3)])],
            1,
            vec![Order::new("o0", &[("a", 1)]), Order::new("o1", &[("a", 2)])],
            &[("a", 1.0)],
            18.0,
            |_, _| 1.0,
        );
        let out = assign_orders_to_depots(&inst, &[1]).unwrap().unwrap();
        assert_eq!(out, vec![vec![0, 1]]);
    }

    #[test]
    fn forced_single_order_objective() {
        let inst = inst_with(vec![shelf("s0", &[("a", 1)])], 1, vec![Order::new("o", &[("a", 1)])], &[("a", 1.0)], 18.0, |_, _| 7.5);
        let sol = initial_solution(&inst, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(objective(&sol, &inst), 15.0);
        assert!(validate(&sol, &inst).is_empty());
    }
}
