//! Exact solver for tiny instances: enumerates order partitions and stock
//! usage, routing every batch with Held-Karp.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use thiserror::Error;

use crate::distances::DistanceMatrix;
use crate::instance::{min_batches_per_depot, Instance, WEIGHT_EPS};
use crate::vns::construct::MAX_CAP_INCREMENTS;
use crate::vns::{objective, Batch, Solution};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLimits {
    pub max_orders: usize,
    pub max_items: usize,
    pub max_shelves_per_tour: usize,
    pub time_budget_s: Option<f64>,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_orders: 4, max_items: 8, max_shelves_per_tour: 7, time_budget_s: None }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {0}")]
    Limit(String),
    #[error("no feasible solution up to {cap} batches per depot")]
    Infeasible { cap: usize },
    #[error("oracle time budget of {0} s exhausted")]
    TimeBudget(f64),
}

/// Optimal closed tour from `depot` over `shelves` (matrix indices). Returns
/// the shelf order between the two depot visits and the tour length.
pub fn held_karp(dist: &DistanceMatrix, depot: usize, shelves: &[usize], max_shelves: usize) -> Result<(Vec<usize>, f64), OracleError> {
    let n = shelves.len();
    if n > max_shelves {
        return Err(OracleError::Limit(format!("tour over {n} shelves, limit {max_shelves}")));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full * n];
    let mut parent = vec![usize::MAX; full * n];
    for j in 0..n {
        dp[(1 << j) * n + j] = dist.get(depot, shelves[j]);
    }
    for mask in 1..full {
        for j in 0..n {
            let cur = dp[mask * n + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + dist.get(shelves[j], shelves[k]);
                if cand < dp[next * n + k] {
                    dp[next * n + k] = cand;
                    parent[next * n + k] = j;
                }
            }
        }
    }
    let last = full - 1;
    let mut best = (f64::INFINITY, 0);
    for j in 0..n {
        let c = dp[last * n + j] + dist.get(shelves[j], depot);
        if c < best.0 {
            best = (c, j);
        }
    }
    let mut route = Vec::with_capacity(n);
    let (mut mask, mut j) = (last, best.1);
    loop {
        route.push(shelves[j]);
        let p = parent[mask * n + j];
        mask &= !(1 << j);
        if p == usize::MAX {
            break;
        }
        j = p;
    }
    route.reverse();
    Ok((route, best.0))
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub solution: Solution,
    pub objective: f64,
    pub batches_per_depot: usize,
}

/// One way to serve a batch: units taken per slot and the resulting tour.
#[derive(Debug, Clone)]
struct Plan {
    usage: Vec<(usize, u32)>,
    route: Vec<usize>,
    cost: f64,
}

struct Search<'a> {
    inst: &'a Instance,
    limits: &'a OracleLimits,
    start: Instant,
    tours: HashMap<(usize, Vec<usize>), (Vec<usize>, f64)>,
    options: HashMap<(usize, Vec<usize>), Vec<Plan>>,
    best: Option<(f64, Vec<(usize, Vec<usize>)>, Vec<Plan>)>,
}

impl<'a> Search<'a> {
    fn check_time(&self) -> Result<(), OracleError> {
        match self.limits.time_budget_s {
            Some(t) if self.start.elapsed().as_secs_f64() > t => Err(OracleError::TimeBudget(t)),
            _ => Ok(()),
        }
    }

    fn tour(&mut self, depot: usize, shelves: Vec<usize>) -> Result<(Vec<usize>, f64), OracleError> {
        let key = (depot, shelves);
        if let Some(t) = self.tours.get(&key) {
            return Ok(t.clone());
        }
        let t = held_karp(&self.inst.distance, self.inst.depot_loc(depot), &key.1, self.limits.max_shelves_per_tour)?;
        self.tours.insert(key, t.clone());
        Ok(t)
    }

    /// All slot-usage vectors serving the batch's demand, each with its
    /// optimal tour, sorted by cost.
    fn batch_options(&mut self, depot: usize, orders: &[usize]) -> Result<Vec<Plan>, OracleError> {
        let key = (depot, orders.to_vec());
        if let Some(o) = self.options.get(&key) {
            return Ok(o.clone());
        }
        let mut demand: BTreeMap<usize, u32> = BTreeMap::new();
        for &o in orders {
            for p in self.inst.order_items(o) {
                *demand.entry(self.inst.item_sku(p)).or_default() += 1;
            }
        }
        let mut usages: Vec<Vec<(usize, u32)>> = vec![Vec::new()];
        for (&sku, &q) in &demand {
            let slots = self.inst.sku_slots(sku);
            let mut splits = Vec::new();
            split_units(self.inst, slots, q, 0, &mut Vec::new(), &mut splits);
            let mut next = Vec::with_capacity(usages.len() * splits.len());
            for u in &usages {
                for s in &splits {
                    let mut v = u.clone();
                    v.extend(s.iter().copied());
                    next.push(v);
                }
            }
            usages = next;
        }
        let mut out = Vec::with_capacity(usages.len());
        for mut usage in usages {
            usage.sort_unstable();
            let mut shelves: Vec<usize> = usage.iter().map(|&(slot, _)| self.inst.slots()[slot].shelf).collect();
            shelves.sort_unstable();
            shelves.dedup();
            let (route, cost) = self.tour(depot, shelves)?;
            out.push(Plan { usage, route, cost });
        }
        out.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        self.options.insert(key, out.clone());
        Ok(out)
    }

    /// Cheapest stock-feasible combination of options for a fixed partition.
    fn route_partition(&mut self, batches: &[(usize, Vec<usize>)]) -> Result<(), OracleError> {
        let opts: Vec<Vec<Plan>> = batches.iter().map(|(d, os)| self.batch_options(*d, os)).collect::<Result<_, _>>()?;
        if opts.iter().any(|o| o.is_empty()) {
            return Ok(());
        }
        let mut suffix_min = vec![0.0; opts.len() + 1];
        for k in (0..opts.len()).rev() {
            suffix_min[k] = suffix_min[k + 1] + opts[k][0].cost;
        }
        let bound = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if suffix_min[0] >= bound {
            return Ok(());
        }
        let mut stock: Vec<i64> = self.inst.slots().iter().map(|s| i64::from(s.units)).collect();
        let mut chosen = Vec::with_capacity(opts.len());
        let mut best_here: Option<(f64, Vec<usize>)> = None;
        combine(&opts, &suffix_min, 0, 0.0, bound, &mut stock, &mut chosen, &mut best_here);
        if let Some((cost, pick)) = best_here {
            let chosen = pick.iter().enumerate().map(|(k, &i)| opts[k][i].clone()).collect();
            self.best = Some((cost, batches.to_vec(), chosen));
        }
        Ok(())
    }

    /// Assigns orders in index order to existing batches or the first empty
    /// slot of a depot.
    fn partitions(&mut self, o: usize, cap: usize, batches: &mut Vec<(usize, Vec<usize>, f64)>) -> Result<(), OracleError> {
        self.check_time()?;
        let inst = self.inst;
        if o == inst.n_orders() {
            let parts: Vec<(usize, Vec<usize>)> = batches.iter().map(|(d, os, _)| (*d, os.clone())).collect();
            return self.route_partition(&parts);
        }
        let w = inst.order_weight(o);
        for d in 0..inst.n_depots() {
            for k in 0..batches.len() {
                if batches[k].0 == d && batches[k].2 + w <= inst.capacity_c + WEIGHT_EPS {
                    batches[k].1.push(o);
                    batches[k].2 += w;
                    self.partitions(o + 1, cap, batches)?;
                    batches[k].2 -= w;
                    batches[k].1.pop();
                }
            }
            if batches.iter().filter(|b| b.0 == d).count() < cap && w <= inst.capacity_c + WEIGHT_EPS {
                batches.push((d, vec![o], w));
                self.partitions(o + 1, cap, batches)?;
                batches.pop();
            }
        }
        Ok(())
    }
}

/// Every way to take `q` units of one SKU from its slots within stock.
fn split_units(inst: &Instance, slots: &[usize], q: u32, k: usize, cur: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
    if q == 0 {
        out.push(cur.clone());
        return;
    }
    if k == slots.len() {
        return;
    }
    let max = inst.slots()[slots[k]].units.min(q);
    for take in (0..=max).rev() {
        if take > 0 {
            cur.push((slots[k], take));
        }
        split_units(inst, slots, q - take, k + 1, cur, out);
        if take > 0 {
            cur.pop();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn combine(
    opts: &[Vec<Plan>],
    suffix_min: &[f64],
    k: usize,
    acc: f64,
    bound: f64,
    stock: &mut [i64],
    chosen: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let limit = best.as_ref().map_or(bound, |b| b.0.min(bound));
    if acc + suffix_min[k] >= limit {
        return;
    }
    if k == opts.len() {
        *best = Some((acc, chosen.clone()));
        return;
    }
    for (i, opt) in opts[k].iter().enumerate() {
        let limit = best.as_ref().map_or(bound, |b| b.0.min(bound));
        if acc + opt.cost + suffix_min[k + 1] >= limit {
            break;
        }
        if opt.usage.iter().any(|&(slot, n)| stock[slot] < i64::from(n)) {
            continue;
        }
        for &(slot, n) in &opt.usage {
            stock[slot] -= i64::from(n);
        }
        chosen.push(i);
        combine(opts, suffix_min, k + 1, acc + opt.cost, bound, stock, chosen, best);
        chosen.pop();
        for &(slot, n) in &opt.usage {
            stock[slot] += i64::from(n);
        }
    }
}

fn to_solution(inst: &Instance, cap: usize, batches: &[(usize, Vec<usize>)], chosen: &[Plan]) -> Solution {
    let mut sol = Solution::new(vec![cap; inst.n_depots()]);
    for ((d, orders), opt) in batches.iter().zip(chosen) {
        let mut b = Batch::empty(*d);
        for &o in orders {
            b.add_order(o, inst);
        }
        let mut left: BTreeMap<usize, u32> = opt.usage.iter().copied().collect();
        for &o in orders {
            for p in inst.order_items(o) {
                let sku = inst.item_sku(p);
                let slot = *inst.sku_slots(sku).iter().find(|s| left.get(s).is_some_and(|&n| n > 0)).expect("usage covers demand");
                *left.get_mut(&slot).unwrap() -= 1;
                b.picks.insert(p, slot);
            }
        }
        b.route = opt.route.clone();
        sol.batches.push(b);
    }
    sol.normalize();
    sol
}

/// Global optimum under the same per-depot cap rule as the heuristic: start
/// at the balanced lower bound and raise the cap only when nothing fits.
pub fn exact_solve(inst: &Instance, limits: &OracleLimits) -> Result<OracleOutcome, OracleError> {
    if inst.n_orders() > limits.max_orders {
        return Err(OracleError::Limit(format!("{} orders, limit {}", inst.n_orders(), limits.max_orders)));
    }
    if inst.items().len() > limits.max_items {
        return Err(OracleError::Limit(format!("{} items, limit {}", inst.items().len(), limits.max_items)));
    }
    let base = min_batches_per_depot(inst).max(1);
    let mut search = Search { inst, limits, start: Instant::now(), tours: HashMap::new(), options: HashMap::new(), best: None };
    for cap in base..=base + MAX_CAP_INCREMENTS {
        search.partitions(0, cap, &mut Vec::new())?;
        if let Some((_, batches, chosen)) = search.best.take() {
            let solution = to_solution(inst, cap, &batches, &chosen);
            let objective = objective(&solution, inst);
            return Ok(OracleOutcome { solution, objective, batches_per_depot: cap });
        }
    }
    Err(OracleError::Infeasible { cap: base + MAX_CAP_INCREMENTS })
}
