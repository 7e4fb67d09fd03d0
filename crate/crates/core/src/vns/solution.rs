//! Batches, solutions, the distance objective and the solution validator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, WEIGHT_EPS};

/// Orders collected together on one closed tour from one depot.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub depot: usize,
    /// Order indices, ascending.
    pub orders: Vec<usize>,
    /// Item index → slot index it is picked from.
    pub picks: BTreeMap<usize, usize>,
    /// Shelves between the two depot visits, in travel order.
    pub route: Vec<usize>,
    pub weight: f64,
}

impl Batch {
    pub fn empty(depot: usize) -> Self {
        Self { depot, orders: Vec::new(), picks: BTreeMap::new(), route: Vec::new(), weight: 0.0 }
    }

    /// Closed tour over matrix locations, starting and ending at the depot.
    pub fn tour(&self, inst: &Instance) -> Vec<usize> {
        let d = inst.depot_loc(self.depot);
        let mut t = Vec::with_capacity(self.route.len() + 2);
        t.push(d);
        t.extend_from_slice(&self.route);
        t.push(d);
        t
    }

    pub fn length(&self, inst: &Instance) -> f64 {
        route_length(inst, self.depot, &self.route)
    }

    pub fn recompute_weight(&mut self, inst: &Instance) {
        self.weight = self.orders.iter().map(|&o| inst.order_weight(o)).sum();
    }

    pub fn add_order(&mut self, o: usize, inst: &Instance) {
        let pos = self.orders.partition_point(|&x| x < o);
        self.orders.insert(pos, o);
        self.recompute_weight(inst);
    }

    /// Removes an order and its picks; returns the freed `(item, slot)` pairs.
    pub fn remove_order(&mut self, o: usize, inst: &Instance) -> Vec<(usize, usize)> {
        self.orders.retain(|&x| x != o);
        self.recompute_weight(inst);
        let freed: Vec<(usize, usize)> =
            inst.order_items(o).filter_map(|p| self.picks.remove(&p).map(|s| (p, s))).collect();
        self.prune_route(inst);
        freed
    }

    /// Drops route shelves no longer used by any pick.
    pub fn prune_route(&mut self, inst: &Instance) {
        let used: BTreeSet<usize> = self.picks.values().map(|&s| inst.slots()[s].shelf).collect();
        self.route.retain(|s| used.contains(s));
    }

    pub fn items<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        self.orders.iter().flat_map(move |&o| inst.order_items(o))
    }
}

/// Length of the closed tour `depot → route → depot`.
pub fn route_length(inst: &Instance, depot: usize, route: &[usize]) -> f64 {
    let d = inst.depot_loc(depot);
    let mut prev = d;
    let mut len = 0.0;
    for &s in route {
        len += inst.dist(prev, s);
        prev = s;
    }
    len + inst.dist(prev, d)
}

/// A set of batches plus the active per-depot batch cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub batches: Vec<Batch>,
    pub caps: Vec<usize>,
}

impl Solution {
    pub fn new(caps: Vec<usize>) -> Self {
        Self { batches: Vec::new(), caps }
    }

    pub fn batch_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.caps.len()];
        for b in &self.batches {
            counts[b.depot] += 1;
        }
        counts
    }

    pub fn within_caps(&self) -> bool {
        self.batch_counts().iter().zip(&self.caps).all(|(n, c)| n <= c)
    }

    /// Batch holding each order, `usize::MAX` if none.
    pub fn order_batch(&self, n_orders: usize) -> Vec<usize> {
        let mut ob = vec![usize::MAX; n_orders];
        for (bi, b) in self.batches.iter().enumerate() {
            for &o in &b.orders {
                ob[o] = bi;
            }
        }
        ob
    }

    /// Units taken from every slot across all batches.
    pub fn slot_usage(&self, inst: &Instance) -> Vec<i64> {
        let mut used = vec![0i64; inst.slots().len()];
        for b in &self.batches {
            for &s in b.picks.values() {
                used[s] += 1;
            }
        }
        used
    }

    /// Remaining units per slot; negative when over-used.
    pub fn remaining_stock(&self, inst: &Instance) -> Vec<i64> {
        let used = self.slot_usage(inst);
        inst.slots().iter().zip(used).map(|(s, u)| i64::from(s.units) - u).collect()
    }

    /// Drops batches without orders.
    pub fn remove_empty(&mut self) {
        self.batches.retain(|b| !b.orders.is_empty());
    }

    /// Sorts batches by depot, keeping relative order within a depot.
    pub fn normalize(&mut self) {
        self.batches.sort_by_key(|b| b.depot);
    }
}

/// Total travelled distance over all batch tours.
pub fn objective(solution: &Solution, inst: &Instance) -> f64 {
    solution.batches.iter().map(|b| b.length(inst)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    ItemPick,
    NoSplit,
    Capacity,
    Stock,
    Tour,
    BatchCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// Checks every structural constraint of a solution.
pub fn validate(solution: &Solution, inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| out.push(Violation { kind, detail });

    let mut order_hits = vec![0usize; inst.n_orders()];
    let mut item_hits = vec![0usize; inst.items().len()];
    for (bi, b) in solution.batches.iter().enumerate() {
        if b.depot >= inst.n_depots() {
            push(ViolationKind::Tour, format!("batch {bi} references depot {} that does not exist", b.depot));
            continue;
        }
        for &o in &b.orders {
            if o >= inst.n_orders() {
                push(ViolationKind::NoSplit, format!("batch {bi} references unknown order {o}"));
                continue;
            }
            order_hits[o] += 1;
        }
        let own: BTreeSet<usize> = b.items(inst).filter(|&p| p < inst.items().len()).collect();
        for (&p, &slot) in &b.picks {
            if p >= inst.items().len() || slot >= inst.slots().len() {
                push(ViolationKind::ItemPick, format!("batch {bi} has an out-of-range pick {p} -> {slot}"));
                continue;
            }
            item_hits[p] += 1;
            if !own.contains(&p) {
                let o = inst.item_order(p);
                push(
                    ViolationKind::NoSplit,
                    format!("item {} of order {} is picked in batch {bi} which does not hold the order", inst.items()[p].key(), inst.orders[o].id),
                );
            }
            if inst.slots()[slot].sku != inst.item_sku(p) {
                push(ViolationKind::ItemPick, format!("item {} picked from a slot of another sku", inst.items()[p].key()));
            }
        }
        for &p in &own {
            if !b.picks.contains_key(&p) {
                push(ViolationKind::ItemPick, format!("item {} of batch {bi} has no pick", inst.items()[p].key()));
            }
        }
        if b.weight.is_nan() || (b.weight - own.iter().map(|&p| inst.items()[p].weight).sum::<f64>()).abs() > 1e-6 {
            push(ViolationKind::Capacity, format!("batch {bi} caches weight {} that does not match its orders", b.weight));
        }
        let w: f64 = b.orders.iter().filter(|&&o| o < inst.n_orders()).map(|&o| inst.order_weight(o)).sum();
        if w > inst.capacity_c + WEIGHT_EPS {
            push(ViolationKind::Capacity, format!("batch {bi} weighs {w:.3} kg above capacity {}", inst.capacity_c));
        }
        let pick_shelves: BTreeSet<usize> =
            b.picks.values().filter(|&&s| s < inst.slots().len()).map(|&s| inst.slots()[s].shelf).collect();
        let route_set: BTreeSet<usize> = b.route.iter().copied().collect();
        if route_set.len() != b.route.len() {
            push(ViolationKind::Tour, format!("batch {bi} visits a shelf twice"));
        }
        if route_set != pick_shelves {
            push(ViolationKind::Tour, format!("batch {bi} route does not match its pick shelves"));
        }
        if b.route.iter().any(|&s| s >= inst.n_shelves()) {
            push(ViolationKind::Tour, format!("batch {bi} route contains a non-shelf node"));
        }
    }
    for (o, &n) in order_hits.iter().enumerate() {
        if n != 1 {
            push(ViolationKind::NoSplit, format!("order {} is in {n} batches", inst.orders[o].id));
        }
    }
    for (p, &n) in item_hits.iter().enumerate() {
        if n != 1 && order_hits[inst.item_order(p)] == 1 {
            push(ViolationKind::ItemPick, format!("item {} is picked {n} times", inst.items()[p].key()));
        }
    }
    for (slot, rem) in solution.remaining_stock(inst).into_iter().enumerate() {
        if rem < 0 {
            let s = inst.slots()[slot];
            push(
                ViolationKind::Stock,
                format!("shelf {} gives {} units of sku {} but stocks {}", inst.shelves[s.shelf].id, i64::from(s.units) - rem, inst.skus[s.sku].id, s.units),
            );
        }
    }
    let counts = solution.batch_counts();
    for (d, (&n, &cap)) in counts.iter().zip(&solution.caps).enumerate() {
        if n > cap {
            push(ViolationKind::BatchCount, format!("depot {} runs {n} batches above cap {cap}", inst.depots[d].id));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub time_s: f64,
    pub operator_weights: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileBatch {
    orders: Vec<String>,
    tour: Vec<String>,
    picks: BTreeMap<String, String>,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileDepot {
    id: String,
    batches: Vec<FileBatch>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    objective_m: f64,
    batches_per_depot: Vec<usize>,
    depots: Vec<FileDepot>,
    #[serde(default)]
    stats: SolveStats,
}

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error("cannot parse solution file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("solution does not match the instance: {0}")]
    Mismatch(String),
}

/// Serializes a solution with ids from the instance.
pub fn solution_to_json(solution: &Solution, inst: &Instance, stats: &SolveStats) -> String {
    let label = |loc: usize| inst.distance.labels()[loc].clone();
    let mut depots: Vec<FileDepot> =
        inst.depots.iter().map(|d| FileDepot { id: d.id.clone(), batches: Vec::new() }).collect();
    for b in &solution.batches {
        depots[b.depot].batches.push(FileBatch {
            orders: b.orders.iter().map(|&o| inst.orders[o].id.clone()).collect(),
            tour: b.tour(inst).into_iter().map(label).collect(),
            picks: b
                .picks
                .iter()
                .map(|(&p, &s)| (inst.items()[p].key(), inst.shelves[inst.slots()[s].shelf].id.clone()))
                .collect(),
            weight: b.weight,
        });
    }
    let file = SolutionFile {
        objective_m: objective(solution, inst),
        batches_per_depot: solution.caps.clone(),
        depots,
        stats: stats.clone(),
    };
    serde_json::to_string_pretty(&file).expect("solution serialization cannot fail")
}

/// Parses a solution file against its instance.
pub fn solution_from_json(text: &str, inst: &Instance) -> Result<(Solution, SolveStats), SolutionFileError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    let bad = |m: String| SolutionFileError::Mismatch(m);
    let order_ix: HashMap<&str, usize> = inst.orders.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();
    let shelf_ix: HashMap<&str, usize> = inst.shelves.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let depot_ix: HashMap<&str, usize> = inst.depots.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let item_ix: HashMap<String, usize> = inst.items().iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
    if file.batches_per_depot.len() != inst.n_depots() {
        return Err(bad(format!("batches_per_depot lists {} depots, instance has {}", file.batches_per_depot.len(), inst.n_depots())));
    }
    let mut sol = Solution::new(file.batches_per_depot);
    for fd in &file.depots {
        let &d = depot_ix.get(fd.id.as_str()).ok_or_else(|| bad(format!("unknown depot {}", fd.id)))?;
        for fb in &fd.batches {
            let mut b = Batch::empty(d);
            for o in &fb.orders {
                let &oi = order_ix.get(o.as_str()).ok_or_else(|| bad(format!("unknown order {o}")))?;
                b.orders.push(oi);
            }
            b.orders.sort_unstable();
            for (item, shelf) in &fb.picks {
                let &p = item_ix.get(item).ok_or_else(|| bad(format!("unknown item {item}")))?;
                let &s = shelf_ix.get(shelf.as_str()).ok_or_else(|| bad(format!("unknown shelf {shelf}")))?;
                let slot = inst
                    .slot_of(inst.item_sku(p), s)
                    .ok_or_else(|| bad(format!("shelf {shelf} does not stock the sku of item {item}")))?;
                b.picks.insert(p, slot);
            }
            let n = fb.tour.len();
            if n < 2 || fb.tour[0] != fd.id || fb.tour[n - 1] != fd.id {
                return Err(bad(format!("tour of a batch at depot {} must start and end there", fd.id)));
            }
            for s in &fb.tour[1..n - 1] {
                let &si = shelf_ix.get(s.as_str()).ok_or_else(|| bad(format!("tour visits unknown shelf {s}")))?;
                b.route.push(si);
            }
            b.weight = fb.weight;
            sol.batches.push(b);
        }
    }
    Ok((sol, file.stats))
}
