//! Destroy-and-repair shaking, batch-count reduction and the
//! differencing-based capacity repair.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::construct::{insert_order, StockView};
use super::solution::{Batch, Solution};
use super::SolveError;
use crate::instance::{Instance, WEIGHT_EPS};

/// Picks the batch to destroy. If one depot runs strictly more batches than
/// every other depot, only its batches are candidates. Selection
/// probability is proportional to the free capacity `1 − w_b/c`, with a
/// uniform fallback when every candidate is full.
pub fn eliminate_batch(batches: &[Batch], n_depots: usize, capacity: f64, rng: &mut impl Rng) -> usize {
    assert!(!batches.is_empty(), "eliminate_batch needs at least one batch");
    let cand = elimination_candidates(batches, n_depots);
    let probs = elimination_probabilities(batches, &cand, capacity);
    cand[sample_index(&probs, rng)]
}

/// Candidate batch indices under the strict-maximum depot rule.
pub fn elimination_candidates(batches: &[Batch], n_depots: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_depots];
    for b in batches {
        counts[b.depot] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let at_max: Vec<usize> = (0..n_depots).filter(|&d| counts[d] == max).collect();
    if at_max.len() == 1 && n_depots > 1 {
        let d = at_max[0];
        (0..batches.len()).filter(|&i| batches[i].depot == d).collect()
    } else {
        (0..batches.len()).collect()
    }
}

/// `p_b = (1 − w_b/c) / Σ(1 − w_l/c)`, uniform when all terms vanish.
pub fn elimination_probabilities(batches: &[Batch], cand: &[usize], capacity: f64) -> Vec<f64> {
    let free: Vec<f64> = cand.iter().map(|&i| (1.0 - batches[i].weight / capacity).max(0.0)).collect();
    let total: f64 = free.iter().sum();
    if total > 0.0 {
        free.iter().map(|f| f / total).collect()
    } else {
        vec![1.0 / cand.len() as f64; cand.len()]
    }
}

/// Roulette-wheel draw over non-negative weights; uniform if all are zero.
pub fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..weights.len());
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // float round-off: last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Destroys `kappa` batches and reinserts their orders into random batches
/// with room, opening new batches where nothing fits. Calls
/// [`reduce_batches`] if a depot ends above its cap.
pub fn shaking(inst: &Instance, solution: &Solution, kappa: usize, rng: &mut impl Rng) -> Result<Solution, SolveError> {
    let mut x = solution.clone();
    let mut stock = StockView::of(&x, inst);
    let mut orphans: Vec<(usize, usize)> = Vec::new(); // order, origin depot
    for _ in 0..kappa.min(x.batches.len()) {
        let a = eliminate_batch(&x.batches, inst.n_depots(), inst.capacity_c, rng);
        let b = x.batches.remove(a);
        stock.release(&b);
        orphans.extend(b.orders.iter().map(|&o| (o, b.depot)));
    }
    for (o, origin) in orphans {
        let w = inst.order_weight(o);
        let fitting: Vec<usize> = (0..x.batches.len())
            .filter(|&i| x.batches[i].weight + w <= inst.capacity_c + WEIGHT_EPS)
            .collect();
        let target = if fitting.is_empty() {
            let counts = x.batch_counts();
            let min = counts.iter().copied().min().unwrap_or(0);
            let depot = if counts[origin] == min { origin } else { counts.iter().position(|&n| n == min).unwrap_or(0) };
            x.batches.push(Batch::empty(depot));
            x.batches.len() - 1
        } else {
            fitting[rng.gen_range(0..fitting.len())]
        };
        insert_order(inst, &mut x.batches[target], o, &mut stock)?;
    }
    if !x.within_caps() {
        reduce_batches(inst, &mut x, rng)?;
    }
    x.normalize();
    Ok(x)
}

/// Repeatedly dissolves a batch into the least-loaded remaining batches.
/// A dissolution is kept when all batches fit, directly or after
/// [`repair_differencing`]; the loop ends at the first failure.
/// Returns whether the batch count dropped.
pub fn reduce_batches(inst: &Instance, solution: &mut Solution, rng: &mut impl Rng) -> Result<bool, SolveError> {
    let weights: Vec<f64> = (0..inst.n_orders()).map(|o| inst.order_weight(o)).collect();
    let mut changed = false;
    while solution.batches.len() >= 2 {
        let a = eliminate_batch(&solution.batches, inst.n_depots(), inst.capacity_c, rng);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut origin: Vec<usize> = Vec::new();
        for (i, b) in solution.batches.iter().enumerate() {
            if i != a {
                groups.push(b.orders.clone());
                origin.push(i);
            }
        }
        let mut loads: Vec<f64> = groups.iter().map(|g| g.iter().map(|&o| weights[o]).sum()).collect();
        for &o in &solution.batches[a].orders {
            let mut best = 0;
            for i in 1..groups.len() {
                if loads[i] + weights[o] < loads[best] + weights[o] {
                    best = i;
                }
            }
            groups[best].push(o);
            loads[best] += weights[o];
        }
        let feasible = loads.iter().all(|&w| w <= inst.capacity_c + WEIGHT_EPS)
            || repair_differencing(&mut groups, &weights, inst.capacity_c).feasible;
        if !feasible {
            break;
        }
        rebuild(inst, solution, &origin, groups)?;
        changed = true;
    }
    Ok(changed)
}

/// Replaces batch order sets, re-routing only batches whose set changed.
fn rebuild(inst: &Instance, solution: &mut Solution, origin: &[usize], groups: Vec<Vec<usize>>) -> Result<(), SolveError> {
    let mut stock = StockView::of(solution, inst);
    let old = std::mem::take(&mut solution.batches);
    let mut kept = vec![false; old.len()];
    let mut pending = Vec::new();
    for (&i, mut g) in origin.iter().zip(groups) {
        g.sort_unstable();
        kept[i] = true;
        if g == old[i].orders {
            solution.batches.push(old[i].clone());
        } else {
            stock.release(&old[i]);
            pending.push((solution.batches.len(), g));
            solution.batches.push(Batch::empty(old[i].depot));
        }
    }
    for (i, b) in old.iter().enumerate() {
        if !kept[i] {
            stock.release(b);
        }
    }
    for (idx, g) in pending {
        for o in g {
            insert_order(inst, &mut solution.batches[idx], o, &mut stock)?;
        }
    }
    solution.remove_empty();
    Ok(())
}

/// One differencing step: the two largest values and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KkStep {
    pub larger: f64,
    pub smaller: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KkPartition {
    /// Indices into the input, heavier side first.
    pub heavy: Vec<usize>,
    pub light: Vec<usize>,
    pub difference: f64,
    pub trace: Vec<KkStep>,
}

struct Node {
    value: f64,
    seq: usize,
    a: Vec<usize>,
    b: Vec<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap on value, older entries first among equals
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then(other.seq.cmp(&self.seq))
    }
}

/// Largest differencing method for a two-way split.
pub fn karmarkar_karp(weights: &[f64]) -> KkPartition {
    let mut heap: BinaryHeap<Node> =
        weights.iter().enumerate().map(|(i, &w)| Node { value: w, seq: i, a: vec![i], b: Vec::new() }).collect();
    let mut seq = weights.len();
    let mut trace = Vec::new();
    while heap.len() > 1 {
        let x = heap.pop().expect("len > 1");
        let y = heap.pop().expect("len > 1");
        let diff = x.value - y.value;
        trace.push(KkStep { larger: x.value, smaller: y.value, difference: diff });
        let mut a = x.a;
        a.extend(y.b);
        let mut b = x.b;
        b.extend(y.a);
        heap.push(Node { value: diff, seq, a, b });
        seq += 1;
    }
    let (mut heavy, mut light) = heap.pop().map(|n| (n.a, n.b)).unwrap_or_default();
    let sum = |s: &[usize]| s.iter().map(|&i| weights[i]).sum::<f64>();
    if sum(&light) > sum(&heavy) {
        std::mem::swap(&mut heavy, &mut light);
    }
    heavy.sort_unstable();
    light.sort_unstable();
    let difference = sum(&heavy) - sum(&light);
    KkPartition { heavy, light, difference, trace }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub feasible: bool,
    pub accepted: usize,
}

/// Re-splits an overweight group together with the group closest in weight,
/// accepting a split when the weight difference between the pair shrinks.
/// Stops when every group fits or the first overweight group cannot be
/// improved against any partner.
pub fn repair_differencing(groups: &mut [Vec<usize>], order_weight: &[f64], capacity: f64) -> RepairOutcome {
    let load = |g: &[usize]| g.iter().map(|&o| order_weight[o]).sum::<f64>();
    let mut accepted = 0;
    loop {
        let loads: Vec<f64> = groups.iter().map(|g| load(g)).collect();
        let Some(inf) = loads.iter().position(|&w| w > capacity + WEIGHT_EPS) else {
            return RepairOutcome { feasible: true, accepted };
        };
        let mut others: Vec<usize> = (0..groups.len()).filter(|&j| j != inf).collect();
        others.sort_by(|&a, &b| (loads[a] - loads[inf]).abs().total_cmp(&(loads[b] - loads[inf]).abs()).then(a.cmp(&b)));
        let mut improved = false;
        for j in others {
            let union: Vec<usize> = groups[inf].iter().chain(&groups[j]).copied().collect();
            let w: Vec<f64> = union.iter().map(|&o| order_weight[o]).collect();
            let part = karmarkar_karp(&w);
            if part.difference < (loads[inf] - loads[j]).abs() - WEIGHT_EPS {
                groups[inf] = part.heavy.iter().map(|&i| union[i]).collect();
                groups[j] = part.light.iter().map(|&i| union[i]).collect();
                accepted += 1;
                improved = true;
                break;
            }
        }
        if !improved {
            return RepairOutcome { feasible: false, accepted };
        }
    }
}
