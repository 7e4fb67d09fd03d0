//! Order-level local search operators, shelf re-assignment with tour
//! polishing, and the negative-stock repair.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use super::als::{adaptive_local_search, AlsConfig, Operator};
use super::construct::{greedy_tour_insert, StockView};
use super::shaking::sample_index;
use super::solution::{route_length, Batch, Solution};
use super::tour_ops::{relocate_node, swap_nodes, two_opt};
use super::SolveError;
use crate::instance::{Instance, WEIGHT_EPS};

/// Shared read-only context for the operators.
#[derive(Debug, Clone, Copy)]
pub struct SearchCtx<'a> {
    pub inst: &'a Instance,
    pub als: &'a AlsConfig,
    /// Start temperature of the tour polish: largest minus smallest distance.
    pub tour_t0: f64,
}

impl<'a> SearchCtx<'a> {
    pub fn new(inst: &'a Instance, als: &'a AlsConfig) -> Self {
        let (max, min) = inst.distance.spread();
        Self { inst, als, tour_t0: (max - min).max(0.0) }
    }
}

/// Number of shelves of the order's batch route that only this order uses.
pub fn shelves_added(inst: &Instance, batch: &Batch, order: usize) -> usize {
    let own: BTreeSet<usize> = inst
        .order_items(order)
        .filter_map(|p| batch.picks.get(&p))
        .map(|&s| inst.slots()[s].shelf)
        .collect();
    let others: BTreeSet<usize> = batch
        .picks
        .iter()
        .filter(|(p, _)| inst.item_order(**p) != order)
        .map(|(_, &s)| inst.slots()[s].shelf)
        .collect();
    own.difference(&others).count()
}

fn shelves_added_all(inst: &Instance, sol: &Solution) -> Vec<usize> {
    let mut n = vec![0; inst.n_orders()];
    for b in &sol.batches {
        for &o in &b.orders {
            n[o] = shelves_added(inst, b, o);
        }
    }
    n
}

/// Re-assigns the batch's items to shelves, sampling shelves in proportion
/// to how many of the still unassigned items they can serve, then polishes
/// the tour. Stock may go negative; banned slots are never used.
pub fn optimize_shelves(
    ctx: &SearchCtx<'_>,
    batch: &mut Batch,
    stock: &mut StockView,
    rng: &mut impl Rng,
) -> Result<(), SolveError> {
    let inst = ctx.inst;
    stock.release(batch);
    batch.picks.clear();
    batch.route.clear();
    let mut open: Vec<usize> = batch.items(inst).collect();
    let mut chosen = Vec::new();
    let mut cover = vec![0.0; inst.n_shelves()];
    while !open.is_empty() {
        cover.iter_mut().for_each(|c| *c = 0.0);
        for &p in &open {
            for &slot in inst.sku_slots(inst.item_sku(p)) {
                if !stock.banned[slot] {
                    cover[inst.slots()[slot].shelf] += 1.0;
                }
            }
        }
        if cover.iter().all(|&c| c == 0.0) {
            return Err(SolveError::Uncoverable(inst.items()[open[0]].key()));
        }
        let s = sample_index(&cover, rng);
        open.retain(|&p| match inst.slot_of(inst.item_sku(p), s) {
            Some(slot) if !stock.banned[slot] => {
                batch.picks.insert(p, slot);
                stock.remaining[slot] -= 1;
                false
            }
            _ => true,
        });
        chosen.push(s);
    }
    batch.route = cheapest_insertion_order(inst, batch.depot, &chosen);
    if batch.route.len() >= 3 {
        batch.route = polish_route(ctx, batch.depot, &batch.route, rng);
    }
    Ok(())
}

/// Orders a shelf set by inserting each shelf where it adds the least.
pub fn cheapest_insertion_order(inst: &Instance, depot: usize, shelves: &[usize]) -> Vec<usize> {
    let d = inst.depot_loc(depot);
    let mut route: Vec<usize> = Vec::with_capacity(shelves.len());
    for &s in shelves {
        let mut best = (0, f64::INFINITY);
        for j in 0..=route.len() {
            let prev = if j == 0 { d } else { route[j - 1] };
            let next = if j == route.len() { d } else { route[j] };
            let add = inst.dist(prev, s) + inst.dist(s, next) - inst.dist(prev, next);
            if add < best.1 {
                best = (j, add);
            }
        }
        route.insert(best.0, s);
    }
    route
}

/// Tour-level adaptive local search over 2-opt, swap and relocate.
pub fn polish_route(ctx: &SearchCtx<'_>, depot: usize, route: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let inst = ctx.inst;
    let len = |r: &Vec<usize>| route_length(inst, depot, r);
    type R<'r, G> = Operator<'r, Vec<usize>, G, std::convert::Infallible>;
    let mut op_2opt = |r: &Vec<usize>, g: &mut _| {
        let n = two_opt(r, g);
        let f = len(&n);
        Ok((n, f))
    };
    let mut op_swap = |r: &Vec<usize>, g: &mut _| {
        let n = swap_nodes(r, g);
        let f = len(&n);
        Ok((n, f))
    };
    let mut op_relocate = |r: &Vec<usize>, g: &mut _| {
        let n = relocate_node(r, g);
        let f = len(&n);
        Ok((n, f))
    };
    let mut ops: [&mut R<'_, _>; 3] = [&mut op_2opt, &mut op_swap, &mut op_relocate];
    let start = route.to_vec();
    let f0 = len(&start);
    match adaptive_local_search(start, f0, ctx.tour_t0, &mut ops, ctx.als, rng) {
        Ok(out) => out.best,
        Err(never) => match never {},
    }
}

/// Re-optimizes batches until no slot is over-used. Each round bans the most
/// over-used slot, re-assigns every batch picking there and keeps the one
/// with the smallest length increase. If rounds run out, the offending
/// batches are rebuilt greedily from the remaining stock.
pub fn repair_negative_stock(ctx: &SearchCtx<'_>, sol: &mut Solution, rng: &mut impl Rng) -> Result<(), SolveError> {
    let inst = ctx.inst;
    let mut stock = StockView::of(sol, inst);
    let initial = stock.remaining.iter().filter(|&&r| r < 0).count();
    if initial == 0 {
        return Ok(());
    }
    for _ in 0..4 * initial + 4 {
        let Some(slot) = most_negative(&stock.remaining) else {
            return Ok(());
        };
        stock.banned[slot] = true;
        let mut best: Option<(f64, usize, Batch, StockView)> = None;
        for (bi, b) in sol.batches.iter().enumerate() {
            if !b.picks.values().any(|&s| s == slot) {
                continue;
            }
            let mut trial = b.clone();
            let mut trial_stock = stock.clone();
            if optimize_shelves(ctx, &mut trial, &mut trial_stock, rng).is_err() {
                continue;
            }
            let delta = trial.length(inst) - b.length(inst);
            if best.as_ref().is_none_or(|(d, ..)| delta < *d) {
                best = Some((delta, bi, trial, trial_stock));
            }
        }
        stock.banned[slot] = false;
        let Some((_, bi, trial, mut trial_stock)) = best else {
            break;
        };
        trial_stock.banned[slot] = false;
        sol.batches[bi] = trial;
        stock = trial_stock;
    }
    if most_negative(&stock.remaining).is_none() {
        return Ok(());
    }
    greedy_rebuild_over_used(inst, sol, &mut stock)
}

fn most_negative(remaining: &[i64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in remaining.iter().enumerate() {
        if r < 0 && best.is_none_or(|b| r < remaining[b]) {
            best = Some(i);
        }
    }
    best
}

fn greedy_rebuild_over_used(inst: &Instance, sol: &mut Solution, stock: &mut StockView) -> Result<(), SolveError> {
    let over: Vec<bool> = stock.remaining.iter().map(|&r| r < 0).collect();
    let hit: Vec<usize> =
        (0..sol.batches.len()).filter(|&i| sol.batches[i].picks.values().any(|&s| over[s])).collect();
    for &i in &hit {
        let b = &mut sol.batches[i];
        stock.release(b);
        b.picks.clear();
        b.route.clear();
    }
    for &i in &hit {
        let orders = sol.batches[i].orders.clone();
        for o in orders {
            greedy_tour_insert(inst, &mut sol.batches[i], o, stock)?;
        }
    }
    Ok(())
}

/// Moves up to `kappa` orders, sampled by the shelves they add, into other
/// batches with room, preferring batches whose tours already pass shelves
/// stocking the order's SKUs.
pub fn move_orders(ctx: &SearchCtx<'_>, x: &Solution, kappa: usize, rng: &mut impl Rng) -> Result<Solution, SolveError> {
    let inst = ctx.inst;
    let mut sol = x.clone();
    let n_o: Vec<f64> = shelves_added_all(inst, &sol).into_iter().map(|n| n as f64).collect();
    let picked = sample_without_replacement(&n_o, kappa.min(inst.n_orders()), rng);
    let mut touched = BTreeSet::new();
    for o in picked {
        let ob = sol.order_batch(inst.n_orders());
        let old = ob[o];
        let w = inst.order_weight(o);
        let cand: Vec<usize> = (0..sol.batches.len())
            .filter(|&b| b != old && sol.batches[b].weight + w <= inst.capacity_c + WEIGHT_EPS)
            .collect();
        if cand.is_empty() {
            continue;
        }
        let overlap: Vec<f64> = cand
            .iter()
            .map(|&b| {
                let route = &sol.batches[b].route;
                inst.order_items(o)
                    .filter(|&p| route.iter().any(|&s| inst.slot_of(inst.item_sku(p), s).is_some()))
                    .count() as f64
            })
            .collect();
        let new = cand[sample_index(&overlap, rng)];
        sol.batches[old].remove_order(o, inst);
        sol.batches[new].add_order(o, inst);
        touched.insert(old);
        touched.insert(new);
    }
    finish(ctx, sol, &touched, rng)
}

/// Swaps up to `kappa` order pairs between batches when both sides stay
/// within capacity.
pub fn exchange_orders(ctx: &SearchCtx<'_>, x: &Solution, kappa: usize, rng: &mut impl Rng) -> Result<Solution, SolveError> {
    let inst = ctx.inst;
    let c = inst.capacity_c + WEIGHT_EPS;
    let mut sol = x.clone();
    let n_o = shelves_added_all(inst, &sol);
    let ob = sol.order_batch(inst.n_orders());
    let fits = |sol: &Solution, ob: &[usize], i: usize, j: usize| {
        let (bi, bj) = (ob[i], ob[j]);
        let (wi, wj) = (inst.order_weight(i), inst.order_weight(j));
        bi != bj && sol.batches[bi].weight - wi + wj <= c && sol.batches[bj].weight - wj + wi <= c
    };
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for i in 0..inst.n_orders() {
        for j in i + 1..inst.n_orders() {
            if fits(&sol, &ob, i, j) {
                pairs.push((i, j));
                weights.push((n_o[i] + n_o[j]) as f64);
            }
        }
    }
    if pairs.is_empty() {
        return Ok(sol);
    }
    let mut touched = BTreeSet::new();
    for _ in 0..kappa {
        let (i, j) = pairs[sample_index(&weights, rng)];
        let ob = sol.order_batch(inst.n_orders());
        // earlier swaps may have changed either batch
        if !fits(&sol, &ob, i, j) {
            continue;
        }
        let (bi, bj) = (ob[i], ob[j]);
        sol.batches[bi].remove_order(i, inst);
        sol.batches[bj].remove_order(j, inst);
        sol.batches[bi].add_order(j, inst);
        sol.batches[bj].add_order(i, inst);
        touched.insert(bi);
        touched.insert(bj);
    }
    finish(ctx, sol, &touched, rng)
}

fn finish(ctx: &SearchCtx<'_>, mut sol: Solution, touched: &BTreeSet<usize>, rng: &mut impl Rng) -> Result<Solution, SolveError> {
    let mut stock = StockView::of(&sol, ctx.inst);
    for &b in touched {
        optimize_shelves(ctx, &mut sol.batches[b], &mut stock, rng)?;
    }
    sol.remove_empty();
    repair_negative_stock(ctx, &mut sol, rng)?;
    Ok(sol)
}

/// Draws `k` distinct indices with probability proportional to `weights`,
/// falling back to uniform draws once the positive weights are used up.
pub fn sample_without_replacement(weights: &[f64], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut taken = vec![false; w.len()];
    let mut out = Vec::with_capacity(k);
    while out.len() < k.min(w.len()) {
        let i = if w.iter().any(|&v| v > 0.0) {
            sample_index(&w, rng)
        } else {
            let free: Vec<usize> = (0..w.len()).filter(|&i| !taken[i]).collect();
            free[index::sample(rng, free.len(), 1).index(0)]
        };
        taken[i] = true;
        w[i] = 0.0;
        out.push(i);
    }
    out
}
