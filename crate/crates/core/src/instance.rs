//! Problem data: SKUs, orders, shelves with stock, depots and the cobot
//! payload, plus the seeded instance generator and the JSON file format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{all_pairs_shortest, build_layout_graph, DistanceMatrix, LayoutError, LayoutSpec};

/// Absolute slack used in every weight comparison.
pub const WEIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("cannot parse instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, InstanceError> {
    Err(InstanceError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sku {
    pub id: String,
    pub unit_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLine {
    pub sku_id: String,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    pub lines: Vec<OrderLine>,
}

impl Order {
    pub fn new(id: impl Into<String>, lines: &[(&str, u32)]) -> Self {
        Self {
            id: id.into(),
            lines: lines
                .iter()
                .map(|&(s, q)| OrderLine { sku_id: s.to_string(), quantity: q })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shelf {
    pub id: String,
    /// Node id in the layout graph.
    pub node: usize,
    pub stock: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depot {
    pub id: String,
    pub node: usize,
}

/// One physical unit on a picking list.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    /// SKU id followed by the unit index, e.g. `a2`.
    pub id: String,
    pub order_id: String,
    pub sku_id: String,
    pub weight: f64,
}

impl Item {
    /// Identifier unique across the whole instance.
    pub fn key(&self) -> String {
        format!("{}:{}", self.order_id, self.id)
    }
}

/// Expands an order into one item per ordered unit.
pub fn expand_picking_list(order: &Order, skus: &[Sku]) -> Vec<Item> {
    let weight_of: HashMap<&str, f64> = skus.iter().map(|s| (s.id.as_str(), s.unit_weight)).collect();
    let mut items = Vec::new();
    for line in &order.lines {
        let weight = weight_of.get(line.sku_id.as_str()).copied().unwrap_or(f64::NAN);
        for unit in 1..=line.quantity {
            items.push(Item {
                id: format!("{}{}", line.sku_id, unit),
                order_id: order.id.clone(),
                sku_id: line.sku_id.clone(),
                weight,
            });
        }
    }
    items
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoragePolicy {
    Dedicated,
    /// Every SKU spread over exactly `k` shelves.
    Mixed(usize),
}

impl fmt::Display for StoragePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoragePolicy::Dedicated => write!(f, "dedicated"),
            StoragePolicy::Mixed(k) => write!(f, "mixed({k})"),
        }
    }
}

impl FromStr for StoragePolicy {
    type Err = String;

    /// Accepts `dedicated`, `mixed(5)` and `mixed5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "dedicated" {
            return Ok(StoragePolicy::Dedicated);
        }
        let k = s
            .strip_prefix("mixed")
            .map(|r| r.trim_start_matches('(').trim_end_matches(')'))
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| format!("unknown storage policy {s:?}, expected dedicated or mixed(k)"))?;
        Ok(StoragePolicy::Mixed(k))
    }
}

impl Serialize for StoragePolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StoragePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<StoragePolicy>,
}

/// Units of one SKU held by one shelf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub sku: usize,
    pub shelf: usize,
    pub units: u32,
}

/// A validated problem instance.
///
/// Distance matrix rows are the shelves in order followed by the depots.
#[derive(Debug, Clone)]
pub struct Instance {
    pub layout: LayoutSpec,
    pub shelves: Vec<Shelf>,
    pub depots: Vec<Depot>,
    pub orders: Vec<Order>,
    pub skus: Vec<Sku>,
    pub capacity_c: f64,
    pub distance: DistanceMatrix,
    pub meta: InstanceMeta,
    explicit_distances: bool,

    items: Vec<Item>,
    item_sku: Vec<usize>,
    order_items: Vec<Range<usize>>,
    order_weight: Vec<f64>,
    sku_index: HashMap<String, usize>,
    slots: Vec<Slot>,
    sku_slots: Vec<Vec<usize>>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout
            && self.shelves == other.shelves
            && self.depots == other.depots
            && self.orders == other.orders
            && self.skus == other.skus
            && self.capacity_c == other.capacity_c
            && self.distance == other.distance
            && self.meta == other.meta
    }
}

impl Instance {
    /// Builds an instance whose distances come from the layout graph.
    pub fn new(
        layout: LayoutSpec,
        shelves: Vec<Shelf>,
        depots: Vec<Depot>,
        orders: Vec<Order>,
        skus: Vec<Sku>,
        capacity_c: f64,
        meta: InstanceMeta,
    ) -> Result<Self, InstanceError> {
        let graph = build_layout_graph(&layout)?;
        let nodes: Vec<usize> = shelves.iter().map(|s| s.node).chain(depots.iter().map(|d| d.node)).collect();
        let data = all_pairs_shortest(&graph, &nodes)?;
        let labels = shelves.iter().map(|s| s.id.clone()).chain(depots.iter().map(|d| d.id.clone())).collect();
        Self::assemble(layout, shelves, depots, orders, skus, capacity_c, DistanceMatrix::new(labels, data), meta, false)
    }

    /// Builds an instance on an explicit distance matrix (shelves then depots).
    pub fn from_parts(
        shelves: Vec<Shelf>,
        depots: Vec<Depot>,
        orders: Vec<Order>,
        skus: Vec<Sku>,
        capacity_c: f64,
        distance: DistanceMatrix,
    ) -> Result<Self, InstanceError> {
        let layout = LayoutSpec::new(1, 2 * shelves.len().max(1), 0, depots.len());
        Self::assemble(layout, shelves, depots, orders, skus, capacity_c, distance, InstanceMeta::default(), true)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        layout: LayoutSpec,
        shelves: Vec<Shelf>,
        depots: Vec<Depot>,
        orders: Vec<Order>,
        skus: Vec<Sku>,
        capacity_c: f64,
        distance: DistanceMatrix,
        meta: InstanceMeta,
        explicit_distances: bool,
    ) -> Result<Self, InstanceError> {
        if !(capacity_c > 0.0 && capacity_c.is_finite()) {
            return invalid(format!("capacity_c must be positive, got {capacity_c}"));
        }
        if depots.is_empty() {
            return invalid("at least one depot is required");
        }
        if distance.len() != shelves.len() + depots.len() {
            return invalid(format!(
                "distance matrix has {} rows, expected {} shelves + {} depots",
                distance.len(),
                shelves.len(),
                depots.len()
            ));
        }
        unique_ids(skus.iter().map(|s| &s.id), "sku")?;
        unique_ids(shelves.iter().map(|s| &s.id), "shelf")?;
        unique_ids(depots.iter().map(|s| &s.id), "depot")?;
        unique_ids(orders.iter().map(|s| &s.id), "order")?;

        let mut sku_index = HashMap::new();
        for (i, s) in skus.iter().enumerate() {
            if !(s.unit_weight > 0.0 && s.unit_weight.is_finite()) {
                return invalid(format!("sku {} has non-positive weight {}", s.id, s.unit_weight));
            }
            sku_index.insert(s.id.clone(), i);
        }

        let shelf_nodes: BTreeSet<usize> = shelves.iter().map(|s| s.node).collect();
        for d in &depots {
            if shelf_nodes.contains(&d.node) {
                return invalid(format!("depot {} shares node {} with a shelf", d.id, d.node));
            }
        }

        let mut slots = Vec::new();
        let mut sku_slots = vec![Vec::new(); skus.len()];
        let mut supply = vec![0u64; skus.len()];
        for (si, shelf) in shelves.iter().enumerate() {
            for (sku, &units) in &shelf.stock {
                let Some(&k) = sku_index.get(sku) else {
                    return invalid(format!("shelf {} stocks unknown sku {sku}", shelf.id));
                };
                if units > 0 {
                    sku_slots[k].push(slots.len());
                    slots.push(Slot { sku: k, shelf: si, units });
                    supply[k] += u64::from(units);
                }
            }
        }

        let mut items = Vec::new();
        let mut item_sku = Vec::new();
        let mut order_items = Vec::new();
        let mut order_weight = Vec::new();
        let mut demand = vec![0u64; skus.len()];
        for o in &orders {
            if o.lines.is_empty() {
                return invalid(format!("order {} has no lines", o.id));
            }
            let start = items.len();
            for line in &o.lines {
                let Some(&k) = sku_index.get(&line.sku_id) else {
                    return invalid(format!("order {} references unknown sku {}", o.id, line.sku_id));
                };
                if line.quantity == 0 {
                    return invalid(format!("order {} line {} has zero quantity", o.id, line.sku_id));
                }
                demand[k] += u64::from(line.quantity);
            }
            for item in expand_picking_list(o, &skus) {
                item_sku.push(sku_index[&item.sku_id]);
                items.push(item);
            }
            let w: f64 = items[start..].iter().map(|p| p.weight).sum();
            if w > capacity_c + WEIGHT_EPS {
                return invalid(format!("order {} weighs {w:.3} kg, above the capacity {capacity_c} kg", o.id));
            }
            order_items.push(start..items.len());
            order_weight.push(w);
        }
        unique_ids(items.iter().map(|p| p.key()).collect::<Vec<_>>().iter(), "item")?;
        for (k, s) in skus.iter().enumerate() {
            if demand[k] > supply[k] {
                return invalid(format!("sku {} has stock {} below ordered quantity {}", s.id, supply[k], demand[k]));
            }
        }

        Ok(Self {
            layout,
            shelves,
            depots,
            orders,
            skus,
            capacity_c,
            distance,
            meta,
            explicit_distances,
            items,
            item_sku,
            order_items,
            order_weight,
            sku_index,
            slots,
            sku_slots,
        })
    }

    pub fn n_shelves(&self) -> usize {
        self.shelves.len()
    }

    pub fn n_depots(&self) -> usize {
        self.depots.len()
    }

    pub fn n_orders(&self) -> usize {
        self.orders.len()
    }

    /// Matrix index of depot `d`.
    #[inline]
    pub fn depot_loc(&self, d: usize) -> usize {
        self.shelves.len() + d
    }

    /// Distance between matrix locations (shelves then depots).
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.distance.get(a, b)
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item_sku(&self, item: usize) -> usize {
        self.item_sku[item]
    }

    pub fn order_items(&self, o: usize) -> Range<usize> {
        self.order_items[o].clone()
    }

    pub fn order_weight(&self, o: usize) -> f64 {
        self.order_weight[o]
    }

    pub fn total_weight(&self) -> f64 {
        self.order_weight.iter().sum()
    }

    pub fn sku_index(&self, id: &str) -> Option<usize> {
        self.sku_index.get(id).copied()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Slots stocking `sku` with at least one unit.
    pub fn sku_slots(&self, sku: usize) -> &[usize] {
        &self.sku_slots[sku]
    }

    /// Slot index of `(sku, shelf)`, if that shelf stocks the SKU.
    pub fn slot_of(&self, sku: usize, shelf: usize) -> Option<usize> {
        self.sku_slots[sku].iter().copied().find(|&s| self.slots[s].shelf == shelf)
    }

    /// Item index of the order owning it.
    pub fn item_order(&self, item: usize) -> usize {
        self.order_items.partition_point(|r| r.end <= item)
    }

    /// Shelves holding at least one unit of an ordered SKU.
    pub fn relevant_shelves(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for &k in &self.item_sku {
            for &s in &self.sku_slots[k] {
                set.insert(self.slots[s].shelf);
            }
        }
        set.into_iter().collect()
    }

    pub fn has_explicit_distances(&self) -> bool {
        self.explicit_distances
    }
}

fn unique_ids<'a, S: AsRef<str> + 'a>(ids: impl Iterator<Item = &'a S>, what: &str) -> Result<(), InstanceError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_ref().to_string()) {
            return invalid(format!("duplicate {what} id {}", id.as_ref()));
        }
    }
    Ok(())
}

/// Lower bound on batches per depot when load is spread evenly over depots.
pub fn min_batches_per_depot(instance: &Instance) -> usize {
    batch_bound(instance.total_weight(), instance.n_depots(), instance.capacity_c)
}

/// `⌈total / (depots · c)⌉`, tolerant of float noise at exact multiples.
pub fn batch_bound(total_weight: f64, depots: usize, capacity: f64) -> usize {
    let r = total_weight / (depots as f64 * capacity);
    (r - WEIGHT_EPS).ceil().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// generator

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub aisles: usize,
    pub shelves_per_aisle: usize,
    pub cross_aisles: usize,
    pub n_depots: usize,
    pub n_orders: usize,
    pub avg_order_lines: f64,
    pub storage_policy: StoragePolicy,
    /// Defaults to the shelf count when `None`.
    pub n_skus: Option<usize>,
    pub capacity_c: f64,
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            aisles: 2,
            shelves_per_aisle: 12,
            cross_aisles: 0,
            n_depots: 2,
            n_orders: 10,
            avg_order_lines: 1.6,
            storage_policy: StoragePolicy::Dedicated,
            n_skus: None,
            capacity_c: 18.0,
            weight_range: (0.5, 3.0),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn with_layout(mut self, aisles: usize, shelves_per_aisle: usize, cross_aisles: usize) -> Self {
        self.aisles = aisles;
        self.shelves_per_aisle = shelves_per_aisle;
        self.cross_aisles = cross_aisles;
        self
    }

    pub fn with_depots(mut self, n: usize) -> Self {
        self.n_depots = n;
        self
    }

    pub fn with_orders(mut self, n: usize) -> Self {
        self.n_orders = n;
        self
    }

    pub fn with_avg_lines(mut self, avg: f64) -> Self {
        self.avg_order_lines = avg;
        self
    }

    pub fn with_policy(mut self, policy: StoragePolicy) -> Self {
        self.storage_policy = policy;
        self
    }

    pub fn with_skus(mut self, n: usize) -> Self {
        self.n_skus = Some(n);
        self
    }

    pub fn with_capacity(mut self, c: f64) -> Self {
        self.capacity_c = c;
        self
    }

    pub fn with_weight_range(mut self, lo: f64, hi: f64) -> Self {
        self.weight_range = (lo, hi);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn layout(&self) -> LayoutSpec {
        LayoutSpec::new(self.aisles, self.shelves_per_aisle, self.cross_aisles, self.n_depots)
    }

    pub fn n_skus(&self) -> usize {
        self.n_skus.unwrap_or(self.aisles * self.shelves_per_aisle)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let bad = |m: String| Err(InstanceError::Config(m));
        self.layout().validate()?;
        let n_skus = self.n_skus();
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("weight range [{lo}, {hi}] must be positive and ordered"));
        }
        if !(self.capacity_c > 0.0) {
            return bad(format!("capacity {} must be positive", self.capacity_c));
        }
        if hi > self.capacity_c {
            return bad(format!("largest item weight {hi} exceeds capacity {}", self.capacity_c));
        }
        if n_skus == 0 {
            return bad("at least one sku is required".into());
        }
        if !(1.0..=10.0).contains(&self.avg_order_lines) || self.avg_order_lines > n_skus.min(10) as f64 {
            return bad(format!(
                "average order lines {} must lie in [1, {}]",
                self.avg_order_lines,
                n_skus.min(10)
            ));
        }
        let shelves = self.aisles * self.shelves_per_aisle;
        match self.storage_policy {
            StoragePolicy::Dedicated if n_skus > shelves => {
                bad(format!("dedicated storage needs one shelf per sku: {n_skus} skus, {shelves} shelves"))
            }
            StoragePolicy::Mixed(k) if k < 2 => bad(format!("mixed(k) needs k >= 2, got {k}")),
            StoragePolicy::Mixed(k) if k > shelves => {
                bad(format!("mixed({k}) needs at least {k} shelves, layout has {shelves}"))
            }
            _ => Ok(()),
        }
    }
}

/// Ratio `r` of a geometric law on `1..=kmax` (P(k) ∝ r^(k-1)) with the given mean.
fn line_count_ratio(mean: f64, kmax: usize) -> f64 {
    let mean_of = |r: f64| {
        let (mut num, mut den, mut p) = (0.0, 0.0, 1.0);
        for k in 1..=kmax {
            num += k as f64 * p;
            den += p;
            p *= r;
        }
        num / den
    };
    if mean <= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1e3_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Generates an instance. Draw order: SKU weights, orders, storage.
pub fn generate_instance(config: &GenConfig) -> Result<Instance, InstanceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = config.layout();
    let graph = build_layout_graph(&layout)?;
    let n_shelves = layout.n_shelves();
    let n_skus = config.n_skus();

    let (lo, hi) = config.weight_range;
    let skus: Vec<Sku> = (0..n_skus)
        .map(|i| Sku { id: format!("k{i}"), unit_weight: round3(rng.gen_range(lo..=hi)).max(0.001) })
        .collect();

    let kmax = n_skus.min(10);
    let r = line_count_ratio(config.avg_order_lines, kmax);
    let mut line_probs = Vec::with_capacity(kmax);
    let mut p = 1.0;
    for _ in 0..kmax {
        line_probs.push(p);
        p *= r;
    }
    let total: f64 = line_probs.iter().sum();
    let mean_w = 0.5 * (lo + hi);
    let p_two = ((config.capacity_c / (config.avg_order_lines * mean_w) - 1.0) / 2.0).clamp(0.0, 0.3);

    let sku_ids: Vec<usize> = (0..n_skus).collect();
    let mut orders = Vec::with_capacity(config.n_orders);
    let mut demand = vec![0u32; n_skus];
    for o in 0..config.n_orders {
        let mut attempts = 0;
        let lines = loop {
            attempts += 1;
            if attempts > 10_000 {
                return Err(InstanceError::Config(format!(
                    "could not draw order {o} below capacity {} kg",
                    config.capacity_c
                )));
            }
            let mut u = rng.gen::<f64>() * total;
            let mut n_lines = kmax;
            for (k, &lp) in line_probs.iter().enumerate() {
                if u < lp {
                    n_lines = k + 1;
                    break;
                }
                u -= lp;
            }
            let chosen: Vec<usize> = sku_ids.choose_multiple(&mut rng, n_lines).copied().collect();
            let lines: Vec<(usize, u32)> = chosen.into_iter().map(|k| (k, 1 + u32::from(rng.gen_bool(p_two)))).collect();
            let w: f64 = lines.iter().map(|&(k, q)| skus[k].unit_weight * f64::from(q)).sum();
            if w <= config.capacity_c + WEIGHT_EPS {
                break lines;
            }
        };
        for &(k, q) in &lines {
            demand[k] += q;
        }
        orders.push(Order {
            id: format!("o{o}"),
            lines: lines
                .into_iter()
                .map(|(k, q)| OrderLine { sku_id: skus[k].id.clone(), quantity: q })
                .collect(),
        });
    }

    let stock = assign_storage(config.storage_policy, &demand, n_shelves, &mut rng)?;
    let shelves: Vec<Shelf> = stock
        .into_iter()
        .enumerate()
        .map(|(s, units)| Shelf {
            id: format!("s{s}"),
            node: graph.shelf_nodes[s],
            stock: units.into_iter().map(|(k, n)| (skus[k].id.clone(), n)).collect(),
        })
        .collect();
    let depots = graph
        .depot_nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| Depot { id: format!("d{k}"), node })
        .collect();
    let meta = InstanceMeta { seed: Some(config.seed), policy: Some(config.storage_policy) };
    Instance::new(layout, shelves, depots, orders, skus, config.capacity_c, meta)
}

/// Places SKU units on shelves. `demand[k]` is the ordered quantity of SKU
/// `k`; the result maps every shelf to `(sku, units)` pairs.
///
/// Each ordered SKU receives `demand + ⌈demand/2⌉` units (at least one per
/// shelf it is spread over); unordered SKUs receive one unit per shelf.
pub fn assign_storage(
    policy: StoragePolicy,
    demand: &[u32],
    n_shelves: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BTreeMap<usize, u32>>, InstanceError> {
    let mut out = vec![BTreeMap::new(); n_shelves];
    let spread = match policy {
        StoragePolicy::Dedicated => 1,
        StoragePolicy::Mixed(k) => k,
    };
    if let StoragePolicy::Mixed(k) = policy {
        if k < 2 {
            return Err(InstanceError::Config(format!("mixed(k) needs k >= 2, got {k}")));
        }
    }
    if spread > n_shelves {
        return Err(InstanceError::Config(format!("cannot spread a sku over {spread} of {n_shelves} shelves")));
    }
    if policy == StoragePolicy::Dedicated && demand.len() > n_shelves {
        return Err(InstanceError::Config(format!(
            "dedicated storage needs one shelf per sku: {} skus, {n_shelves} shelves",
            demand.len()
        )));
    }
    let mut shelf_ids: Vec<usize> = (0..n_shelves).collect();
    if policy == StoragePolicy::Dedicated {
        shelf_ids.shuffle(rng);
    }
    for (k, &d) in demand.iter().enumerate() {
        let units = if d == 0 { spread as u32 } else { (d + d.div_ceil(2)).max(spread as u32) };
        let shelves: Vec<usize> = match policy {
            StoragePolicy::Dedicated => vec![shelf_ids[k]],
            StoragePolicy::Mixed(m) => shelf_ids.choose_multiple(rng, m).copied().collect(),
        };
        let base = units / spread as u32;
        let extra = (units % spread as u32) as usize;
        for (i, &s) in shelves.iter().enumerate() {
            out[s].insert(k, base + u32::from(i < extra));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// file format

#[derive(Debug, Serialize, Deserialize)]
struct FileLayout {
    aisles: usize,
    shelves_per_aisle: usize,
    cross_aisles: usize,
    depot_nodes: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileSku {
    id: String,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileShelf {
    id: String,
    node: usize,
    stock: BTreeMap<String, i64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileLine {
    sku: String,
    qty: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileOrder {
    id: String,
    lines: Vec<FileLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default)]
    meta: InstanceMeta,
    layout: FileLayout,
    skus: Vec<FileSku>,
    shelves: Vec<FileShelf>,
    orders: Vec<FileOrder>,
    capacity_c: f64,
    /// Explicit matrix over shelves then depots; overrides the layout graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distances: Option<Vec<Vec<f64>>>,
}

impl Instance {
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            meta: self.meta.clone(),
            layout: FileLayout {
                aisles: self.layout.aisles,
                shelves_per_aisle: self.layout.shelves_per_aisle,
                cross_aisles: self.layout.cross_aisles,
                depot_nodes: self.depots.iter().map(|d| d.node).collect(),
            },
            skus: self.skus.iter().map(|s| FileSku { id: s.id.clone(), weight: s.unit_weight }).collect(),
            shelves: self
                .shelves
                .iter()
                .map(|s| FileShelf {
                    id: s.id.clone(),
                    node: s.node,
                    stock: s.stock.iter().map(|(k, &v)| (k.clone(), i64::from(v))).collect(),
                })
                .collect(),
            orders: self
                .orders
                .iter()
                .map(|o| FileOrder {
                    id: o.id.clone(),
                    lines: o.lines.iter().map(|l| FileLine { sku: l.sku_id.clone(), qty: i64::from(l.quantity) }).collect(),
                })
                .collect(),
            capacity_c: self.capacity_c,
            distances: self.explicit_distances.then(|| {
                let n = self.distance.len();
                (0..n).map(|i| (0..n).map(|j| self.distance.get(i, j)).collect()).collect()
            }),
        };
        serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let skus = file.skus.into_iter().map(|s| Sku { id: s.id, unit_weight: s.weight }).collect();
        let mut shelves = Vec::with_capacity(file.shelves.len());
        for s in file.shelves {
            let mut stock = BTreeMap::new();
            for (k, v) in s.stock {
                let units = u32::try_from(v)
                    .or_else(|_| invalid(format!("shelf {} has invalid stock {v} for sku {k}", s.id)))?;
                stock.insert(k, units);
            }
            shelves.push(Shelf { id: s.id, node: s.node, stock });
        }
        let mut orders = Vec::with_capacity(file.orders.len());
        for o in file.orders {
            let mut lines = Vec::with_capacity(o.lines.len());
            for l in o.lines {
                let quantity = u32::try_from(l.qty)
                    .or_else(|_| invalid(format!("order {} has invalid quantity {} for sku {}", o.id, l.qty, l.sku)))?;
                lines.push(OrderLine { sku_id: l.sku, quantity });
            }
            orders.push(Order { id: o.id, lines });
        }
        let depots: Vec<Depot> = file
            .layout
            .depot_nodes
            .iter()
            .enumerate()
            .map(|(k, &node)| Depot { id: format!("d{k}"), node })
            .collect();
        let layout = LayoutSpec::new(
            file.layout.aisles,
            file.layout.shelves_per_aisle,
            file.layout.cross_aisles,
            depots.len(),
        );
        match file.distances {
            Some(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return invalid("distances must be a square matrix");
                }
                let labels = shelves.iter().map(|s| s.id.clone()).chain(depots.iter().map(|d| d.id.clone())).collect();
                let matrix = DistanceMatrix::new(labels_checked(labels, n)?, rows.into_iter().flatten().collect());
                Self::assemble(layout, shelves, depots, orders, skus, file.capacity_c, matrix, file.meta, true)
            }
            None => Self::new(layout, shelves, depots, orders, skus, file.capacity_c, file.meta),
        }
    }
}

fn labels_checked(labels: Vec<String>, n: usize) -> Result<Vec<String>, InstanceError> {
    if labels.len() != n {
        return invalid(format!("distances has {n} rows, expected {} shelves + depots", labels.len()));
    }
    Ok(labels)
}

pub fn write_instance(instance: &Instance, path: &Path) -> Result<(), InstanceError> {
    std::fs::write(path, instance.to_json() + "\n")
        .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })
}

pub fn read_instance(path: &Path) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
    Instance::from_json(&text)
}
