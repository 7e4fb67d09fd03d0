//! The three-index and two-commodity flow formulations as explicit linear
//! models, an LP-format writer and reader, and a row-by-row evaluator for
//! candidate assignments.

mod lp;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::vns::Solution;

pub use lp::{read_lp, write_lp, write_lp_file};

/// Largest shelf count for which subtour rows are enumerated by default.
pub const SUBTOUR_LIMIT: usize = 12;

/// Absolute tolerance used by the evaluator.
pub const EVAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("three-index model needs one subtour row per shelf subset; {shelves} shelves exceed the limit of {limit}")]
    SubtourLimit { shelves: usize, limit: usize },
    #[error("two model names map to {0}; rename ids so they differ after sanitizing")]
    NameClash(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("depot {depot} runs {batches} batches but the model allows {allowed}")]
    TooManyBatches { depot: String, batches: usize, allowed: usize },
    #[error("LP parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    ThreeIndex,
    TwoCommodity,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::ThreeIndex => "three",
            Formulation::TwoCommodity => "two",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Default)]
pub struct ModelOptions {
    pub subtour_limit: Option<usize>,
    /// Orders batches of a depot by the index of their first shelf.
    pub symmetry_breaking: bool,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub formulation: Formulation,
    pub batches_per_depot: usize,
    pub vars: Vec<Variable>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    index: HashMap<String, usize>,
}

impl MilpModel {
    fn new(formulation: Formulation, batches_per_depot: usize) -> Self {
        Self { formulation, batches_per_depot, vars: Vec::new(), objective: Vec::new(), rows: Vec::new(), index: HashMap::new() }
    }

    fn add_var(&mut self, name: String, kind: VarKind) -> Result<usize, MilpError> {
        if self.index.contains_key(&name) {
            return Err(MilpError::NameClash(name));
        }
        let i = self.vars.len();
        self.index.insert(name.clone(), i);
        self.vars.push(Variable { name, kind });
        Ok(i)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn v(&self, name: &str) -> usize {
        self.index[name]
    }

    fn push_row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(!terms.is_empty(), "row {name} has no terms");
        self.rows.push(Row { name, terms, sense, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Rows whose name starts with `prefix`.
    pub fn rows_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.name.starts_with(prefix))
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    fn from_parts(formulation: Formulation, batches_per_depot: usize, vars: Vec<Variable>, objective: Vec<(usize, f64)>, rows: Vec<Row>) -> Self {
        let index = vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        Self { formulation, batches_per_depot, vars, objective, rows, index }
    }
}

/// Keeps ASCII letters, digits and underscores; everything else becomes `_`.
pub fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Node set and variable names shared by both formulations.
#[derive(Debug, Clone)]
pub struct Naming {
    /// Instance shelf index of each model shelf.
    pub shelves: Vec<usize>,
    /// Sanitized labels: shelves, real depots, copy depots.
    pub labels: Vec<String>,
    n_depots: usize,
    item_names: Vec<String>,
    order_names: Vec<String>,
    sku_names: Vec<String>,
}

impl Naming {
    pub fn new(inst: &Instance) -> Self {
        let shelves = inst.relevant_shelves();
        let mut labels: Vec<String> = shelves.iter().map(|&s| sanitize(&inst.shelves[s].id)).collect();
        labels.extend(inst.depots.iter().map(|d| sanitize(&d.id)));
        labels.extend(inst.depots.iter().map(|d| format!("{}c", sanitize(&d.id))));
        Self {
            shelves,
            labels,
            n_depots: inst.n_depots(),
            item_names: inst.items().iter().map(|p| format!("{}_{}", sanitize(&p.order_id), sanitize(&p.id))).collect(),
            order_names: inst.orders.iter().map(|o| sanitize(&o.id)).collect(),
            sku_names: inst.skus.iter().map(|k| sanitize(&k.id)).collect(),
        }
    }

    pub fn n_shelves(&self) -> usize {
        self.shelves.len()
    }

    /// Model node of real depot `d`.
    pub fn depot(&self, d: usize) -> usize {
        self.shelves.len() + d
    }

    /// Model node of the copy of depot `d`.
    pub fn copy(&self, d: usize) -> usize {
        self.shelves.len() + self.n_depots + d
    }

    pub fn is_shelf(&self, i: usize) -> bool {
        i < self.shelves.len()
    }

    /// Model node of an instance shelf, if it is relevant.
    pub fn shelf_node(&self, shelf: usize) -> Option<usize> {
        self.shelves.binary_search(&shelf).ok()
    }

    fn dist(&self, inst: &Instance, i: usize, j: usize) -> f64 {
        let loc = |k: usize| if k < self.shelves.len() { self.shelves[k] } else { inst.depot_loc((k - self.shelves.len()) % self.n_depots) };
        inst.dist(loc(i), loc(j))
    }

    pub fn x(&self, i: usize, j: usize, b: usize, d: usize) -> String {
        format!("x_{}_{}_{}_{}", self.labels[i], self.labels[j], b + 1, self.labels[self.depot(d)])
    }

    pub fn y(&self, i: usize, j: usize, b: usize, d: usize) -> String {
        format!("y_{}_{}_{}_{}", self.labels[i], self.labels[j], b + 1, self.labels[self.depot(d)])
    }

    pub fn z(&self, p: usize, s: usize, b: usize, d: usize) -> String {
        format!("z_{}_{}_{}_{}", self.item_names[p], self.labels[s], b + 1, self.labels[self.depot(d)])
    }

    pub fn omega(&self, o: usize, b: usize, d: usize) -> String {
        format!("omega_{}_{}_{}", self.order_names[o], b + 1, self.labels[self.depot(d)])
    }
}

/// Model shelves that can serve item `p`, with their slots.
fn item_shelves(inst: &Instance, naming: &Naming, p: usize) -> Vec<(usize, usize)> {
    inst.sku_slots(inst.item_sku(p))
        .iter()
        .filter_map(|&slot| naming.shelf_node(inst.slots()[slot].shelf).map(|s| (s, slot)))
        .collect()
}

struct Builder<'a> {
    inst: &'a Instance,
    n: Naming,
    m: MilpModel,
    nb: usize,
    nd: usize,
    ns: usize,
    /// `(shelf node, slot)` options per item.
    options: Vec<Vec<(usize, usize)>>,
}

impl<'a> Builder<'a> {
    fn new(inst: &'a Instance, formulation: Formulation, batches_per_depot: usize) -> Self {
        let n = Naming::new(inst);
        let options = (0..inst.items().len()).map(|p| item_shelves(inst, &n, p)).collect();
        Self {
            inst,
            ns: n.n_shelves(),
            nd: inst.n_depots(),
            n,
            m: MilpModel::new(formulation, batches_per_depot),
            nb: batches_per_depot,
            options,
        }
    }

    fn bd(&self) -> Vec<(usize, usize)> {
        (0..self.nd).flat_map(|d| (0..self.nb).map(move |b| (b, d))).collect()
    }

    /// Arcs of batch `(b, d)`: ordered node pairs, no depot-to-depot arcs.
    fn arcs(&self, d: usize) -> Vec<(usize, usize)> {
        let nodes: Vec<usize> = match self.m.formulation {
            Formulation::ThreeIndex => (0..self.ns).chain([self.n.depot(d)]).collect(),
            Formulation::TwoCommodity => (0..self.ns + self.nd).collect(),
        };
        let mut out = Vec::new();
        for &i in &nodes {
            for &j in &nodes {
                if i != j && (self.n.is_shelf(i) || self.n.is_shelf(j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn declare_common(&mut self) -> Result<(), MilpError> {
        for (b, d) in self.bd() {
            for (i, j) in self.arcs(d) {
                let v = self.m.add_var(self.n.x(i, j, b, d), VarKind::Binary)?;
                self.m.objective.push((v, self.n.dist(self.inst, i, j)));
            }
        }
        for p in 0..self.inst.items().len() {
            for (b, d) in self.bd() {
                for k in 0..self.options[p].len() {
                    let s = self.options[p][k].0;
                    self.m.add_var(self.n.z(p, s, b, d), VarKind::Binary)?;
                }
            }
        }
        for o in 0..self.inst.n_orders() {
            for (b, d) in self.bd() {
                self.m.add_var(self.n.omega(o, b, d), VarKind::Binary)?;
            }
        }
        Ok(())
    }

    fn x(&self, i: usize, j: usize, b: usize, d: usize) -> usize {
        self.m.v(&self.n.x(i, j, b, d))
    }

    fn z(&self, p: usize, s: usize, b: usize, d: usize) -> usize {
        self.m.v(&self.n.z(p, s, b, d))
    }

    fn y(&self, i: usize, j: usize, b: usize, d: usize) -> usize {
        self.m.v(&self.n.y(i, j, b, d))
    }

    /// Picked weight at shelf `s` in batch `(b, d)`, as terms.
    fn pick_weight_terms(&self, s: usize, b: usize, d: usize, scale: f64) -> Vec<(usize, f64)> {
        let mut t = Vec::new();
        for p in 0..self.inst.items().len() {
            if self.options[p].iter().any(|&(sh, _)| sh == s) {
                t.push((self.z(p, s, b, d), scale * self.inst.items()[p].weight));
            }
        }
        t
    }

    fn flow_rows(&mut self) {
        for (b, d) in self.bd() {
            let arcs = self.arcs(d);
            let mut nodes: Vec<usize> = arcs.iter().map(|a| a.0).collect();
            nodes.sort_unstable();
            nodes.dedup();
            for i in nodes {
                let out: Vec<(usize, f64)> = arcs.iter().filter(|a| a.0 == i).map(|&(_, j)| (self.x(i, j, b, d), 1.0)).collect();
                let inn: Vec<(usize, f64)> = arcs.iter().filter(|a| a.1 == i).map(|&(j, _)| (self.x(j, i, b, d), -1.0)).collect();
                let label = &self.n.labels[i];
                let name = format!("flow_{}_{}_{}", label, b + 1, self.n.labels[self.n.depot(d)]);
                let leave = format!("leave_{}_{}_{}", label, b + 1, self.n.labels[self.n.depot(d)]);
                let mut bal = out.clone();
                bal.extend(inn);
                self.m.push_row(name, bal, Sense::Eq, 0.0);
                self.m.push_row(leave, out, Sense::Le, 1.0);
            }
        }
    }

    fn batching_rows(&mut self) {
        let inst = self.inst;
        for p in 0..inst.items().len() {
            let mut t = Vec::new();
            for (b, d) in self.bd() {
                for &(s, _) in &self.options[p] {
                    t.push((self.z(p, s, b, d), 1.0));
                }
            }
            self.m.push_row(format!("pick_{}", self.n.item_names[p]), t, Sense::Eq, 1.0);
        }
        for o in 0..inst.n_orders() {
            for (b, d) in self.bd() {
                let mut t = Vec::new();
                for p in inst.order_items(o) {
                    for &(s, _) in &self.options[p] {
                        t.push((self.z(p, s, b, d), 1.0));
                    }
                }
                let n_items = inst.order_items(o).len() as f64;
                t.push((self.m.v(&self.n.omega(o, b, d)), -n_items));
                let name = format!("nosplit_{}_{}_{}", self.n.order_names[o], b + 1, self.n.labels[self.n.depot(d)]);
                self.m.push_row(name, t, Sense::Eq, 0.0);
            }
        }
        for p in 0..inst.items().len() {
            for (b, d) in self.bd() {
                for k in 0..self.options[p].len() {
                    let s = self.options[p][k].0;
                    let mut t = vec![(self.z(p, s, b, d), 1.0)];
                    for (i, j) in self.arcs(d) {
                        if i == s {
                            t.push((self.x(i, j, b, d), -1.0));
                        }
                    }
                    let name = format!("visit_{}_{}_{}_{}", self.n.item_names[p], self.n.labels[s], b + 1, self.n.labels[self.n.depot(d)]);
                    self.m.push_row(name, t, Sense::Le, 0.0);
                }
            }
        }
        // stock per (sku, shelf), summed over all items of that sku
        let mut stock: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for p in 0..inst.items().len() {
            for &(s, slot) in &self.options[p] {
                stock.entry((slot, s)).or_default().push(p);
            }
        }
        for ((slot, s), items) in stock {
            let mut t = Vec::new();
            for p in items {
                for (b, d) in self.bd() {
                    t.push((self.z(p, s, b, d), 1.0));
                }
            }
            let sku = inst.slots()[slot].sku;
            let name = format!("stock_{}_{}", self.n.sku_names[sku], self.n.labels[s]);
            self.m.push_row(name, t, Sense::Le, f64::from(inst.slots()[slot].units));
        }
    }

    fn capacity_rows(&mut self) {
        for (b, d) in self.bd() {
            let mut t = Vec::new();
            for s in 0..self.ns {
                t.extend(self.pick_weight_terms(s, b, d, 1.0));
            }
            let name = format!("cap_{}_{}", b + 1, self.n.labels[self.n.depot(d)]);
            self.m.push_row(name, t, Sense::Le, self.inst.capacity_c);
        }
    }

    fn subtour_rows(&mut self) {
        let ns = self.ns;
        for (b, d) in self.bd() {
            for mask in 1u32..(1u32 << ns) {
                let k = mask.count_ones() as usize;
                if k < 2 {
                    continue;
                }
                let members: Vec<usize> = (0..ns).filter(|&i| mask & (1 << i) != 0).collect();
                let mut t = Vec::new();
                for &i in &members {
                    for &j in &members {
                        if i != j {
                            t.push((self.x(i, j, b, d), 1.0));
                        }
                    }
                }
                let name = format!("sec_{}_{}_{}", mask, b + 1, self.n.labels[self.n.depot(d)]);
                self.m.push_row(name, t, Sense::Le, (k - 1) as f64);
            }
        }
    }

    fn symmetry_rows(&mut self) {
        for d in 0..self.nd {
            for b in 0..self.nb.saturating_sub(1) {
                let dn = self.n.depot(d);
                let mut t = Vec::new();
                for s in 0..self.ns {
                    t.push((self.x(dn, s, b, d), (s + 1) as f64));
                    t.push((self.x(dn, s, b + 1, d), -((s + 1) as f64)));
                }
                let name = format!("sym_{}_{}", b + 1, self.n.labels[dn]);
                self.m.push_row(name, t, Sense::Le, 0.0);
            }
        }
    }

    /// Flow-carrying node pairs of batch `(b, d)` over shelves, real and copy depots.
    fn y_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.ns {
            for j in 0..self.ns {
                if i != j {
                    out.push((i, j));
                }
            }
        }
        for e in 0..self.nd {
            for s in 0..self.ns {
                out.push((self.n.depot(e), s));
                out.push((s, self.n.depot(e)));
                out.push((self.n.copy(e), s));
                out.push((s, self.n.copy(e)));
            }
        }
        out
    }

    fn two_commodity_rows(&mut self) -> Result<(), MilpError> {
        let inst = self.inst;
        let c = inst.capacity_c;
        let pairs = self.y_pairs();
        for (b, d) in self.bd() {
            for &(i, j) in &pairs {
                self.m.add_var(self.n.y(i, j, b, d), VarKind::Continuous)?;
            }
        }
        let dl = |s: &Self, d: usize| s.n.labels[s.n.depot(d)].clone();
        for (b, d) in self.bd() {
            // load balance at shelves
            for s in 0..self.ns {
                let mut t = Vec::new();
                for &(i, j) in &pairs {
                    if j == s {
                        t.push((self.y(i, j, b, d), 1.0));
                    }
                    if i == s {
                        t.push((self.y(i, j, b, d), -1.0));
                    }
                }
                t.extend(self.pick_weight_terms(s, b, d, -2.0));
                self.m.push_row(format!("balance_{}_{}_{}", self.n.labels[s], b + 1, dl(self, d)), t, Sense::Eq, 0.0);
            }
        }
        let total = inst.total_weight();
        let mut out_t = Vec::new();
        let mut in_t = Vec::new();
        for (b, d) in self.bd() {
            for s in 0..self.ns {
                out_t.push((self.y(self.n.depot(d), s, b, d), 1.0));
                in_t.push((self.y(s, self.n.depot(d), b, d), 1.0));
            }
        }
        self.m.push_row("depot_out".into(), out_t, Sense::Eq, total);
        self.m.push_row("depot_in".into(), in_t, Sense::Le, c * (self.nd * self.nb) as f64 - total);
        for (b, d) in self.bd() {
            let t = (0..self.ns).map(|s| (self.y(self.n.copy(d), s, b, d), 1.0)).collect();
            self.m.push_row(format!("copy_out_{}_{}", b + 1, dl(self, d)), t, Sense::Le, c);
        }
        for (b, d) in self.bd() {
            // flow capacity on every undirected edge
            for s in 0..self.ns {
                for t2 in s + 1..self.ns {
                    let t = vec![
                        (self.y(s, t2, b, d), 1.0),
                        (self.y(t2, s, b, d), 1.0),
                        (self.x(s, t2, b, d), -c),
                        (self.x(t2, s, b, d), -c),
                    ];
                    let name = format!("pair_{}_{}_{}_{}", self.n.labels[s], self.n.labels[t2], b + 1, dl(self, d));
                    self.m.push_row(name, t, Sense::Eq, 0.0);
                }
                for e in 0..self.nd {
                    let (r, cp) = (self.n.depot(e), self.n.copy(e));
                    let t = vec![(self.y(r, s, b, d), 1.0), (self.y(s, r, b, d), 1.0), (self.x(r, s, b, d), -c)];
                    let name = format!("pair_{}_{}_{}_{}", self.n.labels[r], self.n.labels[s], b + 1, dl(self, d));
                    self.m.push_row(name, t, Sense::Eq, 0.0);
                    let t = vec![(self.y(cp, s, b, d), 1.0), (self.y(s, cp, b, d), 1.0), (self.x(s, r, b, d), -c)];
                    let name = format!("pair_{}_{}_{}_{}", self.n.labels[cp], self.n.labels[s], b + 1, dl(self, d));
                    self.m.push_row(name, t, Sense::Eq, 0.0);
                }
            }
            // flow leaves a shelf only if something is picked there
            for s in 0..self.ns {
                let link = self.pick_weight_terms(s, b, d, 0.0);
                for &(i, j) in &pairs {
                    if i != s {
                        continue;
                    }
                    let mut t = vec![(self.y(i, j, b, d), 1.0)];
                    t.extend(link.iter().map(|&(v, _)| (v, -c)));
                    let name = format!("picklink_{}_{}_{}_{}", self.n.labels[s], self.n.labels[j], b + 1, dl(self, d));
                    self.m.push_row(name, t, Sense::Le, 0.0);
                }
            }
            for e in (0..self.nd).filter(|&e| e != d) {
                let r = self.n.depot(e);
                let back = (0..self.ns).map(|s| (self.x(s, r, b, d), 1.0)).collect();
                self.m.push_row(format!("foreign_copy_{}_{}_{}", self.n.labels[self.n.copy(e)], b + 1, dl(self, d)), back, Sense::Eq, 0.0);
                let leave = (0..self.ns).map(|s| (self.x(r, s, b, d), 1.0)).collect();
                self.m.push_row(format!("foreign_depot_{}_{}_{}", self.n.labels[r], b + 1, dl(self, d)), leave, Sense::Eq, 0.0);
            }
            // load on an arc into s covers what is picked at s
            for s in 0..self.ns {
                let picks = self.pick_weight_terms(s, b, d, -1.0);
                for i in (0..self.ns + self.nd).filter(|&i| i != s) {
                    let mut t = vec![(self.y(i, s, b, d), 1.0)];
                    t.extend(picks.iter().copied());
                    t.push((self.x(i, s, b, d), -c));
                    let name = format!("loadbound_{}_{}_{}_{}", self.n.labels[i], self.n.labels[s], b + 1, dl(self, d));
                    self.m.push_row(name, t, Sense::Ge, -c);
                }
            }
        }
        Ok(())
    }
}

/// Builds the three-index model with explicit subtour rows.
pub fn build_three_index(inst: &Instance, batches_per_depot: usize, opts: &ModelOptions) -> Result<MilpModel, MilpError> {
    let limit = opts.subtour_limit.unwrap_or(SUBTOUR_LIMIT);
    let ns = inst.relevant_shelves().len();
    if ns > limit {
        return Err(MilpError::SubtourLimit { shelves: ns, limit });
    }
    let mut bld = Builder::new(inst, Formulation::ThreeIndex, batches_per_depot);
    bld.declare_common()?;
    bld.flow_rows();
    bld.capacity_rows();
    bld.subtour_rows();
    bld.batching_rows();
    if opts.symmetry_breaking {
        bld.symmetry_rows();
    }
    Ok(bld.m)
}

/// Builds the two-commodity flow model with one copy per depot.
pub fn build_two_commodity(inst: &Instance, batches_per_depot: usize, opts: &ModelOptions) -> Result<MilpModel, MilpError> {
    let mut bld = Builder::new(inst, Formulation::TwoCommodity, batches_per_depot);
    bld.declare_common()?;
    bld.flow_rows();
    bld.batching_rows();
    bld.two_commodity_rows()?;
    if opts.symmetry_breaking {
        bld.symmetry_rows();
    }
    Ok(bld.m)
}

pub fn build_model(inst: &Instance, formulation: Formulation, batches_per_depot: usize, opts: &ModelOptions) -> Result<MilpModel, MilpError> {
    match formulation {
        Formulation::ThreeIndex => build_three_index(inst, batches_per_depot, opts),
        Formulation::TwoCommodity => build_two_commodity(inst, batches_per_depot, opts),
    }
}

/// Variable name → value. Missing names count as zero.
pub type Candidate = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowViolation {
    pub row_name: String,
    pub lhs: f64,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: Vec<RowViolation>,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates every row and variable domain of the model at `cand`.
pub fn evaluate_candidate(model: &MilpModel, cand: &Candidate) -> Result<Evaluation, MilpError> {
    let mut val = vec![0.0; model.vars.len()];
    for (name, &v) in cand {
        let i = model.var_index(name).ok_or_else(|| MilpError::UnknownVariable(name.clone()))?;
        val[i] = v;
    }
    let mut violations = Vec::new();
    for (i, var) in model.vars.iter().enumerate() {
        let v = val[i];
        match var.kind {
            VarKind::Binary if (v - v.round()).abs() > EVAL_TOL || !(-EVAL_TOL..=1.0 + EVAL_TOL).contains(&v) => {
                violations.push(RowViolation { row_name: format!("binary_{}", var.name), lhs: v, sense: Sense::Eq, rhs: v.round().clamp(0.0, 1.0) });
            }
            VarKind::Continuous if v < -EVAL_TOL => {
                violations.push(RowViolation { row_name: format!("nonneg_{}", var.name), lhs: v, sense: Sense::Ge, rhs: 0.0 });
            }
            _ => {}
        }
    }
    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|&(i, c)| c * val[i]).sum();
        let ok = match row.sense {
            Sense::Le => lhs <= row.rhs + EVAL_TOL,
            Sense::Ge => lhs >= row.rhs - EVAL_TOL,
            Sense::Eq => (lhs - row.rhs).abs() <= EVAL_TOL,
        };
        if !ok {
            violations.push(RowViolation { row_name: row.name.clone(), lhs, sense: row.sense, rhs: row.rhs });
        }
    }
    let objective = model.objective.iter().map(|&(i, c)| c * val[i]).sum();
    Ok(Evaluation { objective, violations })
}

/// Maps a solution onto the model's variables. Batches of a depot fill the
/// highest batch indices, ordered by the model index of their first shelf,
/// which also satisfies the optional symmetry rows.
pub fn solution_to_candidate(sol: &Solution, inst: &Instance, model: &MilpModel) -> Result<Candidate, MilpError> {
    let n = Naming::new(inst);
    let mut cand: Candidate = model.vars.iter().map(|v| (v.name.clone(), 0.0)).collect();
    let mut set = |name: String, v: f64| -> Result<(), MilpError> {
        match cand.get_mut(&name) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(MilpError::UnknownVariable(name)),
        }
    };
    let c = inst.capacity_c;
    for d in 0..inst.n_depots() {
        let mut batches: Vec<(usize, &crate::vns::Batch)> = Vec::new();
        for b in sol.batches.iter().filter(|b| b.depot == d) {
            let first = match b.route.first() {
                Some(&s) => n.shelf_node(s).ok_or_else(|| MilpError::UnknownVariable(format!("shelf {}", inst.shelves[s].id)))?,
                None => 0,
            };
            batches.push((first, b));
        }
        if batches.len() > model.batches_per_depot {
            return Err(MilpError::TooManyBatches { depot: inst.depots[d].id.clone(), batches: batches.len(), allowed: model.batches_per_depot });
        }
        batches.sort_by_key(|&(f, _)| f);
        let offset = model.batches_per_depot - batches.len();
        for (k, (_, batch)) in batches.into_iter().enumerate() {
            let b = offset + k;
            let dn = n.depot(d);
            let route: Vec<usize> = batch.route.iter().map(|&s| n.shelf_node(s).expect("checked above")).collect();
            for &o in &batch.orders {
                set(n.omega(o, b, d), 1.0)?;
            }
            for (&p, &slot) in &batch.picks {
                let s = n.shelf_node(inst.slots()[slot].shelf).ok_or_else(|| MilpError::UnknownVariable(format!("z for item {}", inst.items()[p].key())))?;
                set(n.z(p, s, b, d), 1.0)?;
            }
            if route.is_empty() {
                continue;
            }
            let mut tour = vec![dn];
            tour.extend(&route);
            tour.push(dn);
            for w in tour.windows(2) {
                set(n.x(w[0], w[1], b, d), 1.0)?;
            }
            if model.formulation == Formulation::TwoCommodity {
                let picked_at = |s: usize| -> f64 {
                    batch.picks.iter().filter(|(_, &slot)| n.shelf_node(inst.slots()[slot].shelf) == Some(s)).map(|(&p, _)| inst.items()[p].weight).sum()
                };
                let mut load = batch.picks.keys().map(|&p| inst.items()[p].weight).sum::<f64>();
                let mut path = vec![dn];
                path.extend(&route);
                path.push(n.copy(d));
                for w in path.windows(2) {
                    let (i, j) = (w[0], w[1]);
                    set(n.y(i, j, b, d), load)?;
                    set(n.y(j, i, b, d), c - load)?;
                    if n.is_shelf(j) {
                        load -= picked_at(j);
                        if load < EVAL_TOL {
                            load = 0.0;
                        }
                    }
                }
            }
        }
    }
    Ok(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::DistanceMatrix;
    use crate::instance::{Depot, Order, Shelf, Sku};
    use crate::vns::Batch;

    fn one_item() -> Instance {
        let shelves = vec![Shelf { id: "s".into(), node: 0, stock: [("k".to_string(), 1)].into() }];
        let depots = vec![Depot { id: "d".into(), node: 1 }];
        let dist = DistanceMatrix::from_fn(vec!["s".into(), "d".into()], |i, j| if i == j { 0.0 } else { 5.0 });
        Instance::from_parts(shelves, depots, vec![Order::new("o", &[("k", 1)])], vec![Sku { id: "k".into(), unit_weight: 1.0 }], 2.0, dist).unwrap()
    }

    fn three_shelves() -> Instance {
        let shelves: Vec<Shelf> = (0..3).map(|i| Shelf { id: format!("s{i}"), node: i, stock: [("k".to_string(), 2)].into() }).collect();
        let depots = vec![Depot { id: "d".into(), node: 9 }];
        let labels = vec!["s0".into(), "s1".into(), "s2".into(), "d".into()];
        let dist = DistanceMatrix::from_fn(labels, |i, j| (i as f64 - j as f64).abs());
        let orders = vec![Order::new("o", &[("k", 1)])];
        Instance::from_parts(shelves, depots, orders, vec![Sku { id: "k".into(), unit_weight: 1.0 }], 5.0, dist).unwrap()
    }

    #[test]
    fn single_shelf_forces_pick_row() {
        let inst = one_item();
        let m = build_three_index(&inst, 1, &ModelOptions::default()).unwrap();
        let row = m.row("pick_o_k1").unwrap();
        assert_eq!(row.terms.len(), 1);
        assert_eq!(m.vars[row.terms[0].0].name, "z_o_k1_s_1_d");
        assert_eq!((row.sense, row.rhs), (Sense::Eq, 1.0));
        let ev = evaluate_candidate(&m, &Candidate::new()).unwrap();
        assert!(ev.violations.iter().any(|v| v.row_name == "pick_o_k1"));
    }

    #[test]
    fn subtour_rows_for_three_shelves() {
        let inst = three_shelves();
        let m = build_three_index(&inst, 1, &ModelOptions::default()).unwrap();
        // hand count: {0,1},{0,2},{1,2},{0,1,2}
        assert_eq!(m.rows_with_prefix("sec_").count(), 4);
        let m2 = build_three_index(&inst, 2, &ModelOptions::default()).unwrap();
        assert_eq!(m2.rows_with_prefix("sec_").count(), 8);
    }

    #[test]
    fn stock_row_for_two_units_three_batches() {
        let inst = three_shelves();
        let m = build_three_index(&inst, 3, &ModelOptions::default()).unwrap();
        let row = m.row("stock_k_s0").unwrap();
        assert_eq!(row.terms.len(), 3);
        assert_eq!((row.sense, row.rhs), (Sense::Le, 2.0));
    }

    #[test]
    fn subtour_limit_is_enforced() {
        let inst = three_shelves();
        let opts = ModelOptions { subtour_limit: Some(2), ..Default::default() };
        assert!(matches!(build_three_index(&inst, 1, &opts), Err(MilpError::SubtourLimit { shelves: 3, limit: 2 })));
    }

    #[test]
    fn empty_solution_gives_all_zero_candidate() {
        let inst = one_item();
        let m = build_two_commodity(&inst, 1, &ModelOptions::default()).unwrap();
        let cand = solution_to_candidate(&Solution::new(vec![1]), &inst, &m).unwrap();
        assert_eq!(cand.len(), m.n_vars());
        assert!(cand.values().all(|&v| v == 0.0));
    }

    #[test]
    fn single_tour_maps_directly() {
        let inst = one_item();
        let mut sol = Solution::new(vec![1]);
        let mut b = Batch::empty(0);
        b.add_order(0, &inst);
        b.picks.insert(0, 0);
        b.route = vec![0];
        sol.batches.push(b);
        for f in [Formulation::ThreeIndex, Formulation::TwoCommodity] {
            let m = build_model(&inst, f, 1, &ModelOptions::default()).unwrap();
            let cand = solution_to_candidate(&sol, &inst, &m).unwrap();
            for name in ["x_d_s_1_d", "x_s_d_1_d", "z_o_k1_s_1_d", "omega_o_1_d"] {
                assert_eq!(cand[name], 1.0, "{name}");
            }
            let ev = evaluate_candidate(&m, &cand).unwrap();
            assert!(ev.feasible(), "{f}: {:?}", ev.violations);
            assert_eq!(ev.objective, 10.0);
        }
    }

    #[test]
    fn excess_stock_flags_exactly_the_stock_row() {
        // both units of k taken from s0, which holds one
        let shelves = vec![
            Shelf { id: "s0".into(), node: 0, stock: [("k".to_string(), 1)].into() },
            Shelf { id: "s1".into(), node: 1, stock: [("k".to_string(), 1)].into() },
        ];
        let depots = vec![Depot { id: "d".into(), node: 2 }];
        let dist = DistanceMatrix::from_fn(vec!["s0".into(), "s1".into(), "d".into()], |i, j| if i == j { 0.0 } else { 1.0 });
        let orders = vec![Order::new("o", &[("k", 1)]), Order::new("q", &[("k", 1)])];
        let inst = Instance::from_parts(shelves, depots, orders, vec![Sku { id: "k".into(), unit_weight: 1.0 }], 5.0, dist).unwrap();
        let m = build_three_index(&inst, 1, &ModelOptions::default()).unwrap();
        let mut sol = Solution::new(vec![1]);
        let mut b = Batch::empty(0);
        b.add_order(0, &inst);
        b.add_order(1, &inst);
        b.picks.insert(0, inst.slot_of(0, 0).unwrap());
        b.picks.insert(1, inst.slot_of(0, 0).unwrap());
        b.route = vec![0];
        sol.batches.push(b);
        let cand = solution_to_candidate(&sol, &inst, &m).unwrap();
        let ev = evaluate_candidate(&m, &cand).unwrap();
        let names: Vec<&str> = ev.violations.iter().map(|v| v.row_name.as_str()).collect();
        assert_eq!(names, ["stock_k_s0"]);
        assert_eq!(ev.violations[0].lhs, 2.0);
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let inst = one_item();
        let m = build_three_index(&inst, 1, &ModelOptions::default()).unwrap();
        let cand: Candidate = [("x_nope".to_string(), 1.0)].into();
        assert!(matches!(evaluate_candidate(&m, &cand), Err(MilpError::UnknownVariable(_))));
    }

    #[test]
    fn too_many_batches_is_an_error() {
        let inst = three_shelves();
        let m = build_two_commodity(&inst, 1, &ModelOptions::default()).unwrap();
        let mut sol = Solution::new(vec![2]);
        sol.batches.push(Batch::empty(0));
        sol.batches.push(Batch::empty(0));
        assert!(matches!(solution_to_candidate(&sol, &inst, &m), Err(MilpError::TooManyBatches { .. })));
    }

    #[test]
    fn objective_lists_each_arc_once_per_batch() {
        let inst = three_shelves();
        let m = build_three_index(&inst, 2, &ModelOptions::default()).unwrap();
        // 4 nodes, 12 ordered pairs, 2 batches
        assert_eq!(m.objective.len(), 24);
        let mut seen = std::collections::BTreeSet::new();
        assert!(m.objective.iter().all(|&(v, _)| seen.insert(v)));
    }
}
