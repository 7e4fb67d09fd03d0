//! Warehouse layout graph and shortest-path distance matrix.
//!
//! The layout is a block of parallel, two-sided pick aisles. Shelves sit
//! back-to-back in double rows between aisles, so each aisle is flanked by
//! one shelf row on either side. A front and a back cross-aisle always
//! connect the aisle ends; `cross_aisles` adds interior cross-aisles that
//! split every aisle into equally sized blocks. Depots sit on the front
//! cross-aisle, spread from its left end to its right end.
//!
//! Travel is rectilinear along aisle and cross-aisle centerlines. A shelf is
//! reached from the centerline point facing its front, so the two shelves
//! facing each other across an aisle share one access node.

use std::collections::HashMap;
use std::fmt::Write as _;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CROSS_AISLE_WIDTH: f64 = 6.0;
pub const PICK_AISLE_WIDTH: f64 = 3.0;
pub const SHELF_WIDTH: f64 = 0.9;
pub const SHELF_DEPTH: f64 = 1.3;

/// Horizontal pitch between two neighbouring aisle centerlines.
const AISLE_PITCH: f64 = PICK_AISLE_WIDTH + 2.0 * SHELF_DEPTH;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("layout needs at least one aisle")]
    NoAisles,
    #[error("shelves_per_aisle must be a positive even number (two-sided aisles), got {0}")]
    OddShelves(usize),
    #[error("layout needs at least one depot")]
    NoDepots,
    #[error("{cross_aisles} interior cross-aisles leave empty blocks with only {slots} shelf positions per aisle side")]
    TooManyCrossAisles { cross_aisles: usize, slots: usize },
    #[error("node {0} is not reachable from node {1}")]
    Unreachable(usize, usize),
    #[error("node {0} does not exist in the layout graph")]
    UnknownNode(usize),
}

/// Geometry parameters of a rectangular multi-block layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub aisles: usize,
    pub shelves_per_aisle: usize,
    pub cross_aisles: usize,
    /// Number of depots placed along the front cross-aisle.
    pub depots: usize,
}

impl LayoutSpec {
    pub fn new(aisles: usize, shelves_per_aisle: usize, cross_aisles: usize, depots: usize) -> Self {
        Self { aisles, shelves_per_aisle, cross_aisles, depots }
    }

    pub fn n_shelves(&self) -> usize {
        self.aisles * self.shelves_per_aisle
    }

    /// Shelf positions along one side of an aisle.
    pub fn slots_per_aisle(&self) -> usize {
        self.shelves_per_aisle / 2
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.aisles == 0 {
            return Err(LayoutError::NoAisles);
        }
        if self.shelves_per_aisle == 0 || self.shelves_per_aisle % 2 != 0 {
            return Err(LayoutError::OddShelves(self.shelves_per_aisle));
        }
        if self.depots == 0 {
            return Err(LayoutError::NoDepots);
        }
        if self.cross_aisles + 1 > self.slots_per_aisle() {
            return Err(LayoutError::TooManyCrossAisles {
                cross_aisles: self.cross_aisles,
                slots: self.slots_per_aisle(),
            });
        }
        Ok(())
    }

    /// Number of shelf positions in each block of an aisle side.
    fn block_sizes(&self) -> Vec<usize> {
        let blocks = self.cross_aisles + 1;
        let slots = self.slots_per_aisle();
        (0..blocks).map(|b| slots / blocks + usize::from(b < slots % blocks)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// Centerline point in front of a facing pair of shelves.
    Access { aisle: usize, slot: usize },
    /// Aisle centerline crossing a cross-aisle centerline; `line` 0 is the
    /// front cross-aisle and the last line is the back cross-aisle.
    Junction { aisle: usize, line: usize },
    Depot { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutNode {
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
}

/// Traversable warehouse graph. Node ids are indices into `nodes`.
#[derive(Debug, Clone)]
pub struct LayoutGraph {
    pub spec: LayoutSpec,
    pub nodes: Vec<LayoutNode>,
    pub edges: Vec<(usize, usize, f64)>,
    /// Access node of every shelf, in shelf order.
    pub shelf_nodes: Vec<usize>,
    pub depot_nodes: Vec<usize>,
}

impl LayoutGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Shelf index order is aisle-major, then slot, then side (left, right).
    pub fn shelf_index(spec: &LayoutSpec, aisle: usize, slot: usize, side: usize) -> usize {
        (aisle * spec.slots_per_aisle() + slot) * 2 + side
    }

    /// Drops every edge running along interior cross-aisle `k` (0-based).
    /// The junction nodes stay, so node ids are unchanged.
    pub fn without_cross_aisle(&self, k: usize) -> LayoutGraph {
        let line = k + 1;
        let on_line = |n: usize| matches!(self.nodes[n].kind, NodeKind::Junction { line: l, .. } if l == line);
        let mut g = self.clone();
        g.edges.retain(|&(a, b, _)| !(on_line(a) && on_line(b)));
        g
    }

    fn to_petgraph(&self) -> UnGraph<(), f64> {
        let mut g = UnGraph::<(), f64>::with_capacity(self.nodes.len(), self.edges.len());
        for _ in &self.nodes {
            g.add_node(());
        }
        for &(a, b, w) in &self.edges {
            g.add_edge(NodeIndex::new(a), NodeIndex::new(b), w);
        }
        g
    }
}

/// Builds the layout graph for a valid spec.
pub fn build_layout_graph(spec: &LayoutSpec) -> Result<LayoutGraph, LayoutError> {
    spec.validate()?;
    let slots = spec.slots_per_aisle();
    let lines = spec.cross_aisles + 2;
    let blocks = spec.block_sizes();

    // y coordinates of cross-aisle centerlines and shelf slots.
    let mut line_y = Vec::with_capacity(lines);
    let mut slot_y = Vec::with_capacity(slots);
    let mut y = 0.0;
    line_y.push(y + CROSS_AISLE_WIDTH / 2.0);
    y += CROSS_AISLE_WIDTH;
    for &size in &blocks {
        for j in 0..size {
            slot_y.push(y + SHELF_WIDTH * (j as f64 + 0.5));
        }
        y += SHELF_WIDTH * size as f64;
        line_y.push(y + CROSS_AISLE_WIDTH / 2.0);
        y += CROSS_AISLE_WIDTH;
    }
    let aisle_x = |a: usize| SHELF_DEPTH + PICK_AISLE_WIDTH / 2.0 + AISLE_PITCH * a as f64;

    let mut nodes = Vec::new();
    for a in 0..spec.aisles {
        for (j, &sy) in slot_y.iter().enumerate() {
            nodes.push(LayoutNode { kind: NodeKind::Access { aisle: a, slot: j }, x: aisle_x(a), y: sy });
        }
    }
    let junction_base = nodes.len();
    let junction = |a: usize, l: usize| junction_base + a * lines + l;
    for a in 0..spec.aisles {
        for (l, &ly) in line_y.iter().enumerate() {
            nodes.push(LayoutNode { kind: NodeKind::Junction { aisle: a, line: l }, x: aisle_x(a), y: ly });
        }
    }

    let mut edges = Vec::new();
    // Along each aisle: front junction, block slots, interior junctions, back junction.
    for a in 0..spec.aisles {
        let mut chain = Vec::with_capacity(slots + lines);
        chain.push(junction(a, 0));
        let mut slot = 0;
        for (b, &size) in blocks.iter().enumerate() {
            for _ in 0..size {
                chain.push(a * slots + slot);
                slot += 1;
            }
            chain.push(junction(a, b + 1));
        }
        for w in chain.windows(2) {
            edges.push((w[0], w[1], nodes[w[1]].y - nodes[w[0]].y));
        }
    }

    // Depots on the front cross-aisle, left end to right end.
    let width = AISLE_PITCH * spec.aisles as f64;
    let mut depot_nodes = Vec::with_capacity(spec.depots);
    for k in 0..spec.depots {
        let mut x = if spec.depots == 1 { 0.0 } else { width * k as f64 / (spec.depots - 1) as f64 };
        // never on top of an aisle junction
        if (0..spec.aisles).any(|a| (aisle_x(a) - x).abs() < 1e-9) {
            x += SHELF_WIDTH / 2.0;
        }
        depot_nodes.push(nodes.len());
        nodes.push(LayoutNode { kind: NodeKind::Depot { index: k }, x, y: line_y[0] });
    }

    // Along each cross-aisle, in x order.
    for l in 0..lines {
        let mut chain: Vec<usize> = (0..spec.aisles).map(|a| junction(a, l)).collect();
        if l == 0 {
            chain.extend(depot_nodes.iter().copied());
        }
        chain.sort_by(|&p, &q| nodes[p].x.total_cmp(&nodes[q].x).then(p.cmp(&q)));
        for w in chain.windows(2) {
            edges.push((w[0], w[1], nodes[w[1]].x - nodes[w[0]].x));
        }
    }

    let mut shelf_nodes = vec![0; spec.n_shelves()];
    for a in 0..spec.aisles {
        for j in 0..slots {
            for side in 0..2 {
                shelf_nodes[LayoutGraph::shelf_index(spec, a, j, side)] = a * slots + j;
            }
        }
    }

    Ok(LayoutGraph { spec: *spec, nodes, edges, shelf_nodes, depot_nodes })
}

/// Shortest-path distances between the given graph nodes, as a dense
/// row-major `n × n` array in the order of `nodes_of_interest`.
pub fn all_pairs_shortest(graph: &LayoutGraph, nodes_of_interest: &[usize]) -> Result<Vec<f64>, LayoutError> {
    let n_nodes = graph.n_nodes();
    if let Some(&bad) = nodes_of_interest.iter().find(|&&v| v >= n_nodes) {
        return Err(LayoutError::UnknownNode(bad));
    }
    let pg = graph.to_petgraph();
    let mut from_cache: HashMap<usize, Vec<f64>> = HashMap::new();
    let n = nodes_of_interest.len();
    let mut out = vec![0.0; n * n];
    for (i, &src) in nodes_of_interest.iter().enumerate() {
        let dist = from_cache.entry(src).or_insert_with(|| {
            let found = dijkstra(&pg, NodeIndex::new(src), None, |e| *e.weight());
            let mut row = vec![f64::INFINITY; n_nodes];
            for (v, d) in found {
                row[v.index()] = d;
            }
            row
        });
        for (j, &dst) in nodes_of_interest.iter().enumerate() {
            let d = dist[dst];
            if !d.is_finite() {
                return Err(LayoutError::Unreachable(dst, src));
            }
            out[i * n + j] = d;
        }
    }
    // Dijkstra sums edges in path order, so d(i,j) and d(j,i) can differ in
    // the last ulp; pin both to the smaller value.
    for i in 0..n {
        out[i * n + i] = 0.0;
        for j in i + 1..n {
            let d = out[i * n + j].min(out[j * n + i]);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    Ok(out)
}

/// Symmetric distance matrix over labelled locations, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Panics if `data` is not `labels.len()²` long.
    pub fn new(labels: Vec<String>, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), labels.len() * labels.len(), "distance data must be square");
        Self { labels, data }
    }

    /// Builds a matrix from a closure; entries are symmetrised from the upper triangle.
    pub fn from_fn(labels: Vec<String>, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = labels.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { labels, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.labels.len() + j]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Largest and smallest off-diagonal entries.
    pub fn spread(&self) -> (f64, f64) {
        let n = self.len();
        let mut hi = 0.0_f64;
        let mut lo = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    hi = hi.max(self.get(i, j));
                    lo = lo.min(self.get(i, j));
                }
            }
        }
        if lo.is_infinite() {
            lo = 0.0;
        }
        (hi, lo)
    }

    /// CSV dump with node ids as row and column headers, 3 decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            s.push_str(l);
            for j in 0..self.len() {
                let _ = write!(s, ",{:.3}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_layout_has_24_shelves_and_two_depots() {
        let spec = LayoutSpec::new(2, 12, 0, 2);
        let g = build_layout_graph(&spec).unwrap();
        assert_eq!(g.shelf_nodes.len(), 24);
        assert_eq!(g.depot_nodes.len(), 2);
        // 6 access points per aisle, 2 junctions per aisle, 2 depots
        assert_eq!(g.n_nodes(), 2 * 6 + 2 * 2 + 2);
        assert!(g.edges.iter().all(|e| e.2 > 0.0));
    }

    #[test]
    fn six_by_sixty_layout_has_360_shelves() {
        let spec = LayoutSpec::new(6, 60, 1, 2);
        let g = build_layout_graph(&spec).unwrap();
        assert_eq!(g.shelf_nodes.len(), 360);
        assert!(g.edges.iter().all(|e| e.2 > 0.0));
    }

    #[test]
    fn every_node_reachable_from_depots() {
        for spec in [LayoutSpec::new(1, 6, 0, 1), LayoutSpec::new(3, 20, 2, 3), LayoutSpec::new(6, 60, 1, 4)] {
            let g = build_layout_graph(&spec).unwrap();
            let all: Vec<usize> = (0..g.n_nodes()).collect();
            let d = all_pairs_shortest(&g, &all).unwrap();
            assert!(d.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(LayoutSpec::new(0, 12, 0, 2).validate(), Err(LayoutError::NoAisles));
        assert_eq!(LayoutSpec::new(2, 11, 0, 2).validate(), Err(LayoutError::OddShelves(11)));
        assert_eq!(LayoutSpec::new(2, 12, 0, 0).validate(), Err(LayoutError::NoDepots));
        assert!(matches!(
            LayoutSpec::new(2, 4, 2, 1).validate(),
            Err(LayoutError::TooManyCrossAisles { .. })
        ));
    }

    #[test]
    fn disconnected_graph_names_unreachable_node() {
        let spec = LayoutSpec::new(2, 4, 0, 1);
        let mut g = build_layout_graph(&spec).unwrap();
        let target = g.shelf_nodes[2];
        g.edges.retain(|&(a, b, _)| a != target && b != target);
        let err = all_pairs_shortest(&g, &[g.depot_nodes[0], target]).unwrap_err();
        assert_eq!(err, LayoutError::Unreachable(target, g.depot_nodes[0]));
    }

    #[test]
    fn facing_shelves_share_access_node() {
        let spec = LayoutSpec::new(2, 12, 0, 2);
        let g = build_layout_graph(&spec).unwrap();
        assert_eq!(g.shelf_nodes[0], g.shelf_nodes[1]);
        assert_ne!(g.shelf_nodes[1], g.shelf_nodes[2]);
    }

    #[test]
    fn csv_dump_has_headers() {
        let m = DistanceMatrix::from_fn(vec!["a".into(), "b".into()], |_, _| 1.25);
        assert_eq!(m.to_csv(), "node,a,b\na,0.000,1.250\nb,1.250,0.000\n");
    }
}
