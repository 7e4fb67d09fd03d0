#![allow(dead_code)]

use shelfroute::distances::DistanceMatrix;
use shelfroute::instance::{Depot, Instance, Order, Shelf, Sku};
use shelfroute::vns::{Batch, Solution};

/// Three shelves in a row next to depot `a`. SKU `g` sits on shelves 1 and
/// 3, `r` only on 1, `b` only on 3, `q` only on 2 and is never ordered.
/// Three orders of one 0.3 kg item each, capacity 1.
pub fn line_instance() -> Instance {
    let shelf = |id: &str, node: usize, stock: &[(&str, u32)]| Shelf {
        id: id.into(),
        node,
        stock: stock.iter().map(|&(k, n)| (k.to_string(), n)).collect(),
    };
    let shelves = vec![
        shelf("1", 0, &[("r", 1), ("g", 1)]),
        shelf("2", 1, &[("q", 1)]),
        shelf("3", 2, &[("g", 1), ("b", 1)]),
    ];
    let depots = vec![Depot { id: "a".into(), node: 3 }];
    // points on a line: shelves at 1, 2, 3, depot at 0
    let pos = [1.0, 2.0, 3.0, 0.0];
    let labels = vec!["1".into(), "2".into(), "3".into(), "a".into()];
    let dist = DistanceMatrix::from_fn(labels, |i, j| f64::abs(pos[i] - pos[j]));
    let orders = vec![Order::new("o1", &[("r", 1)]), Order::new("o2", &[("g", 1)]), Order::new("o3", &[("b", 1)])];
    let skus = ["r", "g", "b", "q"].iter().map(|k| Sku { id: k.to_string(), unit_weight: 0.3 }).collect();
    Instance::from_parts(shelves, depots, orders, skus, 1.0, dist).unwrap()
}

/// One batch a→1→3→a picking `r` and `g` at shelf 1 and `b` at shelf 3.
pub fn line_solution(inst: &Instance) -> Solution {
    let mut b = Batch::empty(0);
    for o in 0..3 {
        b.add_order(o, inst);
    }
    let r = inst.sku_index("r").unwrap();
    let g = inst.sku_index("g").unwrap();
    let bb = inst.sku_index("b").unwrap();
    b.picks.insert(0, inst.slot_of(r, 0).unwrap());
    b.picks.insert(1, inst.slot_of(g, 0).unwrap());
    b.picks.insert(2, inst.slot_of(bb, 2).unwrap());
    b.route = vec![0, 2];
    let mut sol = Solution::new(vec![1]);
    sol.batches.push(b);
    sol
}
