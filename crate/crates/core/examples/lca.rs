//! Lowest common ancestors on a tree with two long arms.

use faulty_tree::oracle::OracleTree;
use faulty_tree::resilient_tree::{ResilientTree, TreeConfig};

fn main() {
    let cfg = TreeConfig::with_delta(2);
    let mut t = ResilientTree::fault_free(cfg, 1).unwrap();
    let mut o = OracleTree::new(cfg, 1);
    // two long arms hanging off a short stem
    let mut add = |p: usize| {
        o.add_leaf(p, 1);
        t.add_leaf(p, 1).unwrap()
    };
    let mut stem = 0;
    for _ in 0..3 {
        stem = add(stem);
    }
    let (mut a, mut b) = (stem, stem);
    for _ in 0..60 {
        a = add(a);
        b = add(b);
    }
    for (u, v) in [(a, b), (a, stem), (a - 20, b - 2), (1, b)] {
        println!("LCA({u}, {v}) = {}  oracle {}", t.lca(u, v), o.lca(u, v));
    }
    println!("fallbacks taken: {}", t.journal().lca_fallbacks);
}
