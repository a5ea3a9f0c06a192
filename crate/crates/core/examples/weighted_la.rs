//! Weighted level ancestor: the deepest ancestor whose path weight from v
//! reaches k.

use faulty_tree::oracle::OracleTree;
use faulty_tree::resilient_tree::{ResilientTree, TreeConfig};

fn main() {
    let cfg = TreeConfig::with_delta(2);
    let mut t = ResilientTree::fault_free(cfg, 5).unwrap();
    let mut o = OracleTree::new(cfg, 5);
    for i in 1..200u64 {
        let w = 1 + i % 7;
        t.add_leaf(i as usize - 1, w).unwrap();
        o.add_leaf(i as usize - 1, w);
    }
    let v = 199;
    for k in [1, 7, 8, 50, 400, 795, 10_000] {
        println!(
            "WLA({v}, {k:>5}) = {:<5} oracle {:?}",
            t.weighted_la(v, k),
            o.wla(v, k)
        );
    }
}
