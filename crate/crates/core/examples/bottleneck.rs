//! Bottleneck vertex queries: the minimum-weight vertex on a tree path.

use faulty_tree::oracle::OracleTree;
use faulty_tree::resilient_tree::{ResilientTree, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = TreeConfig::with_delta(3);
    let mut t = ResilientTree::fault_free(cfg, 50).unwrap();
    let mut o = OracleTree::new(cfg, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 1..1500 {
        let p = if rng.gen_bool(0.9) {
            i - 1
        } else {
            rng.gen_range(0..i)
        };
        let w = rng.gen_range(1..1000);
        t.add_leaf(p, w).unwrap();
        o.add_leaf(p, w);
    }
    for _ in 0..6 {
        let (u, v) = (rng.gen_range(0..1500), rng.gen_range(0..1500));
        let got = t.bvq(u, v);
        let b = o.bvq(u, v);
        println!("BVQ({u}, {v}) = {got}  weight {}  oracle {b}", o.weight(b));
    }
}
