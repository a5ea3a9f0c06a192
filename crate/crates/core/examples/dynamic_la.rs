//! Grows a tree by leaf insertions and answers level-ancestor queries
//! while a random adversary corrupts up to δ words.

use faulty_tree::faulty_ram::Adversary;
use faulty_tree::harness::strategies::RecordNoise;
use faulty_tree::oracle::{OracleTree, Query};
use faulty_tree::resilient_tree::{Profile, ResilientTree, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let delta = 4;
    let cfg = TreeConfig::with_delta(delta);
    let adv = Adversary::new(delta, RecordNoise::new(3, 0.0005, Profile::Wide));
    let mut tree = ResilientTree::new(cfg, adv, 1).unwrap();
    let mut oracle = OracleTree::new(cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    for i in 1..4000 {
        let p = if rng.gen_bool(0.8) {
            i - 1
        } else {
            rng.gen_range(0..i)
        };
        tree.add_leaf(p, 1).unwrap();
        oracle.add_leaf(p, 1);
    }
    oracle.sync(tree.ram().adversary().log());
    println!(
        "n={} blacks={} (bound {}), corrupted vertices {:?}",
        tree.len(),
        tree.black_count(),
        (tree.len() + delta) / delta,
        oracle.corrupted_set()
    );

    let mut tally = [0usize; 3];
    for _ in 0..2000 {
        let v = rng.gen_range(0..tree.len());
        let q = Query::La {
            v,
            k: rng.gen_range(0..=oracle.depth(v)),
        };
        let got = q.run(&mut tree);
        oracle.sync(tree.ram().adversary().log());
        tally[oracle.judge(&q, &got) as usize] += 1;
    }
    println!(
        "match={} exempt_mismatch={} violation={}",
        tally[0], tally[1], tally[2]
    );
    if let Some(tr) = tree.journal().last_la {
        println!(
            "last long query: d={} forest steps={} rest={}",
            tr.d, tr.q_steps, tr.k_rest
        );
    }
}
