//! A replicated word survives δ arbitrary overwrites of its slots.

use faulty_tree::faulty_ram::{Adversary, FaultyRam, Region, DEFAULT_SAFE_WORDS};
use faulty_tree::replication::{rep_alloc, rep_read, slot_count};

fn main() {
    let delta = 3;
    let mut ram = FaultyRam::new(DEFAULT_SAFE_WORDS, Adversary::passive(delta));
    let cell = rep_alloc(&mut ram, Region::ForestNodes, delta, 42);
    println!("delta={delta} slots={}", slot_count(delta));

    // hit δ different slots with different garbage
    for (i, junk) in [7u64, 9, 7].into_iter().enumerate() {
        assert!(ram.corrupt(Region::ForestNodes, cell.base + 2 * i, junk));
    }
    let slots: Vec<u64> = (0..cell.slots)
        .map(|i| ram.peek(Region::ForestNodes, cell.base + i).unwrap())
        .collect();
    println!("slots after corruption: {slots:?}");

    let got = rep_read(&mut ram, cell).unwrap();
    println!("decoded {got}, budget left {}", ram.adversary().budget());
    assert_eq!(got, 42);

    // the budget is spent, so a further write is refused
    assert!(!ram.corrupt(Region::ForestNodes, cell.base, 0));
}
