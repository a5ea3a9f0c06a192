use faulty_tree::faulty_ram::{Adversary, FaultyRam, Region, DEFAULT_SAFE_WORDS};
use faulty_tree::harness::trace::{FieldPatch, Patch};
use faulty_tree::harness::{
    generate, parse, run_trace, AdversaryKind, Directive, GenKind, GenParams, RunConfig, Trace,
};
use faulty_tree::oracle::{OracleTree, Query};
use faulty_tree::replication::{rep_alloc, rep_read};
use faulty_tree::resilient_tree::{FlagValue, QueryOutcome, ResilientTree, TreeConfig};
use faulty_tree::static_la::StaticTree;
use proptest::prelude::*;

/// Parent choices as offsets back from the newest vertex.
fn shape(max: usize) -> impl Strategy<Value = Vec<(usize, u64)>> {
    prop::collection::vec((0usize..40, 1u64..20), 1..max)
}

fn parents_of(steps: &[(usize, u64)]) -> Vec<(usize, u64)> {
    steps
        .iter()
        .enumerate()
        .map(|(i, &(back, w))| (i.saturating_sub(back % (i + 1)), w))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fault_free_answers_equal_the_oracle(
        delta in 1usize..7,
        steps in shape(400),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0u64..600), 40),
    ) {
        let cfg = TreeConfig::with_delta(delta);
        let mut t = ResilientTree::fault_free(cfg, 3).unwrap();
        let mut o = OracleTree::new(cfg, 3);
        for (p, w) in parents_of(&steps) {
            t.add_leaf(p, w).unwrap();
            o.add_leaf(p, w);
        }
        prop_assert!(t.black_count() * delta <= t.len() + delta);
        let n = t.len();
        for (a, b, k) in picks {
            let (u, v) = (a.index(n), b.index(n));
            for q in [
                Query::La { v, k: k as usize % (o.depth(v) + 3) },
                Query::Wla { v, k },
                Query::Lca { u, v },
                Query::Bvq { u, v },
            ] {
                let got = q.run(&mut t);
                let want = o.answer(&q);
                match want {
                    Some(a) => prop_assert_eq!(got, QueryOutcome::Answer(a), "{}", q),
                    None => prop_assert!(got.answer().is_none(), "{}", q),
                }
            }
        }
    }

    #[test]
    fn scripted_corruptions_never_violate(
        delta in 1usize..6,
        steps in shape(300),
        faults in prop::collection::vec((any::<prop::sample::Index>(), 0u8..6, any::<u32>()), 0..6),
        seed in any::<u64>(),
    ) {
        let mut trace = Trace::default();
        for (p, w) in parents_of(&steps) {
            trace.push(Directive::AddLeaf { parent: p, weight: w });
        }
        let n = trace.directives.len() + 1;
        let mut out = Vec::new();
        let mut budget = delta;
        let mut faults = faults.into_iter();
        for (i, d) in std::mem::take(&mut trace.directives).into_iter().enumerate() {
            out.push(d);
            if i % 37 == 0 && budget > 0 {
                if let Some((target, kind, x)) = faults.next() {
                    let vertex = target.index(i + 2);
                    let patch = match kind {
                        0 => Patch::Field(FieldPatch::P(Some(x as usize % (vertex + 2)))),
                        1 => Patch::Field(FieldPatch::Flag(FlagValue::Spent)),
                        2 => Patch::Field(FieldPatch::Depth(x as u64 % 500)),
                        3 => Patch::Field(FieldPatch::Weight(1 + x as u64 % 50)),
                        4 => Patch::Field(FieldPatch::Q(Some(x % 40))),
                        _ => Patch::Raw(vec![x as u64, (x as u64) << 7]),
                    };
                    out.push((0, Directive::Corrupt { vertex, patch }));
                    budget -= 1;
                }
            }
        }
        trace.directives = out;
        let q = generate(&GenParams::new(GenKind::RandomAttach, n, delta, seed));
        // borrow the query mix of a generated trace of the same size
        for (_, d) in q.directives.into_iter().filter(|(_, d)| matches!(d, Directive::Query(_))) {
            trace.push(d);
        }
        let mut cfg = RunConfig::new(delta);
        cfg.adversary = AdversaryKind::Scripted;
        let r = run_trace(&trace, &cfg).unwrap();
        prop_assert_eq!(r.verdicts.violations, 0, "{:?}", r.violations);
        prop_assert_eq!(r.black_bound_violations, 0);
        prop_assert!(r.safe_high_water <= 128);
    }

    #[test]
    fn replicated_word_survives_any_delta_overwrites(
        delta in 1usize..10,
        value in any::<u64>(),
        hits in prop::collection::vec((any::<prop::sample::Index>(), any::<u64>()), 0..10),
    ) {
        let mut ram = FaultyRam::new(DEFAULT_SAFE_WORDS, Adversary::passive(delta));
        let cell = rep_alloc(&mut ram, Region::ForestTables, delta, value);
        for (slot, junk) in hits.into_iter().take(delta) {
            ram.corrupt(Region::ForestTables, cell.base + slot.index(cell.slots), junk);
        }
        prop_assert_eq!(rep_read(&mut ram, cell).unwrap(), value);
    }

    #[test]
    fn static_la_matches_brute_force(
        delta in 1usize..9,
        steps in shape(500),
        ks in prop::collection::vec((any::<prop::sample::Index>(), 0usize..300), 30),
    ) {
        let mut parents = vec![None];
        parents.extend(parents_of(&steps).into_iter().map(|(p, _)| Some(p)));
        let mut t = StaticTree::build(&parents, delta, Adversary::passive(0)).unwrap();
        prop_assert!(t.coloring().black_count() <= parents.len() / delta);
        for (v, k) in ks {
            let v = v.index(parents.len());
            let mut want = Some(v);
            for _ in 0..k {
                want = want.and_then(|u| parents[u]);
            }
            prop_assert_eq!(t.la(v, k).answer(), want);
        }
    }

    #[test]
    fn traces_round_trip_through_text(kind in 0usize..4, n in 2usize..200, delta in 1usize..9, seed in any::<u64>()) {
        let t = generate(&GenParams::new(GenKind::ALL[kind], n, delta, seed));
        let back = parse(&t.to_string()).unwrap();
        prop_assert_eq!(&back.meta, &t.meta);
        let strip = |t: &Trace| t.directives.iter().map(|(_, d)| d.clone()).collect::<Vec<_>>();
        prop_assert_eq!(strip(&back), strip(&t));
    }
}
