//! Runs generated traces against every adversary strategy and prints the
//! verdict counts.

use faulty_tree::harness::{generate, run_trace, AdversaryKind, GenKind, GenParams, RunConfig};

fn main() {
    let delta = 3;
    println!(
        "{:<15} {:<14} {:>6} {:>8} {:>7} {:>5}",
        "adversary", "shape", "faults", "matched", "exempt", "viol"
    );
    for adv in AdversaryKind::ALL {
        for kind in [GenKind::Chain, GenKind::RandomAttach, GenKind::StarOfPaths] {
            let trace = generate(&GenParams::new(kind, 800, delta, 9));
            let mut cfg = RunConfig::from_meta(&trace.meta);
            cfg.adversary = adv;
            cfg.rate = 0.0005;
            let r = run_trace(&trace, &cfg).unwrap();
            println!(
                "{:<15} {:<14} {:>6} {:>8} {:>7} {:>5}",
                adv.to_string(),
                kind.to_string(),
                r.corruptions.len(),
                r.verdicts.matched,
                r.verdicts.exempt_mismatch,
                r.verdicts.violations
            );
        }
    }
}
