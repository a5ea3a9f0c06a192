//! Parses a hand-written trace with scripted corruptions and replays it.

use faulty_tree::harness::{parse, run_trace, RunConfig};

const TRACE: &str = "\
@delta 2
@adversary scripted
ADDLEAF 0 4
ADDLEAF 1 2
ADDLEAF 2 9
ADDLEAF 3 1
ADDLEAF 4 6
LA 5 3
CORRUPT 3 FIELD p=0
LA 5 3
LA 5 1
BVQ 0 5
CHECKPOINT
";

fn main() {
    let trace = parse(TRACE).unwrap();
    let report = run_trace(&trace, &RunConfig::from_meta(&trace.meta)).unwrap();
    for ((line, d), out) in trace.directives.iter().zip(&report.output) {
        println!("{line:>3}: {:<22} -> {out}", d.to_string());
    }
    let v = report.verdicts;
    println!(
        "matched={} exempt={} violations={}",
        v.matched, v.exempt_mismatch, v.violations
    );
}
