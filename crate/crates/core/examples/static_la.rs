//! Level ancestors on a static tree: coloring, the black forest, and a
//! query trace on the small worked example.

use faulty_tree::faulty_ram::Adversary;
use faulty_tree::static_la::{figure_two, StaticTree};

fn main() {
    let (parents, v) = figure_two();
    let mut t = StaticTree::build(&parents, 3, Adversary::passive(0)).unwrap();
    let blacks: Vec<usize> = (0..t.len()).filter(|&u| t.coloring().is_black[u]).collect();
    println!("n={} delta=3 black={blacks:?}", t.len());

    let ans = t.la(v, 8);
    let tr = t.last_trace().unwrap();
    println!(
        "LA({v}, 8) = {ans}  (first black at distance {}, {} forest step(s), {} final climb)",
        tr.d, tr.q_steps, tr.k_rest
    );

    // a long path, to show the access count stays far below k
    let n: usize = 5000;
    let path: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut long = StaticTree::build(&path, 8, Adversary::passive(0)).unwrap();
    let before = long.ram().counters().core_words();
    let ans = long.la(n - 1, 4321);
    let used = long.ram().counters().core_words() - before;
    println!(
        "path of {n}: LA({}, 4321) = {ans} using {used} record words",
        n - 1
    );
}
