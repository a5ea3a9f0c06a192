//! Executable statements of the structural lemmas, evaluated on an
//! uncounted snapshot of a tree against its oracle.
//!
//! Each check returns `None` when its hypothesis does not hold for the
//! sampled vertices (e.g. the path was corrupted), otherwise whether the
//! conclusion holds.

use rand::Rng;
use serde::Serialize;

use crate::black_forest::{QHandle, QNodeView};
use crate::resilient_tree::{NodeRecord, ResilientTree};
use crate::VertexId;

use super::OracleTree;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub checked: u64,
    pub failed: u64,
}

impl Tally {
    fn add(&mut self, r: Option<bool>) {
        if let Some(ok) = r {
            self.checked += 1;
            if !ok {
                self.failed += 1;
            }
        }
    }

    pub fn merge(&mut self, o: Tally) {
        self.checked += o.checked;
        self.failed += o.failed;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LemmaTally {
    pub spent_flag: Tally,
    pub black_in_3delta: Tally,
    pub periodic_pattern: Tally,
    pub no_exceptional: Tally,
    pub q_parents_coincide: Tally,
    pub black_bound: Tally,
}

impl LemmaTally {
    pub fn merge(&mut self, o: &LemmaTally) {
        self.spent_flag.merge(o.spent_flag);
        self.black_in_3delta.merge(o.black_in_3delta);
        self.periodic_pattern.merge(o.periodic_pattern);
        self.no_exceptional.merge(o.no_exceptional);
        self.q_parents_coincide.merge(o.q_parents_coincide);
        self.black_bound.merge(o.black_bound);
    }

    pub fn failures(&self) -> u64 {
        [
            self.spent_flag,
            self.black_in_3delta,
            self.periodic_pattern,
            self.no_exceptional,
            self.q_parents_coincide,
            self.black_bound,
        ]
        .iter()
        .map(|t| t.failed)
        .sum()
    }
}

pub struct Snapshot<'a> {
    tree: &'a ResilientTree,
    oracle: &'a OracleTree,
    delta: usize,
    records: Vec<NodeRecord>,
    forest: Vec<QNodeView>,
}

impl<'a> Snapshot<'a> {
    pub fn new(tree: &'a ResilientTree, oracle: &'a OracleTree) -> Self {
        let records = (0..tree.len())
            .map(|v| tree.peek_record(v).expect("record in range"))
            .collect();
        Self {
            tree,
            oracle,
            delta: tree.delta(),
            records,
            forest: tree.forest().snapshot(tree.ram()),
        }
    }

    fn black(&self, v: VertexId) -> bool {
        self.records[v].is_black()
    }

    fn handle(&self, v: VertexId) -> Option<QHandle> {
        self.records[v].q.filter(|h| h.index() < self.forest.len())
    }

    /// The true path from `v` up `len` levels, if it exists and is clean.
    fn clean_path(&self, v: VertexId, len: usize) -> Option<Vec<VertexId>> {
        if self.oracle.depth(v) < len {
            return None;
        }
        let mut p = Vec::with_capacity(len + 1);
        let mut cur = v;
        for i in 0..=len {
            if self.oracle.is_corrupted(cur) {
                return None;
            }
            p.push(cur);
            if i < len {
                cur = self.oracle.parent(cur)?;
            }
        }
        Some(p)
    }

    /// A spent flag on `w` with a clean window up to its δ-parent `z`
    /// implies a black vertex in `(z, w]`.
    pub fn spent_flag(&self, w: VertexId) -> Option<bool> {
        let path = self.clean_path(w, self.delta)?;
        if !self.records[w].flag.is_spent() {
            return None;
        }
        Some(path[..self.delta].iter().any(|&v| self.black(v)))
    }

    /// A clean path from `x` up 3δ levels to `z` holds a black vertex in
    /// `[z, x)`.
    pub fn black_in_3delta(&self, x: VertexId) -> Option<bool> {
        let path = self.clean_path(x, 3 * self.delta)?;
        Some(path[1..].iter().any(|&v| self.black(v)))
    }

    /// On a clean path of length `len >= 7δ` from `v` up to `u`: some black
    /// `w*` at most δ below the vertex 5δ under `u` starts a run where
    /// exactly every δ-th vertex is black down to δ above `v`, and each
    /// black vertex after `w*` hangs in the forest under its δ-parent.
    pub fn periodic_pattern(&self, v: VertexId, len: usize) -> Option<bool> {
        let d = self.delta;
        if len < 7 * d {
            return None;
        }
        let path = self.clean_path(v, len)?;
        // index i in `path` is distance i above v
        let u_tilde = len - 5 * d;
        let v_tilde = d;
        let ok = (0..=d).filter_map(|s| u_tilde.checked_sub(s)).any(|ws| {
            if !self.black(path[ws]) {
                return false;
            }
            (v_tilde..=ws).all(|i| {
                let dist = ws - i;
                let b = self.black(path[i]);
                if b != (dist % d == 0) {
                    return false;
                }
                if !b || dist == 0 {
                    return true;
                }
                let Some(h) = self.handle(path[i]) else {
                    return false;
                };
                match self.forest[h.index()].parent {
                    Some(p) => self.forest.get(p.index()).map(|n| n.satellite) == Some(path[i + d]),
                    None => false,
                }
            })
        });
        Some(ok)
    }

    /// Every black vertex at the bottom of a clean 2δ path was colored
    /// without an exceptional situation. Checks every creation.
    pub fn no_exceptional(&self) -> Tally {
        let mut t = Tally::default();
        for c in &self.tree.journal().creations {
            if c.black_free || c.vertex >= self.records.len() {
                continue;
            }
            if self.clean_path(c.vertex, 2 * self.delta).is_some() {
                t.add(Some(!c.exceptional));
            }
        }
        t
    }

    /// For black `u`, `v` at least 7δ below their LCA `w` on a clean path:
    /// the shallowest forest ancestors of `u`, `v` still on the path have
    /// the same forest parent, and sit within 6δ of `w`.
    pub fn q_parents_coincide(&self, u: VertexId, v: VertexId) -> Option<bool> {
        if !self.black(u) || !self.black(v) {
            return None;
        }
        let w = self.oracle.lca(u, v);
        let du = self.oracle.depth(u) - self.oracle.depth(w);
        let dv = self.oracle.depth(v) - self.oracle.depth(w);
        if du < 7 * self.delta || dv < 7 * self.delta {
            return None;
        }
        self.clean_path(u, du)?;
        self.clean_path(v, dv)?;
        let a = self.shallowest_on_path(u, w)?;
        let b = self.shallowest_on_path(v, w)?;
        let dist =
            |x: QHandle| self.oracle.depth(self.forest[x.index()].satellite) - self.oracle.depth(w);
        if dist(a) > 6 * self.delta || dist(b) > 6 * self.delta {
            return Some(false);
        }
        let (pa, pb) = (self.forest[a.index()].parent, self.forest[b.index()].parent);
        Some(match (pa, pb) {
            (Some(x), Some(y)) => x == y,
            _ => true,
        })
    }

    fn shallowest_on_path(&self, x: VertexId, w: VertexId) -> Option<QHandle> {
        let on_path: Vec<VertexId> = self.oracle.path_up(x, w);
        let mut h = self.handle(x)?;
        let mut best = None;
        for _ in 0..=self.forest.len() {
            if on_path.contains(&self.forest[h.index()].satellite) {
                best = Some(h);
            }
            match self.forest[h.index()].parent {
                Some(p) if p.index() < self.forest.len() => h = p,
                _ => break,
            }
        }
        best
    }

    /// Forest size times δ is at most `n + δ`.
    pub fn black_bound(&self) -> bool {
        self.forest.len() * self.delta <= self.records.len() + self.delta
    }

    /// Runs every check on `samples` random choices per lemma.
    pub fn sample<R: Rng>(&self, rng: &mut R, samples: usize) -> LemmaTally {
        let n = self.records.len();
        let mut t = LemmaTally::default();
        t.black_bound.add(Some(self.black_bound()));
        t.no_exceptional = self.no_exceptional();
        let blacks: Vec<VertexId> = (0..n).filter(|&v| self.black(v)).collect();
        for _ in 0..samples {
            t.spent_flag.add(self.spent_flag(rng.gen_range(0..n)));
            t.black_in_3delta
                .add(self.black_in_3delta(rng.gen_range(0..n)));
            let v = rng.gen_range(0..n);
            let dv = self.oracle.depth(v);
            if dv >= 7 * self.delta {
                let len = rng.gen_range(7 * self.delta..=dv);
                t.periodic_pattern.add(self.periodic_pattern(v, len));
            }
            if !blacks.is_empty() {
                let a = blacks[rng.gen_range(0..blacks.len())];
                let b = blacks[rng.gen_range(0..blacks.len())];
                t.q_parents_coincide.add(self.q_parents_coincide(a, b));
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faulty_ram::{Adversary, RandomWords};
    use crate::resilient_tree::TreeConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grow(delta: usize, n: usize, adv: Adversary, seed: u64) -> (ResilientTree, OracleTree) {
        let cfg = TreeConfig::with_delta(delta);
        let mut t = ResilientTree::new(cfg, adv, 1).unwrap();
        let mut o = OracleTree::new(cfg, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 1..n {
            let p = if rng.gen_bool(0.9) {
                i - 1
            } else {
                rng.gen_range(0..i)
            };
            let w = rng.gen_range(1..5);
            t.add_leaf(p, w).unwrap();
            o.add_leaf(p, w);
        }
        o.sync(t.ram().adversary().log());
        (t, o)
    }

    #[test]
    fn fault_free_lemmas_hold() {
        for delta in [1, 2, 4] {
            let (t, o) = grow(delta, 600, Adversary::passive(0), delta as u64);
            let s = Snapshot::new(&t, &o);
            let tally = s.sample(&mut ChaCha8Rng::seed_from_u64(1), 2000);
            assert_eq!(tally.failures(), 0, "{tally:?}");
            assert!(tally.periodic_pattern.checked > 100);
            assert!(tally.q_parents_coincide.checked > 0);
        }
    }

    #[test]
    fn random_faults_lemmas_hold() {
        for seed in 0..20 {
            let delta = 3;
            let adv = Adversary::new(delta, RandomWords::new(seed, 0.002));
            let (t, o) = grow(delta, 500, adv, seed);
            let s = Snapshot::new(&t, &o);
            let tally = s.sample(&mut ChaCha8Rng::seed_from_u64(seed), 500);
            assert_eq!(tally.failures(), 0, "seed {seed}: {tally:?}");
        }
    }
}
