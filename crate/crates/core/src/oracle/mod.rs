//! Ground truth kept outside the simulated memory: a plain mirror of every
//! insertion, brute-force query answers, and the set of vertices whose
//! records the adversary ever touched.

pub mod lemmas;

use serde::{Deserialize, Serialize};

use crate::faulty_ram::{Corruption, Region};
use crate::resilient_tree::{QueryOutcome, ResilientTree, TreeConfig};
use crate::VertexId;

/// One query, as it appears in traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Query {
    La { v: VertexId, k: usize },
    Wla { v: VertexId, k: u64 },
    Lca { u: VertexId, v: VertexId },
    Bvq { u: VertexId, v: VertexId },
}

impl Query {
    pub fn run(&self, t: &mut ResilientTree) -> QueryOutcome {
        match *self {
            Query::La { v, k } => t.la(v, k),
            Query::Wla { v, k } => t.weighted_la(v, k),
            Query::Lca { u, v } => t.lca(u, v),
            Query::Bvq { u, v } => t.bvq(u, v),
        }
    }

    pub fn verb(&self) -> &'static str {
        match self {
            Query::La { .. } => "LA",
            Query::Wla { .. } => "WLA",
            Query::Lca { .. } => "LCA",
            Query::Bvq { .. } => "BVQ",
        }
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Query::La { v, k } => write!(f, "LA {v} {k}"),
            Query::Wla { v, k } => write!(f, "WLA {v} {k}"),
            Query::Lca { u, v } => write!(f, "LCA {u} {v}"),
            Query::Bvq { u, v } => write!(f, "BVQ {u} {v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    /// Wrong answer on a query whose path was corrupted. Allowed.
    ExemptMismatch,
    Violation,
}

#[derive(Clone, Debug)]
pub struct OracleTree {
    cfg: TreeConfig,
    parent: Vec<VertexId>,
    depth: Vec<usize>,
    weight: Vec<u64>,
    corrupted: Vec<bool>,
    corrupted_count: usize,
    seen: usize,
}

impl OracleTree {
    pub fn new(cfg: TreeConfig, root_weight: u64) -> Self {
        Self {
            cfg,
            parent: vec![0],
            depth: vec![0],
            weight: vec![cfg.clamp_weight(root_weight)],
            corrupted: vec![false],
            corrupted_count: 0,
            seen: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mirrors [`ResilientTree::add_leaf`], including its normalization of
    /// bad parents and out-of-range weights.
    pub fn add_leaf(&mut self, x_par: VertexId, weight: u64) -> VertexId {
        let n = self.len();
        let p = if x_par < n { x_par } else { 0 };
        self.parent.push(p);
        self.depth.push(self.depth[p] + 1);
        self.weight.push(self.cfg.clamp_weight(weight));
        self.corrupted.push(false);
        n
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        (v != 0).then(|| self.parent[v])
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v]
    }

    pub fn weight(&self, v: VertexId) -> u64 {
        self.weight[v]
    }

    /// Marks vertices whose records appear in the adversary log since the
    /// last call.
    pub fn sync(&mut self, log: &[Corruption]) {
        let width = self.cfg.profile.width();
        for c in &log[self.seen.min(log.len())..] {
            if c.region == Region::Records {
                let v = c.addr / width;
                if v < self.corrupted.len() && !self.corrupted[v] {
                    self.corrupted[v] = true;
                    self.corrupted_count += 1;
                }
            }
        }
        self.seen = log.len();
    }

    pub fn mark_corrupted(&mut self, v: VertexId) {
        if !self.corrupted[v] {
            self.corrupted[v] = true;
            self.corrupted_count += 1;
        }
    }

    pub fn is_corrupted(&self, v: VertexId) -> bool {
        self.corrupted[v]
    }

    pub fn corrupted_count(&self) -> usize {
        self.corrupted_count
    }

    pub fn corrupted_set(&self) -> Vec<VertexId> {
        (0..self.len()).filter(|&v| self.corrupted[v]).collect()
    }

    pub fn la(&self, v: VertexId, k: usize) -> Option<VertexId> {
        if k > self.depth[v] {
            return None;
        }
        let mut cur = v;
        for _ in 0..k {
            cur = self.parent[cur];
        }
        Some(cur)
    }

    pub fn wla(&self, v: VertexId, k: u64) -> Option<VertexId> {
        let mut cur = v;
        let mut acc = 0u64;
        loop {
            acc = acc.saturating_add(self.weight[cur]);
            if acc >= k {
                return Some(cur);
            }
            if cur == 0 {
                return None;
            }
            cur = self.parent[cur];
        }
    }

    pub fn lca(&self, u: VertexId, v: VertexId) -> VertexId {
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    /// Vertices from `v` up to its ancestor `a`, both included.
    pub fn path_up(&self, v: VertexId, a: VertexId) -> Vec<VertexId> {
        let mut out = vec![v];
        let mut cur = v;
        while cur != a && cur != 0 {
            cur = self.parent[cur];
            out.push(cur);
        }
        out
    }

    /// Minimum-weight vertex of the `u..v` path. Ties prefer the `z..v`
    /// half, then the deeper vertex.
    pub fn bvq(&self, u: VertexId, v: VertexId) -> VertexId {
        let z = self.lca(u, v);
        let side = |x: VertexId| {
            let mut best = (u64::MAX, z);
            for y in self.path_up(x, z) {
                if self.weight[y] < best.0 {
                    best = (self.weight[y], y);
                }
            }
            best
        };
        let (bv, bu) = (side(v), side(u));
        if bu.0 < bv.0 {
            bu.1
        } else {
            bv.1
        }
    }

    pub fn answer(&self, q: &Query) -> Option<VertexId> {
        match *q {
            Query::La { v, k } => self.la(v, k),
            Query::Wla { v, k } => self.wla(v, k),
            Query::Lca { u, v } => Some(self.lca(u, v)),
            Query::Bvq { u, v } => Some(self.bvq(u, v)),
        }
    }

    /// Vertices whose integrity the query's answer depends on.
    pub fn defining_path(&self, q: &Query) -> Vec<VertexId> {
        match *q {
            Query::La { v, .. } | Query::Wla { v, .. } => {
                let top = self.answer(q).unwrap_or(0);
                self.path_up(v, top)
            }
            Query::Lca { u, v } | Query::Bvq { u, v } => {
                let z = self.lca(u, v);
                let mut p = self.path_up(u, z);
                p.extend(self.path_up(v, z));
                p
            }
        }
    }

    /// Whether the contract obliges the structure to answer `q` correctly.
    pub fn must_match(&self, q: &Query) -> bool {
        self.corrupted_count == 0 || self.defining_path(q).iter().all(|&v| !self.corrupted[v])
    }

    pub fn valid(&self, q: &Query) -> bool {
        let n = self.len();
        match *q {
            Query::La { v, .. } | Query::Wla { v, .. } => v < n,
            Query::Lca { u, v } | Query::Bvq { u, v } => u < n && v < n,
        }
    }

    /// When the true answer does not exist, any non-answer is correct.
    pub fn agrees(&self, q: &Query, got: &QueryOutcome) -> bool {
        match self.answer(q) {
            Some(a) => *got == QueryOutcome::Answer(a),
            None => got.answer().is_none(),
        }
    }

    pub fn judge(&self, q: &Query, got: &QueryOutcome) -> Verdict {
        if self.agrees(q, got) {
            Verdict::Match
        } else if self.must_match(q) {
            Verdict::Violation
        } else {
            Verdict::ExemptMismatch
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, weights: &[u64]) -> OracleTree {
        let mut o = OracleTree::new(TreeConfig::with_delta(1), weights[0]);
        for (i, &w) in weights.iter().enumerate().take(n).skip(1) {
            o.add_leaf(i - 1, w);
        }
        o
    }

    #[test]
    fn basic_answers() {
        let o = chain(3, &[4, 1, 9]);
        assert_eq!(o.la(2, 0), Some(2));
        assert_eq!(o.la(2, 3), None);
        assert_eq!(o.lca(1, 1), 1);
        assert_eq!(o.bvq(0, 2), 1);
        assert_eq!(o.bvq(2, 0), 1);
        assert_eq!(o.wla(2, 10), Some(1));
        assert_eq!(o.wla(2, 15), None);
    }

    #[test]
    fn bvq_tie_prefers_v_side_then_depth() {
        let mut o = OracleTree::new(TreeConfig::with_delta(1), 5);
        let a = o.add_leaf(0, 2);
        let b = o.add_leaf(a, 2);
        let c = o.add_leaf(0, 2);
        assert_eq!(o.bvq(b, c), c);
        assert_eq!(o.bvq(c, b), b);
        assert_eq!(o.bvq(0, b), b);
    }

    #[test]
    fn must_match_follows_corruptions() {
        let mut o = chain(8, &[1; 8]);
        let q = Query::La { v: 7, k: 3 };
        assert!(o.must_match(&q));
        o.mark_corrupted(2);
        assert!(!o.must_match(&Query::Lca { u: 7, v: 0 }));
        assert!(o.must_match(&q));
        assert!(!o.must_match(&Query::La { v: 7, k: 5 }));
    }

    #[test]
    fn off_path_corruption_keeps_short_queries() {
        // w sits three levels below a corrupted ancestor; its first two
        // ancestors are intact
        let mut o = chain(6, &[1; 6]);
        let w = 5;
        o.mark_corrupted(2);
        for k in 0..=2 {
            assert!(o.must_match(&Query::La { v: w, k }));
        }
        assert!(!o.must_match(&Query::La { v: w, k: 3 }));
    }

    #[test]
    fn judge_missing_answer() {
        let o = chain(3, &[1; 3]);
        let q = Query::La { v: 2, k: 9 };
        assert_eq!(o.judge(&q, &QueryOutcome::NoAncestor), Verdict::Match);
        assert_eq!(o.judge(&q, &QueryOutcome::Answer(0)), Verdict::Violation);
    }
}
