//! Weighted level ancestor, bottleneck vertex and lowest common ancestor on
//! top of [`ResilientTree`].
//!
//! Weighted LA returns the deepest ancestor `u` of `v` whose inclusive path
//! weight `v..=u` reaches `k`. BVQ returns the minimum-weight vertex of the
//! `u..v` path; ties go to the `z..v` half (z the LCA), then to the deeper
//! vertex.

use crate::black_forest::{ForestError, LcaQ, QHandle, INF_WEIGHT};
use crate::resilient_tree::{NodeRecord, QueryError, QueryOutcome, ResilientTree};
use crate::VertexId;

type Best = (u64, Option<VertexId>);

fn better(best: &mut Best, cand: Best) {
    if cand.1.is_some() && cand.0 < best.0 {
        *best = cand;
    }
}

impl ResilientTree {
    fn rec_weight(&self, rec: &NodeRecord) -> u64 {
        self.weight_of(rec)
    }

    fn satellite(&mut self, h: QHandle) -> Result<VertexId, QueryError> {
        let (ram, forest) = self.parts();
        let v = forest.satellite(ram, h)?;
        self.check_vertex(v)?;
        Ok(v)
    }

    fn handle_of(&self, rec: &NodeRecord) -> Result<QHandle, QueryError> {
        let q = rec.q.ok_or(QueryError::Inconsistent)?;
        self.forest().check(self.ram(), q).map_err(QueryError::from)
    }

    /// Depth of `a` minus depth of `b`, computed modularly from the records.
    /// Differences whose magnitude exceeds the tree size are rejected.
    fn depth_gap(&mut self, a: VertexId, b: VertexId) -> Result<i64, QueryError> {
        let da = self.record(a)?.depth;
        let db = self.record(b)?.depth;
        let diff = self.config().profile.depth_diff(da, db);
        if diff.unsigned_abs() as usize >= self.len() {
            return Err(QueryError::Inconsistent);
        }
        Ok(diff)
    }

    /// Deepest ancestor of `v` whose inclusive path weight is at least `k`.
    pub fn weighted_la(&mut self, v: VertexId, k: u64) -> QueryOutcome {
        self.ram_mut().begin_op();
        self.wla_inner(v, k).unwrap_or_else(QueryOutcome::Error)
    }

    fn wla_inner(&mut self, v: VertexId, k: u64) -> Result<QueryOutcome, QueryError> {
        self.check_vertex(v)?;
        let delta = self.delta();

        // optimistic scan over v and 10δ ancestors
        let mut cur = v;
        let mut acc = 0u64;
        for i in 0..=10 * delta {
            let rec = self.record(cur)?;
            acc = acc.saturating_add(self.rec_weight(&rec));
            if acc >= k {
                return Ok(QueryOutcome::Answer(cur));
            }
            if cur == 0 {
                return Ok(QueryOutcome::NoAncestor);
            }
            if i < 10 * delta {
                cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
            }
        }

        // climb to the black anchor b, summing v..b exclusive
        let mut cur = v;
        let mut rec = self.record(cur)?;
        let mut w = 0u64;
        let mut anchor = None;
        for dist in 0..=2 * delta {
            if dist >= delta && rec.is_black() {
                anchor = Some((cur, rec));
                break;
            }
            if cur == 0 {
                return Ok(QueryOutcome::NoAncestor);
            }
            w = w.saturating_add(self.rec_weight(&rec));
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
            rec = self.record(cur)?;
        }
        let Some((b, brec)) = anchor else {
            return Err(QueryError::NoBlackAnchor);
        };
        let qb = self.handle_of(&brec)?;
        let budget = k.saturating_sub(w);

        // skip whole segments in the forest
        let (start, skipped) = {
            let (ram, forest) = self.parts();
            match forest.wla(ram, qb, budget)? {
                Some(top) => (top.satellite, top.total - top.top_weight),
                None => (b, 0),
            }
        };
        self.check_vertex(start)?;

        // finish on the tree, counting `start` itself
        let need = budget.saturating_sub(skipped);
        let mut cur = start;
        let mut acc = 0u64;
        for _ in 0..=6 * delta {
            let rec = self.record(cur)?;
            acc = acc.saturating_add(self.rec_weight(&rec));
            if acc >= need {
                return Ok(QueryOutcome::Answer(cur));
            }
            if cur == 0 {
                return Ok(QueryOutcome::NoAncestor);
            }
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
        }
        Err(QueryError::ClimbLimit)
    }

    /// Minimum-weight vertex on the path between `u` and `v`.
    pub fn bvq(&mut self, u: VertexId, v: VertexId) -> QueryOutcome {
        self.ram_mut().begin_op();
        self.bvq_inner(u, v).unwrap_or_else(QueryOutcome::Error)
    }

    fn bvq_inner(&mut self, u: VertexId, v: VertexId) -> Result<QueryOutcome, QueryError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let z = match self.lca_inner(u, v)? {
            QueryOutcome::Answer(z) => z,
            other => return Ok(other),
        };
        let mut best = self.bvq_anc(z, v)?;
        better(&mut best, self.bvq_anc(z, u)?);
        Ok(best.1.map_or(
            QueryOutcome::Error(QueryError::Inconsistent),
            QueryOutcome::Answer,
        ))
    }

    /// Bottleneck of the path from `v` up to its ancestor `u`, both included.
    pub(crate) fn bvq_anc(&mut self, u: VertexId, v: VertexId) -> Result<Best, QueryError> {
        let delta = self.delta();
        let d = self.depth_gap(v, u)?;
        if d < 0 {
            return Err(QueryError::Inconsistent);
        }
        let d = d as usize;

        if d < 10 * delta {
            let (best, end) = self.climb_min(v, d)?;
            if end != u {
                return Err(QueryError::Inconsistent);
            }
            return Ok(best);
        }

        // w1: v up to the black anchor, exclusive
        let mut best: Best = (INF_WEIGHT, None);
        let mut cur = v;
        let mut rec = self.record(cur)?;
        let mut anchor = None;
        for dist in 0..=2 * delta {
            if dist >= delta && rec.is_black() {
                anchor = Some((cur, dist, rec));
                break;
            }
            if cur == 0 {
                return Err(QueryError::Inconsistent);
            }
            better(&mut best, (self.rec_weight(&rec), Some(cur)));
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
            rec = self.record(cur)?;
        }
        let Some((_, dist_b, brec)) = anchor else {
            return Err(QueryError::NoBlackAnchor);
        };
        let qb = self.handle_of(&brec)?;
        let m = (d / delta).saturating_sub(7);

        let (q_best, top) = {
            let (ram, forest) = self.parts();
            let top = match forest.ancestor(ram, qb, m as u64) {
                Ok(t) => t,
                Err(ForestError::TooDeep { .. }) => return Err(QueryError::Inconsistent),
                Err(e) => return Err(e.into()),
            };
            let r = forest.bvq(ram, top, qb)?;
            ((r.min, r.witness), top)
        };
        better(&mut best, q_best);

        // w2: from the satellite of the top node up to u
        let start = self.satellite(top)?;
        let rest = d
            .checked_sub(dist_b + m * delta)
            .ok_or(QueryError::Inconsistent)?;
        if rest > 8 * delta {
            return Err(QueryError::ClimbLimit);
        }
        let (w2, end) = self.climb_min(start, rest)?;
        if end != u {
            return Err(QueryError::Inconsistent);
        }
        better(&mut best, w2);
        Ok(best)
    }

    /// Minimum over `v` and its next `steps` ancestors, and the last vertex.
    fn climb_min(&mut self, v: VertexId, steps: usize) -> Result<(Best, VertexId), QueryError> {
        let mut best: Best = (INF_WEIGHT, None);
        let mut cur = v;
        for i in 0..=steps {
            let rec = self.record(cur)?;
            better(&mut best, (self.rec_weight(&rec), Some(cur)));
            if i == steps {
                break;
            }
            if cur == 0 {
                return Err(QueryError::Inconsistent);
            }
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
        }
        Ok((best, cur))
    }

    /// Level the endpoints, then step both up together for at most 10δ
    /// levels. `None` means inconclusive.
    pub fn naive_lca(&mut self, u: VertexId, v: VertexId) -> Result<Option<VertexId>, QueryError> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let Ok(diff) = self.depth_gap(u, v) else {
            return Ok(None);
        };
        let lift = |t: &mut Self, x: VertexId, k: usize| match t.la_inner(x, k) {
            Ok(QueryOutcome::Answer(a)) => Some(a),
            _ => None,
        };
        let (mut a, mut b) = (u, v);
        if diff > 0 {
            match lift(self, u, diff as usize) {
                Some(x) => a = x,
                None => return Ok(None),
            }
        } else if diff < 0 {
            match lift(self, v, diff.unsigned_abs() as usize) {
                Some(x) => b = x,
                None => return Ok(None),
            }
        }
        for i in 0..=10 * self.delta() {
            if a == b {
                return Ok(Some(a));
            }
            if a == 0 || b == 0 || i == 10 * self.delta() {
                break;
            }
            let ra = self.record(a)?;
            let rb = self.record(b)?;
            a = Self::noisy_parent(a, &ra).unwrap_or(0);
            b = Self::noisy_parent(b, &rb).unwrap_or(0);
        }
        Ok(None)
    }

    pub fn lca(&mut self, u: VertexId, v: VertexId) -> QueryOutcome {
        self.ram_mut().begin_op();
        self.lca_inner(u, v).unwrap_or_else(QueryOutcome::Error)
    }

    pub(crate) fn lca_inner(
        &mut self,
        u: VertexId,
        v: VertexId,
    ) -> Result<QueryOutcome, QueryError> {
        if let Some(z) = self.naive_lca(u, v)? {
            return Ok(QueryOutcome::Answer(z));
        }
        let delta = self.delta();
        let Some((ub, _, urec)) = self.find_black(u, 2 * delta)? else {
            return Err(QueryError::NoBlackAnchor);
        };
        let Some((vb, _, vrec)) = self.find_black(v, 2 * delta)? else {
            return Err(QueryError::NoBlackAnchor);
        };
        let qu = self.handle_of(&urec)?;
        let qv = self.handle_of(&vrec)?;
        let res = {
            let (ram, forest) = self.parts();
            forest.lca(ram, qu, qv)?
        };
        match res {
            LcaQ::SameTree {
                toward_u, toward_v, ..
            } => {
                let a = match toward_u {
                    Some(h) => self.satellite(h)?,
                    None => ub,
                };
                let b = match toward_v {
                    Some(h) => self.satellite(h)?,
                    None => vb,
                };
                match self.naive_lca(a, b)? {
                    Some(z) => Ok(QueryOutcome::Answer(z)),
                    None => Err(QueryError::Inconsistent),
                }
            }
            LcaQ::DifferentTrees { root_u, root_v } => {
                let ru = self.satellite(root_u)?;
                let rv = self.satellite(root_v)?;
                let du = self.record(ru)?.depth;
                let dv = self.record(rv)?.depth;
                let u_first = self.config().profile.depth_diff(du, dv) >= 0;
                let order = if u_first {
                    [(ru, u, v), (rv, v, u)]
                } else {
                    [(rv, v, u), (ru, u, v)]
                };
                for (attempt, (root, side, other)) in order.into_iter().enumerate() {
                    if attempt == 1 {
                        self.journal_mut().lca_fallbacks += 1;
                    }
                    if let Some(z) = self.via_root(root, side, other)? {
                        if attempt == 1 && self.naive_lca(root, side)? != Some(z) {
                            self.journal_mut().lca_literal_divergences += 1;
                        }
                        return Ok(QueryOutcome::Answer(z));
                    }
                }
                Err(QueryError::Inconsistent)
            }
        }
    }

    /// Checks that `root` is an ancestor of `side`, then runs the naive
    /// query between `root` and `other`.
    fn via_root(
        &mut self,
        root: VertexId,
        side: VertexId,
        other: VertexId,
    ) -> Result<Option<VertexId>, QueryError> {
        let Ok(k) = self.depth_gap(side, root) else {
            return Ok(None);
        };
        if k < 0 {
            return Ok(None);
        }
        match self.la_inner(side, k as usize) {
            Ok(QueryOutcome::Answer(a)) if a == root => self.naive_lca(root, other),
            _ => Ok(None),
        }
    }

    /// Exact distance-`k` climb exposed for callers that want no shortcut.
    pub fn climb_exact(&mut self, v: VertexId, k: usize) -> QueryOutcome {
        self.ram_mut().begin_op();
        if let Err(e) = self.check_vertex(v) {
            return QueryOutcome::Error(e);
        }
        match self.climb(v, k) {
            Ok(c) => c.into(),
            Err(e) => QueryOutcome::Error(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilient_tree::TreeConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Plain {
        parent: Vec<usize>,
        weight: Vec<u64>,
    }

    impl Plain {
        fn path(&self, mut v: usize) -> Vec<usize> {
            let mut p = vec![v];
            while v != 0 {
                v = self.parent[v];
                p.push(v);
            }
            p
        }

        fn wla(&self, v: usize, k: u64) -> Option<usize> {
            let mut acc = 0;
            self.path(v).into_iter().find(|&x| {
                acc += self.weight[x];
                acc >= k
            })
        }

        fn lca(&self, u: usize, v: usize) -> usize {
            let pu = self.path(u);
            *self.path(v).iter().find(|x| pu.contains(x)).unwrap()
        }

        fn bvq(&self, u: usize, v: usize) -> usize {
            let z = self.lca(u, v);
            let side = |x: usize| {
                let mut best = (u64::MAX, 0);
                for y in self.path(x) {
                    if self.weight[y] < best.0 {
                        best = (self.weight[y], y);
                    }
                    if y == z {
                        break;
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
    }

    fn build(delta: usize, n: usize, seed: u64, wmax: u64) -> (ResilientTree, Plain) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = ResilientTree::fault_free(TreeConfig::with_delta(delta), 1).unwrap();
        let mut p = Plain {
            parent: vec![0],
            weight: vec![1],
        };
        for i in 1..n {
            let par = if rng.gen_bool(0.85) {
                i - 1
            } else {
                rng.gen_range(0..i)
            };
            let w = rng.gen_range(1..=wmax);
            t.add_leaf(par, w).unwrap();
            p.parent.push(par);
            p.weight.push(w);
        }
        (t, p)
    }

    #[test]
    fn weighted_la_matches_scan() {
        for delta in [1, 2, 3, 4] {
            let (mut t, p) = build(delta, 400, 7 + delta as u64, 8);
            for v in (0..400).step_by(5) {
                for k in (1..600).step_by(13) {
                    let got = t.weighted_la(v, k);
                    match p.wla(v, k) {
                        Some(a) => assert_eq!(got, QueryOutcome::Answer(a), "d{delta} v{v} k{k}"),
                        None => assert!(got.answer().is_none(), "d{delta} v{v} k{k}"),
                    }
                }
            }
        }
    }

    #[test]
    fn unit_weights_reduce_to_la() {
        let (mut t, _) = build(2, 200, 3, 1);
        for v in (0..200).step_by(3) {
            for k in 1..120u64 {
                assert_eq!(t.weighted_la(v, k), t.la(v, k as usize - 1), "v{v} k{k}");
            }
        }
    }

    #[test]
    fn lca_and_bvq_match_scan() {
        for delta in [1, 2, 3] {
            let (mut t, p) = build(delta, 500, 100 + delta as u64, 20);
            let mut rng = ChaCha8Rng::seed_from_u64(delta as u64);
            for _ in 0..400 {
                let u = rng.gen_range(0..500);
                let v = rng.gen_range(0..500);
                assert_eq!(
                    t.lca(u, v),
                    QueryOutcome::Answer(p.lca(u, v)),
                    "d{delta} {u} {v}"
                );
                assert_eq!(
                    t.bvq(u, v),
                    QueryOutcome::Answer(p.bvq(u, v)),
                    "d{delta} {u} {v}"
                );
            }
        }
    }

    #[test]
    fn naive_lca_cases() {
        let delta = 1;
        let mut t = ResilientTree::fault_free(TreeConfig::with_delta(delta), 1).unwrap();
        // two long branches under the root
        let mut last = 0;
        for _ in 0..30 {
            last = t.add_leaf(last, 1).unwrap();
        }
        let left = last;
        last = 0;
        for _ in 0..30 {
            last = t.add_leaf(last, 1).unwrap();
        }
        let right = last;
        assert_eq!(t.naive_lca(left, left).unwrap(), Some(left));
        assert_eq!(t.naive_lca(5, left).unwrap(), Some(5));
        assert_eq!(t.naive_lca(left, right).unwrap(), None);
        assert_eq!(t.lca(left, right), QueryOutcome::Answer(0));
    }

    #[test]
    fn bvq_small_cases() {
        let mut t = ResilientTree::fault_free(TreeConfig::with_delta(1), 4).unwrap();
        t.add_leaf(0, 1).unwrap();
        t.add_leaf(1, 9).unwrap();
        assert_eq!(t.bvq(0, 2), QueryOutcome::Answer(1));
        assert_eq!(t.bvq(2, 2), QueryOutcome::Answer(2));
        assert_eq!(t.weighted_la(2, 9), QueryOutcome::Answer(2));
        assert_eq!(t.weighted_la(2, 10), QueryOutcome::Answer(1));
        assert_eq!(t.weighted_la(2, 15), QueryOutcome::NoAncestor);
    }
}
