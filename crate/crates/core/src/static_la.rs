//! Level ancestor on a tree known in advance.
//!
//! A vertex is black when its depth is a multiple of δ and its subtree has
//! height at least δ−1. Records are two words, `[p, q]`, and pointers that
//! leave the array or point to the vertex itself abort the query.

use thiserror::Error;

use crate::black_forest::{BlackForest, ForestError, QHandle, QWeights};
use crate::faulty_ram::{Adversary, FaultyRam, Region, SimError, Word, DEFAULT_SAFE_WORDS};
use crate::resilient_tree::{Climb, LaTrace, QueryError, QueryOutcome};
use crate::VertexId;

const NULL: Word = Word::MAX;
pub const STATIC_WIDTH: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StaticError {
    #[error("empty tree")]
    Empty,
    #[error("no root")]
    NoRoot,
    #[error("vertices {0} and {1} are both roots")]
    MultipleRoots(VertexId, VertexId),
    #[error("vertex {v} has parent {p} outside the tree")]
    ParentOutOfRange { v: VertexId, p: VertexId },
    #[error("vertex {0} lies on a cycle")]
    Cycle(VertexId),
    #[error("delta must be at least 1")]
    ZeroDelta,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StaticColoring {
    pub is_black: Vec<bool>,
    pub q_of: Vec<Option<QHandle>>,
}

impl StaticColoring {
    pub fn black_count(&self) -> usize {
        self.is_black.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug)]
pub struct StaticTree {
    ram: FaultyRam,
    forest: BlackForest,
    delta: usize,
    n: usize,
    coloring: StaticColoring,
    last: Option<LaTrace>,
}

/// Depths of a parent array, validating that it is a single rooted tree.
pub fn depths(parents: &[Option<VertexId>]) -> Result<(VertexId, Vec<usize>), StaticError> {
    let n = parents.len();
    if n == 0 {
        return Err(StaticError::Empty);
    }
    let mut root = None;
    for (v, p) in parents.iter().enumerate() {
        match *p {
            None => {
                if let Some(r) = root {
                    return Err(StaticError::MultipleRoots(r, v));
                }
                root = Some(v);
            }
            Some(p) if p >= n => return Err(StaticError::ParentOutOfRange { v, p }),
            Some(_) => {}
        }
    }
    let root = root.ok_or(StaticError::NoRoot)?;
    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    let mut stack = Vec::new();
    for v in 0..n {
        let mut cur = v;
        while depth[cur] == usize::MAX {
            stack.push(cur);
            if stack.len() > n {
                return Err(StaticError::Cycle(v));
            }
            cur = parents[cur].expect("only the root lacks a parent");
        }
        let mut d = depth[cur];
        while let Some(x) = stack.pop() {
            d += 1;
            depth[x] = d;
        }
    }
    Ok((root, depth))
}

/// Black set of a parent array.
pub fn color(parents: &[Option<VertexId>], delta: usize) -> Result<Vec<bool>, StaticError> {
    if delta == 0 {
        return Err(StaticError::ZeroDelta);
    }
    let (_, depth) = depths(parents)?;
    let n = parents.len();
    let mut order: Vec<VertexId> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(depth[v]));
    let mut height = vec![0usize; n];
    for &v in &order {
        if let Some(p) = parents[v] {
            height[p] = height[p].max(height[v] + 1);
        }
    }
    Ok((0..n)
        .map(|v| depth[v] % delta == 0 && height[v] + 1 >= delta)
        .collect())
}

impl StaticTree {
    /// Builds the records and the forest without faults, then hands the
    /// memory to `adversary`.
    pub fn build(
        parents: &[Option<VertexId>],
        delta: usize,
        adversary: Adversary,
    ) -> Result<Self, StaticError> {
        let is_black = color(parents, delta)?;
        let (_, depth) = depths(parents)?;
        let n = parents.len();
        let mut ram = FaultyRam::new(DEFAULT_SAFE_WORDS, Adversary::passive(0));
        ram.set_unit(Region::Records, STATIC_WIDTH);
        let forest = BlackForest::new(&mut ram, delta)?;

        let mut by_depth: Vec<VertexId> = (0..n).collect();
        by_depth.sort_by_key(|&v| depth[v]);
        let mut q_of = vec![None; n];
        for &v in &by_depth {
            if !is_black[v] {
                continue;
            }
            let mut up = parents[v];
            while let Some(a) = up {
                if is_black[a] {
                    break;
                }
                up = parents[a];
            }
            let h = match up {
                None => forest.new_tree(&mut ram, v, QWeights::unit())?,
                Some(a) => {
                    let pq = q_of[a].expect("ancestors are placed first");
                    forest.add_leaf(&mut ram, pq, v, QWeights::unit())?
                }
            };
            q_of[v] = Some(h);
        }
        for v in 0..n {
            ram.append(Region::Records, parents[v].map_or(NULL, |p| p as Word));
            ram.append(Region::Records, q_of[v].map_or(NULL, |h| h.0 as Word));
        }
        ram.replace_adversary(adversary);
        Ok(Self {
            ram,
            forest,
            delta,
            n,
            coloring: StaticColoring { is_black, q_of },
            last: None,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn coloring(&self) -> &StaticColoring {
        &self.coloring
    }

    pub fn forest(&self) -> &BlackForest {
        &self.forest
    }

    pub fn ram(&self) -> &FaultyRam {
        &self.ram
    }

    pub fn ram_mut(&mut self) -> &mut FaultyRam {
        &mut self.ram
    }

    /// Internals of the last query that used the forest.
    pub fn last_trace(&self) -> Option<LaTrace> {
        self.last
    }

    fn parent(&mut self, v: VertexId) -> Result<Option<VertexId>, QueryError> {
        let w = self.ram.read(Region::Records, v * STATIC_WIDTH)?;
        if w == NULL {
            return Ok(None);
        }
        if w >= self.n as Word || w == v as Word {
            return Err(QueryError::Inconsistent);
        }
        Ok(Some(w as VertexId))
    }

    fn q(&mut self, v: VertexId) -> Result<Option<QHandle>, QueryError> {
        let w = self.ram.read(Region::Records, v * STATIC_WIDTH + 1)?;
        if w == NULL {
            return Ok(None);
        }
        let h = QHandle(u32::try_from(w).map_err(|_| QueryError::Inconsistent)?);
        Ok(Some(self.forest.check(&self.ram, h)?))
    }

    pub fn climb(&mut self, v: VertexId, i: usize) -> Result<Climb, QueryError> {
        let mut cur = v;
        for _ in 0..i {
            match self.parent(cur)? {
                Some(p) => cur = p,
                None => return Ok(Climb::RootReached),
            }
        }
        Ok(Climb::At(cur))
    }

    pub fn la(&mut self, v: VertexId, k: usize) -> QueryOutcome {
        self.ram.begin_op();
        self.last = None;
        self.la_inner(v, k).unwrap_or_else(QueryOutcome::Error)
    }

    fn la_inner(&mut self, v: VertexId, k: usize) -> Result<QueryOutcome, QueryError> {
        if v >= self.n {
            return Err(QueryError::BadVertex(v));
        }
        let delta = self.delta;
        if k <= 2 * delta {
            return Ok(self.climb(v, k)?.into());
        }
        let mut cur = v;
        let mut found = None;
        for d in 0..=2 * delta {
            if let Some(h) = self.q(cur)? {
                found = Some((d, h));
                break;
            }
            match self.parent(cur)? {
                Some(p) if d < 2 * delta => cur = p,
                Some(_) => {}
                None => return Ok(QueryOutcome::NoAncestor),
            }
        }
        let Some((d, h)) = found else {
            return Err(QueryError::NoBlackAnchor);
        };
        let k1 = k - d;
        let steps = k1 / delta;
        let u1 = match self.forest.la(&mut self.ram, h, steps as u64) {
            Ok(u) => u,
            Err(ForestError::TooDeep { .. }) => return Ok(QueryOutcome::NoAncestor),
            Err(e) => return Err(e.into()),
        };
        if u1 >= self.n {
            return Err(QueryError::Inconsistent);
        }
        let k_rest = k1 - steps * delta;
        self.last = Some(LaTrace {
            d,
            q_steps: steps as u64,
            k_rest,
        });
        Ok(self.climb(u1, k_rest)?.into())
    }
}

/// The tree of the running example for δ = 3: a path of depths 0..=9
/// ending at `v`, plus a branch hanging from the depth-3 vertex down to
/// depth 7. Returns the parent array and `v`.
pub fn figure_two() -> (Vec<Option<VertexId>>, VertexId) {
    let mut parents = vec![None];
    for d in 1..=9 {
        parents.push(Some(d - 1));
    }
    let mut last = 3;
    for _ in 4..=7 {
        parents.push(Some(last));
        last = parents.len() - 1;
    }
    (parents, 9)
}
