//! The forest over black vertices, stored entirely in replicated cells.
//!
//! Every node keeps a header (parent, depth, two weights, BVQ witness,
//! satellite vertex, table address) and a binary-lifting table. Level `j`
//! of a node's table describes the span of its ancestors at distances
//! `1..=2^j`: the `2^j`-th ancestor, the weight sum over the span, and the
//! minimum weight over the span with its witness.
//!
//! Queries cost O(log m) replicated reads, so O(δ log m) words.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faulty_ram::{FaultyRam, Region, SafeFrame, SimError, Word};
use crate::replication::{rep_alloc, rep_peek, rep_read, slot_count, ReplicatedCell};
use crate::VertexId;

/// Weight of a node that never wins a bottleneck comparison.
pub const INF_WEIGHT: u64 = u64::MAX;

const NULL: Word = u64::MAX;

const H_PARENT: usize = 0;
const H_DEPTH: usize = 1;
const H_SUM: usize = 2;
const H_MIN: usize = 3;
const H_WITNESS: usize = 4;
const H_SATELLITE: usize = 5;
const H_TABLE: usize = 6;
const HEADER_CELLS: usize = 7;

const T_JUMP: usize = 0;
const T_SUM: usize = 1;
const T_MIN: usize = 2;
const T_WITNESS: usize = 3;
const LEVEL_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QHandle(pub u32);

impl QHandle {
    /// What a garbage handle decodes to. Never a valid node.
    pub const INVALID: QHandle = QHandle(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for QHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Weights attached to a forest node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QWeights {
    /// Used by weighted level ancestor.
    pub sum: u64,
    /// Used by bottleneck queries; `INF_WEIGHT` for nodes without a segment.
    pub min: u64,
    /// Vertex of `T` carrying `min`.
    pub witness: Option<VertexId>,
}

impl QWeights {
    pub fn unit() -> Self {
        Self {
            sum: 1,
            min: INF_WEIGHT,
            witness: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("invalid forest handle {0}")]
    InvalidHandle(u64),
    #[error("ancestor {k} requested above depth {depth}")]
    TooDeep { depth: u64, k: u64 },
    #[error("not an ancestor")]
    NotAncestor,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcaQ {
    /// `toward_u` is the child of `lca` on the path to `u`, or `None` when
    /// `u` is the lca itself. Same for `toward_v`.
    SameTree {
        lca: QHandle,
        toward_u: Option<QHandle>,
        toward_v: Option<QHandle>,
    },
    DifferentTrees {
        root_u: QHandle,
        root_v: QHandle,
    },
}

/// Result of a weighted level-ancestor query on the forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WlaQ {
    /// Shallowest ancestor whose inclusive path weight fits the budget.
    pub top: QHandle,
    pub satellite: VertexId,
    /// Inclusive weight of the path `top..=start`.
    pub total: u64,
    /// Weight of `top` alone.
    pub top_weight: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BvqQ {
    pub min: u64,
    pub witness: Option<VertexId>,
}

/// Plain copy of one node, decoded without accounting. For tests and
/// invariant checks only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QNodeView {
    pub parent: Option<QHandle>,
    pub depth: u64,
    pub weights: QWeights,
    pub satellite: VertexId,
}

#[derive(Clone, Copy, Debug)]
struct Level {
    jump: QHandle,
    sum: u64,
    min: u64,
    witness: Word,
}

fn levels_for(depth: u64) -> usize {
    if depth == 0 {
        0
    } else {
        (64 - depth.leading_zeros()) as usize
    }
}

fn encode_handle(h: Option<QHandle>) -> Word {
    h.map_or(NULL, |h| h.0 as Word)
}

fn encode_vertex(v: Option<VertexId>) -> Word {
    v.map_or(NULL, |v| v as Word)
}

fn decode_vertex(w: Word) -> Option<VertexId> {
    (w != NULL).then_some(w as VertexId)
}

/// Handle and addressing state of the forest. The node count is kept in a
/// safe word; everything else lives in the two forest regions.
#[derive(Clone, Copy, Debug)]
pub struct BlackForest {
    delta: usize,
    slots: usize,
    count: SafeFrame,
}

impl BlackForest {
    /// Reserves the persistent safe word holding the node count.
    pub fn new(ram: &mut FaultyRam, delta: usize) -> Result<Self, SimError> {
        let count = ram.safe_mut().reserve(1)?;
        Ok(Self {
            delta,
            slots: slot_count(delta),
            count,
        })
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn len(&self, ram: &FaultyRam) -> usize {
        ram.safe().get(self.count, 0) as usize
    }

    pub fn is_empty(&self, ram: &FaultyRam) -> bool {
        self.len(ram) == 0
    }

    fn header(&self, h: QHandle, field: usize) -> ReplicatedCell {
        ReplicatedCell::at(
            Region::ForestNodes,
            (h.index() * HEADER_CELLS + field) * self.slots,
            self.delta,
        )
    }

    fn table_cell(&self, base: usize, level: usize, field: usize) -> ReplicatedCell {
        ReplicatedCell::at(
            Region::ForestTables,
            base + (level * LEVEL_CELLS + field) * self.slots,
            self.delta,
        )
    }

    /// Validates a handle against the current node count.
    pub fn check(&self, ram: &FaultyRam, h: QHandle) -> Result<QHandle, ForestError> {
        if h.index() < self.len(ram) {
            Ok(h)
        } else {
            Err(ForestError::InvalidHandle(h.0 as u64))
        }
    }

    fn handle_from(&self, ram: &FaultyRam, w: Word) -> Result<Option<QHandle>, ForestError> {
        if w == NULL {
            return Ok(None);
        }
        if w >= self.len(ram) as Word {
            return Err(ForestError::InvalidHandle(w));
        }
        Ok(Some(QHandle(w as u32)))
    }

    fn read(&self, ram: &mut FaultyRam, h: QHandle, field: usize) -> Result<Word, ForestError> {
        Ok(rep_read(ram, self.header(h, field))?)
    }

    fn read_level(
        &self,
        ram: &mut FaultyRam,
        base: usize,
        level: usize,
    ) -> Result<Level, ForestError> {
        let jump = rep_read(ram, self.table_cell(base, level, T_JUMP))?;
        let jump = self
            .handle_from(ram, jump)?
            .ok_or(ForestError::InvalidHandle(NULL))?;
        Ok(Level {
            jump,
            sum: rep_read(ram, self.table_cell(base, level, T_SUM))?,
            min: rep_read(ram, self.table_cell(base, level, T_MIN))?,
            witness: rep_read(ram, self.table_cell(base, level, T_WITNESS))?,
        })
    }

    fn jump(&self, ram: &mut FaultyRam, h: QHandle, level: usize) -> Result<QHandle, ForestError> {
        let base = self.read(ram, h, H_TABLE)? as usize;
        let jump = rep_read(ram, self.table_cell(base, level, T_JUMP))?;
        self.handle_from(ram, jump)?
            .ok_or(ForestError::InvalidHandle(NULL))
    }

    pub fn depth(&self, ram: &mut FaultyRam, h: QHandle) -> Result<u64, ForestError> {
        self.check(ram, h)?;
        self.read(ram, h, H_DEPTH)
    }

    pub fn parent(&self, ram: &mut FaultyRam, h: QHandle) -> Result<Option<QHandle>, ForestError> {
        self.check(ram, h)?;
        let w = self.read(ram, h, H_PARENT)?;
        self.handle_from(ram, w)
    }

    pub fn satellite(&self, ram: &mut FaultyRam, h: QHandle) -> Result<VertexId, ForestError> {
        self.check(ram, h)?;
        Ok(self.read(ram, h, H_SATELLITE)? as VertexId)
    }

    pub fn weights(&self, ram: &mut FaultyRam, h: QHandle) -> Result<QWeights, ForestError> {
        self.check(ram, h)?;
        Ok(QWeights {
            sum: self.read(ram, h, H_SUM)?,
            min: self.read(ram, h, H_MIN)?,
            witness: decode_vertex(self.read(ram, h, H_WITNESS)?),
        })
    }

    fn create(
        &self,
        ram: &mut FaultyRam,
        parent: Option<QHandle>,
        depth: u64,
        satellite: VertexId,
        weights: QWeights,
    ) -> Result<QHandle, ForestError> {
        let n = self.len(ram);
        if n >= u32::MAX as usize - 1 {
            return Err(SimError::Capacity("forest handles").into());
        }
        let h = QHandle(n as u32);
        let table = ram.len(Region::ForestTables) as Word;
        let header = [
            encode_handle(parent),
            depth,
            weights.sum,
            weights.min,
            encode_vertex(weights.witness),
            satellite as Word,
            table,
        ];
        for w in header {
            rep_alloc(ram, Region::ForestNodes, self.delta, w);
        }
        ram.safe_mut().set(self.count, 0, n as Word + 1);
        Ok(h)
    }

    /// Creates a one-node tree for `v`.
    pub fn new_tree(
        &self,
        ram: &mut FaultyRam,
        v: VertexId,
        weights: QWeights,
    ) -> Result<QHandle, ForestError> {
        self.create(ram, None, 0, v, weights)
    }

    /// Adds a child of `parent` for `v` and fills its lifting table.
    pub fn add_leaf(
        &self,
        ram: &mut FaultyRam,
        parent: QHandle,
        v: VertexId,
        weights: QWeights,
    ) -> Result<QHandle, ForestError> {
        self.check(ram, parent)?;
        let depth = self.read(ram, parent, H_DEPTH)? + 1;
        let mut cur = Level {
            jump: parent,
            sum: self.read(ram, parent, H_SUM)?,
            min: self.read(ram, parent, H_MIN)?,
            witness: self.read(ram, parent, H_WITNESS)?,
        };
        let h = self.create(ram, Some(parent), depth, v, weights)?;
        // one level lives in safe words at a time
        ram.scoped(4, |ram, frame| {
            for level in 0..levels_for(depth) {
                if level > 0 {
                    let mid_base = self.read(ram, cur.jump, H_TABLE)? as usize;
                    let up = self.read_level(ram, mid_base, level - 1)?;
                    cur.sum = cur.sum.saturating_add(up.sum);
                    if up.min < cur.min {
                        cur.min = up.min;
                        cur.witness = up.witness;
                    }
                    cur.jump = up.jump;
                }
                let s = ram.safe_mut();
                s.set(frame, 0, cur.jump.0 as Word);
                s.set(frame, 1, cur.sum);
                s.set(frame, 2, cur.min);
                s.set(frame, 3, cur.witness);
                for w in [cur.jump.0 as Word, cur.sum, cur.min, cur.witness] {
                    rep_alloc(ram, Region::ForestTables, self.delta, w);
                }
            }
            Ok::<_, ForestError>(())
        })?;
        Ok(h)
    }

    /// The `k`-th ancestor of `h` (`k = 0` is `h`).
    pub fn ancestor(
        &self,
        ram: &mut FaultyRam,
        h: QHandle,
        k: u64,
    ) -> Result<QHandle, ForestError> {
        let depth = self.depth(ram, h)?;
        if k > depth {
            return Err(ForestError::TooDeep { depth, k });
        }
        let mut cur = h;
        let mut rest = k;
        let mut level = 0;
        while rest > 0 {
            if rest & 1 == 1 {
                cur = self.jump(ram, cur, level)?;
            }
            rest >>= 1;
            level += 1;
        }
        Ok(cur)
    }

    /// Satellite of the `k`-th ancestor.
    pub fn la(&self, ram: &mut FaultyRam, h: QHandle, k: u64) -> Result<VertexId, ForestError> {
        let a = self.ancestor(ram, h, k)?;
        self.satellite(ram, a)
    }

    pub fn root(&self, ram: &mut FaultyRam, h: QHandle) -> Result<QHandle, ForestError> {
        let d = self.depth(ram, h)?;
        self.ancestor(ram, h, d)
    }

    /// Shallowest ancestor `top` of `h` whose inclusive path sum is at most
    /// `k`. `None` when `h` alone is already heavier than `k`.
    pub fn wla(
        &self,
        ram: &mut FaultyRam,
        h: QHandle,
        k: u64,
    ) -> Result<Option<WlaQ>, ForestError> {
        let own = self.weights(ram, h)?.sum;
        if own > k {
            return Ok(None);
        }
        let mut depth = self.read(ram, h, H_DEPTH)?;
        let mut acc = own;
        let mut cur = h;
        for level in (0..levels_for(depth)).rev() {
            if 1u64 << level > depth {
                continue;
            }
            let base = self.read(ram, cur, H_TABLE)? as usize;
            let step = self.read_level(ram, base, level)?;
            let next = acc.saturating_add(step.sum);
            if next <= k {
                acc = next;
                cur = step.jump;
                depth -= 1 << level;
            }
        }
        Ok(Some(WlaQ {
            top: cur,
            satellite: self.read(ram, cur, H_SATELLITE)? as VertexId,
            total: acc,
            top_weight: self.read(ram, cur, H_SUM)?,
        }))
    }

    /// Minimum `min` weight over the path `a..=b`, where `a` must be an
    /// ancestor of `b`. Ties go to the deeper node.
    pub fn bvq(&self, ram: &mut FaultyRam, a: QHandle, b: QHandle) -> Result<BvqQ, ForestError> {
        let da = self.depth(ram, a)?;
        let db = self.depth(ram, b)?;
        if da > db {
            return Err(ForestError::NotAncestor);
        }
        let mut best = (self.read(ram, b, H_MIN)?, self.read(ram, b, H_WITNESS)?);
        let mut cur = b;
        let mut rest = db - da;
        let mut level = 0;
        while rest > 0 {
            if rest & 1 == 1 {
                let base = self.read(ram, cur, H_TABLE)? as usize;
                let step = self.read_level(ram, base, level)?;
                if step.min < best.0 {
                    best = (step.min, step.witness);
                }
                cur = step.jump;
            }
            rest >>= 1;
            level += 1;
        }
        if cur != a {
            return Err(ForestError::NotAncestor);
        }
        Ok(BvqQ {
            min: best.0,
            witness: decode_vertex(best.1),
        })
    }

    pub fn lca(&self, ram: &mut FaultyRam, u: QHandle, v: QHandle) -> Result<LcaQ, ForestError> {
        let du = self.depth(ram, u)?;
        let dv = self.depth(ram, v)?;
        let (mut a, mut b) = (u, v);
        if du > dv {
            a = self.ancestor(ram, u, du - dv)?;
        } else if dv > du {
            b = self.ancestor(ram, v, dv - du)?;
        }
        let mut depth = du.min(dv);
        if a == b {
            let toward = |this: &Self, ram: &mut FaultyRam, x: QHandle, dx: u64| {
                if dx == depth {
                    Ok(None)
                } else {
                    this.ancestor(ram, x, dx - depth - 1).map(Some)
                }
            };
            return Ok(LcaQ::SameTree {
                lca: a,
                toward_u: toward(self, ram, u, du)?,
                toward_v: toward(self, ram, v, dv)?,
            });
        }
        for level in (0..levels_for(depth)).rev() {
            if 1u64 << level > depth {
                continue;
            }
            let ja = self.jump(ram, a, level)?;
            let jb = self.jump(ram, b, level)?;
            if ja != jb {
                a = ja;
                b = jb;
                depth -= 1 << level;
            }
        }
        if depth == 0 {
            return Ok(LcaQ::DifferentTrees {
                root_u: a,
                root_v: b,
            });
        }
        let pa = self.jump(ram, a, 0)?;
        let pb = self.jump(ram, b, 0)?;
        if pa != pb {
            return Err(ForestError::NotAncestor);
        }
        Ok(LcaQ::SameTree {
            lca: pa,
            toward_u: Some(a),
            toward_v: Some(b),
        })
    }

    /// Decodes every node with uncounted reads.
    pub fn snapshot(&self, ram: &FaultyRam) -> Vec<QNodeView> {
        (0..self.len(ram))
            .map(|i| {
                let h = QHandle(i as u32);
                let get = |f| rep_peek(ram, self.header(h, f)).unwrap_or(NULL);
                let parent = get(H_PARENT);
                QNodeView {
                    parent: (parent != NULL).then_some(QHandle(parent as u32)),
                    depth: get(H_DEPTH),
                    weights: QWeights {
                        sum: get(H_SUM),
                        min: get(H_MIN),
                        witness: decode_vertex(get(H_WITNESS)),
                    },
                    satellite: get(H_SATELLITE) as VertexId,
                }
            })
            .collect()
    }

    /// Checks the lifting-table laws of every node against its header
    /// chain. Returns the first offending handle.
    pub fn verify_tables(&self, ram: &FaultyRam) -> Result<(), QHandle> {
        let nodes = self.snapshot(ram);
        for (i, node) in nodes.iter().enumerate() {
            let h = QHandle(i as u32);
            let base = rep_peek(ram, self.header(h, H_TABLE)).unwrap_or(NULL) as usize;
            let mut cur = h;
            let mut sum = 0u64;
            let mut min = (INF_WEIGHT, NULL);
            let mut walked = 0u64;
            for level in 0..levels_for(node.depth) {
                while walked < 1 << level {
                    let Some(p) = nodes[cur.index()].parent else {
                        return Err(h);
                    };
                    cur = p;
                    let w = nodes[cur.index()].weights;
                    sum = sum.saturating_add(w.sum);
                    if w.min < min.0 {
                        min = (w.min, encode_vertex(w.witness));
                    }
                    walked += 1;
                }
                let get = |f| rep_peek(ram, self.table_cell(base, level, f));
                if get(T_JUMP) != Some(cur.0 as Word)
                    || get(T_SUM) != Some(sum)
                    || get(T_MIN) != Some(min.0)
                    || (min.0 != INF_WEIGHT && get(T_WITNESS) != Some(min.1))
                {
                    return Err(h);
                }
            }
        }
        Ok(())
    }
}
