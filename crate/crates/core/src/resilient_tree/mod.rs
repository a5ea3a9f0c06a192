//! The dynamic tree: records in unreliable memory, leaf insertion with
//! flag-paid recoloring, and level-ancestor queries.
//!
//! Records live at `v * width` in the records region. Any parent index that
//! is not smaller than the vertex's own index is read as the root, which
//! makes the stored records induce a tree no matter what the adversary
//! writes.

pub mod record;

use serde::Serialize;
use thiserror::Error;

use crate::black_forest::{BlackForest, ForestError, QHandle, QWeights, INF_WEIGHT};
use crate::faulty_ram::{
    Adversary, FaultyRam, Region, SafeFrame, SimError, Word, DEFAULT_SAFE_WORDS,
};
use crate::VertexId;

pub use record::{CbaValue, FlagValue, NodeRecord, Profile};

pub const DEFAULT_W_MAX: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TreeConfig {
    pub delta: usize,
    pub profile: Profile,
    /// Weights are clamped into `[1, w_max]` whenever they are read.
    pub w_max: u64,
    pub safe_words: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            delta: 1,
            profile: Profile::Wide,
            w_max: DEFAULT_W_MAX,
            safe_words: DEFAULT_SAFE_WORDS,
        }
    }
}

impl TreeConfig {
    pub fn with_delta(delta: usize) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    /// The packed profile with its largest weight bound.
    pub fn packed(delta: usize) -> Self {
        Self {
            delta,
            profile: Profile::Packed,
            w_max: Profile::Packed.max_weight(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.delta == 0 {
            return Err(TreeError::Config("delta must be at least 1"));
        }
        if self.delta > self.profile.max_delta() {
            return Err(TreeError::Config("delta too large for the record profile"));
        }
        if self.w_max == 0 || self.w_max > self.profile.max_weight() {
            return Err(TreeError::Config(
                "w_max out of range for the record profile",
            ));
        }
        Ok(())
    }

    pub fn clamp_weight(&self, w: u64) -> u64 {
        w.clamp(1, self.w_max)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("bad configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<ForestError> for TreeError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::Sim(s) => TreeError::Sim(s),
            _ => TreeError::Config("unexpected forest failure"),
        }
    }
}

/// Result of walking up the noisy tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Climb {
    At(VertexId),
    RootReached,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub enum QueryError {
    #[error("vertex {0} does not exist")]
    BadVertex(VertexId),
    #[error("no black vertex in the search window")]
    NoBlackAnchor,
    #[error("climb exceeded its bound")]
    ClimbLimit,
    #[error("endpoints disagree with the observed tree")]
    Inconsistent,
    #[error("forest query failed: {0}")]
    Forest(String),
    #[error("simulation error: {0}")]
    Sim(String),
}

impl From<ForestError> for QueryError {
    fn from(e: ForestError) -> Self {
        QueryError::Forest(e.to_string())
    }
}

impl From<SimError> for QueryError {
    fn from(e: SimError) -> Self {
        QueryError::Sim(e.to_string())
    }
}

/// What a query reports. `NoAncestor` means the walk ran off the root: the
/// requested ancestor does not exist in the observed tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum QueryOutcome {
    Answer(VertexId),
    NoAncestor,
    Error(QueryError),
}

impl QueryOutcome {
    pub fn answer(&self) -> Option<VertexId> {
        match self {
            QueryOutcome::Answer(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<Climb> for QueryOutcome {
    fn from(c: Climb) -> Self {
        match c {
            Climb::At(v) => QueryOutcome::Answer(v),
            Climb::RootReached => QueryOutcome::NoAncestor,
        }
    }
}

impl std::fmt::Display for QueryOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryOutcome::Answer(v) => write!(f, "{v}"),
            QueryOutcome::NoAncestor => f.write_str("NONE"),
            QueryOutcome::Error(_) => f.write_str("ERROR"),
        }
    }
}

/// Internals of the last long level-ancestor query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LaTrace {
    /// Distance from the query vertex to the black anchor.
    pub d: usize,
    /// Levels skipped in the forest.
    pub q_steps: u64,
    /// Final climb length.
    pub k_rest: usize,
}

/// One forest node creation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QCreation {
    pub handle: QHandle,
    pub vertex: VertexId,
    pub parent: Option<QHandle>,
    pub weights: QWeights,
    pub black_free: bool,
    pub exceptional: bool,
    /// The leaf whose insertion paid for this node.
    pub inserted_by: VertexId,
}

/// Instrumentation kept outside the simulated memory. Algorithms never read
/// it back.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Journal {
    pub creations: Vec<QCreation>,
    pub last_la: Option<LaTrace>,
    /// LCA fallbacks where pairing the second root with its own side would
    /// have produced a different answer.
    pub lca_literal_divergences: u64,
    pub lca_fallbacks: u64,
}

// safe words used by one insertion besides the staged record
const INSERT_LOCALS: usize = 10;
const S_YBAR: usize = 0;
const S_XPRIME: usize = 1;
const S_Y: usize = 2;
const S_ELL: usize = 3;
const S_NEAR: usize = 4;
const S_W: usize = 5;
const S_WPRIME: usize = 6;
const S_MIN: usize = 7;
const S_WITNESS: usize = 8;
const S_EXCEPTIONAL: usize = 9;

#[derive(Debug)]
pub struct ResilientTree {
    cfg: TreeConfig,
    ram: FaultyRam,
    forest: BlackForest,
    size: SafeFrame,
    journal: Journal,
}

impl ResilientTree {
    pub fn new(cfg: TreeConfig, adversary: Adversary, root_weight: u64) -> Result<Self, TreeError> {
        cfg.validate()?;
        let mut ram = FaultyRam::new(cfg.safe_words, adversary);
        ram.set_unit(Region::Records, cfg.profile.width());
        let forest = BlackForest::new(&mut ram, cfg.delta)?;
        let size = ram.safe_mut().reserve(1)?;
        let mut t = Self {
            cfg,
            ram,
            forest,
            size,
            journal: Journal::default(),
        };
        let root = NodeRecord::root(cfg.clamp_weight(root_weight));
        for w in cfg.profile.encode(&root)? {
            t.ram.append(Region::Records, w);
        }
        t.ram.safe_mut().set(t.size, 0, 1);
        Ok(t)
    }

    /// A tree without an adversary.
    pub fn fault_free(cfg: TreeConfig, root_weight: u64) -> Result<Self, TreeError> {
        Self::new(cfg, Adversary::passive(0), root_weight)
    }

    pub fn len(&self) -> usize {
        self.ram.safe().get(self.size, 0) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> usize {
        self.cfg.delta
    }

    pub fn config(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn ram(&self) -> &FaultyRam {
        &self.ram
    }

    /// Direct access for fault scripts and tests.
    pub fn ram_mut(&mut self) -> &mut FaultyRam {
        &mut self.ram
    }

    pub fn forest(&self) -> &BlackForest {
        &self.forest
    }

    pub(crate) fn parts(&mut self) -> (&mut FaultyRam, &BlackForest) {
        (&mut self.ram, &self.forest)
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub(crate) fn journal_mut(&mut self) -> &mut Journal {
        &mut self.journal
    }

    /// Number of forest nodes, i.e. of vertices ever colored black.
    pub fn black_count(&self) -> usize {
        self.forest.len(&self.ram)
    }

    /// Reads a record with full accounting.
    pub fn record(&mut self, v: VertexId) -> Result<NodeRecord, SimError> {
        let width = self.cfg.profile.width();
        let mut words = [0 as Word; record::MAX_WORDS];
        for (i, w) in words[..width].iter_mut().enumerate() {
            *w = self.ram.read(Region::Records, v * width + i)?;
        }
        Ok(self.cfg.profile.decode(&words[..width]))
    }

    pub fn store(&mut self, v: VertexId, rec: &NodeRecord) -> Result<(), SimError> {
        let width = self.cfg.profile.width();
        for (i, w) in self.cfg.profile.encode(rec)?.into_iter().enumerate() {
            self.ram.write(Region::Records, v * width + i, w)?;
        }
        Ok(())
    }

    /// Decodes a record with uncounted reads.
    pub fn peek_record(&self, v: VertexId) -> Option<NodeRecord> {
        let width = self.cfg.profile.width();
        let words: Option<Vec<Word>> = (0..width)
            .map(|i| self.ram.peek(Region::Records, v * width + i))
            .collect();
        Some(self.cfg.profile.decode(&words?))
    }

    /// Parent in the noisy tree. Only the root has none.
    pub fn noisy_parent(v: VertexId, rec: &NodeRecord) -> Option<VertexId> {
        if v == 0 {
            return None;
        }
        match rec.p {
            Some(p) if p < v => Some(p),
            _ => Some(0),
        }
    }

    pub fn weight_of(&self, rec: &NodeRecord) -> u64 {
        self.cfg.clamp_weight(rec.weight)
    }

    /// Follows `i` parent links.
    pub fn climb(&mut self, v: VertexId, i: usize) -> Result<Climb, SimError> {
        let mut cur = v;
        for _ in 0..i {
            if cur == 0 {
                return Ok(Climb::RootReached);
            }
            let rec = self.record(cur)?;
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
        }
        Ok(Climb::At(cur))
    }

    /// Appends a child of `x_par` and returns its index. A parent index that
    /// does not exist yet is read as the root.
    pub fn add_leaf(&mut self, x_par: VertexId, weight: u64) -> Result<VertexId, TreeError> {
        self.ram.begin_op();
        let n = self.len();
        if n >= self.cfg.profile.max_vertices() {
            return Err(SimError::Capacity("records").into());
        }
        let par = if x_par < n { x_par } else { 0 };
        let parent = self.record(par)?;
        let staged = NodeRecord::leaf(
            par,
            parent.depth.wrapping_add(1) & self.cfg.profile.depth_mask(),
            self.cfg.clamp_weight(weight),
        );
        let words = self.cfg.profile.encode(&staged)?;
        let frame = self.ram.safe_mut().reserve(words.len() + INSERT_LOCALS)?;
        for (i, w) in words.iter().enumerate() {
            self.ram.safe_mut().set(frame, INSERT_LOCALS + i, *w);
        }
        let body = self.recolor(n, &staged, frame);
        for i in 0..words.len() {
            let w = self.ram.safe().get(frame, INSERT_LOCALS + i);
            self.ram.append(Region::Records, w);
        }
        self.ram.safe_mut().set(self.size, 0, n as Word + 1);
        self.ram.safe_mut().release(frame)?;
        body?;
        Ok(n)
    }

    fn stash(&mut self, frame: SafeFrame, slot: usize, w: Word) {
        self.ram.safe_mut().set(frame, slot, w);
    }

    /// Discovery and execution for the new leaf `x`. Returns early, leaving
    /// colors unchanged, whenever the pseudocode returns.
    fn recolor(
        &mut self,
        x: VertexId,
        staged: &NodeRecord,
        frame: SafeFrame,
    ) -> Result<(), TreeError> {
        let delta = self.cfg.delta;

        // discovery: the δ lowest proper ancestors must have unspent flags
        let mut y = x;
        let mut yrec = *staged;
        let mut w_total = self.weight_of(staged);
        for i in 1..=delta {
            if y == 0 {
                return Ok(());
            }
            y = Self::noisy_parent(y, &yrec).unwrap_or(0);
            yrec = self.record(y)?;
            if yrec.flag.is_spent() {
                return Ok(());
            }
            yrec.flag = FlagValue::Annotated { x, i };
            annotate_cba(&mut yrec, x, i);
            self.store(y, &yrec)?;
            w_total += self.weight_of(&yrec);
        }
        self.stash(frame, S_Y, y as Word);
        let y_weight = self.weight_of(&yrec);

        // is y near-a-black?
        let mut yp = y;
        let mut yprec = yrec;
        let mut ell = 0;
        let mut near = false;
        while ell < delta && yp != 0 && !near {
            yp = Self::noisy_parent(yp, &yprec).unwrap_or(0);
            ell += 1;
            yprec = self.record(yp)?;
            if yprec.is_black() {
                near = true;
            } else {
                w_total += self.weight_of(&yprec);
            }
            if annotate_cba(&mut yprec, x, delta + ell) {
                self.store(yp, &yprec)?;
            }
        }
        let ybar = if near { yprec.q } else { None };
        self.stash(frame, S_YBAR, ybar.map_or(Word::MAX, |q| q.0 as Word));
        self.stash(frame, S_ELL, ell as Word);
        self.stash(frame, S_NEAR, near as Word);
        self.stash(frame, S_W, w_total);

        // otherwise, is it black-free?
        if !near {
            let mut z = yp;
            let mut zrec = yprec;
            for _ in 0..delta - 1 {
                if z == 0 {
                    break;
                }
                z = Self::noisy_parent(z, &zrec).unwrap_or(0);
                zrec = self.record(z)?;
                if zrec.is_black() {
                    return Ok(());
                }
            }
        }

        // execution: spend the annotated flags
        let ybar_valid = ybar.is_some_and(|q| self.forest.check(&self.ram, q).is_ok());
        let mut z = x;
        let mut zrec = *staged;
        let mut w_prime = self.weight_of(staged);
        let mut x_prime = None;
        let mut exceptional = near && !ybar_valid;
        let mut best = (INF_WEIGHT, None);
        for i in 1..=delta {
            if z == 0 {
                return Ok(());
            }
            z = Self::noisy_parent(z, &zrec).unwrap_or(0);
            zrec = self.record(z)?;
            if zrec.flag != (FlagValue::Annotated { x, i }) {
                return Ok(());
            }
            if near && i == ell {
                x_prime = Some(z);
                self.stash(frame, S_XPRIME, z as Word);
            }
            zrec.flag = FlagValue::Spent;
            if near && i >= ell {
                exceptional |= !check_cba(&mut zrec, x, i, ybar.filter(|_| ybar_valid));
                track_min(&mut best, self.weight_of(&zrec), z);
            }
            self.store(z, &zrec)?;
            if near && i < ell {
                w_prime += self.weight_of(&zrec);
            }
        }

        if !near {
            let weights = QWeights {
                sum: y_weight,
                min: INF_WEIGHT,
                witness: None,
            };
            let h = self.create_node(None, y, weights)?;
            self.finish_black(y, h, x, weights, None, false, true)?;
            return Ok(());
        }

        // extend the walk up to y' to vouch for the cba fields
        for i in delta + 1..delta + ell {
            if z == 0 {
                exceptional = true;
                break;
            }
            z = Self::noisy_parent(z, &zrec).unwrap_or(0);
            zrec = self.record(z)?;
            let before = zrec.cba;
            exceptional |= !check_cba(&mut zrec, x, i, ybar.filter(|_| ybar_valid));
            if zrec.cba != before {
                self.store(z, &zrec)?;
            }
            track_min(&mut best, self.weight_of(&zrec), z);
        }
        self.stash(frame, S_WPRIME, w_prime);
        self.stash(frame, S_MIN, best.0);
        self.stash(frame, S_WITNESS, best.1.map_or(Word::MAX, |v| v as Word));
        self.stash(frame, S_EXCEPTIONAL, exceptional as Word);

        let x_prime = x_prime.expect("ell is within 1..=delta");
        let cap = self.cfg.w_max.saturating_mul(delta as u64);
        let weights = QWeights {
            sum: w_total.saturating_sub(w_prime).clamp(1, cap),
            min: best.0,
            witness: best.1,
        };
        let parent = if exceptional { None } else { ybar };
        let (h, parent) = match self.create_node(parent, x_prime, weights) {
            Ok(h) => (h, parent),
            Err(TreeError::Config(_)) => {
                exceptional = true;
                (self.create_node(None, x_prime, weights)?, None)
            }
            Err(e) => return Err(e),
        };
        self.finish_black(x_prime, h, x, weights, parent, exceptional, false)
    }

    fn create_node(
        &mut self,
        parent: Option<QHandle>,
        v: VertexId,
        weights: QWeights,
    ) -> Result<QHandle, TreeError> {
        if self.forest.len(&self.ram) >= self.cfg.profile.max_handles() {
            return Err(SimError::Capacity("forest handles").into());
        }
        let r = match parent {
            None => self.forest.new_tree(&mut self.ram, v, weights),
            Some(p) => self.forest.add_leaf(&mut self.ram, p, v, weights),
        };
        r.map_err(TreeError::from)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_black(
        &mut self,
        v: VertexId,
        h: QHandle,
        x: VertexId,
        weights: QWeights,
        parent: Option<QHandle>,
        exceptional: bool,
        black_free: bool,
    ) -> Result<(), TreeError> {
        let mut rec = self.record(v)?;
        rec.q = Some(h);
        self.store(v, &rec)?;
        self.journal.creations.push(QCreation {
            handle: h,
            vertex: v,
            parent,
            weights,
            black_free,
            exceptional,
            inserted_by: x,
        });
        Ok(())
    }

    /// Level-ancestor query: the `k`-th ancestor of `v`.
    pub fn la(&mut self, v: VertexId, k: usize) -> QueryOutcome {
        self.ram.begin_op();
        self.journal.last_la = None;
        self.la_inner(v, k).unwrap_or_else(QueryOutcome::Error)
    }

    pub(crate) fn check_vertex(&self, v: VertexId) -> Result<(), QueryError> {
        if v < self.len() {
            Ok(())
        } else {
            Err(QueryError::BadVertex(v))
        }
    }

    /// Closest black vertex among `v` and its next `limit` ancestors, with
    /// its distance from `v`.
    pub(crate) fn find_black(
        &mut self,
        v: VertexId,
        limit: usize,
    ) -> Result<Option<(VertexId, usize, NodeRecord)>, SimError> {
        let mut cur = v;
        let mut rec = self.record(cur)?;
        for dist in 0..=limit {
            if rec.is_black() {
                return Ok(Some((cur, dist, rec)));
            }
            if dist == limit || cur == 0 {
                break;
            }
            cur = Self::noisy_parent(cur, &rec).unwrap_or(0);
            rec = self.record(cur)?;
        }
        Ok(None)
    }

    pub(crate) fn la_inner(&mut self, v: VertexId, k: usize) -> Result<QueryOutcome, QueryError> {
        self.check_vertex(v)?;
        let delta = self.cfg.delta;
        if k <= 7 * delta {
            return Ok(self.climb(v, k)?.into());
        }
        let Climb::At(v_tilde) = self.climb(v, delta)? else {
            return Ok(QueryOutcome::NoAncestor);
        };
        let Some((_, dist, rec)) = self.find_black(v_tilde, delta)? else {
            return Err(QueryError::NoBlackAnchor);
        };
        let d = delta + dist;
        let k1 = k - d - 5 * delta;
        let steps = (k1 / delta) as u64;
        let q = rec.q.ok_or(QueryError::Inconsistent)?;
        let u1 = match self.forest.la(&mut self.ram, q, steps) {
            Ok(u) => u,
            Err(ForestError::TooDeep { .. }) => return Ok(QueryOutcome::NoAncestor),
            Err(e) => return Err(e.into()),
        };
        let k_rest = k1 - (k1 / delta) * delta + 5 * delta;
        self.journal.last_la = Some(LaTrace {
            d,
            q_steps: steps,
            k_rest,
        });
        self.check_vertex(u1)?;
        Ok(self.climb(u1, k_rest)?.into())
    }
}

/// Annotates an unset or annotated cba. Returns whether it changed.
fn annotate_cba(rec: &mut NodeRecord, x: VertexId, i: usize) -> bool {
    match rec.cba {
        CbaValue::Unset | CbaValue::Annotated { .. } => {
            let new = CbaValue::Annotated { x, i };
            let changed = rec.cba != new;
            rec.cba = new;
            changed
        }
        CbaValue::Set(_) => false,
    }
}

/// The execution-phase cba check. `ybar` is `None` when the stashed handle
/// is unusable, which always fails the check. Returns false on an
/// exceptional situation.
fn check_cba(rec: &mut NodeRecord, x: VertexId, i: usize, ybar: Option<QHandle>) -> bool {
    let Some(ybar) = ybar else {
        return false;
    };
    match rec.cba {
        CbaValue::Set(q) => q == ybar,
        CbaValue::Annotated { x: ax, i: ai } if ax == x && ai == i => {
            rec.cba = CbaValue::Set(ybar);
            true
        }
        _ => false,
    }
}

/// Keeps the first strict minimum seen while walking upward, i.e. the
/// deepest one.
fn track_min(best: &mut (u64, Option<VertexId>), w: u64, v: VertexId) {
    if w < best.0 {
        *best = (w, Some(v));
    }
}
