//! Simulated faulty-RAM: unreliable word memory split into regions, a small
//! safe store, and an adversary that may rewrite up to δ words (or record
//! groups) of main memory at any access.

mod adversary;
mod memory;
mod safe;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adversary::{
    Adaptive, Adversary, AdversaryCtx, Corruption, FaultEvent, RandomWords, Scripted, Strategy,
    Trigger,
};
pub use memory::{GrowableWords, UnreliableMemory};
pub use safe::{SafeFrame, SafeStore, DEFAULT_SAFE_WORDS};

/// One machine word.
pub type Word = u64;

pub(crate) const REGION_COUNT: usize = 3;

/// Regions of main memory. All of them are corruptible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// The tree's record array.
    Records,
    /// Fixed-size replicated headers of black-forest nodes.
    ForestNodes,
    /// Replicated jump tables of black-forest nodes.
    ForestTables,
}

impl Region {
    pub const ALL: [Region; REGION_COUNT] =
        [Region::Records, Region::ForestNodes, Region::ForestTables];

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    pub fn is_forest(self) -> bool {
        !matches!(self, Region::Records)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("address {addr} out of range for {region:?} (size {size})")]
    OutOfRange {
        region: Region,
        addr: usize,
        size: usize,
    },
    #[error("safe store exhausted: {requested} words requested, {in_use} of {capacity} in use")]
    SafeStoreExhausted {
        requested: usize,
        in_use: usize,
        capacity: usize,
    },
    #[error("safe frame released out of stack order")]
    FrameOrder,
    #[error("value {value} does not fit the {field} field")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("capacity exceeded: {0}")]
    Capacity(&'static str),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalTime {
    /// Index of the current top-level operation.
    pub op: u64,
    /// Global access count at this point.
    pub access: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
    Append,
}

/// What the adversary sees after each access.
#[derive(Clone, Copy, Debug)]
pub struct Access {
    pub region: Region,
    pub addr: usize,
    pub kind: AccessKind,
    pub old: Word,
    pub new: Word,
    pub time: LogicalTime,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub reads: [u64; REGION_COUNT],
    pub writes: [u64; REGION_COUNT],
}

impl Counters {
    pub fn region(&self, r: Region) -> (u64, u64) {
        (self.reads[r.index()], self.writes[r.index()])
    }

    pub fn core_words(&self) -> u64 {
        let (r, w) = self.region(Region::Records);
        r + w
    }

    pub fn forest_words(&self) -> u64 {
        Region::ALL
            .iter()
            .filter(|r| r.is_forest())
            .map(|r| {
                let (a, b) = self.region(*r);
                a + b
            })
            .sum()
    }

    pub fn since(&self, earlier: &Counters) -> Counters {
        let mut out = Counters::default();
        for i in 0..REGION_COUNT {
            out.reads[i] = self.reads[i] - earlier.reads[i];
            out.writes[i] = self.writes[i] - earlier.writes[i];
        }
        out
    }
}

/// Main memory, safe store and adversary of one simulation instance.
#[derive(Debug)]
pub struct FaultyRam {
    memories: [UnreliableMemory; REGION_COUNT],
    safe: SafeStore,
    adversary: Adversary,
    op: u64,
    accesses: u64,
}

impl FaultyRam {
    pub fn new(safe_words: usize, adversary: Adversary) -> Self {
        Self {
            memories: [
                UnreliableMemory::new(1),
                UnreliableMemory::new(1),
                UnreliableMemory::new(1),
            ],
            safe: SafeStore::new(safe_words),
            adversary,
            op: 0,
            accesses: 0,
        }
    }

    /// Sets the corruption unit of a region. Only meaningful before the
    /// region holds data.
    pub fn set_unit(&mut self, region: Region, unit: usize) {
        debug_assert!(self.memories[region.index()].is_empty());
        self.memories[region.index()] = UnreliableMemory::new(unit);
    }

    pub fn memory(&self, region: Region) -> &UnreliableMemory {
        &self.memories[region.index()]
    }

    pub fn len(&self, region: Region) -> usize {
        self.memories[region.index()].len()
    }

    pub fn read(&mut self, region: Region, addr: usize) -> Result<Word, SimError> {
        let mem = &mut self.memories[region.index()];
        mem.check(region, addr)?;
        let w = mem.load(addr).unwrap_or_default();
        self.notify(region, addr, AccessKind::Read, w, w);
        Ok(w)
    }

    pub fn write(&mut self, region: Region, addr: usize, w: Word) -> Result<(), SimError> {
        let mem = &mut self.memories[region.index()];
        mem.check(region, addr)?;
        let old = mem.store(addr, w).unwrap_or_default();
        self.notify(region, addr, AccessKind::Write, old, w);
        Ok(())
    }

    pub fn append(&mut self, region: Region, w: Word) -> usize {
        let addr = self.memories[region.index()].push(w);
        self.notify(region, addr, AccessKind::Append, 0, w);
        addr
    }

    /// Reads without accounting and without waking the adversary.
    pub fn peek(&self, region: Region, addr: usize) -> Option<Word> {
        self.memories[region.index()].peek(addr)
    }

    fn notify(&mut self, region: Region, addr: usize, kind: AccessKind, old: Word, new: Word) {
        self.accesses += 1;
        let time = self.time();
        let Adversary {
            budget,
            log,
            strategy,
            ..
        } = &mut self.adversary;
        if let Some(s) = strategy.as_mut() {
            let access = Access {
                region,
                addr,
                kind,
                old,
                new,
                time,
            };
            let mut ctx = AdversaryCtx {
                memories: &mut self.memories,
                budget,
                log,
                time,
            };
            s.after_access(&access, &mut ctx);
        }
    }

    /// Marks the start of a top-level operation and runs the
    /// between-operations hook.
    pub fn begin_op(&mut self) {
        self.op += 1;
        let time = self.time();
        let Adversary {
            budget,
            log,
            strategy,
            ..
        } = &mut self.adversary;
        if let Some(s) = strategy.as_mut() {
            let mut ctx = AdversaryCtx {
                memories: &mut self.memories,
                budget,
                log,
                time,
            };
            s.between_ops(time.op, &mut ctx);
        }
    }

    pub fn time(&self) -> LogicalTime {
        LogicalTime {
            op: self.op,
            access: self.accesses,
        }
    }

    /// An explicit corruption from outside the algorithm (trace scripts,
    /// tests). Silently refused once the budget is spent.
    pub fn corrupt(&mut self, region: Region, addr: usize, w: Word) -> bool {
        let time = self.time();
        adversary::apply(
            &mut self.memories,
            &mut self.adversary.budget,
            &mut self.adversary.log,
            time,
            region,
            addr,
            &[w],
        )
    }

    pub fn corrupt_unit(&mut self, region: Region, unit: usize, words: &[Word]) -> bool {
        let width = self.memories[region.index()].unit();
        if words.is_empty() || words.len() > width {
            return false;
        }
        let time = self.time();
        adversary::apply(
            &mut self.memories,
            &mut self.adversary.budget,
            &mut self.adversary.log,
            time,
            region,
            unit * width,
            words,
        )
    }

    pub fn adversary(&self) -> &Adversary {
        &self.adversary
    }

    /// Installs a new adversary and returns the old one.
    pub fn replace_adversary(&mut self, adversary: Adversary) -> Adversary {
        std::mem::replace(&mut self.adversary, adversary)
    }

    pub fn safe(&self) -> &SafeStore {
        &self.safe
    }

    pub fn safe_mut(&mut self) -> &mut SafeStore {
        &mut self.safe
    }

    /// Runs `f` with `words` safe words reserved, releasing them afterwards
    /// on every path.
    pub fn scoped<T, E>(
        &mut self,
        words: usize,
        f: impl FnOnce(&mut Self, SafeFrame) -> Result<T, E>,
    ) -> Result<T, E>
    where
        E: From<SimError>,
    {
        let frame = self.safe.reserve(words)?;
        let out = f(self, frame);
        self.safe.release(frame)?;
        out
    }

    pub fn counters(&self) -> Counters {
        let mut c = Counters::default();
        for (i, m) in self.memories.iter().enumerate() {
            c.reads[i] = m.reads();
            c.writes[i] = m.writes();
        }
        c
    }
}
