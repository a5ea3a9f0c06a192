//! Growable word array with worst-case constant-time appends.

use super::{SimError, Word};

/// Dynamic array of words that never copies its contents in one go.
///
/// When the active buffer fills up, a buffer of twice the capacity is
/// allocated and every later append migrates two old cells into it. The
/// migration finishes long before the new buffer fills, and at any instant
/// each logical cell lives in exactly one physical word: cells below
/// `migrated` (and all cells past the old capacity) are in `next`, the rest
/// in `active`.
#[derive(Clone, Debug)]
pub struct GrowableWords {
    active: Vec<Word>,
    next: Option<Vec<Word>>,
    migrated: usize,
    len: usize,
    moves: u64,
}

const INITIAL_CAPACITY: usize = 2;

impl Default for GrowableWords {
    fn default() -> Self {
        Self::new()
    }
}

impl GrowableWords {
    pub fn new() -> Self {
        Self {
            active: vec![0; INITIAL_CAPACITY],
            next: None,
            migrated: 0,
            len: 0,
            moves: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of cells copied by the incremental migration so far.
    pub fn migration_moves(&self) -> u64 {
        self.moves
    }

    fn in_next(&self, idx: usize) -> bool {
        self.next.is_some() && (idx < self.migrated || idx >= self.active.len())
    }

    pub fn get(&self, idx: usize) -> Option<Word> {
        if idx >= self.len {
            return None;
        }
        if self.in_next(idx) {
            self.next.as_ref().map(|n| n[idx])
        } else {
            Some(self.active[idx])
        }
    }

    pub fn set(&mut self, idx: usize, w: Word) -> bool {
        if idx >= self.len {
            return false;
        }
        if self.in_next(idx) {
            if let Some(n) = self.next.as_mut() {
                n[idx] = w;
            }
        } else {
            self.active[idx] = w;
        }
        true
    }

    pub fn push(&mut self, w: Word) -> usize {
        if self.next.is_none() && self.len == self.active.len() {
            self.next = Some(vec![0; self.active.len() * 2]);
            self.migrated = 0;
        }
        let idx = self.len;
        match self.next.as_mut() {
            Some(next) => {
                next[idx] = w;
                self.len += 1;
                for _ in 0..2 {
                    if self.migrated < self.active.len() {
                        next[self.migrated] = self.active[self.migrated];
                        self.migrated += 1;
                        self.moves += 1;
                    }
                }
                if self.migrated == self.active.len() {
                    self.active = self.next.take().unwrap_or_default();
                    self.migrated = 0;
                }
            }
            None => {
                self.active[idx] = w;
                self.len += 1;
            }
        }
        idx
    }
}

/// One region of unreliable main memory.
///
/// `unit` is the corruption granularity: one adversary corruption may rewrite
/// any subset of the `unit` consecutive words that start at a multiple of
/// `unit`.
#[derive(Clone, Debug)]
pub struct UnreliableMemory {
    cells: GrowableWords,
    unit: usize,
    pub(crate) reads: u64,
    pub(crate) writes: u64,
}

impl UnreliableMemory {
    pub fn new(unit: usize) -> Self {
        Self {
            cells: GrowableWords::new(),
            unit: unit.max(1),
            reads: 0,
            writes: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn unit(&self) -> usize {
        self.unit
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn migration_moves(&self) -> u64 {
        self.cells.migration_moves()
    }

    /// Reads without touching the counters.
    pub fn peek(&self, addr: usize) -> Option<Word> {
        self.cells.get(addr)
    }

    pub(crate) fn load(&mut self, addr: usize) -> Option<Word> {
        let w = self.cells.get(addr)?;
        self.reads += 1;
        Some(w)
    }

    pub(crate) fn store(&mut self, addr: usize, w: Word) -> Option<Word> {
        let old = self.cells.get(addr)?;
        self.cells.set(addr, w);
        self.writes += 1;
        Some(old)
    }

    pub(crate) fn push(&mut self, w: Word) -> usize {
        self.writes += 1;
        self.cells.push(w)
    }

    /// Overwrites a cell without counting it as an algorithm access.
    pub(crate) fn overwrite(&mut self, addr: usize, w: Word) -> Option<Word> {
        let old = self.cells.get(addr)?;
        self.cells.set(addr, w);
        Some(old)
    }

    pub(crate) fn check(&self, region: super::Region, addr: usize) -> Result<(), SimError> {
        if addr < self.len() {
            Ok(())
        } else {
            Err(SimError::OutOfRange {
                region,
                addr,
                size: self.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_returns_consecutive_indices() {
        let mut g = GrowableWords::new();
        assert_eq!(g.push(10), 0);
        for i in 1..50 {
            assert_eq!(g.push(i as Word), i);
        }
        assert_eq!(g.len(), 50);
    }

    #[test]
    fn thousand_appends_match_plain_vector() {
        let mut g = GrowableWords::new();
        let mut model = Vec::new();
        for i in 0..1000u64 {
            g.push(i * 3 + 1);
            model.push(i * 3 + 1);
            // rewrite an older cell every few steps, including cells mid-migration
            if i % 7 == 3 {
                let j = (i as usize * 13) % model.len();
                g.set(j, i ^ 0xabc);
                model[j] = i ^ 0xabc;
            }
        }
        for (i, w) in model.iter().enumerate() {
            assert_eq!(g.get(i), Some(*w), "cell {i}");
        }
        assert_eq!(g.get(1000), None);
    }

    #[test]
    fn migration_moves_at_most_two_per_append() {
        let mut g = GrowableWords::new();
        let mut last = 0;
        for i in 0..4096u64 {
            g.push(i);
            assert!(g.migration_moves() - last <= 2);
            last = g.migration_moves();
        }
    }

    #[test]
    fn out_of_range_is_none() {
        let mut m = UnreliableMemory::new(1);
        assert!(m.load(0).is_none());
        m.push(7);
        assert_eq!(m.load(0), Some(7));
        assert!(m.store(1, 3).is_none());
    }
}
