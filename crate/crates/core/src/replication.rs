//! Values stored as 2δ+1 unreliable copies and decoded by majority vote.

use crate::faulty_ram::{FaultyRam, Region, SimError, Word};

/// Number of slots needed to survive `delta` corruptions.
pub fn slot_count(delta: usize) -> usize {
    2 * delta + 1
}

/// A logical word replicated over contiguous slots of one region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicatedCell {
    pub region: Region,
    pub base: usize,
    pub slots: usize,
}

impl ReplicatedCell {
    /// Addresses an existing cell without touching memory.
    pub fn at(region: Region, base: usize, delta: usize) -> Self {
        Self {
            region,
            base,
            slots: slot_count(delta),
        }
    }
}

/// Appends 2δ+1 slots holding `initial`.
pub fn rep_alloc(
    ram: &mut FaultyRam,
    region: Region,
    delta: usize,
    initial: Word,
) -> ReplicatedCell {
    let slots = slot_count(delta);
    let base = ram.len(region);
    for _ in 0..slots {
        ram.append(region, initial);
    }
    ReplicatedCell {
        region,
        base,
        slots,
    }
}

pub fn rep_write(ram: &mut FaultyRam, cell: ReplicatedCell, w: Word) -> Result<(), SimError> {
    for i in 0..cell.slots {
        ram.write(cell.region, cell.base + i, w)?;
    }
    Ok(())
}

/// Single-pass Boyer–Moore vote. The candidate and its counter live in two
/// safe words. No verification pass: the honest value holds at least δ+1 of
/// the 2δ+1 slots, so the surviving candidate is the majority.
pub fn rep_read(ram: &mut FaultyRam, cell: ReplicatedCell) -> Result<Word, SimError> {
    ram.scoped(2, |ram, frame| {
        for i in 0..cell.slots {
            let w = ram.read(cell.region, cell.base + i)?;
            let count = ram.safe().get(frame, 1);
            if count == 0 {
                ram.safe_mut().set(frame, 0, w);
                ram.safe_mut().set(frame, 1, 1);
            } else if ram.safe().get(frame, 0) == w {
                ram.safe_mut().set(frame, 1, count + 1);
            } else {
                ram.safe_mut().set(frame, 1, count - 1);
            }
        }
        Ok(ram.safe().get(frame, 0))
    })
}

/// The same vote over plain values, for uncounted inspection.
pub fn majority<I: IntoIterator<Item = Word>>(slots: I) -> Option<Word> {
    let mut cand = None;
    let mut count = 0usize;
    for w in slots {
        if count == 0 {
            cand = Some(w);
            count = 1;
        } else if cand == Some(w) {
            count += 1;
        } else {
            count -= 1;
        }
    }
    cand
}

/// Decodes a cell with `peek`, leaving counters and the adversary alone.
pub fn rep_peek(ram: &FaultyRam, cell: ReplicatedCell) -> Option<Word> {
    let words: Option<Vec<Word>> = (0..cell.slots)
        .map(|i| ram.peek(cell.region, cell.base + i))
        .collect();
    majority(words?)
}
