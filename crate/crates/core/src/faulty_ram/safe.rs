//! The incorruptible O(1)-word region.

use super::{SimError, Word};

pub const DEFAULT_SAFE_WORDS: usize = 128;

/// A contiguous block of safe words, reserved in stack order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SafeFrame {
    base: usize,
    len: usize,
}

impl SafeFrame {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Safe memory. The adversary never sees or touches it.
#[derive(Clone, Debug)]
pub struct SafeStore {
    slots: Vec<Word>,
    top: usize,
    high_water: usize,
}

impl SafeStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            slots: vec![0; capacity],
            top: 0,
            high_water: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn in_use(&self) -> usize {
        self.top
    }

    pub fn high_water_mark(&self) -> usize {
        self.high_water
    }

    pub fn reserve(&mut self, words: usize) -> Result<SafeFrame, SimError> {
        if self.top + words > self.slots.len() {
            return Err(SimError::SafeStoreExhausted {
                requested: words,
                in_use: self.top,
                capacity: self.slots.len(),
            });
        }
        let frame = SafeFrame {
            base: self.top,
            len: words,
        };
        self.slots[self.top..self.top + words].fill(0);
        self.top += words;
        self.high_water = self.high_water.max(self.top);
        Ok(frame)
    }

    pub fn release(&mut self, frame: SafeFrame) -> Result<(), SimError> {
        if frame.base + frame.len != self.top {
            return Err(SimError::FrameOrder);
        }
        self.top = frame.base;
        Ok(())
    }

    pub fn get(&self, frame: SafeFrame, i: usize) -> Word {
        assert!(
            i < frame.len,
            "safe slot {i} outside frame of {}",
            frame.len
        );
        self.slots[frame.base + i]
    }

    pub fn set(&mut self, frame: SafeFrame, i: usize, w: Word) {
        assert!(
            i < frame.len,
            "safe slot {i} outside frame of {}",
            frame.len
        );
        self.slots[frame.base + i] = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_lifo_and_track_high_water() {
        let mut s = SafeStore::new(8);
        let a = s.reserve(3).unwrap();
        let b = s.reserve(4).unwrap();
        assert_eq!(s.high_water_mark(), 7);
        assert_eq!(s.release(a), Err(SimError::FrameOrder));
        s.release(b).unwrap();
        s.release(a).unwrap();
        assert_eq!(s.in_use(), 0);
        assert_eq!(s.high_water_mark(), 7);
    }

    #[test]
    fn exceeding_capacity_is_an_error() {
        let mut s = SafeStore::new(4);
        s.reserve(4).unwrap();
        assert!(matches!(
            s.reserve(1),
            Err(SimError::SafeStoreExhausted { .. })
        ));
    }

    #[test]
    fn slots_hold_last_write() {
        let mut s = SafeStore::new(4);
        let f = s.reserve(2).unwrap();
        s.set(f, 0, 11);
        s.set(f, 1, 12);
        s.set(f, 0, 13);
        assert_eq!(s.get(f, 0), 13);
        assert_eq!(s.get(f, 1), 12);
    }
}
