//! The corruption budget, the corruption log, and pluggable strategies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::memory::UnreliableMemory;
use super::{Access, LogicalTime, Region, Word, REGION_COUNT};

/// One applied corruption. Lives outside the simulated memory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub region: Region,
    /// Address of the first rewritten word.
    pub addr: usize,
    pub old: Vec<Word>,
    pub new: Vec<Word>,
    pub time: LogicalTime,
}

/// Decides when and where to corrupt. Hooks run after every algorithm access
/// and before every top-level operation.
pub trait Strategy: Send {
    fn after_access(&mut self, _access: &Access, _ctx: &mut AdversaryCtx<'_>) {}

    fn between_ops(&mut self, _op: u64, _ctx: &mut AdversaryCtx<'_>) {}
}

/// Full view of main memory plus the ability to spend budget.
pub struct AdversaryCtx<'a> {
    pub(crate) memories: &'a mut [UnreliableMemory; REGION_COUNT],
    pub(crate) budget: &'a mut usize,
    pub(crate) log: &'a mut Vec<Corruption>,
    pub(crate) time: LogicalTime,
}

impl AdversaryCtx<'_> {
    pub fn budget(&self) -> usize {
        *self.budget
    }

    pub fn time(&self) -> LogicalTime {
        self.time
    }

    pub fn len(&self, region: Region) -> usize {
        self.memories[region.index()].len()
    }

    pub fn unit(&self, region: Region) -> usize {
        self.memories[region.index()].unit()
    }

    pub fn peek(&self, region: Region, addr: usize) -> Option<Word> {
        self.memories[region.index()].peek(addr)
    }

    /// Rewrites one word. Returns false if the budget is spent or the
    /// address does not exist.
    pub fn corrupt(&mut self, region: Region, addr: usize, w: Word) -> bool {
        apply(
            self.memories,
            self.budget,
            self.log,
            self.time,
            region,
            addr,
            &[w],
        )
    }

    /// Rewrites the first `words.len()` words of corruption unit `unit` for
    /// the price of one corruption.
    pub fn corrupt_unit(&mut self, region: Region, unit: usize, words: &[Word]) -> bool {
        let width = self.unit(region);
        if words.is_empty() || words.len() > width {
            return false;
        }
        apply(
            self.memories,
            self.budget,
            self.log,
            self.time,
            region,
            unit * width,
            words,
        )
    }
}

pub(crate) fn apply(
    memories: &mut [UnreliableMemory; REGION_COUNT],
    budget: &mut usize,
    log: &mut Vec<Corruption>,
    time: LogicalTime,
    region: Region,
    addr: usize,
    words: &[Word],
) -> bool {
    let mem = &mut memories[region.index()];
    let unit = mem.unit();
    let last = addr + words.len() - 1;
    if *budget == 0 || last >= mem.len() || addr / unit != last / unit {
        return false;
    }
    let old: Vec<Word> = words
        .iter()
        .enumerate()
        .filter_map(|(i, w)| mem.overwrite(addr + i, *w))
        .collect();
    *budget -= 1;
    log.push(Corruption {
        region,
        addr,
        old,
        new: words.to_vec(),
        time,
    });
    true
}

/// Budget, log and strategy of one simulation run.
pub struct Adversary {
    pub(crate) initial: usize,
    pub(crate) budget: usize,
    pub(crate) log: Vec<Corruption>,
    pub(crate) strategy: Option<Box<dyn Strategy>>,
}

impl std::fmt::Debug for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adversary")
            .field("initial", &self.initial)
            .field("budget", &self.budget)
            .field("log", &self.log.len())
            .field("strategy", &self.strategy.is_some())
            .finish()
    }
}

impl Adversary {
    /// An adversary that never acts on its own; only explicit corruptions
    /// through the RAM spend its budget.
    pub fn passive(budget: usize) -> Self {
        Self {
            initial: budget,
            budget,
            log: Vec::new(),
            strategy: None,
        }
    }

    pub fn new(budget: usize, strategy: impl Strategy + 'static) -> Self {
        Self {
            initial: budget,
            budget,
            log: Vec::new(),
            strategy: Some(Box::new(strategy)),
        }
    }

    pub fn with_boxed(budget: usize, strategy: Box<dyn Strategy>) -> Self {
        Self {
            initial: budget,
            budget,
            log: Vec::new(),
            strategy: Some(strategy),
        }
    }

    pub fn initial_budget(&self) -> usize {
        self.initial
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn log(&self) -> &[Corruption] {
        &self.log
    }
}

/// When a scripted event fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    /// Just before top-level operation `op` starts.
    BeforeOp(u64),
    /// At the first access hook whose global access count is at least `n`.
    AtAccess(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub trigger: Trigger,
    pub region: Region,
    pub addr: usize,
    pub value: Word,
}

/// Fires a fixed list of events, each at most once.
#[derive(Clone, Debug, Default)]
pub struct Scripted {
    events: Vec<FaultEvent>,
    fired: Vec<bool>,
}

impl Scripted {
    pub fn new(events: Vec<FaultEvent>) -> Self {
        let fired = vec![false; events.len()];
        Self { events, fired }
    }

    fn fire(&mut self, ctx: &mut AdversaryCtx<'_>, due: impl Fn(&Trigger) -> bool) {
        for (ev, fired) in self.events.iter().zip(self.fired.iter_mut()) {
            if !*fired && due(&ev.trigger) {
                *fired = true;
                ctx.corrupt(ev.region, ev.addr, ev.value);
            }
        }
    }
}

impl Strategy for Scripted {
    fn after_access(&mut self, access: &Access, ctx: &mut AdversaryCtx<'_>) {
        let now = access.time.access;
        self.fire(ctx, |t| matches!(t, Trigger::AtAccess(n) if *n <= now));
    }

    fn between_ops(&mut self, op: u64, ctx: &mut AdversaryCtx<'_>) {
        self.fire(ctx, |t| matches!(t, Trigger::BeforeOp(o) if *o == op));
    }
}

/// After each access, with probability `rate`, rewrites a uniformly random
/// word of a random non-empty region with a random value.
#[derive(Clone, Debug)]
pub struct RandomWords {
    rng: ChaCha8Rng,
    rate: f64,
}

impl RandomWords {
    pub fn new(seed: u64, rate: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate,
        }
    }
}

impl Strategy for RandomWords {
    fn after_access(&mut self, _access: &Access, ctx: &mut AdversaryCtx<'_>) {
        if ctx.budget() == 0 || !self.rng.gen_bool(self.rate.clamp(0.0, 1.0)) {
            return;
        }
        let region = Region::ALL[self.rng.gen_range(0..REGION_COUNT)];
        let len = ctx.len(region);
        if len == 0 {
            return;
        }
        let addr = self.rng.gen_range(0..len);
        let value = self.rng.gen();
        ctx.corrupt(region, addr, value);
    }
}

/// Adapts a closure into an adaptive strategy.
pub struct Adaptive<F>(pub F);

impl<F> Strategy for Adaptive<F>
where
    F: FnMut(&Access, &mut AdversaryCtx<'_>) + Send,
{
    fn after_access(&mut self, access: &Access, ctx: &mut AdversaryCtx<'_>) {
        (self.0)(access, ctx)
    }
}
