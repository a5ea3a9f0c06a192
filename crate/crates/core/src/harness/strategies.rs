//! Adversaries that know the record layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::black_forest::QHandle;
use crate::faulty_ram::{Access, AccessKind, AdversaryCtx, Region, Strategy, Word};
use crate::resilient_tree::{CbaValue, FlagValue, NodeRecord, Profile};
use crate::VertexId;

fn peek_record(ctx: &AdversaryCtx<'_>, profile: Profile, v: VertexId) -> Option<NodeRecord> {
    let width = profile.width();
    let words: Option<Vec<Word>> = (0..width)
        .map(|i| ctx.peek(Region::Records, v * width + i))
        .collect();
    Some(profile.decode(&words?))
}

fn put_record(ctx: &mut AdversaryCtx<'_>, profile: Profile, v: VertexId, rec: &NodeRecord) -> bool {
    match profile.encode(rec) {
        Ok(words) => ctx.corrupt_unit(Region::Records, v, &words),
        Err(_) => false,
    }
}

fn vertex_count(ctx: &AdversaryCtx<'_>, profile: Profile) -> usize {
    ctx.len(Region::Records) / profile.width()
}

/// Rewrites one field of `rec` with a plausible value.
pub fn mutate<R: Rng>(rng: &mut R, profile: Profile, v: VertexId, n: usize, rec: &mut NodeRecord) {
    let handles = (n as u32 / 2).max(1);
    match rng.gen_range(0..6) {
        0 => {
            rec.p = match rng.gen_range(0..4) {
                0 => None,
                1 => Some(v + rng.gen_range(0..3)),
                _ => Some(rng.gen_range(0..v.max(1))),
            }
        }
        1 => {
            rec.q = if rng.gen_bool(0.5) {
                None
            } else {
                Some(QHandle(rng.gen_range(0..handles)))
            }
        }
        2 => {
            rec.flag = match rng.gen_range(0..3) {
                0 => FlagValue::Unspent,
                1 => FlagValue::Spent,
                _ => FlagValue::Annotated {
                    x: rng.gen_range(0..n.max(1)),
                    i: rng.gen_range(1..4),
                },
            }
        }
        3 => {
            rec.cba = match rng.gen_range(0..3) {
                0 => CbaValue::Unset,
                1 => CbaValue::Set(QHandle(rng.gen_range(0..handles))),
                _ => CbaValue::Annotated {
                    x: rng.gen_range(0..n.max(1)),
                    i: rng.gen_range(1..4),
                },
            }
        }
        4 => {
            let shift = rng.gen_range(1..40u64);
            rec.depth = if rng.gen_bool(0.5) {
                rec.depth.wrapping_add(shift)
            } else {
                rec.depth.wrapping_sub(shift)
            } & profile.depth_mask();
        }
        _ => rec.weight = rng.gen_range(0..=profile.max_weight().min(1 << 20)),
    }
}

/// Random plausible record rewrites, with the occasional garbage word in
/// the forest.
pub struct RecordNoise {
    rng: ChaCha8Rng,
    rate: f64,
    profile: Profile,
}

impl RecordNoise {
    pub fn new(seed: u64, rate: f64, profile: Profile) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate,
            profile,
        }
    }
}

impl Strategy for RecordNoise {
    fn after_access(&mut self, _access: &Access, ctx: &mut AdversaryCtx<'_>) {
        if ctx.budget() == 0 || !self.rng.gen_bool(self.rate.clamp(0.0, 1.0)) {
            return;
        }
        if self.rng.gen_bool(0.1) {
            let region = if self.rng.gen_bool(0.5) {
                Region::ForestNodes
            } else {
                Region::ForestTables
            };
            let len = ctx.len(region);
            if len > 0 {
                let addr = self.rng.gen_range(0..len);
                ctx.corrupt(region, addr, self.rng.gen());
            }
            return;
        }
        let n = vertex_count(ctx, self.profile);
        if n == 0 {
            return;
        }
        let v = self.rng.gen_range(0..n);
        if let Some(mut rec) = peek_record(ctx, self.profile, v) {
            mutate(&mut self.rng, self.profile, v, n, &mut rec);
            put_record(ctx, self.profile, v, &rec);
        }
    }
}

/// Marks fresh leaves' flags spent and restores them a few operations
/// later, producing irregular black patterns near the victims.
pub struct TargetedFlags {
    rng: ChaCha8Rng,
    profile: Profile,
    delta: usize,
    pending: Vec<(VertexId, u64)>,
}

impl TargetedFlags {
    pub fn new(seed: u64, profile: Profile, delta: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            profile,
            delta: delta.max(1),
            pending: Vec::new(),
        }
    }
}

impl Strategy for TargetedFlags {
    fn between_ops(&mut self, op: u64, ctx: &mut AdversaryCtx<'_>) {
        // restore first so every victim costs two corruptions
        if let Some(pos) = self.pending.iter().position(|&(_, due)| due <= op) {
            let (v, _) = self.pending.swap_remove(pos);
            if let Some(mut rec) = peek_record(ctx, self.profile, v) {
                if rec.flag == FlagValue::Spent {
                    rec.flag = FlagValue::Unspent;
                    put_record(ctx, self.profile, v, &rec);
                }
            }
            return;
        }
        if ctx.budget() < 2 || !self.rng.gen_bool(0.05) {
            return;
        }
        let n = vertex_count(ctx, self.profile);
        if n < 2 {
            return;
        }
        let v = n - 1 - self.rng.gen_range(0..n.min(2));
        if let Some(mut rec) = peek_record(ctx, self.profile, v) {
            if rec.flag.is_spent() {
                return;
            }
            rec.flag = FlagValue::Spent;
            if put_record(ctx, self.profile, v, &rec) {
                let wait = self
                    .rng
                    .gen_range(self.delta as u64..=4 * self.delta as u64);
                self.pending.push((v, op + wait));
            }
        }
    }
}

/// Watches record reads and rewrites a record the current walk has just
/// passed through.
pub struct AdaptivePath {
    rng: ChaCha8Rng,
    rate: f64,
    profile: Profile,
}

impl AdaptivePath {
    pub fn new(seed: u64, rate: f64, profile: Profile) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate,
            profile,
        }
    }
}

impl Strategy for AdaptivePath {
    fn after_access(&mut self, access: &Access, ctx: &mut AdversaryCtx<'_>) {
        if access.region != Region::Records || access.kind != AccessKind::Read || ctx.budget() == 0
        {
            return;
        }
        if !self.rng.gen_bool(self.rate.clamp(0.0, 1.0)) {
            return;
        }
        let v = access.addr / self.profile.width();
        let n = vertex_count(ctx, self.profile);
        if let Some(mut rec) = peek_record(ctx, self.profile, v) {
            mutate(&mut self.rng, self.profile, v, n, &mut rec);
            put_record(ctx, self.profile, v, &rec);
        }
    }
}
