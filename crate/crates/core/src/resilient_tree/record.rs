//! Vertex records and their word layouts.
//!
//! Wide profile, six words per record:
//!
//! | word | field  | encoding                                                |
//! |------|--------|---------------------------------------------------------|
//! | 0    | p      | parent index, `u64::MAX` for null                       |
//! | 1    | q      | forest handle, `u64::MAX` for null                      |
//! | 2    | flag   | tag in bits 62..64: 0 unspent, 1 spent, 2 annotated     |
//! | 3    | cba    | tag in bits 62..64: 0 unset, 1 set, 2 annotated         |
//! | 4    | depth  | wrapping 64-bit depth                                   |
//! | 5    | weight | raw weight                                              |
//!
//! Annotations put the distance in bits 40..62 and the vertex in bits 0..40.
//! A set cba keeps its handle in bits 0..32.
//!
//! Packed profile, two words per record:
//!
//! ```text
//! w0: weight[58..64) depth[38..58) q[20..38) p[0..20)
//! w1: flag_tag[62..64) flag_x[42..62) flag_i[32..42) cba_tag[30..32) cba[0..30)
//! ```
//!
//! with packed cba annotations as x[10..30) i[0..10) and a set cba as the
//! handle in cba[0..18). All-ones p and q are null.
//!
//! Decoding never fails. Any flag pattern that is not a legal variant reads
//! as spent and any such cba reads as set to an invalid handle.

use serde::{Deserialize, Serialize};

use crate::black_forest::QHandle;
use crate::faulty_ram::{SimError, Word};
use crate::VertexId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlagValue {
    Unspent,
    Spent,
    /// Still unspent, tagged by the insertion of `x` at distance `i`.
    Annotated {
        x: VertexId,
        i: usize,
    },
}

impl FlagValue {
    pub fn is_spent(self) -> bool {
        matches!(self, FlagValue::Spent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CbaValue {
    Unset,
    Annotated { x: VertexId, i: usize },
    Set(QHandle),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    /// `None` only for the root.
    pub p: Option<VertexId>,
    pub q: Option<QHandle>,
    pub flag: FlagValue,
    pub cba: CbaValue,
    pub depth: u64,
    pub weight: u64,
}

impl NodeRecord {
    pub fn root(weight: u64) -> Self {
        Self {
            p: None,
            q: None,
            flag: FlagValue::Unspent,
            cba: CbaValue::Unset,
            depth: 0,
            weight,
        }
    }

    pub fn leaf(parent: VertexId, depth: u64, weight: u64) -> Self {
        Self {
            p: Some(parent),
            ..Self::root(weight)
        }
        .with_depth(depth)
    }

    fn with_depth(mut self, depth: u64) -> Self {
        self.depth = depth;
        self
    }

    pub fn is_black(&self) -> bool {
        self.q.is_some()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Wide,
    Packed,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wide" => Ok(Profile::Wide),
            "packed" => Ok(Profile::Packed),
            _ => Err(format!("unknown profile `{s}`")),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Wide => "wide",
            Profile::Packed => "packed",
        })
    }
}

pub const MAX_WORDS: usize = 6;

const NULL: Word = u64::MAX;
const TAG_SHIFT: u32 = 62;

const W_X_BITS: u32 = 40;
const W_I_BITS: u32 = 22;

const P_BITS: u32 = 20;
const Q_BITS: u32 = 18;
const D_BITS: u32 = 20;
const WT_BITS: u32 = 6;
const PX_BITS: u32 = 20;
const PI_BITS: u32 = 10;

fn mask(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

impl Profile {
    /// Words per record, which is also the corruption unit.
    pub fn width(self) -> usize {
        match self {
            Profile::Wide => 6,
            Profile::Packed => 2,
        }
    }

    /// Depths are stored modulo `depth_mask() + 1`.
    pub fn depth_mask(self) -> u64 {
        match self {
            Profile::Wide => u64::MAX,
            Profile::Packed => mask(D_BITS),
        }
    }

    pub fn max_vertices(self) -> usize {
        match self {
            Profile::Wide => (1usize << W_X_BITS) - 1,
            Profile::Packed => mask(P_BITS) as usize,
        }
    }

    pub fn max_handles(self) -> usize {
        match self {
            Profile::Wide => u32::MAX as usize - 1,
            Profile::Packed => mask(Q_BITS) as usize,
        }
    }

    pub fn max_delta(self) -> usize {
        match self {
            // annotations carry distances up to 2δ
            Profile::Wide => (mask(W_I_BITS) / 2) as usize,
            Profile::Packed => (mask(PI_BITS) / 2) as usize,
        }
    }

    pub fn max_weight(self) -> u64 {
        match self {
            Profile::Wide => u64::MAX,
            Profile::Packed => mask(WT_BITS),
        }
    }

    /// Signed difference `a - b` of two stored depths.
    pub fn depth_diff(self, a: u64, b: u64) -> i64 {
        let m = self.depth_mask();
        let d = a.wrapping_sub(b) & m;
        if d > m / 2 {
            -((m - d) as i64) - 1
        } else {
            d as i64
        }
    }

    pub fn encode(self, r: &NodeRecord) -> Result<Vec<Word>, SimError> {
        match self {
            Profile::Wide => encode_wide(r),
            Profile::Packed => encode_packed(r),
        }
    }

    pub fn decode(self, w: &[Word]) -> NodeRecord {
        match self {
            Profile::Wide => decode_wide(w),
            Profile::Packed => decode_packed(w),
        }
    }
}

fn overflow(field: &'static str, value: u64) -> SimError {
    SimError::FieldOverflow { field, value }
}

fn fit(field: &'static str, value: u64, bits: u32) -> Result<u64, SimError> {
    if value > mask(bits) {
        Err(overflow(field, value))
    } else {
        Ok(value)
    }
}

fn wide_pair(x: VertexId, i: usize) -> Result<u64, SimError> {
    Ok(fit("annotation distance", i as u64, W_I_BITS)? << W_X_BITS
        | fit("annotation vertex", x as u64, W_X_BITS)?)
}

fn encode_wide(r: &NodeRecord) -> Result<Vec<Word>, SimError> {
    let flag = match r.flag {
        FlagValue::Unspent => 0,
        FlagValue::Spent => 1 << TAG_SHIFT,
        FlagValue::Annotated { x, i } => 2 << TAG_SHIFT | wide_pair(x, i)?,
    };
    let cba = match r.cba {
        CbaValue::Unset => 0,
        CbaValue::Set(q) => 1 << TAG_SHIFT | q.0 as u64,
        CbaValue::Annotated { x, i } => 2 << TAG_SHIFT | wide_pair(x, i)?,
    };
    Ok(vec![
        r.p.map_or(NULL, |p| p as u64),
        r.q.map_or(NULL, |q| q.0 as u64),
        flag,
        cba,
        r.depth,
        r.weight,
    ])
}

fn wide_unpair(w: u64) -> (VertexId, usize) {
    (
        (w & mask(W_X_BITS)) as VertexId,
        ((w >> W_X_BITS) & mask(W_I_BITS)) as usize,
    )
}

fn decode_wide(w: &[Word]) -> NodeRecord {
    let flag = match (w[2] >> TAG_SHIFT, w[2] & mask(TAG_SHIFT)) {
        (0, 0) => FlagValue::Unspent,
        (2, payload) => {
            let (x, i) = wide_unpair(payload);
            FlagValue::Annotated { x, i }
        }
        _ => FlagValue::Spent,
    };
    let cba = match (w[3] >> TAG_SHIFT, w[3] & mask(TAG_SHIFT)) {
        (0, 0) => CbaValue::Unset,
        (1, q) if q < u32::MAX as u64 => CbaValue::Set(QHandle(q as u32)),
        (2, payload) => {
            let (x, i) = wide_unpair(payload);
            CbaValue::Annotated { x, i }
        }
        _ => CbaValue::Set(QHandle::INVALID),
    };
    NodeRecord {
        p: (w[0] != NULL).then_some(w[0] as VertexId),
        q: match w[1] {
            NULL => None,
            q if q < u32::MAX as u64 => Some(QHandle(q as u32)),
            _ => Some(QHandle::INVALID),
        },
        flag,
        cba,
        depth: w[4],
        weight: w[5],
    }
}

fn packed_pair(x: VertexId, i: usize) -> Result<u64, SimError> {
    Ok(fit("annotation vertex", x as u64, PX_BITS)? << PI_BITS
        | fit("annotation distance", i as u64, PI_BITS)?)
}

fn encode_packed(r: &NodeRecord) -> Result<Vec<Word>, SimError> {
    let p = match r.p {
        None => mask(P_BITS),
        Some(p) if (p as u64) < mask(P_BITS) => p as u64,
        Some(p) => return Err(overflow("p", p as u64)),
    };
    let q = match r.q {
        None => mask(Q_BITS),
        Some(q) if (q.0 as u64) < mask(Q_BITS) => q.0 as u64,
        Some(q) => return Err(overflow("q", q.0 as u64)),
    };
    let w0 = fit("weight", r.weight, WT_BITS)? << (P_BITS + Q_BITS + D_BITS)
        | (r.depth & mask(D_BITS)) << (P_BITS + Q_BITS)
        | q << P_BITS
        | p;
    let (ftag, fpay) = match r.flag {
        FlagValue::Unspent => (0, 0),
        FlagValue::Spent => (1, 0),
        FlagValue::Annotated { x, i } => (2, packed_pair(x, i)?),
    };
    let (ctag, cpay) = match r.cba {
        CbaValue::Unset => (0, 0),
        CbaValue::Set(q) if (q.0 as u64) < mask(Q_BITS) => (1, q.0 as u64),
        CbaValue::Set(q) => return Err(overflow("cba", q.0 as u64)),
        CbaValue::Annotated { x, i } => (2, packed_pair(x, i)?),
    };
    let w1 = ftag << TAG_SHIFT | fpay << 32 | ctag << 30 | cpay;
    Ok(vec![w0, w1])
}

fn packed_unpair(w: u64) -> (VertexId, usize) {
    (
        ((w >> PI_BITS) & mask(PX_BITS)) as VertexId,
        (w & mask(PI_BITS)) as usize,
    )
}

fn decode_packed(w: &[Word]) -> NodeRecord {
    let p = w[0] & mask(P_BITS);
    let q = (w[0] >> P_BITS) & mask(Q_BITS);
    let fpay = (w[1] >> 32) & mask(30);
    let cpay = w[1] & mask(30);
    let flag = match (w[1] >> TAG_SHIFT, fpay) {
        (0, 0) => FlagValue::Unspent,
        (2, pay) => {
            let (x, i) = packed_unpair(pay);
            FlagValue::Annotated { x, i }
        }
        _ => FlagValue::Spent,
    };
    let cba = match ((w[1] >> 30) & 3, cpay) {
        (0, 0) => CbaValue::Unset,
        (1, q) if q < mask(Q_BITS) => CbaValue::Set(QHandle(q as u32)),
        (2, pay) => {
            let (x, i) = packed_unpair(pay);
            CbaValue::Annotated { x, i }
        }
        _ => CbaValue::Set(QHandle::INVALID),
    };
    NodeRecord {
        p: (p != mask(P_BITS)).then_some(p as VertexId),
        q: (q != mask(Q_BITS)).then_some(QHandle(q as u32)),
        flag,
        cba,
        depth: (w[0] >> (P_BITS + Q_BITS)) & mask(D_BITS),
        weight: w[0] >> (P_BITS + Q_BITS + D_BITS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples() -> Vec<NodeRecord> {
        vec![
            NodeRecord::root(1),
            NodeRecord {
                p: Some(17),
                q: Some(QHandle(3)),
                flag: FlagValue::Annotated { x: 99, i: 4 },
                cba: CbaValue::Set(QHandle(2)),
                depth: 12,
                weight: 63,
            },
            NodeRecord {
                p: Some(0),
                q: None,
                flag: FlagValue::Spent,
                cba: CbaValue::Annotated { x: 5, i: 9 },
                depth: 1,
                weight: 7,
            },
        ]
    }

    #[test]
    fn both_profiles_roundtrip() {
        for profile in [Profile::Wide, Profile::Packed] {
            for r in samples() {
                let w = profile.encode(&r).unwrap();
                assert_eq!(w.len(), profile.width());
                assert_eq!(profile.decode(&w), r);
            }
        }
    }

    #[test]
    fn garbage_reads_conservatively() {
        let r = Profile::Wide.decode(&[5, u64::MAX - 1, 3 << 62, 3 << 62, 0, 1]);
        assert_eq!(r.flag, FlagValue::Spent);
        assert_eq!(r.cba, CbaValue::Set(QHandle::INVALID));
        assert_eq!(r.q, Some(QHandle::INVALID));
        let r = Profile::Wide.decode(&[5, 1, 7, 1, 0, 1]);
        assert_eq!(r.flag, FlagValue::Spent, "unspent tag with payload");
        assert_eq!(r.cba, CbaValue::Set(QHandle::INVALID));
        let r = Profile::Packed.decode(&[0, u64::MAX]);
        assert_eq!(r.flag, FlagValue::Spent);
        assert_eq!(r.cba, CbaValue::Set(QHandle::INVALID));
    }

    #[test]
    fn packed_limits_are_enforced() {
        let mut r = NodeRecord::root(64);
        assert!(Profile::Packed.encode(&r).is_err());
        r.weight = 1;
        r.p = Some(1 << 20);
        assert!(Profile::Packed.encode(&r).is_err());
    }

    #[test]
    fn modular_depth_difference() {
        let p = Profile::Packed;
        assert_eq!(p.depth_diff(3, (1 << 20) - 2), 5);
        assert_eq!(p.depth_diff((1 << 20) - 2, 3), -5);
        assert_eq!(Profile::Wide.depth_diff(2, u64::MAX), 3);
        assert_eq!(Profile::Wide.depth_diff(10, 4), 6);
    }

    fn record_strategy() -> impl Strategy<Value = NodeRecord> {
        let flag = prop_oneof![
            Just(FlagValue::Unspent),
            Just(FlagValue::Spent),
            (0usize..1 << 20, 0usize..1024).prop_map(|(x, i)| FlagValue::Annotated { x, i }),
        ];
        let cba = prop_oneof![
            Just(CbaValue::Unset),
            (0u32..(1 << 18) - 1).prop_map(|q| CbaValue::Set(QHandle(q))),
            (0usize..1 << 20, 0usize..1024).prop_map(|(x, i)| CbaValue::Annotated { x, i }),
        ];
        (
            proptest::option::of(0usize..(1 << 20) - 1),
            proptest::option::of((0u32..(1 << 18) - 1).prop_map(QHandle)),
            flag,
            cba,
            0u64..1 << 20,
            0u64..64,
        )
            .prop_map(|(p, q, flag, cba, depth, weight)| NodeRecord {
                p,
                q,
                flag,
                cba,
                depth,
                weight,
            })
    }

    proptest! {
        #[test]
        fn roundtrip_any_record(r in record_strategy()) {
            for profile in [Profile::Wide, Profile::Packed] {
                let w = profile.encode(&r).unwrap();
                prop_assert_eq!(profile.decode(&w), r);
            }
        }

        #[test]
        fn decode_is_total(words in proptest::collection::vec(any::<u64>(), 6)) {
            let _ = Profile::Wide.decode(&words);
            let _ = Profile::Packed.decode(&words[..2]);
        }
    }
}
