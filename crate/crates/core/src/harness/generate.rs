//! Deterministic trace generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::Query;
use crate::static_la::figure_two;
use crate::VertexId;

use super::trace::{Directive, Trace, TraceMeta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Chain,
    Caterpillar,
    RandomAttach,
    StarOfPaths,
    Figure2,
}

impl GenKind {
    pub const ALL: [GenKind; 5] = [
        GenKind::Chain,
        GenKind::Caterpillar,
        GenKind::RandomAttach,
        GenKind::StarOfPaths,
        GenKind::Figure2,
    ];
}

impl FromStr for GenKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.replace('-', "_").as_str() {
            "chain" => GenKind::Chain,
            "caterpillar" => GenKind::Caterpillar,
            "random_attach" => GenKind::RandomAttach,
            "star_of_paths" => GenKind::StarOfPaths,
            "figure2" => GenKind::Figure2,
            _ => return Err(format!("unknown generator `{s}`")),
        })
    }
}

impl fmt::Display for GenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenKind::Chain => "chain",
            GenKind::Caterpillar => "caterpillar",
            GenKind::RandomAttach => "random_attach",
            GenKind::StarOfPaths => "star_of_paths",
            GenKind::Figure2 => "figure2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenParams {
    pub kind: GenKind,
    /// Vertices including the root.
    pub n: usize,
    pub delta: usize,
    pub seed: u64,
    pub weights: (u64, u64),
    /// Expected queries per insertion.
    pub query_density: f64,
}

impl GenParams {
    pub fn new(kind: GenKind, n: usize, delta: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            delta,
            seed,
            weights: (1, 8),
            query_density: 1.0,
        }
    }
}

struct Shape {
    rng: ChaCha8Rng,
    depth: Vec<usize>,
    /// Weight of the root path, both ends included.
    wsum: Vec<u64>,
    spine: Vec<VertexId>,
    arms: Vec<VertexId>,
}

impl Shape {
    fn parent(&mut self, kind: GenKind) -> VertexId {
        let i = self.depth.len();
        let rng = &mut self.rng;
        match kind {
            GenKind::Chain | GenKind::Figure2 => i - 1,
            GenKind::Caterpillar => {
                if rng.gen_bool(0.7) {
                    let p = *self.spine.last().expect("spine starts at the root");
                    self.spine.push(i);
                    p
                } else {
                    let back = rng.gen_range(0..self.spine.len().min(10));
                    self.spine[self.spine.len() - 1 - back]
                }
            }
            GenKind::RandomAttach => {
                let x: f64 = rng.gen();
                if x < 0.6 {
                    i - 1
                } else if x < 0.8 {
                    i - 1 - rng.gen_range(0..i.min(50))
                } else {
                    rng.gen_range(0..i)
                }
            }
            GenKind::StarOfPaths => {
                let a = i % self.arms.len();
                let p = self.arms[a];
                self.arms[a] = i;
                p
            }
        }
    }

    fn query(&mut self, w_hi: u64) -> Query {
        let n = self.depth.len();
        let rng = &mut self.rng;
        // favour recent, deep vertices
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.5) {
                n - 1 - rng.gen_range(0..n.min(20))
            } else {
                rng.gen_range(0..n)
            }
        };
        let v = pick(rng);
        match rng.gen_range(0..4) {
            0 => Query::La {
                v,
                k: rng.gen_range(0..=self.depth[v] + 2),
            },
            1 => Query::Wla {
                v,
                k: rng.gen_range(1..=self.wsum[v] + w_hi),
            },
            2 => Query::Lca { u: pick(rng), v },
            _ => Query::Bvq { u: pick(rng), v },
        }
    }
}

pub fn generate(p: &GenParams) -> Trace {
    let mut trace = Trace {
        meta: TraceMeta {
            delta: Some(p.delta),
            seed: Some(p.seed),
            weights: Some(p.weights),
            ..TraceMeta::default()
        },
        directives: Vec::new(),
    };
    if p.kind == GenKind::Figure2 {
        let (parents, v) = figure_two();
        trace.meta.delta = Some(3);
        trace.push(Directive::BuildStatic { delta: 3, parents });
        trace.push(Directive::Query(Query::La { v, k: 8 }));
        return trace;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (lo, hi) = p.weights;
    let root_weight = rng.gen_range(lo..=hi);
    trace.meta.root_weight = Some(root_weight);
    let arms = ((p.n as f64).sqrt() as usize / 2).max(2);
    let mut s = Shape {
        rng,
        depth: vec![0],
        wsum: vec![root_weight],
        spine: vec![0],
        arms: vec![0; arms],
    };
    for _ in 1..p.n {
        let parent = s.parent(p.kind);
        let weight = s.rng.gen_range(lo..=hi);
        s.depth.push(s.depth[parent] + 1);
        s.wsum.push(s.wsum[parent] + weight);
        trace.push(Directive::AddLeaf { parent, weight });
        let whole = p.query_density.floor() as usize;
        let extra = s.rng.gen_bool(p.query_density.fract());
        for _ in 0..whole + extra as usize {
            let q = s.query(hi);
            trace.push(Directive::Query(q));
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shape() {
        let mut p = GenParams::new(GenKind::Chain, 10, 2, 1);
        p.query_density = 0.0;
        let t = generate(&p);
        assert_eq!(t.directives.len(), 9);
        for (i, (_, d)) in t.directives.iter().enumerate() {
            assert!(matches!(d, Directive::AddLeaf { parent, .. } if *parent == i));
        }
    }

    #[test]
    fn deterministic() {
        for kind in GenKind::ALL {
            let p = GenParams::new(kind, 300, 3, 42);
            assert_eq!(generate(&p).to_string(), generate(&p).to_string());
        }
    }

    #[test]
    fn figure2_script() {
        let t = generate(&GenParams::new(GenKind::Figure2, 0, 3, 0));
        assert!(matches!(
            t.directives[0].1,
            Directive::BuildStatic { delta: 3, .. }
        ));
        assert_eq!(
            t.directives[1].1,
            Directive::Query(Query::La { v: 9, k: 8 })
        );
    }

    #[test]
    fn parses_names() {
        for kind in GenKind::ALL {
            assert_eq!(kind.to_string().parse::<GenKind>().unwrap(), kind);
        }
        assert_eq!(
            "random-attach".parse::<GenKind>().unwrap(),
            GenKind::RandomAttach
        );
    }
}
