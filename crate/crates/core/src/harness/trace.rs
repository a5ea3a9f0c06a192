//! Line-oriented trace format.
//!
//! ```text
//! # comment
//! @delta 3
//! @seed 7
//! @weights 1 8
//! @root 4
//! @adversary random
//! ADDLEAF 0 5
//! LA 1 0
//! CORRUPT 1 FIELD flag=spent
//! CORRUPT 1 RAW 0x0 0xff
//! CHECKPOINT
//! BUILD_STATIC 3
//! - 0 1 2
//! END
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::black_forest::QHandle;
use crate::faulty_ram::Word;
use crate::oracle::Query;
use crate::resilient_tree::{CbaValue, FlagValue, NodeRecord, Profile};
use crate::VertexId;

use super::AdversaryKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// A single record field overwrite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldPatch {
    P(Option<VertexId>),
    Q(Option<u32>),
    Flag(FlagValue),
    Cba(CbaValue),
    Depth(u64),
    Weight(u64),
}

impl FieldPatch {
    pub fn apply(&self, rec: &mut NodeRecord) {
        match *self {
            FieldPatch::P(p) => rec.p = p,
            FieldPatch::Q(q) => rec.q = q.map(QHandle),
            FieldPatch::Flag(f) => rec.flag = f,
            FieldPatch::Cba(c) => rec.cba = c,
            FieldPatch::Depth(d) => rec.depth = d,
            FieldPatch::Weight(w) => rec.weight = w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Patch {
    Field(FieldPatch),
    /// Leading words of the record; the rest are left alone.
    Raw(Vec<Word>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Directive {
    AddLeaf {
        parent: VertexId,
        weight: u64,
    },
    Query(Query),
    Corrupt {
        vertex: VertexId,
        patch: Patch,
    },
    Checkpoint,
    BuildStatic {
        delta: usize,
        parents: Vec<Option<VertexId>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub delta: Option<usize>,
    pub seed: Option<u64>,
    pub weights: Option<(u64, u64)>,
    pub root_weight: Option<u64>,
    pub adversary: Option<AdversaryKind>,
    pub budget: Option<usize>,
    pub rate: Option<f64>,
    pub profile: Option<Profile>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    /// Directives with their 1-based source line.
    pub directives: Vec<(usize, Directive)>,
}

impl Trace {
    pub fn push(&mut self, d: Directive) {
        let line = self.directives.last().map_or(1, |(l, _)| l + 1);
        self.directives.push((line, d));
    }

    pub fn queries(&self) -> usize {
        self.directives
            .iter()
            .filter(|(_, d)| matches!(d, Directive::Query(_)))
            .count()
    }
}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        msg: msg.into(),
    }
}

fn num<T: FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("bad {what} `{tok}`")))
}

fn hex(line: usize, tok: &str) -> Result<Word, ParseError> {
    let t = tok.trim_start_matches("0x").trim_start_matches("0X");
    Word::from_str_radix(t, 16).map_err(|_| err(line, format!("bad hex word `{tok}`")))
}

fn opt_num<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<Option<T>, ParseError> {
    if tok == "null" || tok == "-" {
        Ok(None)
    } else {
        num(line, Some(tok), what).map(Some)
    }
}

fn pair(line: usize, tok: &str) -> Result<(VertexId, usize), ParseError> {
    let (x, i) = tok
        .split_once(':')
        .ok_or_else(|| err(line, format!("expected x:i, got `{tok}`")))?;
    Ok((num(line, Some(x), "x")?, num(line, Some(i), "i")?))
}

fn field(line: usize, spec: &str) -> Result<FieldPatch, ParseError> {
    let (name, val) = spec
        .split_once('=')
        .ok_or_else(|| err(line, "expected <name>=<value>"))?;
    Ok(match name {
        "p" => FieldPatch::P(opt_num(line, val, "parent")?),
        "q" => FieldPatch::Q(opt_num(line, val, "handle")?),
        "depth" => FieldPatch::Depth(num(line, Some(val), "depth")?),
        "weight" => FieldPatch::Weight(num(line, Some(val), "weight")?),
        "flag" => FieldPatch::Flag(match val {
            "unspent" => FlagValue::Unspent,
            "spent" => FlagValue::Spent,
            _ => {
                let (x, i) = pair(line, val)?;
                FlagValue::Annotated { x, i }
            }
        }),
        "cba" => FieldPatch::Cba(match val {
            "unset" => CbaValue::Unset,
            _ if val.starts_with("set:") => {
                CbaValue::Set(QHandle(num(line, Some(&val[4..]), "handle")?))
            }
            _ => {
                let (x, i) = pair(line, val)?;
                CbaValue::Annotated { x, i }
            }
        }),
        _ => return Err(err(line, format!("unknown field `{name}`"))),
    })
}

fn query(line: usize, verb: &str, a: Option<&str>, b: Option<&str>) -> Result<Query, ParseError> {
    Ok(match verb {
        "LA" => Query::La {
            v: num(line, a, "vertex")?,
            k: num(line, b, "k")?,
        },
        "WLA" => Query::Wla {
            v: num(line, a, "vertex")?,
            k: num(line, b, "k")?,
        },
        "LCA" => Query::Lca {
            u: num(line, a, "vertex")?,
            v: num(line, b, "vertex")?,
        },
        _ => Query::Bvq {
            u: num(line, a, "vertex")?,
            v: num(line, b, "vertex")?,
        },
    })
}

pub fn parse(text: &str) -> Result<Trace, ParseError> {
    let mut trace = Trace::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((ln, raw)) = lines.next() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let head = toks.next().expect("non-empty line");
        if let Some(key) = head.strip_prefix('@') {
            let m = &mut trace.meta;
            match key {
                "delta" => m.delta = Some(num(ln, toks.next(), "delta")?),
                "seed" => m.seed = Some(num(ln, toks.next(), "seed")?),
                "root" => m.root_weight = Some(num(ln, toks.next(), "root weight")?),
                "budget" => m.budget = Some(num(ln, toks.next(), "budget")?),
                "rate" => m.rate = Some(num(ln, toks.next(), "rate")?),
                "weights" => {
                    let lo = num(ln, toks.next(), "weight")?;
                    let hi = num(ln, toks.next(), "weight")?;
                    if lo == 0 || lo > hi {
                        return Err(err(ln, "weights need 1 <= lo <= hi"));
                    }
                    m.weights = Some((lo, hi));
                }
                "adversary" => {
                    let t = toks.next().ok_or_else(|| err(ln, "missing adversary"))?;
                    m.adversary = Some(t.parse().map_err(|e: String| err(ln, e))?);
                }
                "profile" => {
                    m.profile = Some(match toks.next() {
                        Some("wide") => Profile::Wide,
                        Some("packed") => Profile::Packed,
                        other => return Err(err(ln, format!("bad profile {other:?}"))),
                    })
                }
                _ => return Err(err(ln, format!("unknown directive @{key}"))),
            }
            if toks.next().is_some() {
                return Err(err(ln, "trailing tokens"));
            }
            continue;
        }
        let d = match head {
            "ADDLEAF" => Directive::AddLeaf {
                parent: num(ln, toks.next(), "parent")?,
                weight: num(ln, toks.next(), "weight")?,
            },
            "LA" | "WLA" | "LCA" | "BVQ" => {
                Directive::Query(query(ln, head, toks.next(), toks.next())?)
            }
            "CHECKPOINT" => Directive::Checkpoint,
            "CORRUPT" => {
                let vertex = num(ln, toks.next(), "vertex")?;
                let patch = match toks.next() {
                    Some("FIELD") => {
                        let spec = toks.next().ok_or_else(|| err(ln, "missing field"))?;
                        Patch::Field(field(ln, spec)?)
                    }
                    Some("RAW") => {
                        let words = toks
                            .by_ref()
                            .map(|t| hex(ln, t))
                            .collect::<Result<Vec<_>, _>>()?;
                        if words.is_empty() {
                            return Err(err(ln, "RAW needs at least one word"));
                        }
                        Patch::Raw(words)
                    }
                    _ => return Err(err(ln, "expected FIELD or RAW")),
                };
                Directive::Corrupt { vertex, patch }
            }
            "BUILD_STATIC" => {
                let delta = num(ln, toks.next(), "delta")?;
                if delta == 0 {
                    return Err(err(ln, "delta must be at least 1"));
                }
                let mut parents = Vec::new();
                let mut closed = false;
                for (l2, raw2) in lines.by_ref() {
                    let b2 = raw2.split('#').next().unwrap_or("").trim();
                    if b2 == "END" {
                        closed = true;
                        break;
                    }
                    for t in b2.split_whitespace() {
                        parents.push(opt_num(l2, t, "parent")?);
                    }
                }
                if !closed {
                    return Err(err(ln, "BUILD_STATIC without END"));
                }
                Directive::BuildStatic { delta, parents }
            }
            _ => return Err(err(ln, format!("unknown directive `{head}`"))),
        };
        if toks.next().is_some() {
            return Err(err(ln, "trailing tokens"));
        }
        trace.directives.push((ln, d));
    }
    Ok(trace)
}

impl FromStr for Trace {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for FieldPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u64>| v.map_or("null".to_string(), |x| x.to_string());
        match *self {
            FieldPatch::P(p) => write!(f, "p={}", opt(p.map(|x| x as u64))),
            FieldPatch::Q(q) => write!(f, "q={}", opt(q.map(u64::from))),
            FieldPatch::Depth(d) => write!(f, "depth={d}"),
            FieldPatch::Weight(w) => write!(f, "weight={w}"),
            FieldPatch::Flag(FlagValue::Unspent) => f.write_str("flag=unspent"),
            FieldPatch::Flag(FlagValue::Spent) => f.write_str("flag=spent"),
            FieldPatch::Flag(FlagValue::Annotated { x, i }) => write!(f, "flag={x}:{i}"),
            FieldPatch::Cba(CbaValue::Unset) => f.write_str("cba=unset"),
            FieldPatch::Cba(CbaValue::Set(q)) => write!(f, "cba=set:{}", q.0),
            FieldPatch::Cba(CbaValue::Annotated { x, i }) => write!(f, "cba={x}:{i}"),
        }
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::AddLeaf { parent, weight } => write!(f, "ADDLEAF {parent} {weight}"),
            Directive::Query(q) => write!(f, "{q}"),
            Directive::Checkpoint => f.write_str("CHECKPOINT"),
            Directive::Corrupt { vertex, patch } => match patch {
                Patch::Field(p) => write!(f, "CORRUPT {vertex} FIELD {p}"),
                Patch::Raw(ws) => {
                    write!(f, "CORRUPT {vertex} RAW")?;
                    for w in ws {
                        write!(f, " {w:#x}")?;
                    }
                    Ok(())
                }
            },
            Directive::BuildStatic { delta, parents } => {
                writeln!(f, "BUILD_STATIC {delta}")?;
                for chunk in parents.chunks(16) {
                    let toks: Vec<String> = chunk
                        .iter()
                        .map(|p| p.map_or("-".to_string(), |x| x.to_string()))
                        .collect();
                    writeln!(f, "{}", toks.join(" "))?;
                }
                f.write_str("END")
            }
        }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.meta;
        if let Some(d) = m.delta {
            writeln!(f, "@delta {d}")?;
        }
        if let Some(s) = m.seed {
            writeln!(f, "@seed {s}")?;
        }
        if let Some((lo, hi)) = m.weights {
            writeln!(f, "@weights {lo} {hi}")?;
        }
        if let Some(w) = m.root_weight {
            writeln!(f, "@root {w}")?;
        }
        if let Some(a) = m.adversary {
            writeln!(f, "@adversary {a}")?;
        }
        if let Some(b) = m.budget {
            writeln!(f, "@budget {b}")?;
        }
        if let Some(r) = m.rate {
            writeln!(f, "@rate {r}")?;
        }
        if let Some(p) = m.profile {
            writeln!(
                f,
                "@profile {}",
                if p == Profile::Wide { "wide" } else { "packed" }
            )?;
        }
        for (_, d) in &self.directives {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# a small trace
@delta 2
@seed 9
@weights 1 8
@root 4
@adversary targeted-flags
ADDLEAF 0 3
ADDLEAF 1 4   # trailing comment
LA 2 1
WLA 2 5
LCA 1 2
BVQ 0 2
CORRUPT 1 FIELD flag=spent
CORRUPT 2 FIELD cba=set:4
CORRUPT 2 FIELD p=null
CORRUPT 1 RAW 0x0 ff
CHECKPOINT
BUILD_STATIC 3
- 0 1
2 3
END
LA 4 2
";

    #[test]
    fn parses_every_directive() {
        let t = parse(SAMPLE).unwrap();
        assert_eq!(t.meta.delta, Some(2));
        assert_eq!(t.meta.adversary, Some(AdversaryKind::TargetedFlags));
        assert_eq!(t.directives.len(), 13);
        assert_eq!(
            t.directives[0],
            (
                7,
                Directive::AddLeaf {
                    parent: 0,
                    weight: 3
                }
            )
        );
        assert_eq!(
            t.directives[9].1,
            Directive::Corrupt {
                vertex: 1,
                patch: Patch::Raw(vec![0, 0xff])
            }
        );
        assert_eq!(
            t.directives[11].1,
            Directive::BuildStatic {
                delta: 3,
                parents: vec![None, Some(0), Some(1), Some(2), Some(3)]
            }
        );
        assert_eq!(t.queries(), 5);
    }

    #[test]
    fn round_trips() {
        let t = parse(SAMPLE).unwrap();
        let again = parse(&t.to_string()).unwrap();
        let strip = |t: &Trace| {
            t.directives
                .iter()
                .map(|(_, d)| d.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&t), strip(&again));
        assert_eq!(t.meta, again.meta);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("@delta 2\nADDLEAF 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(parse("LA 1 x").unwrap_err().line, 1);
        assert_eq!(parse("\n\nFOO").unwrap_err().line, 3);
        assert_eq!(parse("BUILD_STATIC 2\n- 0\n").unwrap_err().line, 1);
        assert_eq!(parse("CORRUPT 1 FIELD color=red").unwrap_err().line, 1);
        assert_eq!(parse("LA 1 2 3").unwrap_err().line, 1);
    }
}
