//! Executes a trace and classifies every answer.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::faulty_ram::{Corruption, Counters, Region, Word, DEFAULT_SAFE_WORDS};
use crate::oracle::lemmas::{LemmaTally, Snapshot};
use crate::oracle::{OracleTree, Query, Verdict};
use crate::resilient_tree::{Profile, QueryOutcome, ResilientTree, TreeConfig, TreeError};
use crate::static_la::{StaticError, StaticTree, STATIC_WIDTH};
use crate::VertexId;

use super::trace::{Directive, Patch, Trace, TraceMeta};
use super::AdversaryKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub delta: usize,
    pub seed: u64,
    pub adversary: AdversaryKind,
    pub budget: usize,
    /// Per-access corruption probability for the random strategies.
    pub rate: f64,
    pub check_oracle: bool,
    pub safe_words: usize,
    pub profile: Profile,
    pub root_weight: u64,
    /// Lemma samples drawn at every checkpoint and at the end; 0 disables.
    pub lemma_samples: usize,
    /// Keep one access entry per operation in the report.
    pub record_ops: bool,
}

impl RunConfig {
    pub fn new(delta: usize) -> Self {
        Self {
            delta,
            seed: 0,
            adversary: AdversaryKind::None,
            budget: delta,
            rate: 0.01,
            check_oracle: true,
            safe_words: DEFAULT_SAFE_WORDS,
            profile: Profile::Wide,
            root_weight: 1,
            lemma_samples: 0,
            record_ops: false,
        }
    }

    /// Defaults taken from a trace header.
    pub fn from_meta(meta: &TraceMeta) -> Self {
        let delta = meta.delta.unwrap_or(1);
        let mut c = Self::new(delta);
        c.seed = meta.seed.unwrap_or(0);
        c.adversary = meta.adversary.unwrap_or_default();
        c.budget = meta.budget.unwrap_or(delta);
        c.rate = meta.rate.unwrap_or(c.rate);
        c.profile = meta.profile.unwrap_or_default();
        c.root_weight = meta.root_weight.unwrap_or(1);
        c
    }

    pub fn tree_config(&self) -> TreeConfig {
        let base = match self.profile {
            Profile::Wide => TreeConfig::with_delta(self.delta),
            Profile::Packed => TreeConfig::packed(self.delta),
        };
        TreeConfig {
            safe_words: self.safe_words,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.budget > self.delta {
            return Err(RunError::Config(format!(
                "budget {} exceeds delta {}",
                self.budget, self.delta
            )));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(RunError::Config("rate must lie in [0, 1]".into()));
        }
        self.tree_config()
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("line {line}: {source}")]
    Tree { line: usize, source: TreeError },
    #[error("line {line}: {source}")]
    Static { line: usize, source: StaticError },
}

#[derive(Clone, Debug, Serialize)]
pub struct OpAccess {
    pub line: usize,
    pub verb: &'static str,
    pub core: u64,
    pub forest: u64,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct VerbStats {
    pub count: u64,
    pub core_total: u64,
    pub core_max: u64,
    pub forest_total: u64,
    pub forest_max: u64,
}

impl VerbStats {
    fn add(&mut self, core: u64, forest: u64) {
        self.count += 1;
        self.core_total += core;
        self.core_max = self.core_max.max(core);
        self.forest_total += forest;
        self.forest_max = self.forest_max.max(forest);
    }

    pub fn core_mean(&self) -> f64 {
        self.core_total as f64 / self.count.max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct VerdictCounts {
    pub matched: u64,
    pub exempt_mismatch: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationEntry {
    pub line: usize,
    pub query: String,
    pub got: String,
    pub want: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub vertices: usize,
    pub black_count: usize,
    /// Black count after every insertion.
    pub black_trajectory: Vec<usize>,
    pub black_bound_violations: u64,
    pub verdicts: VerdictCounts,
    pub violations: Vec<ViolationEntry>,
    pub corruptions: Vec<Corruption>,
    pub corrupt_refused: u64,
    pub per_verb: BTreeMap<&'static str, VerbStats>,
    pub per_op: Vec<OpAccess>,
    pub safe_high_water: usize,
    pub forest_tables_ok: bool,
    pub exceptional_creations: usize,
    pub lca_fallbacks: u64,
    pub lca_literal_divergences: u64,
    pub lemmas: Option<LemmaTally>,
    /// One line per directive, as printed by the CLI.
    pub output: Vec<String>,
}

impl RunReport {
    pub fn clean(&self) -> bool {
        self.verdicts.violations == 0
            && self.black_bound_violations == 0
            && self.forest_tables_ok
            && self.lemmas.is_none_or(|l| l.failures() == 0)
    }
}

struct StaticRun {
    tree: StaticTree,
    parents: Vec<Option<VertexId>>,
    depth: Vec<usize>,
    corrupted: Vec<bool>,
}

impl StaticRun {
    fn sync(&mut self) {
        for c in self.tree.ram().adversary().log() {
            if c.region == Region::Records {
                let v = c.addr / STATIC_WIDTH;
                if v < self.corrupted.len() {
                    self.corrupted[v] = true;
                }
            }
        }
    }

    fn answer(&self, v: VertexId, k: usize) -> Option<VertexId> {
        if k > self.depth[v] {
            return None;
        }
        let mut cur = v;
        for _ in 0..k {
            cur = self.parents[cur]?;
        }
        Some(cur)
    }

    fn must_match(&self, v: VertexId, k: usize) -> bool {
        let mut cur = v;
        for i in 0..=k.min(self.depth[v]) {
            if self.corrupted[cur] {
                return false;
            }
            if i < k {
                match self.parents[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
        }
        true
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    tree: ResilientTree,
    oracle: OracleTree,
    stat: Option<StaticRun>,
    report: RunReport,
    lemma_rng: ChaCha8Rng,
}

fn delta_counters(before: &Counters, after: &Counters) -> (u64, u64) {
    let d = after.since(before);
    (d.core_words(), d.forest_words())
}

impl Runner<'_> {
    fn note(&mut self, line: usize, verb: &'static str, before: &Counters, after: &Counters) {
        let (core, forest) = delta_counters(before, after);
        self.report
            .per_verb
            .entry(verb)
            .or_default()
            .add(core, forest);
        if self.cfg.record_ops {
            self.report.per_op.push(OpAccess {
                line,
                verb,
                core,
                forest,
            });
        }
    }

    fn judge(
        &mut self,
        line: usize,
        q: &Query,
        got: &QueryOutcome,
        want: Option<VertexId>,
        must: bool,
    ) {
        let agrees = match want {
            Some(a) => *got == QueryOutcome::Answer(a),
            None => got.answer().is_none(),
        };
        let verdict = if agrees {
            Verdict::Match
        } else if must {
            Verdict::Violation
        } else {
            Verdict::ExemptMismatch
        };
        let v = &mut self.report.verdicts;
        match verdict {
            Verdict::Match => v.matched += 1,
            Verdict::ExemptMismatch => v.exempt_mismatch += 1,
            Verdict::Violation => {
                v.violations += 1;
                self.report.violations.push(ViolationEntry {
                    line,
                    query: q.to_string(),
                    got: got.to_string(),
                    want: want.map_or("NONE".into(), |a| a.to_string()),
                });
            }
        }
    }

    fn query(&mut self, line: usize, q: &Query) {
        if let (Some(st), Query::La { v, k }) = (self.stat.as_mut(), q) {
            let (v, k) = (*v, *k);
            let before = st.tree.ram().counters();
            let got = st.tree.la(v, k);
            let after = st.tree.ram().counters();
            st.sync();
            let valid = v < st.parents.len();
            let (want, must) = if valid {
                (st.answer(v, k), st.must_match(v, k))
            } else {
                (None, false)
            };
            self.report.output.push(got.to_string());
            self.note(line, "LA_STATIC", &before, &after);
            if self.cfg.check_oracle && valid {
                self.judge(line, q, &got, want, must);
            }
            return;
        }
        let before = self.tree.ram().counters();
        let got = q.run(&mut self.tree);
        let after = self.tree.ram().counters();
        self.oracle.sync(self.tree.ram().adversary().log());
        self.report.output.push(got.to_string());
        self.note(line, q.verb(), &before, &after);
        if self.cfg.check_oracle && self.oracle.valid(q) {
            let want = self.oracle.answer(q);
            let must = self.oracle.must_match(q);
            self.judge(line, q, &got, want, must);
        }
    }

    fn corrupt(&mut self, vertex: VertexId, patch: &Patch) -> bool {
        if let Some(st) = self.stat.as_mut() {
            if vertex >= st.parents.len() {
                return false;
            }
            let words: Vec<Word> = match patch {
                Patch::Raw(w) if w.len() <= STATIC_WIDTH => w.clone(),
                Patch::Field(super::trace::FieldPatch::P(p)) => {
                    vec![p.map_or(Word::MAX, |x| x as Word)]
                }
                Patch::Field(super::trace::FieldPatch::Q(q)) => {
                    let cur = st.tree.ram().peek(Region::Records, vertex * STATIC_WIDTH);
                    vec![cur.unwrap_or(Word::MAX), q.map_or(Word::MAX, Word::from)]
                }
                _ => return false,
            };
            let ok = st
                .tree
                .ram_mut()
                .corrupt_unit(Region::Records, vertex, &words);
            st.sync();
            return ok;
        }
        if vertex >= self.tree.len() {
            return false;
        }
        let profile = self.tree.config().profile;
        let words = match patch {
            Patch::Field(f) => {
                let mut rec = self.tree.peek_record(vertex).expect("vertex in range");
                f.apply(&mut rec);
                match profile.encode(&rec) {
                    Ok(w) => w,
                    Err(_) => return false,
                }
            }
            Patch::Raw(w) if w.len() <= profile.width() => w.clone(),
            Patch::Raw(_) => return false,
        };
        let ok = self
            .tree
            .ram_mut()
            .corrupt_unit(Region::Records, vertex, &words);
        self.oracle.sync(self.tree.ram().adversary().log());
        ok
    }

    fn lemmas(&mut self) {
        if self.cfg.lemma_samples == 0 {
            return;
        }
        let snap = Snapshot::new(&self.tree, &self.oracle);
        let t = snap.sample(&mut self.lemma_rng, self.cfg.lemma_samples);
        self.report
            .lemmas
            .get_or_insert_with(LemmaTally::default)
            .merge(&t);
    }

    fn check_bound(&mut self) {
        let b = self.tree.black_count();
        if b * self.cfg.delta > self.tree.len() + self.cfg.delta {
            self.report.black_bound_violations += 1;
        }
    }

    fn directive(&mut self, line: usize, d: &Directive) -> Result<(), RunError> {
        match d {
            Directive::AddLeaf { parent, weight } => {
                let before = self.tree.ram().counters();
                let id = self
                    .tree
                    .add_leaf(*parent, *weight)
                    .map_err(|source| RunError::Tree { line, source })?;
                let after = self.tree.ram().counters();
                let mirror = self.oracle.add_leaf(*parent, *weight);
                debug_assert_eq!(id, mirror);
                self.oracle.sync(self.tree.ram().adversary().log());
                self.note(line, "ADDLEAF", &before, &after);
                self.report.black_trajectory.push(self.tree.black_count());
                self.report.output.push(id.to_string());
            }
            Directive::Query(q) => self.query(line, q),
            Directive::Corrupt { vertex, patch } => {
                let ok = self.corrupt(*vertex, patch);
                if !ok {
                    self.report.corrupt_refused += 1;
                }
                self.report.output.push(format!(
                    "CORRUPT {vertex} {}",
                    if ok { "applied" } else { "refused" }
                ));
            }
            Directive::Checkpoint => {
                self.lemmas();
                let c = self.tree.ram().counters();
                let (core, forest) = delta_counters(&Counters::default(), &c);
                self.report.output.push(format!(
                    "CHECKPOINT size={} blacks={} core_accesses={} forest_accesses={} corruptions={}",
                    self.tree.len(),
                    self.tree.black_count(),
                    core,
                    forest,
                    self.tree.ram().adversary().log().len()
                ));
            }
            Directive::BuildStatic { delta, parents } => {
                let adv = self.cfg.adversary.build(
                    self.cfg.budget.min(*delta),
                    self.cfg.rate,
                    self.cfg.seed,
                    Profile::Wide,
                    *delta,
                );
                let tree = StaticTree::build(parents, *delta, adv)
                    .map_err(|source| RunError::Static { line, source })?;
                let (_, depth) = crate::static_la::depths(parents)
                    .map_err(|source| RunError::Static { line, source })?;
                self.report.output.push(format!(
                    "STATIC size={} blacks={}",
                    parents.len(),
                    tree.coloring().black_count()
                ));
                self.stat = Some(StaticRun {
                    tree,
                    parents: parents.clone(),
                    depth,
                    corrupted: vec![false; parents.len()],
                });
            }
        }
        self.check_bound();
        Ok(())
    }
}

pub fn run_trace(trace: &Trace, cfg: &RunConfig) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let tcfg = cfg.tree_config();
    let adv = cfg
        .adversary
        .build(cfg.budget, cfg.rate, cfg.seed, cfg.profile, cfg.delta);
    let tree = ResilientTree::new(tcfg, adv, cfg.root_weight)
        .map_err(|source| RunError::Tree { line: 0, source })?;
    let mut r = Runner {
        cfg,
        oracle: OracleTree::new(tcfg, cfg.root_weight),
        tree,
        stat: None,
        report: RunReport {
            config: *cfg,
            vertices: 1,
            black_count: 0,
            black_trajectory: Vec::new(),
            black_bound_violations: 0,
            verdicts: VerdictCounts::default(),
            violations: Vec::new(),
            corruptions: Vec::new(),
            corrupt_refused: 0,
            per_verb: BTreeMap::new(),
            per_op: Vec::new(),
            safe_high_water: 0,
            forest_tables_ok: true,
            exceptional_creations: 0,
            lca_fallbacks: 0,
            lca_literal_divergences: 0,
            lemmas: None,
            output: Vec::new(),
        },
        lemma_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
    };
    for (line, d) in &trace.directives {
        r.directive(*line, d)?;
    }
    r.lemmas();
    let mut rep = r.report;
    let t = &r.tree;
    rep.vertices = t.len();
    rep.black_count = t.black_count();
    rep.corruptions = t.ram().adversary().log().to_vec();
    if let Some(st) = &r.stat {
        rep.corruptions
            .extend(st.tree.ram().adversary().log().iter().cloned());
    }
    rep.safe_high_water = t.ram().safe().high_water_mark();
    if let Some(st) = &r.stat {
        rep.safe_high_water = rep
            .safe_high_water
            .max(st.tree.ram().safe().high_water_mark());
    }
    rep.forest_tables_ok = t.forest().verify_tables(t.ram()).is_ok();
    rep.exceptional_creations = t
        .journal()
        .creations
        .iter()
        .filter(|c| c.exceptional)
        .count();
    rep.lca_fallbacks = t.journal().lca_fallbacks;
    rep.lca_literal_divergences = t.journal().lca_literal_divergences;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate, parse, GenKind, GenParams};

    #[test]
    fn one_leaf_one_query() {
        let t = parse("@delta 1\nADDLEAF 0 1\nLA 1 1\n").unwrap();
        let r = run_trace(&t, &RunConfig::from_meta(&t.meta)).unwrap();
        assert_eq!(r.output, vec!["1", "0"]);
        assert_eq!(r.verdicts.violations, 0);
        assert_eq!(r.verdicts.matched, 1);
        assert!(r.clean());
    }

    #[test]
    fn scripted_fault_is_never_a_violation() {
        let text = "@delta 2\n@adversary scripted\nADDLEAF 0 1\nADDLEAF 1 1\nADDLEAF 2 1\n\
                    CORRUPT 2 FIELD p=0\nLA 3 2\nLA 3 1\nLCA 3 1\n";
        let t = parse(text).unwrap();
        let r = run_trace(&t, &RunConfig::from_meta(&t.meta)).unwrap();
        assert_eq!(r.output[3], "CORRUPT 2 applied");
        assert_eq!(r.output[4], "0");
        assert_eq!(r.output[5], "2");
        assert_eq!(r.verdicts.violations, 0);
        assert_eq!(r.verdicts.exempt_mismatch, 2);
        assert_eq!(r.corruptions.len(), 1);
    }

    #[test]
    fn none_adversary_refuses_corruptions() {
        let t = parse("ADDLEAF 0 1\nCORRUPT 1 FIELD flag=spent\n").unwrap();
        let r = run_trace(&t, &RunConfig::from_meta(&t.meta)).unwrap();
        assert_eq!(r.corrupt_refused, 1);
    }

    #[test]
    fn chain_black_trajectory() {
        let mut p = GenParams::new(GenKind::Chain, 64, 4, 0);
        p.query_density = 0.0;
        let t = generate(&p);
        let r = run_trace(&t, &RunConfig::from_meta(&t.meta)).unwrap();
        // depths 0, 4, .., 56; depth 60 still lacks a descendant at distance 4
        assert_eq!(*r.black_trajectory.last().unwrap(), 15);
        assert!(r.black_trajectory.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn figure2_trace() {
        let t = generate(&GenParams::new(GenKind::Figure2, 0, 3, 0));
        let r = run_trace(&t, &RunConfig::from_meta(&t.meta)).unwrap();
        assert_eq!(r.output, vec!["STATIC size=14 blacks=3", "1"]);
        assert_eq!(r.verdicts.matched, 1);
    }

    #[test]
    fn budget_above_delta_rejected() {
        let mut c = RunConfig::new(2);
        c.budget = 3;
        assert!(matches!(
            run_trace(&Trace::default(), &c),
            Err(RunError::Config(_))
        ));
    }

    #[test]
    fn replay_is_deterministic() {
        let t = generate(&GenParams::new(GenKind::RandomAttach, 300, 3, 5));
        let mut c = RunConfig::from_meta(&t.meta);
        c.adversary = AdversaryKind::Random;
        c.rate = 0.001;
        let a = serde_json::to_string(&run_trace(&t, &c).unwrap()).unwrap();
        let b = serde_json::to_string(&run_trace(&t, &c).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
