//! Solutions of an ER specification and the decision problems over them.
//!
//! States are pairs of partitions. Rule bodies never contain inequalities,
//! so a merge that is applicable in a state stays applicable in every
//! larger state. Hard closure therefore fires all hard answers of a round
//! at once, and enumeration only needs to branch on soft merges.

use std::cell::Cell as Counter;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::eval::{CompiledQuery, EvalContext, EvalError};
use crate::model::{
    induce_unchecked, Cell, CellPartition, ConstId, Constant, Database, ExtendedDatabase,
    ObjectPartition,
};
use crate::sim::SimilarityOracle;
use crate::syntax::{Query, Specification, Strength, ValidationError};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("state budget of {limit} exceeded after exploring {explored} states")]
    Budget { limit: u64, explored: u64 },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Three-valued outcome of the possible/certain problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Yes,
    No,
    NoSolution,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::NoSolution => "no-solution",
        })
    }
}

/// `⟨E, V⟩`. Partitions are stored canonically, so derived equality,
/// ordering and hashing act on the relations themselves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolutionState {
    pub e: ObjectPartition,
    pub v: CellPartition,
}

impl SolutionState {
    pub fn trivial(db: &Database) -> Self {
        SolutionState {
            e: ObjectPartition::trivial(db),
            v: CellPartition::trivial(db),
        }
    }

    /// `E ∪ V ⊆ E' ∪ V'`.
    pub fn is_subset_of(&self, other: &SolutionState) -> bool {
        self.e.0.is_subset_of(&other.e.0) && self.v.0.is_subset_of(&other.v.0)
    }

    pub fn contains(&self, m: Merge) -> bool {
        match m {
            Merge::Objects(a, b) => self.e.0.same(a, b),
            Merge::Cells(a, b) => self.v.0.same(a, b),
        }
    }

    fn apply(&mut self, m: Merge) -> bool {
        match m {
            Merge::Objects(a, b) => self.e.0.union(a, b),
            Merge::Cells(a, b) => self.v.0.union(a, b),
        }
    }

    pub fn induce<'a>(&self, db: &'a Database) -> ExtendedDatabase<'a> {
        induce_unchecked(db, &self.e.0, &self.v.0)
    }
}

/// A pair of object indices or cell indices, smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Merge {
    Objects(usize, usize),
    Cells(usize, usize),
}

impl Merge {
    fn objects(a: usize, b: usize) -> Self {
        Merge::Objects(a.min(b), a.max(b))
    }

    fn cells(a: usize, b: usize) -> Self {
        Merge::Cells(a.min(b), a.max(b))
    }

    pub fn describe(&self, db: &Database) -> String {
        match *self {
            Merge::Objects(a, b) => format!(
                "obj {} {}",
                db.constant(db.object_id(a)).lexeme,
                db.constant(db.object_id(b)).lexeme
            ),
            Merge::Cells(a, b) => format!("cell {} {}", db.cell(a), db.cell(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    Object(usize),
    Value(usize),
}

/// One rule firing that would add a new pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergeAction {
    pub rule: RuleId,
    pub merge: Merge,
}

/// A pair named by constants or cells, as supplied by callers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pair {
    Objects(Constant, Constant),
    Cells(Cell, Cell),
}

struct CompiledRule {
    strength: Strength,
    query: CompiledQuery,
    /// Designated positions for value rules.
    positions: Option<(usize, usize)>,
}

/// A database, a specification and a similarity oracle, with all rules
/// and constraints compiled once.
pub struct Engine<'a> {
    db: &'a Database,
    spec: &'a Specification,
    ctx: EvalContext<'a>,
    object_rules: Vec<CompiledRule>,
    value_rules: Vec<CompiledRule>,
    constraints: Vec<CompiledQuery>,
    budget: u64,
    explored: Counter<u64>,
}

impl<'a> Engine<'a> {
    pub fn new(
        db: &'a Database,
        spec: &'a Specification,
        oracle: &'a SimilarityOracle,
    ) -> Result<Self, EngineError> {
        spec.validate(db.schema())?;
        let mut ctx = EvalContext::new(db, oracle);
        let mut object_rules = Vec::new();
        for r in &spec.object_rules {
            object_rules.push(CompiledRule {
                strength: r.strength,
                query: ctx.compile(&r.body)?,
                positions: None,
            });
        }
        let mut value_rules = Vec::new();
        for r in &spec.value_rules {
            value_rules.push(CompiledRule {
                strength: r.strength,
                query: ctx.compile(&r.body)?,
                positions: Some((r.left_pos, r.right_pos)),
            });
        }
        let mut constraints = Vec::new();
        for d in &spec.constraints {
            constraints.push(ctx.compile(&d.body)?);
        }
        Ok(Engine {
            db,
            spec,
            ctx,
            object_rules,
            value_rules,
            constraints,
            budget: DEFAULT_BUDGET,
            explored: Counter::new(0),
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn database(&self) -> &'a Database {
        self.db
    }

    pub fn spec(&self) -> &'a Specification {
        self.spec
    }

    /// States visited by searches so far.
    pub fn states_explored(&self) -> u64 {
        self.explored.get()
    }

    pub fn trivial_state(&self) -> SolutionState {
        SolutionState::trivial(self.db)
    }

    pub fn check_state(&self, s: &SolutionState) -> Result<(), EngineError> {
        if s.e.0.len() != self.db.num_objects() || s.v.0.len() != self.db.num_cells() {
            return Err(EngineError::Domain(
                "partition is not over the objects and cells of the database".into(),
            ));
        }
        Ok(())
    }

    fn merges_of(&self, rule: &CompiledRule, x: &ExtendedDatabase) -> Vec<Merge> {
        let answers = rule.query.answers(&self.ctx, x);
        answers
            .into_iter()
            .filter_map(|t| match rule.positions {
                None => {
                    let a = self.db.object_index(t[0])?;
                    let b = self.db.object_index(t[1])?;
                    (a != b).then(|| Merge::objects(a, b))
                }
                Some((i, j)) => {
                    let a = self.cell_of(t[0], i)?;
                    let b = self.cell_of(t[1], j)?;
                    (a != b).then(|| Merge::cells(a, b))
                }
            })
            .collect()
    }

    fn cell_of(&self, tid: ConstId, pos: usize) -> Option<usize> {
        let fid = self.db.fact_by_tid(&self.ctx.constant(tid).lexeme)?;
        self.db.cell_index(fid, pos)
    }

    fn rules(&self) -> impl Iterator<Item = (RuleId, &CompiledRule)> {
        let o = self
            .object_rules
            .iter()
            .enumerate()
            .map(|(i, r)| (RuleId::Object(i), r));
        let v = self
            .value_rules
            .iter()
            .enumerate()
            .map(|(i, r)| (RuleId::Value(i), r));
        o.chain(v)
    }

    /// Firings that add a pair not yet in `s`, ordered by rule then pair.
    pub fn applicable_merges(&self, s: &SolutionState) -> Vec<MergeAction> {
        let x = s.induce(self.db);
        self.applicable_in(s, &x, |_| true)
    }

    fn applicable_in(
        &self,
        s: &SolutionState,
        x: &ExtendedDatabase,
        keep: impl Fn(Strength) -> bool,
    ) -> Vec<MergeAction> {
        let mut out = BTreeSet::new();
        for (id, rule) in self.rules() {
            if !keep(rule.strength) {
                continue;
            }
            for m in self.merges_of(rule, x) {
                if !s.contains(m) {
                    out.insert(MergeAction { rule: id, merge: m });
                }
            }
        }
        out.into_iter().collect()
    }

    /// Least extension of `s` closed under hard-rule firings.
    pub fn hard_close(&self, s: &SolutionState) -> SolutionState {
        let mut cur = s.clone();
        loop {
            let x = cur.induce(self.db);
            let fired = self.applicable_in(&cur, &x, |st| st == Strength::Hard);
            if fired.is_empty() {
                return cur;
            }
            for a in fired {
                cur.apply(a.merge);
            }
        }
    }

    /// Every hard-rule answer is already merged in `s`.
    pub fn satisfies_hard_rules(&self, s: &SolutionState) -> bool {
        let x = s.induce(self.db);
        self.applicable_in(s, &x, |st| st == Strength::Hard).is_empty()
    }

    /// No constraint body holds in `D_{E,V}`.
    pub fn satisfies_constraints(&self, s: &SolutionState) -> bool {
        let x = s.induce(self.db);
        self.constraints.iter().all(|c| !c.holds(&self.ctx, &x))
    }

    fn violates_inequality_free_constraint(&self, x: &ExtendedDatabase) -> bool {
        self.constraints
            .iter()
            .any(|c| !c.has_inequalities() && c.holds(&self.ctx, x))
    }

    /// `s` is reachable from the trivial state by rule applications.
    /// Replays firings that stay inside `s`, each evaluated over the state
    /// reached so far.
    pub fn is_candidate(&self, s: &SolutionState) -> Result<bool, EngineError> {
        self.check_state(s)?;
        let mut cur = self.trivial_state();
        loop {
            let x = cur.induce(self.db);
            let inside: Vec<MergeAction> = self
                .applicable_in(&cur, &x, |_| true)
                .into_iter()
                .filter(|a| s.contains(a.merge))
                .collect();
            if inside.is_empty() {
                return Ok(cur == *s);
            }
            for a in inside {
                cur.apply(a.merge);
            }
        }
    }

    /// Rec: `s` is a solution.
    pub fn rec_check(&self, s: &SolutionState) -> Result<bool, EngineError> {
        Ok(self.is_candidate(s)?
            && self.satisfies_hard_rules(s)
            && self.satisfies_constraints(s))
    }

    fn tick(&self, local: &mut u64) -> Result<(), EngineError> {
        *local += 1;
        self.explored.set(self.explored.get() + 1);
        if *local > self.budget {
            return Err(EngineError::Budget {
                limit: self.budget,
                explored: *local,
            });
        }
        Ok(())
    }

    /// Depth-first search over hard-closed candidates. `visit` sees every
    /// solution and returns true to stop early.
    fn search(
        &self,
        visit: &mut dyn FnMut(&SolutionState) -> bool,
    ) -> Result<(), EngineError> {
        let mut local = 0;
        let start = self.hard_close(&self.trivial_state());
        let mut seen: HashSet<SolutionState> = HashSet::from([start.clone()]);
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            self.tick(&mut local)?;
            let x = s.induce(self.db);
            // Such a violation persists in every extension.
            if self.violates_inequality_free_constraint(&x) {
                continue;
            }
            if self.constraints.iter().all(|c| !c.holds(&self.ctx, &x)) && visit(&s) {
                return Ok(());
            }
            let mut branched = HashSet::new();
            let soft = self.applicable_in(&s, &x, |st| st == Strength::Soft);
            for a in soft.into_iter().rev() {
                let key = match a.merge {
                    Merge::Objects(p, q) => Merge::objects(s.e.0.find(p), s.e.0.find(q)),
                    Merge::Cells(p, q) => Merge::cells(s.v.0.find(p), s.v.0.find(q)),
                };
                if !branched.insert(key) {
                    continue;
                }
                let mut t = s.clone();
                t.apply(a.merge);
                let t = self.hard_close(&t);
                if seen.insert(t.clone()) {
                    stack.push(t);
                }
            }
        }
        Ok(())
    }

    /// All solutions, in canonical order.
    pub fn enumerate_solutions(&self) -> Result<Vec<SolutionState>, EngineError> {
        let mut out = Vec::new();
        self.search(&mut |s| {
            out.push(s.clone());
            false
        })?;
        out.sort();
        Ok(out)
    }

    pub fn enumerate_max_solutions(&self) -> Result<Vec<SolutionState>, EngineError> {
        Ok(maximal(&self.enumerate_solutions()?))
    }

    /// Existence, by the polynomial route when constraints have no
    /// inequalities and by search otherwise.
    pub fn existence(&self) -> Result<bool, EngineError> {
        match self.existence_via_closure() {
            Some(b) => Ok(b),
            None => self.existence_via_search(),
        }
    }

    /// Hard-close the trivial state and test the constraints. `None` when
    /// some constraint has an inequality, where this is not decisive.
    pub fn existence_via_closure(&self) -> Option<bool> {
        if !self.spec.inequality_free() {
            return None;
        }
        let s = self.hard_close(&self.trivial_state());
        Some(self.satisfies_constraints(&s))
    }

    pub fn existence_via_search(&self) -> Result<bool, EngineError> {
        let mut found = false;
        self.search(&mut |_| {
            found = true;
            true
        })?;
        Ok(found)
    }

    /// MaxRec, choosing the procedure by the shape of the constraints.
    pub fn max_rec_check(&self, s: &SolutionState) -> Result<bool, EngineError> {
        match self.max_rec_check_via_extensions(s)? {
            Some(b) => Ok(b),
            None => self.max_rec_check_via_enumeration(s),
        }
    }

    /// For inequality-free constraints: `s` is maximal iff no single soft
    /// firing, followed by hard closure, yields a consistent state.
    /// `None` when some constraint has an inequality.
    pub fn max_rec_check_via_extensions(
        &self,
        s: &SolutionState,
    ) -> Result<Option<bool>, EngineError> {
        if !self.spec.inequality_free() {
            return Ok(None);
        }
        if !self.rec_check(s)? {
            return Ok(Some(false));
        }
        let x = s.induce(self.db);
        for a in self.applicable_in(s, &x, |st| st == Strength::Soft) {
            let mut t = s.clone();
            t.apply(a.merge);
            if self.satisfies_constraints(&self.hard_close(&t)) {
                return Ok(Some(false));
            }
        }
        Ok(Some(true))
    }

    pub fn max_rec_check_via_enumeration(&self, s: &SolutionState) -> Result<bool, EngineError> {
        if !self.rec_check(s)? {
            return Ok(false);
        }
        Ok(self.enumerate_max_solutions()?.contains(s))
    }

    pub fn resolve_pair(&self, p: &Pair) -> Result<Merge, EngineError> {
        match p {
            Pair::Objects(a, b) => {
                let idx = |c: &Constant| {
                    self.db
                        .object_index_of(c)
                        .ok_or_else(|| EngineError::Domain(format!("{c} is not an object of the database")))
                };
                Ok(Merge::objects(idx(a)?, idx(b)?))
            }
            Pair::Cells(a, b) => {
                let idx = |c: &Cell| {
                    self.db
                        .cell_index_of(c)
                        .ok_or_else(|| EngineError::Domain(format!("{c} is not a value cell of the database")))
                };
                Ok(Merge::cells(idx(a)?, idx(b)?))
            }
        }
    }

    /// PossMerge: some solution contains the pair.
    pub fn poss_merge(&self, p: &Pair) -> Result<Verdict, EngineError> {
        let m = self.resolve_pair(p)?;
        let sols = self.enumerate_solutions()?;
        if sols.is_empty() {
            return Ok(Verdict::NoSolution);
        }
        Ok(Verdict::from_bool(sols.iter().any(|s| s.contains(m))))
    }

    /// CertMerge: every maximal solution contains the pair.
    pub fn cert_merge(&self, p: &Pair) -> Result<Verdict, EngineError> {
        let m = self.resolve_pair(p)?;
        let max = self.enumerate_max_solutions()?;
        if max.is_empty() {
            return Ok(Verdict::NoSolution);
        }
        Ok(Verdict::from_bool(max.iter().all(|s| s.contains(m))))
    }

    /// Compile `q[c̄]` for repeated Boolean tests.
    fn instance(
        &self,
        q: &Query,
        tuple: &[Constant],
    ) -> Result<(EvalContext<'a>, CompiledQuery), EngineError> {
        if q.has_inequalities() {
            return Err(EngineError::Invalid(ValidationError::new(
                crate::syntax::Code::InequalityInRule,
                "possible and certain answers are defined for queries without inequalities",
            )));
        }
        q.validate(self.db.schema())?;
        if tuple.len() != q.free.len() {
            return Err(EngineError::Domain(format!(
                "query has {} answer variables, tuple has {} constants",
                q.free.len(),
                tuple.len()
            )));
        }
        let dom = self.db.dom();
        for c in tuple {
            if !dom.contains(c) {
                return Err(EngineError::Domain(format!("{c} does not occur in the database")));
            }
        }
        let mut ctx = self.ctx.clone();
        let sub = q.substitute(tuple);
        sub.validate(self.db.schema())?;
        let compiled = ctx.compile(&sub)?;
        Ok((ctx, compiled))
    }

    fn answer_in(&self, inst: &(EvalContext, CompiledQuery), s: &SolutionState) -> bool {
        inst.1.holds(&inst.0, &s.induce(self.db))
    }

    /// PossAns over all solutions.
    pub fn poss_ans(&self, q: &Query, tuple: &[Constant]) -> Result<Verdict, EngineError> {
        let c = self.instance(q, tuple)?;
        let sols = self.enumerate_solutions()?;
        if sols.is_empty() {
            return Ok(Verdict::NoSolution);
        }
        Ok(Verdict::from_bool(sols.iter().any(|s| self.answer_in(&c, s))))
    }

    /// PossAns restricted to maximal solutions.
    pub fn poss_ans_maximal(&self, q: &Query, tuple: &[Constant]) -> Result<Verdict, EngineError> {
        let c = self.instance(q, tuple)?;
        let max = self.enumerate_max_solutions()?;
        if max.is_empty() {
            return Ok(Verdict::NoSolution);
        }
        Ok(Verdict::from_bool(max.iter().any(|s| self.answer_in(&c, s))))
    }

    /// CertAns: the tuple is an answer in every maximal solution.
    pub fn cert_ans(&self, q: &Query, tuple: &[Constant]) -> Result<Verdict, EngineError> {
        let c = self.instance(q, tuple)?;
        let max = self.enumerate_max_solutions()?;
        if max.is_empty() {
            return Ok(Verdict::NoSolution);
        }
        Ok(Verdict::from_bool(max.iter().all(|s| self.answer_in(&c, s))))
    }
}

/// The ⊆-maximal members of `states`, in the input order.
pub fn maximal(states: &[SolutionState]) -> Vec<SolutionState> {
    states
        .iter()
        .filter(|s| !states.iter().any(|t| t != *s && s.is_subset_of(t)))
        .cloned()
        .collect()
}
