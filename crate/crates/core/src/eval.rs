//! Query evaluation over induced databases.
//!
//! Each relational atom is mapped onto one extended fact; the image of a
//! variable is the intersection of the argument sets at all of its
//! occurrences and must stay non-empty. Inequalities require disjoint images
//! and a similarity atom needs one similar pair across the two images.
//!
//! Evaluation is a backtracking join over per-atom fact choices. Images are
//! intersected eagerly so dead branches are cut at the first empty image.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    CellPartition, ConstId, ConstSet, Constant, Database, ExtendedDatabase, Kind, ModelError,
    ObjectPartition, RelId,
};
use crate::sim::SimilarityOracle;
use crate::syntax::{
    DenialConstraint, ObjectRule, Query, Term, ValidationError, ValueRule, Var,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("malformed query: {0}")]
    Malformed(#[from] ValidationError),
    #[error("expected a Boolean query")]
    NotBoolean,
    #[error("expected a query with answer variables")]
    NoAnswerVariables,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Constant table and similarity index shared by all queries compiled
/// against one database.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    db: &'a Database,
    oracle: &'a SimilarityOracle,
    extra: Vec<Constant>,
    extra_index: HashMap<Constant, ConstId>,
    sim: HashSet<(ConstId, ConstId)>,
}

impl<'a> EvalContext<'a> {
    pub fn new(db: &'a Database, oracle: &'a SimilarityOracle) -> Self {
        let mut ctx = EvalContext {
            db,
            oracle,
            extra: Vec::new(),
            extra_index: HashMap::new(),
            sim: HashSet::new(),
        };
        let values: Vec<(ConstId, &Constant)> = db
            .symbols()
            .iter()
            .filter(|(_, c)| c.kind == Kind::Val)
            .collect();
        if oracle.metric().is_none() {
            for (a, b) in oracle.pairs() {
                let ia = db.symbols().lookup(&Constant::val(a));
                let ib = db.symbols().lookup(&Constant::val(b));
                if let (Some(ia), Some(ib)) = (ia, ib) {
                    ctx.sim.insert((ia, ib));
                    ctx.sim.insert((ib, ia));
                }
            }
        } else {
            for (i, (ia, a)) in values.iter().enumerate() {
                for (ib, b) in &values[i + 1..] {
                    if oracle.sim(a, b) {
                        ctx.sim.insert((*ia, *ib));
                        ctx.sim.insert((*ib, *ia));
                    }
                }
            }
        }
        ctx
    }

    pub fn database(&self) -> &'a Database {
        self.db
    }

    pub fn oracle(&self) -> &'a SimilarityOracle {
        self.oracle
    }

    pub fn constant(&self, id: ConstId) -> &Constant {
        let n = self.db.symbols().len();
        let i = id.0 as usize;
        if i < n {
            self.db.constant(id)
        } else {
            &self.extra[i - n]
        }
    }

    fn intern(&mut self, c: &Constant) -> ConstId {
        if let Some(id) = self.db.symbols().lookup(c) {
            return id;
        }
        if let Some(id) = self.extra_index.get(c) {
            return *id;
        }
        let id = ConstId((self.db.symbols().len() + self.extra.len()) as u32);
        if c.kind == Kind::Val {
            let others: Vec<(ConstId, Constant)> = self
                .db
                .symbols()
                .iter()
                .map(|(i, k)| (i, k.clone()))
                .chain(self.extra.iter().cloned().enumerate().map(|(j, k)| {
                    (ConstId((self.db.symbols().len() + j) as u32), k)
                }))
                .filter(|(_, k)| k.kind == Kind::Val)
                .collect();
            for (other, k) in others {
                if self.oracle.sim(c, &k) {
                    self.sim.insert((id, other));
                    self.sim.insert((other, id));
                }
            }
        }
        self.extra.push(c.clone());
        self.extra_index.insert(c.clone(), id);
        id
    }

    /// Look up an already interned constant.
    pub fn lookup(&self, c: &Constant) -> Option<ConstId> {
        self.db
            .symbols()
            .lookup(c)
            .or_else(|| self.extra_index.get(c).copied())
    }

    pub fn similar(&self, a: ConstId, b: ConstId) -> bool {
        if a == b {
            return self.constant(a).kind == Kind::Val;
        }
        self.sim.contains(&(a, b))
    }

    /// Validate `q` against the schema and resolve it to dense ids.
    pub fn compile(&mut self, q: &Query) -> Result<CompiledQuery, EvalError> {
        q.validate(self.db.schema())?;
        let mut var_ids: HashMap<Var, usize> = HashMap::new();
        let mut var_names = Vec::new();
        let mut var_of = |v: &Var| {
            *var_ids.entry(v.clone()).or_insert_with(|| {
                var_names.push(v.clone());
                var_names.len() - 1
            })
        };
        let free: Vec<usize> = q.free.iter().map(&mut var_of).collect();
        let mut term = |t: &Term, ctx: &mut Self| match t {
            Term::Var(v) => CTerm::Var(var_of(v)),
            Term::Const(c) => CTerm::Const(ctx.intern(c)),
        };
        let mut atoms: Vec<CAtom> = q
            .atoms
            .iter()
            .map(|a| CAtom {
                rel: self.db.schema().id(&a.relation).expect("validated"),
                terms: a.args.iter().map(|t| term(t, self)).collect(),
            })
            .collect();
        let neqs: Vec<(CTerm, CTerm)> = q
            .neqs
            .iter()
            .map(|(a, b)| (term(a, self), term(b, self)))
            .collect();
        let sims: Vec<(CTerm, CTerm)> = q
            .sims
            .iter()
            .map(|(a, b)| (term(a, self), term(b, self)))
            .collect();
        let nvars = var_names.len();

        atoms = order_atoms(atoms, nvars);
        let mut last = vec![0usize; nvars];
        for (k, a) in atoms.iter().enumerate() {
            for t in &a.terms {
                if let CTerm::Var(v) = t {
                    last[*v] = k;
                }
            }
        }
        let ready = |pair: &(CTerm, CTerm)| {
            [pair.0, pair.1]
                .iter()
                .map(|t| match t {
                    CTerm::Var(v) => last[*v],
                    CTerm::Const(_) => 0,
                })
                .max()
                .unwrap_or(0)
        };
        let n_atoms = atoms.len().max(1);
        let mut sim_ready = vec![Vec::new(); n_atoms];
        for (i, s) in sims.iter().enumerate() {
            sim_ready[ready(s)].push(i);
        }
        let is_free = |t: &CTerm| matches!(t, CTerm::Var(v) if free.contains(v));
        let mut neq_ready = vec![Vec::new(); n_atoms];
        for (i, s) in neqs.iter().enumerate() {
            if !is_free(&s.0) && !is_free(&s.1) {
                neq_ready[ready(s)].push(i);
            }
        }
        let free_sensitive = neqs
            .iter()
            .chain(&sims)
            .any(|(a, b)| is_free(a) || is_free(b));
        Ok(CompiledQuery {
            nvars,
            var_names,
            free,
            atoms,
            neqs,
            sims,
            sim_ready,
            neq_ready,
            free_sensitive,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CTerm {
    Var(usize),
    Const(ConstId),
}

#[derive(Debug, Clone)]
struct CAtom {
    rel: RelId,
    terms: Vec<CTerm>,
}

/// Greedy join order: prefer atoms whose terms are already constrained.
fn order_atoms(mut atoms: Vec<CAtom>, nvars: usize) -> Vec<CAtom> {
    let mut bound = vec![false; nvars];
    let mut out = Vec::with_capacity(atoms.len());
    while !atoms.is_empty() {
        let score = |a: &CAtom| {
            a.terms
                .iter()
                .filter(|t| match t {
                    CTerm::Const(_) => true,
                    CTerm::Var(v) => bound[*v],
                })
                .count()
        };
        let mut best = 0;
        for i in 1..atoms.len() {
            if score(&atoms[i]) > score(&atoms[best]) {
                best = i;
            }
        }
        let a = atoms.remove(best);
        for t in &a.terms {
            if let CTerm::Var(v) = t {
                bound[*v] = true;
            }
        }
        out.push(a);
    }
    out
}

/// A query resolved against an [`EvalContext`].
#[derive(Debug, Clone)]
pub struct CompiledQuery {
    nvars: usize,
    var_names: Vec<Var>,
    free: Vec<usize>,
    atoms: Vec<CAtom>,
    neqs: Vec<(CTerm, CTerm)>,
    sims: Vec<(CTerm, CTerm)>,
    sim_ready: Vec<Vec<usize>>,
    neq_ready: Vec<Vec<usize>>,
    free_sensitive: bool,
}

type Images = Vec<Option<ConstSet>>;

fn intersect(a: &[ConstId], b: &[ConstId]) -> Vec<ConstId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn disjoint(a: &[ConstId], b: &[ConstId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

impl CompiledQuery {
    pub fn arity(&self) -> usize {
        self.free.len()
    }

    pub fn var_names(&self) -> &[Var] {
        &self.var_names
    }

    pub fn has_inequalities(&self) -> bool {
        !self.neqs.is_empty()
    }

    fn image<'i>(t: &CTerm, images: &'i Images, scratch: &'i mut [ConstId; 1]) -> &'i [ConstId] {
        match t {
            CTerm::Var(v) => images[*v].as_deref().expect("bound by a relational atom"),
            CTerm::Const(c) => {
                scratch[0] = *c;
                &scratch[..]
            }
        }
    }

    fn neq_holds(&self, i: usize, images: &Images) -> bool {
        let (a, b) = &self.neqs[i];
        let (mut s1, mut s2) = ([ConstId(0)], [ConstId(0)]);
        disjoint(Self::image(a, images, &mut s1), Self::image(b, images, &mut s2))
    }

    fn sim_holds(&self, i: usize, images: &Images, ctx: &EvalContext) -> bool {
        let (a, b) = &self.sims[i];
        let (mut s1, mut s2) = ([ConstId(0)], [ConstId(0)]);
        let ia = Self::image(a, images, &mut s1);
        let ib = Self::image(b, images, &mut s2);
        ia.iter().any(|x| ib.iter().any(|y| ctx.similar(*x, *y)))
    }

    fn side_atoms_hold(&self, images: &Images, ctx: &EvalContext) -> bool {
        (0..self.neqs.len()).all(|i| self.neq_holds(i, images))
            && (0..self.sims.len()).all(|i| self.sim_holds(i, images, ctx))
    }

    /// Walk all consistent atom assignments; `visit` returns true to stop.
    fn search(
        &self,
        ctx: &EvalContext,
        xdb: &ExtendedDatabase,
        depth: usize,
        images: &mut Images,
        visit: &mut dyn FnMut(&Images) -> bool,
    ) -> bool {
        if depth == self.atoms.len() {
            return visit(images);
        }
        let atom = &self.atoms[depth];
        let mut undo: Vec<(usize, Option<ConstSet>)> = Vec::with_capacity(atom.terms.len());
        for &fid in xdb.database().facts_of(atom.rel) {
            let sets = xdb.sets(fid);
            let mut ok = true;
            for (j, t) in atom.terms.iter().enumerate() {
                let set = &sets[j];
                match t {
                    CTerm::Const(c) => {
                        if set.binary_search(c).is_err() {
                            ok = false;
                        }
                    }
                    CTerm::Var(v) => {
                        let next = match &images[*v] {
                            None => set.clone(),
                            Some(cur) => {
                                let inter = intersect(cur, set);
                                if inter.is_empty() {
                                    ok = false;
                                    break;
                                }
                                if inter.len() == cur.len() {
                                    continue;
                                }
                                Arc::from(inter)
                            }
                        };
                        undo.push((*v, images[*v].replace(next)));
                    }
                }
                if !ok {
                    break;
                }
            }
            if ok {
                ok = self.sim_ready[depth]
                    .iter()
                    .all(|i| self.sim_holds(*i, images, ctx))
                    && self.neq_ready[depth]
                        .iter()
                        .all(|i| self.neq_holds(*i, images));
            }
            if ok && self.search(ctx, xdb, depth + 1, images, visit) {
                return true;
            }
            for (v, old) in undo.drain(..).rev() {
                images[v] = old;
            }
        }
        false
    }

    /// `xdb ⊨ q` for a Boolean query.
    pub fn holds(&self, ctx: &EvalContext, xdb: &ExtendedDatabase) -> bool {
        let mut images: Images = vec![None; self.nvars];
        self.search(ctx, xdb, 0, &mut images, &mut |imgs| {
            self.side_atoms_hold(imgs, ctx)
        })
    }

    /// `q(xdb)` as tuples of constant ids.
    pub fn answers(&self, ctx: &EvalContext, xdb: &ExtendedDatabase) -> BTreeSet<Vec<ConstId>> {
        let mut out = BTreeSet::new();
        let mut images: Images = vec![None; self.nvars];
        self.search(ctx, xdb, 0, &mut images, &mut |imgs| {
            if !self.free_sensitive {
                if self.side_atoms_hold(imgs, ctx) {
                    product(&self.free, imgs, &mut |t| {
                        out.insert(t.to_vec());
                    });
                }
                return false;
            }
            let mut local = imgs.clone();
            product(&self.free, imgs, &mut |t| {
                for (v, c) in self.free.iter().zip(t) {
                    local[*v] = Some(Arc::from(vec![*c]));
                }
                if self.side_atoms_hold(&local, ctx) {
                    out.insert(t.to_vec());
                }
            });
            false
        });
        out
    }
}

fn product(free: &[usize], images: &Images, f: &mut dyn FnMut(&[ConstId])) {
    fn go(
        free: &[usize],
        images: &Images,
        acc: &mut Vec<ConstId>,
        f: &mut dyn FnMut(&[ConstId]),
    ) {
        match free.split_first() {
            None => f(acc),
            Some((v, rest)) => {
                for c in images[*v].as_deref().expect("answer variables are bound").iter() {
                    acc.push(*c);
                    go(rest, images, acc, f);
                    acc.pop();
                }
            }
        }
    }
    go(free, images, &mut Vec::with_capacity(free.len()), f)
}

/// `xdb ⊨ q` for a Boolean query `q`.
pub fn eval_boolean(
    q: &Query,
    xdb: &ExtendedDatabase,
    oracle: &SimilarityOracle,
) -> Result<bool, EvalError> {
    if !q.is_boolean() {
        return Err(EvalError::NotBoolean);
    }
    let mut ctx = EvalContext::new(xdb.database(), oracle);
    let c = ctx.compile(q)?;
    Ok(c.holds(&ctx, xdb))
}

/// `q(xdb)`: all tuples over `Dom(D)` whose substitution instance holds.
pub fn eval_answers(
    q: &Query,
    xdb: &ExtendedDatabase,
    oracle: &SimilarityOracle,
) -> Result<BTreeSet<Vec<Constant>>, EvalError> {
    if q.is_boolean() {
        return Err(EvalError::NoAnswerVariables);
    }
    let mut ctx = EvalContext::new(xdb.database(), oracle);
    let c = ctx.compile(q)?;
    Ok(c.answers(&ctx, xdb)
        .into_iter()
        .map(|t| t.into_iter().map(|id| ctx.constant(id).clone()).collect())
        .collect())
}

/// True iff the constraint is satisfied, i.e. its body does not hold.
pub fn check_dc(
    dc: &DenialConstraint,
    xdb: &ExtendedDatabase,
    oracle: &SimilarityOracle,
) -> Result<bool, EvalError> {
    dc.validate(xdb.database().schema())?;
    Ok(!eval_boolean(&dc.body, xdb, oracle)?)
}

/// `q(xdb) ⊆ E`.
pub fn check_object_rule(
    rule: &ObjectRule,
    xdb: &ExtendedDatabase,
    e: &ObjectPartition,
    oracle: &SimilarityOracle,
) -> Result<bool, EvalError> {
    rule.validate(xdb.database().schema())?;
    let db = xdb.database();
    let answers = eval_answers(&rule.body, xdb, oracle)?;
    Ok(answers.iter().all(|t| e.same(db, &t[0], &t[1])))
}

/// Every answer `(t1, t2)` has `⟨t1, i⟩` and `⟨t2, j⟩` related in `V`.
pub fn check_value_rule(
    rule: &ValueRule,
    xdb: &ExtendedDatabase,
    v: &CellPartition,
    oracle: &SimilarityOracle,
) -> Result<bool, EvalError> {
    rule.validate(xdb.database().schema())?;
    let answers = eval_answers(&rule.body, xdb, oracle)?;
    let db = xdb.database();
    Ok(answers.iter().all(|t| {
        let a = crate::model::Cell::new(&t[0].lexeme, rule.left_pos);
        let b = crate::model::Cell::new(&t[1].lexeme, rule.right_pos);
        v.same(db, &a, &b)
    }))
}
