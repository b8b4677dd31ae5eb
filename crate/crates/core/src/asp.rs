//! Normal logic program whose stable models are the solutions, in clingo
//! syntax.
//!
//! Naming: relation `R` becomes predicate `r_R`; tids and objects become
//! `t_<lexeme>` / `o_<lexeme>` (case kept), or `t("..")` / `o("..")` when
//! the lexeme is not an identifier; values are quoted strings.
//!
//! Query bodies are rewritten so that each relational atom matches one
//! fact on its own. A variable that must be read (joined, compared,
//! similar, or in the head) gets a witness variable `W` plus one link per
//! occurrence: `eqo(O,W)` for an object position holding `O`, and
//! `val(T,i,W)` for value cell `(T,i)`. `val/3` ranges over the values of a
//! cell's class, so `W` ranges over the intersection used by query
//! evaluation. An inequality `u != w` becomes `not ov<k>(..)` where
//! `ov<k>` holds when the two intersections share a constant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::model::{Cell, CellPartition, Constant, Database, Kind, ObjectPartition, Partition, Schema};
use crate::sim::SimilarityOracle;
use crate::syntax::{Query, Specification, Strength, Term, ValidationError, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AspError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("rule {rule}: variable {var} does not occur in a positive body atom")]
    Unsafe { rule: usize, var: String },
    #[error("rule {rule}: predicate {pred}/{arity} is not part of the encoding")]
    UnknownPredicate { rule: usize, pred: String, arity: usize },
    #[error("solver output, line {line}: {message}")]
    Output { line: usize, message: String },
    #[error("model atom {0} names no object, tid or cell of the database")]
    Decode(String),
    #[error("solver: {0}")]
    Solver(String),
}

/// A term of a non-ground rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ATerm {
    Var(String),
    /// A constant, already in clingo syntax.
    Sym(String),
    Int(usize),
    Anon,
}

impl fmt::Display for ATerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ATerm::Var(v) | ATerm::Sym(v) => f.write_str(v),
            ATerm::Int(i) => write!(f, "{i}"),
            ATerm::Anon => f.write_str("_"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AAtom {
    pub pred: String,
    pub args: Vec<ATerm>,
}

impl AAtom {
    fn new(pred: &str, args: Vec<ATerm>) -> Self {
        AAtom { pred: pred.to_string(), args }
    }
}

impl fmt::Display for AAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (k, a) in self.args.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Pos(AAtom),
    Neg(AAtom),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
        }
    }
}

/// `head :- body.`, a fact when the body is empty, a constraint when the
/// head is missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Option<AAtom>,
    pub body: Vec<Literal>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write!(f, "{h}")?;
        }
        if !self.body.is_empty() {
            f.write_str(if self.head.is_some() { " :- " } else { ":- " })?;
            for (k, l) in self.body.iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Comment(String),
    Rule(Rule),
    Show(String, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AspProgram {
    pub items: Vec<Item>,
}

impl AspProgram {
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.items.iter().filter_map(|i| match i {
            Item::Rule(r) => Some(r),
            _ => None,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            match item {
                Item::Comment(c) => writeln!(out, "% {c}"),
                Item::Rule(r) => writeln!(out, "{r}"),
                Item::Show(p, n) => writeln!(out, "#show {p}/{n}."),
            }
            .expect("writing to a String");
        }
        out
    }

    /// Every variable of a rule must occur in a positive body atom other
    /// than `sim/2`.
    pub fn check_safety(&self) -> Result<(), AspError> {
        for (k, rule) in self.rules().enumerate() {
            let mut bound = BTreeSet::new();
            for l in &rule.body {
                if let Literal::Pos(a) = l {
                    if a.pred != "sim" {
                        bound.extend(vars(a));
                    }
                }
            }
            let mut used: Vec<&str> = rule.head.iter().flat_map(vars).collect();
            for l in &rule.body {
                match l {
                    Literal::Pos(a) | Literal::Neg(a) => used.extend(vars(a)),
                }
            }
            if let Some(v) = used.into_iter().find(|v| !bound.contains(v)) {
                return Err(AspError::Unsafe { rule: k, var: v.to_string() });
            }
        }
        Ok(())
    }

    /// Every predicate belongs to the encoding's fixed inventory, the
    /// relation predicates of `schema`, or an `ov<k>` helper.
    pub fn check_inventory(&self, schema: &Schema) -> Result<(), AspError> {
        let mut known: BTreeMap<String, usize> = [
            ("proj", 3),
            ("obj", 1),
            ("val", 3),
            ("eqo", 2),
            ("eqv", 4),
            ("activeo", 2),
            ("neqo", 2),
            ("activev", 4),
            ("neqv", 4),
            ("tid", 1),
            ("valpos", 2),
            ("sim", 2),
        ]
        .into_iter()
        .map(|(p, n)| (p.to_string(), n))
        .collect();
        for r in schema.relations() {
            known.insert(relation_pred(&r.name), r.arity() + 1);
        }
        for (k, rule) in self.rules().enumerate() {
            let atoms = rule.head.iter().chain(rule.body.iter().map(|l| match l {
                Literal::Pos(a) | Literal::Neg(a) => a,
            }));
            for a in atoms {
                let helper = a.pred.strip_prefix("ov").is_some_and(|n| {
                    !n.is_empty() && n.chars().all(|c| c.is_ascii_digit())
                });
                if !helper && known.get(&a.pred) != Some(&a.args.len()) {
                    return Err(AspError::UnknownPredicate {
                        rule: k,
                        pred: a.pred.clone(),
                        arity: a.args.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), AspError> {
        self.check_safety()?;
        self.check_inventory(schema)
    }
}

fn vars(a: &AAtom) -> impl Iterator<Item = &str> {
    a.args.iter().filter_map(|t| match t {
        ATerm::Var(v) => Some(v.as_str()),
        _ => None,
    })
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn mangle_prefixed(prefix: &str, lexeme: &str) -> String {
    if is_identifier(lexeme) {
        format!("{prefix}_{lexeme}")
    } else {
        format!("{prefix}({})", quote(lexeme))
    }
}

/// A constant in clingo syntax.
pub fn mangle(c: &Constant) -> String {
    match c.kind {
        Kind::Tid => mangle_prefixed("t", &c.lexeme),
        Kind::Obj => mangle_prefixed("o", &c.lexeme),
        Kind::Val => quote(&c.lexeme),
    }
}

pub fn relation_pred(name: &str) -> String {
    format!("r_{name}")
}

fn v(name: &str) -> ATerm {
    ATerm::Var(name.to_string())
}

fn pos(pred: &str, args: Vec<ATerm>) -> Literal {
    Literal::Pos(AAtom::new(pred, args))
}

fn rule(head: AAtom, body: Vec<Literal>) -> Item {
    Item::Rule(Rule { head: Some(head), body })
}

/// Where a witnessed variable occurs.
#[derive(Debug, Clone)]
enum Link {
    Obj(ATerm),
    Val(ATerm, usize),
}

impl Link {
    fn to(&self, target: ATerm) -> Literal {
        match self {
            Link::Obj(o) => pos("eqo", vec![o.clone(), target]),
            Link::Val(t, i) => pos("val", vec![t.clone(), ATerm::Int(*i), target]),
        }
    }

    fn vars(&self) -> Vec<ATerm> {
        let t = match self {
            Link::Obj(o) => o,
            Link::Val(t, _) => t,
        };
        match t {
            ATerm::Var(_) => vec![t.clone()],
            _ => Vec::new(),
        }
    }
}

struct Body {
    lits: Vec<Literal>,
    tids: BTreeMap<Var, ATerm>,
    witness: BTreeMap<Var, ATerm>,
    /// Extra rules defining the `ov<k>` helpers this body uses.
    helpers: Vec<Item>,
}

struct Compiler<'a> {
    schema: &'a Schema,
    next_helper: usize,
}

impl Compiler<'_> {
    /// `None` when the body can never be satisfied.
    fn body(&mut self, q: &Query, head: &[Var]) -> Option<Body> {
        let kinds = q.var_kinds(self.schema);
        let kind_of = |v: &Var| kinds.get(v).and_then(|k| (k.len() == 1).then(|| *k.iter().next().unwrap()));
        if kinds.values().any(|k| k.len() > 1) {
            return None;
        }
        let occurrences = q.occurrences();
        let side: BTreeSet<&Var> = q
            .sims
            .iter()
            .chain(&q.neqs)
            .flat_map(|(a, b)| [a, b])
            .filter_map(Term::as_var)
            .collect();
        let witnessed = |v: &Var| {
            kind_of(v) != Some(Kind::Tid)
                && (occurrences[v].len() > 1 || head.contains(v) || side.contains(v))
        };

        let mut counter = 0;
        let mut fresh = || {
            counter += 1;
            ATerm::Var(format!("V{counter}"))
        };
        let mut lits = Vec::new();
        let mut tids: BTreeMap<Var, ATerm> = BTreeMap::new();
        let mut links: BTreeMap<Var, Vec<Link>> = BTreeMap::new();
        let mut order: Vec<Var> = Vec::new();
        let mut constant_links = Vec::new();
        for atom in &q.atoms {
            let rel = self.schema.get(&atom.relation).expect("validated");
            let tid = match &atom.args[0] {
                Term::Var(x) => tids.entry(x.clone()).or_insert_with(&mut fresh).clone(),
                Term::Const(c) => ATerm::Sym(mangle(c)),
            };
            let mut args = vec![tid.clone()];
            for (j, t) in atom.args.iter().enumerate().skip(1) {
                let is_obj = rel.types[j - 1].kind() == Kind::Obj;
                let link = |fresh: &mut dyn FnMut() -> ATerm, args: &mut Vec<ATerm>| {
                    if is_obj {
                        let o = fresh();
                        args.push(o.clone());
                        Link::Obj(o)
                    } else {
                        args.push(ATerm::Anon);
                        Link::Val(tid.clone(), j)
                    }
                };
                match t {
                    Term::Const(c) => {
                        let l = link(&mut fresh, &mut args);
                        constant_links.push(l.to(ATerm::Sym(mangle(c))));
                    }
                    Term::Var(x) if witnessed(x) => {
                        let l = link(&mut fresh, &mut args);
                        if !links.contains_key(x) {
                            order.push(x.clone());
                        }
                        links.entry(x.clone()).or_default().push(l);
                    }
                    Term::Var(_) => args.push(ATerm::Anon),
                }
            }
            lits.push(pos(&relation_pred(&atom.relation), args));
        }
        lits.extend(constant_links);
        let mut witness = BTreeMap::new();
        for x in &order {
            let w = fresh();
            for l in &links[x] {
                lits.push(l.to(w.clone()));
            }
            witness.insert(x.clone(), w);
        }
        let term = |t: &Term| match t {
            Term::Var(x) => witness[x].clone(),
            Term::Const(c) => ATerm::Sym(mangle(c)),
        };
        for (a, b) in &q.sims {
            lits.push(pos("sim", vec![term(a), term(b)]));
        }

        let mut helpers = Vec::new();
        for (a, b) in &q.neqs {
            let kind = |t: &Term| match t {
                Term::Var(x) => kind_of(x).expect("validated"),
                Term::Const(c) => c.kind,
            };
            if kind(a) != kind(b) {
                continue;
            }
            if let (Term::Const(x), Term::Const(y)) = (a, b) {
                if x == y {
                    return None;
                }
                continue;
            }
            let shared = match (a, b) {
                (Term::Const(c), _) | (_, Term::Const(c)) => ATerm::Sym(mangle(c)),
                _ => fresh(),
            };
            let mut body = Vec::new();
            let mut args: Vec<ATerm> = Vec::new();
            for t in [a, b] {
                if let Term::Var(x) = t {
                    for l in &links[x] {
                        body.push(l.to(shared.clone()));
                        for var in l.vars() {
                            if !args.contains(&var) {
                                args.push(var);
                            }
                        }
                    }
                }
            }
            self.next_helper += 1;
            let head = AAtom::new(&format!("ov{}", self.next_helper), args);
            lits.push(Literal::Neg(head.clone()));
            helpers.push(rule(head, body));
        }
        Some(Body { lits, tids, witness, helpers })
    }
}

fn strength_word(s: Strength) -> &'static str {
    match s {
        Strength::Hard => "hard",
        Strength::Soft => "soft",
    }
}

fn label(kind: &str, k: usize, label: &Option<String>) -> String {
    match label {
        Some(l) => format!("{kind} {l}"),
        None => format!("{kind} #{}", k + 1),
    }
}

/// The program for `(db, spec)` with `sim/2` facts from `oracle`.
pub fn emit_program(
    db: &Database,
    spec: &Specification,
    oracle: &SimilarityOracle,
) -> Result<AspProgram, AspError> {
    let schema = db.schema();
    spec.validate(schema)?;
    let mut items = Vec::new();
    let comment = |items: &mut Vec<Item>, s: &str| items.push(Item::Comment(s.to_string()));

    comment(&mut items, "facts");
    for fact in db.facts() {
        let mut args = vec![ATerm::Sym(mangle(&Constant::tid(fact.tid.clone())))];
        args.extend(fact.args.iter().map(|c| ATerm::Sym(mangle(c))));
        items.push(rule(AAtom::new(&relation_pred(&fact.relation), args), Vec::new()));
    }
    for fact in db.facts() {
        let t = ATerm::Sym(mangle(&Constant::tid(fact.tid.clone())));
        items.push(rule(AAtom::new("tid", vec![t]), Vec::new()));
    }
    for cell in db.cells() {
        let t = ATerm::Sym(mangle(&Constant::tid(cell.tid.clone())));
        items.push(rule(AAtom::new("valpos", vec![t, ATerm::Int(cell.position)]), Vec::new()));
    }
    let mut values: BTreeSet<Constant> = db.dom().into_iter().filter(|c| c.kind == Kind::Val).collect();
    values.extend(spec.constants().into_iter().filter(|c| c.kind == Kind::Val));
    for a in &values {
        for b in &values {
            if oracle.sim(a, b) {
                let args = vec![ATerm::Sym(mangle(a)), ATerm::Sym(mangle(b))];
                items.push(rule(AAtom::new("sim", args), Vec::new()));
            }
        }
    }

    comment(&mut items, "projections");
    for r in schema.relations() {
        for i in 1..=r.arity() {
            let mut args = vec![v("T")];
            args.extend((1..=r.arity()).map(|j| if j == i { v("C") } else { ATerm::Anon }));
            let body = vec![pos(&relation_pred(&r.name), args.clone())];
            items.push(rule(AAtom::new("proj", vec![v("T"), ATerm::Int(i), v("C")]), body.clone()));
            if r.types[i - 1].kind() == Kind::Obj {
                items.push(rule(AAtom::new("obj", vec![v("C")]), body));
            }
        }
    }
    items.push(rule(
        AAtom::new("val", vec![v("T"), v("I"), v("C")]),
        vec![
            pos("eqv", vec![v("T"), v("I"), v("U"), v("J")]),
            pos("proj", vec![v("U"), v("J"), v("C")]),
        ],
    ));

    comment(&mut items, "equivalence");
    items.push(rule(AAtom::new("eqo", vec![v("X"), v("X")]), vec![pos("obj", vec![v("X")])]));
    items.push(rule(AAtom::new("eqo", vec![v("X"), v("Y")]), vec![pos("eqo", vec![v("Y"), v("X")])]));
    items.push(rule(
        AAtom::new("eqo", vec![v("X"), v("Z")]),
        vec![pos("eqo", vec![v("X"), v("Y")]), pos("eqo", vec![v("Y"), v("Z")])],
    ));
    let cell = |t: &str, i: &str| vec![v(t), v(i)];
    let pair = |a: (&str, &str), b: (&str, &str)| [cell(a.0, a.1), cell(b.0, b.1)].concat();
    items.push(rule(
        AAtom::new("eqv", pair(("T", "I"), ("T", "I"))),
        vec![pos("tid", vec![v("T")]), pos("valpos", cell("T", "I"))],
    ));
    items.push(rule(
        AAtom::new("eqv", pair(("T", "I"), ("U", "J"))),
        vec![pos("eqv", pair(("U", "J"), ("T", "I")))],
    ));
    items.push(rule(
        AAtom::new("eqv", pair(("T", "I"), ("W", "K"))),
        vec![pos("eqv", pair(("T", "I"), ("U", "J"))), pos("eqv", pair(("U", "J"), ("W", "K")))],
    ));

    let soft_obj = spec.object_rules.iter().any(|r| r.strength == Strength::Soft);
    let soft_val = spec.value_rules.iter().any(|r| r.strength == Strength::Soft);
    if soft_obj || soft_val {
        comment(&mut items, "soft choices");
    }
    if soft_obj {
        let xy = vec![v("X"), v("Y")];
        items.push(rule(
            AAtom::new("eqo", xy.clone()),
            vec![pos("activeo", xy.clone()), Literal::Neg(AAtom::new("neqo", xy.clone()))],
        ));
        items.push(rule(
            AAtom::new("neqo", xy.clone()),
            vec![pos("activeo", xy.clone()), Literal::Neg(AAtom::new("eqo", xy))],
        ));
    }
    if soft_val {
        let p = pair(("T", "I"), ("U", "J"));
        items.push(rule(
            AAtom::new("eqv", p.clone()),
            vec![pos("activev", p.clone()), Literal::Neg(AAtom::new("neqv", p.clone()))],
        ));
        items.push(rule(
            AAtom::new("neqv", p.clone()),
            vec![pos("activev", p.clone()), Literal::Neg(AAtom::new("eqv", p))],
        ));
    }

    let mut compiler = Compiler { schema, next_helper: 0 };
    let emit = |items: &mut Vec<Item>, name: String, body: Option<Body>, head: &dyn Fn(&Body) -> Option<AAtom>| {
        items.push(Item::Comment(name));
        match body {
            None => items.push(Item::Comment("body is unsatisfiable".into())),
            Some(b) => {
                items.extend(b.helpers.iter().cloned());
                items.push(Item::Rule(Rule { head: head(&b), body: b.lits.clone() }));
            }
        }
    };
    if !spec.object_rules.is_empty() {
        comment(&mut items, "object rules");
    }
    for (k, r) in spec.object_rules.iter().enumerate() {
        let (x, y) = (r.body.free[0].clone(), r.body.free[1].clone());
        let body = compiler.body(&r.body, &[x.clone(), y.clone()]);
        let pred = if r.strength == Strength::Hard { "eqo" } else { "activeo" };
        let head = |b: &Body| Some(AAtom::new(pred, vec![b.witness[&x].clone(), b.witness[&y].clone()]));
        emit(&mut items, label(strength_word(r.strength), k, &r.label), body, &head);
    }
    if !spec.value_rules.is_empty() {
        comment(&mut items, "value rules");
    }
    for (k, r) in spec.value_rules.iter().enumerate() {
        let (x, y) = (r.body.free[0].clone(), r.body.free[1].clone());
        let body = compiler.body(&r.body, &[]);
        let pred = if r.strength == Strength::Hard { "eqv" } else { "activev" };
        let head = |b: &Body| {
            Some(AAtom::new(
                pred,
                vec![b.tids[&x].clone(), ATerm::Int(r.left_pos), b.tids[&y].clone(), ATerm::Int(r.right_pos)],
            ))
        };
        emit(&mut items, label(strength_word(r.strength), k, &r.label), body, &head);
    }
    if !spec.constraints.is_empty() {
        comment(&mut items, "denial constraints");
    }
    for (k, d) in spec.constraints.iter().enumerate() {
        let body = compiler.body(&d.body, &[]);
        emit(&mut items, label("deny", k, &d.label), body, &|_| None);
    }
    items.push(Item::Show("eqo".into(), 2));
    items.push(Item::Show("eqv".into(), 4));
    let program = AspProgram { items };
    program.validate(schema)?;
    Ok(program)
}

/// A ground term as printed by a solver.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroundTerm {
    Sym(String),
    Str(String),
    Int(i64),
    Func(String, Vec<GroundTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<GroundTerm>,
}

struct Reader<'a> {
    s: &'a [u8],
    i: usize,
    line: usize,
}

impl Reader<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, AspError> {
        Err(AspError::Output { line: self.line, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn ident(&mut self) -> Result<String, AspError> {
        let start = self.i;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'') {
            self.i += 1;
        }
        if start == self.i {
            return self.err(format!("expected a name at byte {start}"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn args(&mut self) -> Result<Vec<GroundTerm>, AspError> {
        let mut out = Vec::new();
        if self.peek() != Some(b'(') {
            return Ok(out);
        }
        self.i += 1;
        loop {
            out.push(self.term()?);
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(b')') => {
                    self.i += 1;
                    return Ok(out);
                }
                _ => return self.err("unterminated argument list"),
            }
        }
    }

    fn term(&mut self) -> Result<GroundTerm, AspError> {
        match self.peek() {
            Some(b'"') => {
                self.i += 1;
                let mut bytes = Vec::new();
                loop {
                    match self.peek() {
                        None => return self.err("unterminated string"),
                        Some(b'"') => {
                            self.i += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let c = self.s.get(self.i + 1).copied();
                            bytes.push(match c {
                                Some(b'n') => b'\n',
                                Some(c) => c,
                                None => return self.err("unterminated string"),
                            });
                            self.i += 2;
                        }
                        Some(c) => {
                            bytes.push(c);
                            self.i += 1;
                        }
                    }
                }
                Ok(GroundTerm::Str(String::from_utf8_lossy(&bytes).into_owned()))
            }
            Some(c) if c.is_ascii_digit() || c == b'-' => {
                let start = self.i;
                self.i += 1;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.i += 1;
                }
                let text = String::from_utf8_lossy(&self.s[start..self.i]).into_owned();
                match text.parse() {
                    Ok(n) => Ok(GroundTerm::Int(n)),
                    Err(_) => self.err(format!("bad integer `{text}`")),
                }
            }
            _ => {
                let name = self.ident()?;
                let args = self.args()?;
                Ok(if args.is_empty() { GroundTerm::Sym(name) } else { GroundTerm::Func(name, args) })
            }
        }
    }
}

/// Parse one model line: atoms separated by spaces.
pub fn parse_model_line(line: &str, line_no: usize) -> Result<Vec<GroundAtom>, AspError> {
    let mut r = Reader { s: line.as_bytes(), i: 0, line: line_no };
    let mut out = Vec::new();
    loop {
        while r.peek() == Some(b' ') {
            r.i += 1;
        }
        if r.peek().is_none() {
            return Ok(out);
        }
        let pred = r.ident()?;
        let args = r.args()?;
        out.push(GroundAtom { pred, args });
    }
}

/// The models in clingo's text output, in order.
pub fn parse_solver_output(text: &str) -> Result<Vec<Vec<GroundAtom>>, AspError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut models = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        if lines[k].starts_with("Answer:") {
            let line = lines.get(k + 1).copied().unwrap_or("");
            models.push(parse_model_line(line.trim_end(), k + 2)?);
            k += 2;
        } else {
            k += 1;
        }
    }
    Ok(models)
}

fn unmangle(t: &GroundTerm, prefix: &str) -> Option<String> {
    match t {
        GroundTerm::Sym(s) => s.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')).map(str::to_string),
        GroundTerm::Func(f, args) if f == prefix && args.len() == 1 => match &args[0] {
            GroundTerm::Str(s) => Some(s.clone()),
            _ => None,
        },
        _ => None,
    }
}

fn show_atom(a: &GroundAtom) -> String {
    format!("{}{:?}", a.pred, a.args)
}

/// `(E, V)` read off the `eqo/2` and `eqv/4` atoms of a model.
pub fn decode_model(atoms: &[GroundAtom], db: &Database) -> Result<(ObjectPartition, CellPartition), AspError> {
    let mut e = Partition::identity(db.num_objects());
    let mut v = Partition::identity(db.num_cells());
    let object = |a: &GroundAtom, t: &GroundTerm| {
        unmangle(t, "o")
            .and_then(|o| db.object_index_of(&Constant::obj(o)))
            .ok_or_else(|| AspError::Decode(show_atom(a)))
    };
    let cell = |a: &GroundAtom, t: &GroundTerm, i: &GroundTerm| {
        let tid = unmangle(t, "t");
        let pos = match i {
            GroundTerm::Int(n) => usize::try_from(*n).ok(),
            _ => None,
        };
        match (tid, pos) {
            (Some(t), Some(p)) => db.cell_index_of(&Cell::new(&t, p)),
            _ => None,
        }
        .ok_or_else(|| AspError::Decode(show_atom(a)))
    };
    for a in atoms {
        match (a.pred.as_str(), a.args.as_slice()) {
            ("eqo", [x, y]) => {
                e.union(object(a, x)?, object(a, y)?);
            }
            ("eqv", [t, i, u, j]) => {
                v.union(cell(a, t, i)?, cell(a, u, j)?);
            }
            _ => {}
        }
    }
    Ok((ObjectPartition(e), CellPartition(v)))
}

/// Run `command` (split on whitespace) on `program` asking for all models,
/// and decode them.
pub fn solve_with(
    command: &str,
    program: &str,
    db: &Database,
) -> Result<Vec<(ObjectPartition, CellPartition)>, AspError> {
    let mut parts = command.split_whitespace();
    let exe = parts.next().ok_or_else(|| AspError::Solver("empty solver command".into()))?;
    let mut child = Command::new(exe)
        .args(parts)
        .arg("0")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| AspError::Solver(format!("{exe}: {e}")))?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(program.as_bytes())
        .map_err(|e| AspError::Solver(e.to_string()))?;
    let out = child.wait_with_output().map_err(|e| AspError::Solver(e.to_string()))?;
    let text = String::from_utf8_lossy(&out.stdout);
    if !text.contains("SATISFIABLE") {
        return Err(AspError::Solver(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    parse_solver_output(&text)?
        .iter()
        .map(|m| decode_model(m, db))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_solution, parse_workspace};

    fn authors() -> crate::parse::Workspace {
        parse_workspace(include_str!("../data/authors.lace")).unwrap()
    }

    #[test]
    fn authors_program_is_valid_and_deterministic() {
        let ws = authors();
        let a = emit_program(&ws.db, &ws.spec, &ws.oracle).unwrap().render();
        let b = emit_program(&ws.db, &ws.spec, &ws.oracle).unwrap().render();
        assert_eq!(a, b);
        assert!(a.contains("r_Author(t_t1,o_a1,\"J. Smith\",\"Sapienza\")."));
        assert!(a.contains("proj(T,2,C) :- r_Author(T,_,C,_)."));
        assert!(a.contains("sim(\"J. Smith\",\"J. Smith\")."));
        assert!(a.contains("eqv(T,I,W,K) :- eqv(T,I,U,J), eqv(U,J,W,K)."));
    }

    #[test]
    fn r2_joins_through_witnesses() {
        let ws = authors();
        let p = emit_program(&ws.db, &ws.spec, &ws.oracle).unwrap().render();
        let line = p.lines().skip_while(|l| *l != "% hard r2").nth(1).unwrap();
        assert_eq!(
            line,
            "eqv(V1,2,V3,2) :- r_Author(V1,V2,_,_), r_Author(V3,V4,_,_), \
             eqo(V2,V5), eqo(V4,V5), val(V1,2,V6), val(V3,2,V7), sim(V6,V7)."
        );
    }

    #[test]
    fn inequality_uses_a_helper() {
        let ws = authors();
        let p = emit_program(&ws.db, &ws.spec, &ws.oracle).unwrap().render();
        assert!(p.contains("ov1(V1,V3) :- val(V1,2,V8), val(V3,2,V8)."), "{p}");
        assert!(p.contains(", not ov1(V1,V3)."));
    }

    #[test]
    fn unsafe_rule_is_reported() {
        let bad = AspProgram {
            items: vec![Item::Rule(Rule {
                head: Some(AAtom::new("eqo", vec![v("X"), v("Y")])),
                body: vec![pos("obj", vec![v("X")]), pos("sim", vec![v("X"), v("Y")])],
            })],
        };
        assert_eq!(bad.check_safety(), Err(AspError::Unsafe { rule: 0, var: "Y".into() }));
    }

    #[test]
    fn mangling() {
        assert_eq!(mangle(&Constant::obj("A1")), "o_A1");
        assert_eq!(mangle(&Constant::tid("x-1")), "t(\"x-1\")");
        assert_eq!(mangle(&Constant::val("say \"hi\"")), "\"say \\\"hi\\\"\"");
    }

    #[test]
    fn parses_clingo_output() {
        let text = "clingo version 5\nReading from stdin\nSolving...\nAnswer: 1 (Time: 0.001s)\n\
                    eqo(o_a1,o_a1) eqv(t(\"x y\"),2,t_t1,2)\nAnswer: 2\n\nSATISFIABLE\n";
        let models = parse_solver_output(text).unwrap();
        assert_eq!(models.len(), 2);
        assert!(models[1].is_empty());
        assert_eq!(
            models[0][1].args[0],
            GroundTerm::Func("t".into(), vec![GroundTerm::Str("x y".into())])
        );
    }

    #[test]
    fn decodes_merged_classes() {
        let ws = authors();
        let atoms = parse_model_line("eqo(o_a1,o_a2) eqo(o_a1,o_a5) eqv(t_t1,2,t_t2,2) obj(o_a1)", 1).unwrap();
        let (e, v) = decode_model(&atoms, &ws.db).unwrap();
        let (e2, v2) = parse_solution("eqo: a1 a2 a5\neqv: t1.2 t2.2\n", &ws.db).unwrap();
        assert_eq!((e, v), (e2, v2));
        let unknown = parse_model_line("eqo(o_zz,o_a1)", 1).unwrap();
        assert!(matches!(decode_model(&unknown, &ws.db), Err(AspError::Decode(_))));
    }

    #[test]
    fn trivial_model_decodes_to_trivial_partitions() {
        let ws = authors();
        let atoms = parse_model_line("eqo(o_a1,o_a1) eqv(t_t1,2,t_t1,2)", 1).unwrap();
        let (e, v) = decode_model(&atoms, &ws.db).unwrap();
        assert_eq!(e, ObjectPartition::trivial(&ws.db));
        assert_eq!(v, CellPartition::trivial(&ws.db));
        let empty = Database::empty(Schema::new());
        let (e, v) = decode_model(&[], &empty).unwrap();
        assert_eq!((e.0.len(), v.0.len()), (0, 0));
    }
}
