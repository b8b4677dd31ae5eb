//! Abstract syntax of queries, merge rules, denial constraints and ER
//! specifications, plus their well-formedness checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Constant, Kind, PosType, Schema};

/// Diagnostic codes shared by validation and parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Code {
    Lexical,
    Syntax,
    UnknownRelation,
    Arity,
    KindMismatch,
    DuplicateTid,
    DuplicateRelation,
    NotValuePosition,
    Unsafe,
    HeadVariable,
    InequalityInRule,
    SimilarityKind,
    UnknownElement,
    OverlappingClasses,
    Threshold,
    ArrowMismatch,
    EmptyRelation,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Lexical => "E001",
            Code::Syntax => "E002",
            Code::UnknownRelation => "E010",
            Code::Arity => "E011",
            Code::KindMismatch => "E012",
            Code::DuplicateTid => "E013",
            Code::DuplicateRelation => "E014",
            Code::NotValuePosition => "E015",
            Code::Unsafe => "E016",
            Code::HeadVariable => "E017",
            Code::InequalityInRule => "E018",
            Code::SimilarityKind => "E019",
            Code::UnknownElement => "E020",
            Code::OverlappingClasses => "E021",
            Code::Threshold => "E022",
            Code::ArrowMismatch => "E023",
            Code::EmptyRelation => "E024",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message}")]
pub struct ValidationError {
    pub code: Code,
    pub message: String,
}

impl ValidationError {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        ValidationError {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(name.into())
    }
    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Constant),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::new(name))
    }
    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// `R(u0, u1, …, uk)`; `args[0]` is the tid term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelAtom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl RelAtom {
    pub fn new(relation: &str, args: Vec<Term>) -> Self {
        RelAtom {
            relation: relation.to_string(),
            args,
        }
    }
}

/// A conjunctive query with optional inequality and similarity atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Query {
    pub free: Vec<Var>,
    pub atoms: Vec<RelAtom>,
    pub neqs: Vec<(Term, Term)>,
    pub sims: Vec<(Term, Term)>,
}

/// Where a variable occurs: `(atom index, position)`.
pub type Occurrence = (usize, usize);

impl Query {
    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn has_inequalities(&self) -> bool {
        !self.neqs.is_empty()
    }

    /// Occurrences of every variable in relational atoms.
    pub fn occurrences(&self) -> BTreeMap<Var, Vec<Occurrence>> {
        let mut out: BTreeMap<Var, Vec<Occurrence>> = BTreeMap::new();
        for (a, atom) in self.atoms.iter().enumerate() {
            for (j, t) in atom.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    out.entry(v.clone()).or_default().push((a, j));
                }
            }
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out: BTreeSet<Var> = self.free.iter().cloned().collect();
        let side = self.neqs.iter().chain(&self.sims).flat_map(|(a, b)| [a, b]);
        for t in self.atoms.iter().flat_map(|a| &a.args).chain(side) {
            if let Term::Var(v) = t {
                out.insert(v.clone());
            }
        }
        out
    }

    /// `q[c̄]`: replace free variables by constants.
    pub fn substitute(&self, tuple: &[Constant]) -> Query {
        let map: BTreeMap<&Var, &Constant> = self.free.iter().zip(tuple).collect();
        let sub = |t: &Term| match t {
            Term::Var(v) => map
                .get(v)
                .map(|c| Term::Const((*c).clone()))
                .unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        };
        Query {
            free: Vec::new(),
            atoms: self
                .atoms
                .iter()
                .map(|a| RelAtom {
                    relation: a.relation.clone(),
                    args: a.args.iter().map(sub).collect(),
                })
                .collect(),
            neqs: self.neqs.iter().map(|(a, b)| (sub(a), sub(b))).collect(),
            sims: self.sims.iter().map(|(a, b)| (sub(a), sub(b))).collect(),
        }
    }

    /// Kinds of the positions each variable occupies.
    pub fn var_kinds(&self, schema: &Schema) -> BTreeMap<Var, BTreeSet<Kind>> {
        let mut out: BTreeMap<Var, BTreeSet<Kind>> = BTreeMap::new();
        for atom in &self.atoms {
            let Some(rel) = schema.get(&atom.relation) else {
                continue;
            };
            for (j, t) in atom.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    let kind = if j == 0 {
                        Kind::Tid
                    } else {
                        match rel.type_at(j) {
                            Some(ty) => ty.kind(),
                            None => continue,
                        }
                    };
                    out.entry(v.clone()).or_default().insert(kind);
                }
            }
        }
        out
    }

    /// Schema conformance and safety. Does not look at rule heads.
    pub fn validate(&self, schema: &Schema) -> Result<(), ValidationError> {
        for atom in &self.atoms {
            let rel = schema.get(&atom.relation).ok_or_else(|| {
                ValidationError::new(
                    Code::UnknownRelation,
                    format!("unknown relation `{}`", atom.relation),
                )
            })?;
            if atom.args.len() != rel.arity() + 1 {
                return Err(ValidationError::new(
                    Code::Arity,
                    format!(
                        "`{}` takes a tid and {} arguments, got {} terms",
                        rel.name,
                        rel.arity(),
                        atom.args.len()
                    ),
                ));
            }
            for (j, t) in atom.args.iter().enumerate() {
                let Term::Const(c) = t else { continue };
                let expected = if j == 0 {
                    Kind::Tid
                } else {
                    rel.types[j - 1].kind()
                };
                if c.kind != expected {
                    return Err(ValidationError::new(
                        Code::KindMismatch,
                        format!(
                            "position {j} of `{}` holds {expected}, but `{c}` is {}",
                            rel.name, c.kind
                        ),
                    ));
                }
            }
        }
        let kinds = self.var_kinds(schema);
        let occurs = |t: &Term| match t {
            Term::Var(v) => kinds.contains_key(v),
            Term::Const(_) => true,
        };
        for (a, b) in &self.neqs {
            for t in [a, b] {
                if !occurs(t) {
                    return Err(ValidationError::new(
                        Code::Unsafe,
                        format!("inequality variable `{}` occurs in no relational atom", show(t)),
                    ));
                }
            }
        }
        for (a, b) in &self.sims {
            for t in [a, b] {
                if !occurs(t) {
                    return Err(ValidationError::new(
                        Code::Unsafe,
                        format!("similarity variable `{}` occurs in no relational atom", show(t)),
                    ));
                }
            }
        }
        for v in &self.free {
            if !kinds.contains_key(v) {
                return Err(ValidationError::new(
                    Code::Unsafe,
                    format!("answer variable `{v}` occurs in no relational atom"),
                ));
            }
        }
        for (a, b) in self.neqs.iter().chain(&self.sims) {
            for t in [a, b] {
                let bad = match t {
                    Term::Var(v) => kinds[v].contains(&Kind::Tid),
                    Term::Const(c) => c.kind == Kind::Tid,
                };
                if bad {
                    return Err(ValidationError::new(
                        Code::KindMismatch,
                        format!("`{}` is a tid term; inequality and similarity relate values and objects only", show(t)),
                    ));
                }
            }
        }
        for (a, b) in &self.sims {
            for t in [a, b] {
                let bad = match t {
                    Term::Var(v) => kinds[v].contains(&Kind::Obj),
                    Term::Const(c) => c.kind != Kind::Val,
                };
                if bad {
                    return Err(ValidationError::new(
                        Code::SimilarityKind,
                        format!("similarity term `{}` is not a value term", show(t)),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn show(t: &Term) -> String {
    match t {
        Term::Var(v) => v.to_string(),
        Term::Const(c) => c.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strength {
    Hard,
    Soft,
}

/// `q(x, y) → EqO(x, y)`; the body's free variables are `[x, y]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectRule {
    pub label: Option<String>,
    pub strength: Strength,
    pub body: Query,
}

/// `q(x_t, y_t) → EqV(⟨x_t, i⟩, ⟨y_t, j⟩)`; the body's free variables are
/// `[x_t, y_t]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueRule {
    pub label: Option<String>,
    pub strength: Strength,
    pub body: Query,
    pub left_pos: usize,
    pub right_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DenialConstraint {
    pub label: Option<String>,
    pub body: Query,
}

impl ObjectRule {
    pub fn new(strength: Strength, x: &str, y: &str, mut body: Query) -> Self {
        body.free = vec![Var::new(x), Var::new(y)];
        ObjectRule {
            label: None,
            strength,
            body,
        }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), ValidationError> {
        validate_rule_body(&self.body, schema)?;
        let kinds = self.body.var_kinds(schema);
        for v in &self.body.free {
            let k = &kinds[v];
            if k.iter().any(|k| *k != Kind::Obj) {
                return Err(ValidationError::new(
                    Code::HeadVariable,
                    format!("head variable `{v}` of an object rule must occur only in object positions"),
                ));
            }
        }
        Ok(())
    }
}

impl ValueRule {
    pub fn new(
        strength: Strength,
        (x, i): (&str, usize),
        (y, j): (&str, usize),
        mut body: Query,
    ) -> Self {
        body.free = vec![Var::new(x), Var::new(y)];
        ValueRule {
            label: None,
            strength,
            body,
            left_pos: i,
            right_pos: j,
        }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), ValidationError> {
        validate_rule_body(&self.body, schema)?;
        let kinds = self.body.var_kinds(schema);
        for (v, pos) in self.body.free.iter().zip([self.left_pos, self.right_pos]) {
            if kinds[v].iter().any(|k| *k != Kind::Tid) {
                return Err(ValidationError::new(
                    Code::HeadVariable,
                    format!("tid variable `{v}` of a value rule may only occur in position 0"),
                ));
            }
            for atom in &self.body.atoms {
                if atom.args[0] != Term::Var(v.clone()) {
                    continue;
                }
                let rel = schema.get(&atom.relation).expect("validated");
                if rel.type_at(pos) != Some(PosType::Val) {
                    return Err(ValidationError::new(
                        Code::NotValuePosition,
                        format!("position {pos} of `{}` is not a value position", rel.name),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl DenialConstraint {
    pub fn new(body: Query) -> Self {
        DenialConstraint { label: None, body }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), ValidationError> {
        if !self.body.is_boolean() {
            return Err(ValidationError::new(
                Code::Syntax,
                "a denial constraint body has no answer variables",
            ));
        }
        self.body.validate(schema)
    }
}

fn validate_rule_body(body: &Query, schema: &Schema) -> Result<(), ValidationError> {
    if body.free.len() != 2 {
        return Err(ValidationError::new(
            Code::Syntax,
            "a rule body has exactly two answer variables",
        ));
    }
    if body.has_inequalities() {
        return Err(ValidationError::new(
            Code::InequalityInRule,
            "inequality atoms are only allowed in denial constraints",
        ));
    }
    body.validate(schema)
}

/// `Σ = ⟨Γ_O, Γ_V, Δ⟩`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Specification {
    pub object_rules: Vec<ObjectRule>,
    pub value_rules: Vec<ValueRule>,
    pub constraints: Vec<DenialConstraint>,
}

impl Specification {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), ValidationError> {
        for r in &self.object_rules {
            r.validate(schema)?;
        }
        for r in &self.value_rules {
            r.validate(schema)?;
        }
        for d in &self.constraints {
            d.validate(schema)?;
        }
        Ok(())
    }

    /// True when no denial constraint uses an inequality atom.
    pub fn inequality_free(&self) -> bool {
        self.constraints.iter().all(|d| !d.body.has_inequalities())
    }

    pub fn has_soft_rules(&self) -> bool {
        self.object_rules.iter().any(|r| r.strength == Strength::Soft)
            || self.value_rules.iter().any(|r| r.strength == Strength::Soft)
    }

    /// Every constant mentioned by a rule or constraint.
    pub fn constants(&self) -> BTreeSet<Constant> {
        let bodies = self
            .object_rules
            .iter()
            .map(|r| &r.body)
            .chain(self.value_rules.iter().map(|r| &r.body))
            .chain(self.constraints.iter().map(|d| &d.body));
        let mut out = BTreeSet::new();
        for q in bodies {
            let side = q.neqs.iter().chain(&q.sims).flat_map(|(a, b)| [a, b]);
            for t in q.atoms.iter().flat_map(|a| &a.args).chain(side) {
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new()
            .with("A", &[PosType::Obj, PosType::Val])
            .unwrap()
    }

    fn atom(t: &str, x: &str, n: &str) -> RelAtom {
        RelAtom::new("A", vec![Term::var(t), Term::var(x), Term::var(n)])
    }

    #[test]
    fn unsafe_inequality_rejected() {
        let q = Query {
            atoms: vec![atom("t", "x", "n")],
            neqs: vec![(Term::var("n"), Term::var("m"))],
            ..Default::default()
        };
        assert_eq!(q.validate(&schema()).unwrap_err().code, Code::Unsafe);
    }

    #[test]
    fn object_rule_head_in_value_position() {
        let body = Query {
            atoms: vec![atom("t", "x", "n"), atom("t2", "y", "x")],
            ..Default::default()
        };
        let r = ObjectRule::new(Strength::Hard, "x", "y", body);
        assert_eq!(r.validate(&schema()).unwrap_err().code, Code::HeadVariable);
    }

    #[test]
    fn value_rule_positions_checked() {
        let body = Query {
            atoms: vec![atom("t", "x", "n"), atom("u", "x", "m")],
            ..Default::default()
        };
        let ok = ValueRule::new(Strength::Soft, ("t", 2), ("u", 2), body.clone());
        assert!(ok.validate(&schema()).is_ok());
        let bad = ValueRule::new(Strength::Soft, ("t", 1), ("u", 2), body);
        assert_eq!(bad.validate(&schema()).unwrap_err().code, Code::NotValuePosition);
    }

    #[test]
    fn similarity_on_object_rejected() {
        let q = Query {
            atoms: vec![atom("t", "x", "n")],
            sims: vec![(Term::var("x"), Term::var("n"))],
            ..Default::default()
        };
        assert_eq!(q.validate(&schema()).unwrap_err().code, Code::SimilarityKind);
    }

    #[test]
    fn inequality_in_rule_rejected() {
        let body = Query {
            atoms: vec![atom("t", "x", "n"), atom("u", "y", "m")],
            neqs: vec![(Term::var("n"), Term::var("m"))],
            ..Default::default()
        };
        let r = ObjectRule::new(Strength::Soft, "x", "y", body);
        assert_eq!(r.validate(&schema()).unwrap_err().code, Code::InequalityInRule);
    }

    #[test]
    fn substitution_replaces_free_vars() {
        let q = Query {
            free: vec![Var::new("x")],
            atoms: vec![atom("t", "x", "n")],
            ..Default::default()
        };
        let b = q.substitute(&[Constant::obj("a")]);
        assert!(b.is_boolean());
        assert_eq!(b.atoms[0].args[1], Term::Const(Constant::obj("a")));
    }
}
