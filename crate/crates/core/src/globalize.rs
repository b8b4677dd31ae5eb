//! Compiling object merges into value merges.
//!
//! Every object position is retyped to a value position. Each object rule
//! becomes a value rule that merges one pair of cells holding its head
//! variables. Hard rules for every ordered pair of former object positions
//! then spread that merge to all cells holding the same constants.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{
    CellPartition, Constant, Database, Fact, Kind, ModelError, ObjectPartition, Partition, Schema,
};
use crate::syntax::{
    DenialConstraint, ObjectRule, Query, RelAtom, Specification, Strength, Term, ValidationError,
    ValueRule,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlobalizeError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rule {rule}: head variable `{var}` occurs in no relational atom")]
    NoPosition { rule: usize, var: String },
    #[error("rule {rule}: the atom holding `{var}` has a constant tid")]
    ConstantTid { rule: usize, var: String },
    #[error("`{0}` names both an object and a value")]
    LexemeCollision(String),
}

/// Which occurrence of a head variable a converted rule uses:
/// `(atom index, position)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub rule: usize,
    pub x: (usize, usize),
    pub y: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct GlobalizedSpec {
    /// The database with every object read as a value.
    pub db: Database,
    /// Original value rules, then converted object rules, then the hard
    /// rules linking former object positions. No object rules.
    pub spec: Specification,
    pub selections: Vec<Selection>,
    /// Number of linking rules at the end of `spec.value_rules`.
    pub global_rules: usize,
}

impl GlobalizedSpec {
    pub fn schema(&self) -> &Schema {
        self.db.schema()
    }
}

fn as_value(c: &Constant) -> Constant {
    match c.kind {
        Kind::Obj => Constant::val(c.lexeme.clone()),
        _ => c.clone(),
    }
}

fn retype_term(t: &Term) -> Term {
    match t {
        Term::Const(c) => Term::Const(as_value(c)),
        Term::Var(_) => t.clone(),
    }
}

fn retype_query(q: &Query) -> Query {
    Query {
        free: q.free.clone(),
        atoms: q
            .atoms
            .iter()
            .map(|a| RelAtom::new(&a.relation, a.args.iter().map(retype_term).collect()))
            .collect(),
        neqs: q.neqs.iter().map(|(a, b)| (retype_term(a), retype_term(b))).collect(),
        sims: q.sims.iter().map(|(a, b)| (retype_term(a), retype_term(b))).collect(),
    }
}

fn first_occurrence(q: &Query, var: &Term) -> Option<(usize, usize)> {
    q.atoms.iter().enumerate().find_map(|(k, a)| {
        a.args
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, t)| *t == var)
            .map(|(j, _)| (k, j))
    })
}

fn convert(k: usize, r: &ObjectRule) -> Result<(ValueRule, Selection), GlobalizeError> {
    let mut tids = Vec::new();
    let mut picks = Vec::new();
    for v in &r.body.free {
        let var = Term::Var(v.clone());
        let (a, j) = first_occurrence(&r.body, &var).ok_or_else(|| GlobalizeError::NoPosition {
            rule: k,
            var: v.to_string(),
        })?;
        match &r.body.atoms[a].args[0] {
            Term::Var(t) => tids.push(t.clone()),
            Term::Const(_) => {
                return Err(GlobalizeError::ConstantTid {
                    rule: k,
                    var: v.to_string(),
                })
            }
        }
        picks.push((a, j));
    }
    let mut body = retype_query(&r.body);
    body.free = tids.clone();
    let rule = ValueRule {
        label: r.label.clone(),
        strength: r.strength,
        body,
        left_pos: picks[0].1,
        right_pos: picks[1].1,
    };
    Ok((
        rule,
        Selection {
            rule: k,
            x: picks[0],
            y: picks[1],
        },
    ))
}

/// One hard rule per ordered pair of object positions, self-pairs included.
pub fn global_rules(schema: &Schema) -> Vec<ValueRule> {
    let positions = schema.object_positions();
    let mut out = Vec::new();
    for &(p, i) in &positions {
        for &(p2, j) in &positions {
            let (rel, rel2) = (schema.relation(p), schema.relation(p2));
            let atom = |tid: &str, prefix: &str, arity: usize, at: usize| {
                let mut args = vec![Term::var(tid)];
                for k in 1..=arity {
                    if k == at {
                        args.push(Term::var("z"));
                    } else {
                        args.push(Term::var(&format!("{prefix}{k}")));
                    }
                }
                args
            };
            let body = Query {
                free: Vec::new(),
                atoms: vec![
                    RelAtom::new(&rel.name, atom("x", "u", rel.arity(), i)),
                    RelAtom::new(&rel2.name, atom("y", "w", rel2.arity(), j)),
                ],
                neqs: Vec::new(),
                sims: Vec::new(),
            };
            let label = format!("g_{}_{}_{}_{}", rel.name, i, rel2.name, j);
            out.push(ValueRule::new(Strength::Hard, ("x", i), ("y", j), body).labeled(&label));
        }
    }
    out
}

/// `D^V`: the same facts with objects read as values.
pub fn retype_database(db: &Database) -> Result<Database, GlobalizeError> {
    let facts = db
        .facts()
        .iter()
        .map(|f| Fact::new(&f.tid, &f.relation, f.args.iter().map(as_value).collect()))
        .collect();
    Ok(Database::new(db.schema().retyped_to_values(), facts)?)
}

pub fn globalize_spec(db: &Database, spec: &Specification) -> Result<GlobalizedSpec, GlobalizeError> {
    spec.validate(db.schema())?;
    let mut objects: BTreeSet<&str> = BTreeSet::new();
    let mut values: BTreeSet<&str> = BTreeSet::new();
    let spec_consts = spec.constants();
    let dom = db.dom();
    for c in dom.iter().chain(&spec_consts) {
        match c.kind {
            Kind::Obj => objects.insert(&c.lexeme),
            Kind::Val => values.insert(&c.lexeme),
            Kind::Tid => false,
        };
    }
    if let Some(clash) = objects.intersection(&values).next() {
        return Err(GlobalizeError::LexemeCollision(clash.to_string()));
    }

    let dv = retype_database(db)?;
    let mut out = Specification::new();
    for r in &spec.value_rules {
        let mut r = r.clone();
        r.body = retype_query(&r.body);
        out.value_rules.push(r);
    }
    let mut selections = Vec::new();
    for (k, r) in spec.object_rules.iter().enumerate() {
        let (rule, sel) = convert(k, r)?;
        out.value_rules.push(rule);
        selections.push(sel);
    }
    let global = global_rules(db.schema());
    let global_count = global.len();
    out.value_rules.extend(global);
    for d in &spec.constraints {
        out.constraints.push(DenialConstraint {
            label: d.label.clone(),
            body: retype_query(&d.body),
        });
    }
    out.validate(dv.schema())?;
    Ok(GlobalizedSpec {
        db: dv,
        spec: out,
        selections,
        global_rules: global_count,
    })
}

/// `V ∪ V_E` over `Cells(D^V)`, where `V_E` relates every two cells whose
/// stored objects are `E`-equivalent (equal objects included).
pub fn lift_solution(
    db: &Database,
    dv: &Database,
    e: &ObjectPartition,
    v: &CellPartition,
) -> Result<CellPartition, GlobalizeError> {
    if e.0.len() != db.num_objects() || v.0.len() != db.num_cells() {
        return Err(ModelError::OutsideUniverse("partition over another database".into()).into());
    }
    let mut p = Partition::identity(dv.num_cells());
    let to_dv = |c: usize| {
        let (fid, pos) = db.cell_slot(c);
        dv.cell_index(fid, pos).expect("value cells persist")
    };
    for c in 0..db.num_cells() {
        p.union(to_dv(c), to_dv(v.0.find(c)));
    }
    let mut first: HashMap<usize, usize> = HashMap::new();
    for fid in 0..db.facts().len() {
        let row = db.row(fid);
        for (pos, id) in row.iter().enumerate().skip(1) {
            let Some(o) = db.object_index(*id) else { continue };
            let cell = dv.cell_index(fid, pos).expect("every position is a cell");
            let root = *first.entry(e.0.find(o)).or_insert(cell);
            p.union(root, cell);
        }
    }
    Ok(CellPartition(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cell;
    use crate::parse::parse_workspace;
    use crate::render::render_value_rule;

    fn authors() -> crate::parse::Workspace {
        parse_workspace(include_str!("../data/authors.lace")).unwrap()
    }

    #[test]
    fn twenty_five_linking_rules() {
        let ws = authors();
        assert_eq!(ws.schema().object_positions().len(), 5);
        let g = globalize_spec(&ws.db, &ws.spec).unwrap();
        assert_eq!(g.global_rules, 25);
        assert!(g.spec.object_rules.is_empty());
        assert_eq!(g.spec.value_rules.len(), 1 + 2 + 25);
        assert_eq!(g.db.num_objects(), 0);
        assert_eq!(g.db.num_cells(), 26 + 8 + 10 + 16);
    }

    #[test]
    fn r1_selects_first_occurrences() {
        let ws = authors();
        let g = globalize_spec(&ws.db, &ws.spec).unwrap();
        assert_eq!(g.selections[0], Selection { rule: 0, x: (0, 1), y: (1, 1) });
        assert_eq!(
            render_value_rule(&g.spec.value_rules[1]),
            "hard val r1: Author(t, x, n, i), Author(t2, y, n, i) => EqV(t.1, t2.1)"
        );
    }

    #[test]
    fn linking_rule_shape() {
        let ws = authors();
        let g = global_rules(ws.schema());
        assert_eq!(
            render_value_rule(&g[1]),
            "hard val g_Author_1_Paper_1: Author(x, z, u2, u3), Paper(y, z, w2, w3, w4) => EqV(x.1, y.1)"
        );
        for r in &g {
            assert_eq!(r.body.atoms.len(), 2);
        }
    }

    #[test]
    fn no_object_rules() {
        let ws = authors();
        let mut spec = ws.spec.clone();
        spec.object_rules.clear();
        let g = globalize_spec(&ws.db, &spec).unwrap();
        assert_eq!(g.spec.value_rules.len(), 1 + 25);
        assert_eq!(g.spec.constraints, spec.constraints);
    }

    #[test]
    fn lifting() {
        let ws = authors();
        let g = globalize_spec(&ws.db, &ws.spec).unwrap();
        let e = ObjectPartition::from_classes(&ws.db, &[vec![Constant::obj("a1"), Constant::obj("a2")]])
            .unwrap();
        let v = CellPartition::from_pairs(&ws.db, &[(Cell::new("t1", 2), Cell::new("t2", 2))]).unwrap();
        let l = lift_solution(&ws.db, &g.db, &e, &v).unwrap();
        let classes = l.nontrivial_classes(&g.db);
        let a1a2 = classes
            .iter()
            .find(|c| c.contains(&Cell::new("t1", 1)))
            .unwrap();
        let mut expect: Vec<Cell> = [("t1", 1), ("t2", 1), ("t14", 1), ("t15", 1), ("t11", 4), ("t12", 4)]
            .iter()
            .map(|(t, i)| Cell::new(t, *i))
            .collect();
        expect.sort();
        assert_eq!(a1a2, &expect);
        assert!(l.same(&g.db, &Cell::new("t1", 2), &Cell::new("t2", 2)));

        let t = lift_solution(&ws.db, &g.db, &ObjectPartition::trivial(&ws.db), &CellPartition::trivial(&ws.db))
            .unwrap();
        // Only cells holding the same object are related.
        assert!(t.same(&g.db, &Cell::new("t14", 2), &Cell::new("t15", 2)));
        assert!(!t.same(&g.db, &Cell::new("t14", 1), &Cell::new("t15", 1)));
        assert!(!t.same(&g.db, &Cell::new("t1", 2), &Cell::new("t2", 2)));
    }

    #[test]
    fn collision_rejected() {
        let ws = parse_workspace(
            "relation R(obj, val)\nt1: R(x, \"x\")\n",
        )
        .unwrap();
        assert_eq!(
            globalize_spec(&ws.db, &ws.spec).unwrap_err(),
            GlobalizeError::LexemeCollision("x".into())
        );
    }
}
