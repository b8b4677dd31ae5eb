//! Text rendering for the formats read by [`crate::parse`].

use std::fmt::Write;

use crate::model::{CellPartition, Constant, Database, Kind, ObjectPartition, PosType, Schema};
use crate::parse::Workspace;
use crate::sim::SimilarityOracle;
use crate::syntax::{DenialConstraint, ObjectRule, Query, Specification, Strength, Term, ValueRule};

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn constant(c: &Constant) -> String {
    match c.kind {
        Kind::Val => quote(&c.lexeme),
        Kind::Obj | Kind::Tid => c.lexeme.to_string(),
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.to_string(),
        Term::Const(c) if c.kind == Kind::Val => quote(&c.lexeme),
        Term::Const(c) => format!("@{}", c.lexeme),
    }
}

pub fn render_schema(schema: &Schema) -> String {
    let mut out = String::new();
    for r in schema.relations() {
        let types: Vec<&str> = r
            .types
            .iter()
            .map(|t| match t {
                PosType::Obj => "obj",
                PosType::Val => "val",
            })
            .collect();
        writeln!(out, "relation {}({})", r.name, types.join(", ")).unwrap();
    }
    out
}

pub fn render_facts(db: &Database) -> String {
    let mut out = String::new();
    for f in db.facts() {
        let args: Vec<String> = f.args.iter().map(constant).collect();
        writeln!(out, "{}: {}({})", f.tid, f.relation, args.join(", ")).unwrap();
    }
    out
}

pub fn render_sim(oracle: &SimilarityOracle) -> String {
    let mut out = String::new();
    for (a, b) in oracle.pairs() {
        writeln!(out, "sim {} ~ {}", quote(a), quote(b)).unwrap();
    }
    if let Some(m) = oracle.metric() {
        writeln!(out, "sim metric levenshtein {}", m.threshold).unwrap();
    }
    out
}

/// The body of a query as a comma-separated item list.
pub fn render_body(q: &Query) -> String {
    let mut items: Vec<String> = q
        .atoms
        .iter()
        .map(|a| {
            let args: Vec<String> = a.args.iter().map(term).collect();
            format!("{}({})", a.relation, args.join(", "))
        })
        .collect();
    items.extend(q.sims.iter().map(|(a, b)| format!("{} ~ {}", term(a), term(b))));
    items.extend(q.neqs.iter().map(|(a, b)| format!("{} != {}", term(a), term(b))));
    items.join(", ")
}

fn label(l: &Option<String>) -> String {
    l.as_ref().map(|l| format!(" {l}")).unwrap_or_default()
}

fn strength(s: Strength) -> (&'static str, &'static str) {
    match s {
        Strength::Hard => ("hard", "=>"),
        Strength::Soft => ("soft", "~>"),
    }
}

pub fn render_object_rule(r: &ObjectRule) -> String {
    let (kw, arrow) = strength(r.strength);
    format!(
        "{kw} obj{}: {} {arrow} EqO({}, {})",
        label(&r.label),
        render_body(&r.body),
        r.body.free[0],
        r.body.free[1]
    )
}

pub fn render_value_rule(r: &ValueRule) -> String {
    let (kw, arrow) = strength(r.strength);
    format!(
        "{kw} val{}: {} {arrow} EqV({}.{}, {}.{})",
        label(&r.label),
        render_body(&r.body),
        r.body.free[0],
        r.left_pos,
        r.body.free[1],
        r.right_pos
    )
}

pub fn render_constraint(d: &DenialConstraint) -> String {
    format!("deny{}: {} -> false", label(&d.label), render_body(&d.body))
}

pub fn render_spec(spec: &Specification) -> String {
    let mut out = String::new();
    for r in &spec.object_rules {
        writeln!(out, "{}", render_object_rule(r)).unwrap();
    }
    for r in &spec.value_rules {
        writeln!(out, "{}", render_value_rule(r)).unwrap();
    }
    for d in &spec.constraints {
        writeln!(out, "{}", render_constraint(d)).unwrap();
    }
    out
}

pub fn render_query(q: &Query) -> String {
    let free: Vec<String> = q.free.iter().map(|v| v.to_string()).collect();
    format!("query({}): {}\n", free.join(", "), render_body(q))
}

pub fn render_workspace(ws: &Workspace) -> String {
    let mut out = String::new();
    for part in [
        render_schema(ws.schema()),
        render_facts(&ws.db),
        render_sim(&ws.oracle),
        render_spec(&ws.spec),
    ] {
        if part.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&part);
    }
    out
}

/// Non-singleton classes only, in canonical order.
pub fn render_solution(db: &Database, e: &ObjectPartition, v: &CellPartition) -> String {
    let mut out = String::new();
    for class in e.nontrivial_classes(db) {
        let names: Vec<&str> = class.iter().map(|c| &*c.lexeme).collect();
        writeln!(out, "eqo: {}", names.join(" ")).unwrap();
    }
    for class in v.nontrivial_classes(db) {
        let names: Vec<String> = class.iter().map(|c| c.to_string()).collect();
        writeln!(out, "eqv: {}", names.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cell;
    use crate::parse::{parse_query, parse_solution, parse_workspace};

    const AUTHORS: &str = include_str!("../data/authors.lace");

    #[test]
    fn workspace_round_trip() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let text = render_workspace(&ws);
        let again = parse_workspace(&text).unwrap();
        assert_eq!(again.db.schema(), ws.db.schema());
        assert_eq!(again.db.facts(), ws.db.facts());
        assert_eq!(again.oracle, ws.oracle);
        assert_eq!(again.spec, ws.spec);
        assert_eq!(render_workspace(&again), text);
    }

    #[test]
    fn trivial_solution_is_empty() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let e = ObjectPartition::trivial(&ws.db);
        let v = CellPartition::trivial(&ws.db);
        assert_eq!(render_solution(&ws.db, &e, &v), "");
    }

    #[test]
    fn solution_lines() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let e = ObjectPartition::from_classes(
            &ws.db,
            &[vec![
                Constant::obj("a5"),
                Constant::obj("a1"),
                Constant::obj("a2"),
            ]],
        )
        .unwrap();
        let v = CellPartition::from_pairs(&ws.db, &[(Cell::new("t2", 2), Cell::new("t1", 2))])
            .unwrap();
        let text = render_solution(&ws.db, &e, &v);
        assert_eq!(text, "eqo: a1 a2 a5\neqv: t1.2 t2.2\n");
        assert_eq!(parse_solution(&text, &ws.db).unwrap(), (e, v));
    }

    #[test]
    fn query_round_trip() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let text = "query(x): Author(t, x, n, \"a\\\"b\"), Wrote(@t14, @a1, p), n ~ \"J. Smith\"\n";
        let q = parse_query(text, ws.schema()).unwrap();
        assert_eq!(render_query(&q), text);
    }
}
