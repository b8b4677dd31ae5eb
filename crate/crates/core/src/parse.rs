//! Line-oriented text formats for workspaces, solutions and queries.
//!
//! See `docs/format.md` for the grammar. Every error carries a diagnostic
//! code and a 1-based line and column and renders as `code:line:col:message`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::model::{
    Cell, CellPartition, Constant, Database, Fact, Kind, ModelError, ObjectPartition, Partition,
    PosType, Schema,
};
use crate::sim::{MetricConfig, SimilarityOracle};
use crate::syntax::{
    Code, DenialConstraint, ObjectRule, Query, RelAtom, Specification, Strength, Term,
    ValidationError, ValueRule, Var,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub code: Code,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.code, self.line, self.col, self.message)
    }
}

impl ParseError {
    fn new(code: Code, line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            code,
            line,
            col,
            message: message.into(),
        }
    }

    fn at(tok: &Tok, code: Code, message: impl Into<String>) -> Self {
        Self::new(code, tok.line, tok.col, message)
    }

    fn validation(e: ValidationError, line: usize) -> Self {
        Self::new(e.code, line, 1, e.message)
    }
}

/// Words that cannot name a tid at the start of a line.
pub const RESERVED: &[&str] = &[
    "relation", "sim", "hard", "soft", "deny", "query", "eqo", "eqv",
];

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Ident(String),
    At(String),
    Str(String),
    Num(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &["!=", "=>", "~>", "->", "(", ")", ",", ":", ".", "~"];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex_line(text: &str, line: usize) -> Result<Vec<Tok>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            TokKind::Ident(chars[start..i].iter().collect())
        } else if c == '@' {
            i += 1;
            if i >= chars.len() || !is_ident_start(chars[i]) {
                return Err(ParseError::new(
                    Code::Lexical,
                    line,
                    col,
                    "`@` must be followed by an identifier",
                ));
            }
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            TokKind::At(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // A fractional part only for numbers such as `0.8`, not cells `t1.2`.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            TokKind::Num(chars[start..i].iter().collect())
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(ParseError::new(
                            Code::Lexical,
                            line,
                            col,
                            "unterminated string",
                        ))
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some(e @ ('"' | '\\')) => {
                            s.push(*e);
                            i += 2;
                        }
                        _ => {
                            return Err(ParseError::new(
                                Code::Lexical,
                                line,
                                i + 1,
                                "unknown escape; only \\\" and \\\\ are allowed",
                            ))
                        }
                    },
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                    }
                }
            }
            TokKind::Str(s)
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    i += s.len();
                    TokKind::Sym(s)
                }
                None => {
                    return Err(ParseError::new(
                        Code::Lexical,
                        line,
                        col,
                        format!("unexpected character `{c}`"),
                    ))
                }
            }
        };
        out.push(Tok { kind, line, col });
    }
    Ok(out)
}

struct Cursor<'t> {
    toks: &'t [Tok],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'t> Cursor<'t> {
    fn new(toks: &'t [Tok], line: usize, len: usize) -> Self {
        Cursor {
            toks,
            pos: 0,
            line,
            eol_col: len + 1,
        }
    }

    fn peek(&self) -> Option<&'t Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'t Tok> {
        self.toks.get(self.pos + k)
    }

    fn next(&mut self) -> Result<&'t Tok, ParseError> {
        let t = self.toks.get(self.pos).ok_or_else(|| {
            ParseError::new(Code::Syntax, self.line, self.eol_col, "unexpected end of line")
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok { kind: TokKind::Sym(x), .. }) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<&'t Tok, ParseError> {
        let t = self.next()?;
        match &t.kind {
            TokKind::Sym(x) if *x == s => Ok(t),
            _ => Err(ParseError::at(t, Code::Syntax, format!("expected `{s}`"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(&'t Tok, &'t str), ParseError> {
        let t = self.next()?;
        match &t.kind {
            TokKind::Ident(s) => Ok((t, s)),
            _ => Err(ParseError::at(t, Code::Syntax, format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (t, s) = self.ident(&format!("`{kw}`"))?;
        if s != kw {
            return Err(ParseError::at(t, Code::Syntax, format!("expected `{kw}`")));
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<(&'t Tok, &'t str), ParseError> {
        let t = self.next()?;
        match &t.kind {
            TokKind::Num(s) => Ok((t, s)),
            _ => Err(ParseError::at(t, Code::Syntax, format!("expected {what}"))),
        }
    }

    fn position(&mut self) -> Result<usize, ParseError> {
        let (t, s) = self.number("a position")?;
        s.parse::<usize>()
            .ok()
            .filter(|p| *p >= 1)
            .ok_or_else(|| ParseError::at(t, Code::Syntax, "positions are integers ≥ 1"))
    }

    fn end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(ParseError::at(t, Code::Syntax, "trailing input")),
        }
    }
}

/// Everything a workspace file can declare.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub db: Database,
    pub oracle: SimilarityOracle,
    pub spec: Specification,
}

impl Workspace {
    pub fn schema(&self) -> &Schema {
        self.db.schema()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Relation,
    Fact,
    Sim,
    Rule,
    Solution,
    Query,
}

fn classify(cur: &Cursor) -> Option<LineKind> {
    let first = cur.peek()?;
    let TokKind::Ident(w) = &first.kind else {
        return None;
    };
    match w.as_str() {
        "relation" => Some(LineKind::Relation),
        "sim" => Some(LineKind::Sim),
        "hard" | "soft" | "deny" => Some(LineKind::Rule),
        "eqo" | "eqv" => Some(LineKind::Solution),
        "query" => Some(LineKind::Query),
        _ => Some(LineKind::Fact),
    }
}

struct Line {
    number: usize,
    len: usize,
    toks: Vec<Tok>,
}

fn lines(text: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let toks = lex_line(raw, k + 1)?;
        if !toks.is_empty() {
            out.push(Line {
                number: k + 1,
                len: raw.chars().count(),
                toks,
            });
        }
    }
    Ok(out)
}

fn model_code(e: &ModelError) -> Code {
    match e {
        ModelError::DuplicateRelation(_) => Code::DuplicateRelation,
        ModelError::EmptyRelation(_) => Code::EmptyRelation,
        ModelError::UnknownRelation(_) => Code::UnknownRelation,
        ModelError::Arity { .. } => Code::Arity,
        ModelError::KindMismatch { .. } => Code::KindMismatch,
        ModelError::DuplicateTid(_) => Code::DuplicateTid,
        ModelError::OutsideUniverse(_) => Code::UnknownElement,
    }
}

fn parse_relation(cur: &mut Cursor, schema: &mut Schema) -> Result<(), ParseError> {
    cur.keyword("relation")?;
    let (name_tok, name) = cur.ident("a relation name")?;
    cur.expect_sym("(")?;
    let mut types = Vec::new();
    if !cur.eat_sym(")") {
        loop {
            let (t, first) = cur.ident("an attribute or type")?;
            let ty_word = if cur.eat_sym(":") {
                cur.ident("`obj` or `val`")?
            } else {
                (t, first)
            };
            types.push(match ty_word.1 {
                "obj" => PosType::Obj,
                "val" => PosType::Val,
                _ => return Err(ParseError::at(ty_word.0, Code::Syntax, "expected `obj` or `val`")),
            });
            if cur.eat_sym(")") {
                break;
            }
            cur.expect_sym(",")?;
        }
    }
    cur.end()?;
    schema
        .add(name, types)
        .map_err(|e| ParseError::at(name_tok, model_code(&e), e.to_string()))?;
    Ok(())
}

fn parse_fact(
    cur: &mut Cursor,
    schema: &Schema,
    seen: &mut HashSet<String>,
) -> Result<Fact, ParseError> {
    let (tid_tok, tid) = cur.ident("a tid")?;
    if RESERVED.contains(&tid) {
        return Err(ParseError::at(tid_tok, Code::Syntax, format!("`{tid}` is reserved")));
    }
    cur.expect_sym(":")?;
    let (rel_tok, rel_name) = cur.ident("a relation name")?;
    let rel = schema.get(rel_name).ok_or_else(|| {
        ParseError::at(rel_tok, Code::UnknownRelation, format!("unknown relation `{rel_name}`"))
    })?;
    cur.expect_sym("(")?;
    let mut args = Vec::new();
    if !cur.eat_sym(")") {
        loop {
            let t = cur.next()?;
            let pos = args.len() + 1;
            let (c, kind) = match &t.kind {
                TokKind::Ident(s) => (Constant::obj(s.as_str()), Kind::Obj),
                TokKind::Str(s) => (Constant::val(s.as_str()), Kind::Val),
                _ => return Err(ParseError::at(t, Code::Syntax, "expected a constant")),
            };
            if let Some(ty) = rel.type_at(pos) {
                if ty.kind() != kind {
                    return Err(ParseError::at(
                        t,
                        Code::KindMismatch,
                        format!(
                            "position {pos} of `{}` holds {}, got {}",
                            rel.name,
                            ty.kind(),
                            kind
                        ),
                    ));
                }
            }
            args.push(c);
            if cur.eat_sym(")") {
                break;
            }
            cur.expect_sym(",")?;
        }
    }
    cur.end()?;
    if args.len() != rel.arity() {
        return Err(ParseError::at(
            rel_tok,
            Code::Arity,
            format!("`{}` expects {} arguments, got {}", rel.name, rel.arity(), args.len()),
        ));
    }
    if !seen.insert(tid.to_string()) {
        return Err(ParseError::at(
            tid_tok,
            Code::DuplicateTid,
            format!("tid `{tid}` is used by more than one fact"),
        ));
    }
    Ok(Fact::new(tid, rel_name, args))
}

fn parse_sim(cur: &mut Cursor, oracle: &mut SimilarityOracle) -> Result<(), ParseError> {
    cur.keyword("sim")?;
    if matches!(cur.peek(), Some(Tok { kind: TokKind::Ident(w), .. }) if w == "metric") {
        cur.next()?;
        let (t, name) = cur.ident("a metric name")?;
        if name != "levenshtein" {
            return Err(ParseError::at(t, Code::Syntax, "the only metric is `levenshtein`"));
        }
        let (t, num) = cur.number("a threshold")?;
        let threshold: f64 = num
            .parse()
            .map_err(|_| ParseError::at(t, Code::Threshold, "malformed threshold"))?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ParseError::at(t, Code::Threshold, "threshold must lie in [0, 1]"));
        }
        cur.end()?;
        oracle.set_metric(Some(MetricConfig { threshold }));
        return Ok(());
    }
    let a = sim_string(cur)?;
    cur.expect_sym("~")?;
    let b = sim_string(cur)?;
    cur.end()?;
    oracle.add_pair(&a, &b);
    Ok(())
}

fn sim_string(cur: &mut Cursor) -> Result<String, ParseError> {
    let t = cur.next()?;
    match &t.kind {
        TokKind::Str(s) => Ok(s.clone()),
        _ => Err(ParseError::at(
            t,
            Code::SimilarityKind,
            "similarity is declared between quoted value constants",
        )),
    }
}

/// Parse a term. `@c` becomes a tid at position 0 and an object elsewhere;
/// validation reports a misplaced object constant.
fn parse_term(cur: &mut Cursor, position: Option<usize>) -> Result<Term, ParseError> {
    let t = cur.next()?;
    Ok(match &t.kind {
        TokKind::Ident(s) => Term::var(s),
        TokKind::At(s) if position == Some(0) => Term::Const(Constant::tid(s.as_str())),
        TokKind::At(s) => Term::Const(Constant::obj(s.as_str())),
        TokKind::Str(s) => Term::Const(Constant::val(s.as_str())),
        _ => return Err(ParseError::at(t, Code::Syntax, "expected a term")),
    })
}

/// `item, item, …` up to one of the `stop` symbols or the end of line.
fn parse_body(cur: &mut Cursor, stop: &[&str]) -> Result<Query, ParseError> {
    let mut q = Query::default();
    loop {
        let is_atom = matches!(cur.peek(), Some(Tok { kind: TokKind::Ident(_), .. }))
            && matches!(cur.peek_at(1), Some(Tok { kind: TokKind::Sym("("), .. }));
        if is_atom {
            let (_, rel) = cur.ident("a relation")?;
            cur.expect_sym("(")?;
            let mut args = Vec::new();
            if !cur.eat_sym(")") {
                loop {
                    args.push(parse_term(cur, Some(args.len()))?);
                    if cur.eat_sym(")") {
                        break;
                    }
                    cur.expect_sym(",")?;
                }
            }
            q.atoms.push(RelAtom::new(rel, args));
        } else {
            let a = parse_term(cur, None)?;
            let op = cur.next()?;
            let b = parse_term(cur, None)?;
            match op.kind {
                TokKind::Sym("~") => q.sims.push((a, b)),
                TokKind::Sym("!=") => q.neqs.push((a, b)),
                _ => return Err(ParseError::at(op, Code::Syntax, "expected `~` or `!=`")),
            }
        }
        if cur.peek().is_none() || stop.iter().any(|s| cur.is_sym(s)) {
            return Ok(q);
        }
        cur.expect_sym(",")?;
    }
}

enum ParsedRule {
    Object(ObjectRule),
    Value(ValueRule),
    Constraint(DenialConstraint),
}

fn optional_label(cur: &mut Cursor) -> Result<Option<String>, ParseError> {
    let label = match cur.peek() {
        Some(Tok { kind: TokKind::Ident(s), .. }) => {
            cur.next()?;
            Some(s.clone())
        }
        _ => None,
    };
    cur.expect_sym(":")?;
    Ok(label)
}

fn parse_rule(cur: &mut Cursor, schema: &Schema, line: usize) -> Result<ParsedRule, ParseError> {
    let (kw_tok, kw) = cur.ident("`hard`, `soft` or `deny`")?;
    if kw == "deny" {
        let label = optional_label(cur)?;
        let body = parse_body(cur, &["->"])?;
        cur.expect_sym("->")?;
        cur.keyword("false")?;
        cur.end()?;
        let dc = DenialConstraint { label, body };
        dc.validate(schema).map_err(|e| ParseError::validation(e, line))?;
        return Ok(ParsedRule::Constraint(dc));
    }
    let strength = match kw {
        "hard" => Strength::Hard,
        "soft" => Strength::Soft,
        _ => return Err(ParseError::at(kw_tok, Code::Syntax, "expected `hard`, `soft` or `deny`")),
    };
    let (target_tok, target) = cur.ident("`obj` or `val`")?;
    if target != "obj" && target != "val" {
        return Err(ParseError::at(target_tok, Code::Syntax, "expected `obj` or `val`"));
    }
    let label = optional_label(cur)?;
    let body = parse_body(cur, &["=>", "~>"])?;
    let arrow = cur.next()?;
    let arrow_ok = matches!(
        (&arrow.kind, strength),
        (TokKind::Sym("=>"), Strength::Hard) | (TokKind::Sym("~>"), Strength::Soft)
    );
    if !arrow_ok {
        return Err(ParseError::at(
            arrow,
            Code::ArrowMismatch,
            "hard rules use `=>` and soft rules use `~>`",
        ));
    }
    let (head_tok, head) = cur.ident("`EqO` or `EqV`")?;
    let rule = match (target, head) {
        ("obj", "EqO") => {
            cur.expect_sym("(")?;
            let (_, x) = cur.ident("a variable")?;
            cur.expect_sym(",")?;
            let (_, y) = cur.ident("a variable")?;
            cur.expect_sym(")")?;
            let mut r = ObjectRule::new(strength, x, y, body);
            r.label = label;
            r.validate(schema).map_err(|e| ParseError::validation(e, line))?;
            ParsedRule::Object(r)
        }
        ("val", "EqV") => {
            cur.expect_sym("(")?;
            let (_, x) = cur.ident("a tid variable")?;
            cur.expect_sym(".")?;
            let i = cur.position()?;
            cur.expect_sym(",")?;
            let (_, y) = cur.ident("a tid variable")?;
            cur.expect_sym(".")?;
            let j = cur.position()?;
            cur.expect_sym(")")?;
            let mut r = ValueRule::new(strength, (x, i), (y, j), body);
            r.label = label;
            r.validate(schema).map_err(|e| ParseError::validation(e, line))?;
            ParsedRule::Value(r)
        }
        _ => {
            return Err(ParseError::at(
                head_tok,
                Code::Syntax,
                "object rules conclude `EqO(x, y)` and value rules `EqV(x.i, y.j)`",
            ))
        }
    };
    cur.end()?;
    Ok(rule)
}

fn parse_solution_line(
    cur: &mut Cursor,
    db: &Database,
    objects: &mut Vec<Vec<usize>>,
    cells: &mut Vec<Vec<usize>>,
) -> Result<(), ParseError> {
    let (_, kw) = cur.ident("`eqo` or `eqv`")?;
    cur.expect_sym(":")?;
    let mut class = Vec::new();
    if kw == "eqo" {
        while cur.peek().is_some() {
            let (t, name) = cur.ident("an object")?;
            let idx = db.object_index_of(&Constant::obj(name)).ok_or_else(|| {
                ParseError::at(t, Code::UnknownElement, format!("`{name}` is not an object of the database"))
            })?;
            class.push(idx);
        }
        objects.push(class);
    } else {
        while cur.peek().is_some() {
            let (t, tid) = cur.ident("a cell")?;
            cur.expect_sym(".")?;
            let pos = cur.position()?;
            let fid = db.fact_by_tid(tid).ok_or_else(|| {
                ParseError::at(t, Code::UnknownElement, format!("unknown tid `{tid}`"))
            })?;
            let rel = db.schema().relation(db.fact_relation(fid));
            match rel.type_at(pos) {
                None => {
                    return Err(ParseError::at(
                        t,
                        Code::UnknownElement,
                        format!("`{tid}` has no position {pos}"),
                    ))
                }
                Some(PosType::Obj) => {
                    return Err(ParseError::at(
                        t,
                        Code::NotValuePosition,
                        format!("position {pos} of `{}` is not a value position", rel.name),
                    ))
                }
                Some(PosType::Val) => {}
            }
            class.push(db.cell_index(fid, pos).expect("value position"));
        }
        cells.push(class);
    }
    Ok(())
}

fn to_partition(
    n: usize,
    classes: &[Vec<usize>],
    lines: &[usize],
) -> Result<Partition, ParseError> {
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut p = Partition::identity(n);
    for (k, class) in classes.iter().enumerate() {
        for &x in class {
            if let Some(prev) = owner.insert(x, k) {
                if prev != k {
                    return Err(ParseError::new(
                        Code::OverlappingClasses,
                        lines[k],
                        1,
                        format!("element also listed in the class on line {}", lines[prev]),
                    ));
                }
            }
            p.union(class[0], x);
        }
    }
    Ok(p)
}

/// Parse a workspace: relations first, then facts, similarity and rules.
pub fn parse_workspace(text: &str) -> Result<Workspace, ParseError> {
    let ls = lines(text)?;
    let mut schema = Schema::new();
    for l in &ls {
        let mut cur = Cursor::new(&l.toks, l.number, l.len);
        if classify(&cur) == Some(LineKind::Relation) {
            parse_relation(&mut cur, &mut schema)?;
        }
    }
    let mut facts = Vec::new();
    let mut seen = HashSet::new();
    let mut oracle = SimilarityOracle::new();
    let mut spec = Specification::new();
    for l in &ls {
        let mut cur = Cursor::new(&l.toks, l.number, l.len);
        match classify(&cur) {
            Some(LineKind::Relation) => {}
            Some(LineKind::Fact) => facts.push(parse_fact(&mut cur, &schema, &mut seen)?),
            Some(LineKind::Sim) => parse_sim(&mut cur, &mut oracle)?,
            Some(LineKind::Rule) => match parse_rule(&mut cur, &schema, l.number)? {
                ParsedRule::Object(r) => spec.object_rules.push(r),
                ParsedRule::Value(r) => spec.value_rules.push(r),
                ParsedRule::Constraint(d) => spec.constraints.push(d),
            },
            Some(k @ (LineKind::Solution | LineKind::Query)) => {
                return Err(ParseError::at(
                    &l.toks[0],
                    Code::Syntax,
                    format!(
                        "{} lines belong in a separate file",
                        if k == LineKind::Query { "query" } else { "solution" }
                    ),
                ))
            }
            None => {
                return Err(ParseError::at(&l.toks[0], Code::Syntax, "expected a declaration"))
            }
        }
    }
    let db = Database::new(schema, facts)
        .map_err(|e| ParseError::new(model_code(&e), 1, 1, e.to_string()))?;
    Ok(Workspace { db, oracle, spec })
}

fn only(text: &str, allowed: &[LineKind], what: &str) -> Result<(), ParseError> {
    for l in lines(text)? {
        let cur = Cursor::new(&l.toks, l.number, l.len);
        match classify(&cur) {
            Some(k) if allowed.contains(&k) => {}
            _ => {
                return Err(ParseError::at(
                    &l.toks[0],
                    Code::Syntax,
                    format!("only {what} lines are allowed here"),
                ))
            }
        }
    }
    Ok(())
}

pub fn parse_schema(text: &str) -> Result<Schema, ParseError> {
    only(text, &[LineKind::Relation], "relation")?;
    Ok(parse_workspace(text)?.db.schema().clone())
}

pub fn parse_database(text: &str, schema: &Schema) -> Result<Database, ParseError> {
    only(text, &[LineKind::Fact], "fact")?;
    let mut facts = Vec::new();
    let mut seen = HashSet::new();
    for l in lines(text)? {
        let mut cur = Cursor::new(&l.toks, l.number, l.len);
        facts.push(parse_fact(&mut cur, schema, &mut seen)?);
    }
    Database::new(schema.clone(), facts)
        .map_err(|e| ParseError::new(model_code(&e), 1, 1, e.to_string()))
}

pub fn parse_sim_table(text: &str) -> Result<SimilarityOracle, ParseError> {
    only(text, &[LineKind::Sim], "sim")?;
    let mut oracle = SimilarityOracle::new();
    for l in lines(text)? {
        parse_sim(&mut Cursor::new(&l.toks, l.number, l.len), &mut oracle)?;
    }
    Ok(oracle)
}

pub fn parse_spec(text: &str, schema: &Schema) -> Result<Specification, ParseError> {
    only(text, &[LineKind::Rule], "rule or constraint")?;
    let mut spec = Specification::new();
    for l in lines(text)? {
        match parse_rule(&mut Cursor::new(&l.toks, l.number, l.len), schema, l.number)? {
            ParsedRule::Object(r) => spec.object_rules.push(r),
            ParsedRule::Value(r) => spec.value_rules.push(r),
            ParsedRule::Constraint(d) => spec.constraints.push(d),
        }
    }
    Ok(spec)
}

/// Parse a `.sol` document. Elements not listed stay in singleton classes.
pub fn parse_solution(
    text: &str,
    db: &Database,
) -> Result<(ObjectPartition, CellPartition), ParseError> {
    only(text, &[LineKind::Solution], "`eqo:` or `eqv:`")?;
    let mut objects = Vec::new();
    let mut cells = Vec::new();
    let mut obj_lines = Vec::new();
    let mut cell_lines = Vec::new();
    for l in lines(text)? {
        let mut cur = Cursor::new(&l.toks, l.number, l.len);
        let before = objects.len();
        parse_solution_line(&mut cur, db, &mut objects, &mut cells)?;
        if objects.len() > before {
            obj_lines.push(l.number);
        } else {
            cell_lines.push(l.number);
        }
    }
    Ok((
        ObjectPartition(to_partition(db.num_objects(), &objects, &obj_lines)?),
        CellPartition(to_partition(db.num_cells(), &cells, &cell_lines)?),
    ))
}

/// Parse a `.q` document holding one `query(…): body` line.
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query, ParseError> {
    only(text, &[LineKind::Query], "query")?;
    let ls = lines(text)?;
    let [l] = ls.as_slice() else {
        return Err(ParseError::new(
            Code::Syntax,
            ls.get(1).map_or(1, |l| l.number),
            1,
            "a query file holds exactly one query",
        ));
    };
    let mut cur = Cursor::new(&l.toks, l.number, l.len);
    cur.keyword("query")?;
    cur.expect_sym("(")?;
    let mut free = Vec::new();
    if !cur.eat_sym(")") {
        loop {
            let (_, v) = cur.ident("an answer variable")?;
            free.push(Var::new(v));
            if cur.eat_sym(")") {
                break;
            }
            cur.expect_sym(",")?;
        }
    }
    cur.expect_sym(":")?;
    let mut q = parse_body(&mut cur, &[])?;
    cur.end()?;
    q.free = free;
    q.validate(schema)
        .map_err(|e| ParseError::validation(e, l.number))?;
    Ok(q)
}

/// Parse a cell literal such as `t1.2`.
pub fn parse_cell(text: &str) -> Result<Cell, ParseError> {
    let toks = lex_line(text, 1)?;
    let mut cur = Cursor::new(&toks, 1, text.chars().count());
    let (_, tid) = cur.ident("a tid")?;
    cur.expect_sym(".")?;
    let pos = cur.position()?;
    cur.end()?;
    Ok(Cell::new(tid, pos))
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUTHORS: &str = include_str!("../data/authors.lace");

    const SCHEMA: &str = "relation Author(aid: obj, name: val, inst: val)\n\
                          relation Wrote(aid: obj, pid: obj)\n";

    fn code_of(text: &str) -> String {
        parse_workspace(text).unwrap_err().code.to_string()
    }

    #[test]
    fn authors_parses() {
        let ws = parse_workspace(AUTHORS).unwrap();
        assert_eq!(ws.db.facts().len(), 21);
        assert_eq!(ws.db.num_objects(), 13);
        assert_eq!(ws.db.num_cells(), 26);
        assert_eq!(ws.spec.object_rules.len(), 2);
        assert_eq!(ws.spec.value_rules.len(), 1);
        assert_eq!(ws.spec.constraints.len(), 2);
        assert!(ws
            .oracle
            .sim(&Constant::val("Joe Smith"), &Constant::val("J. Smith")));
        assert_eq!(
            ws.schema().get("Author").unwrap().types,
            vec![PosType::Obj, PosType::Val, PosType::Val]
        );
    }

    #[test]
    fn relation_line() {
        let s = parse_schema("relation Author(aid: obj, name: val, inst: val)").unwrap();
        let r = s.get("Author").unwrap();
        assert_eq!(r.arity(), 3);
        let s = parse_schema("relation R(obj, val)").unwrap();
        assert_eq!(s.get("R").unwrap().types, vec![PosType::Obj, PosType::Val]);
    }

    #[test]
    fn fact_line() {
        let schema = parse_schema(SCHEMA).unwrap();
        let db = parse_database("t1: Author(a1, \"J. Smith\", \"Sapienza\")", &schema).unwrap();
        let f = &db.facts()[0];
        assert_eq!(&*f.tid, "t1");
        assert_eq!(f.args[1], Constant::val("J. Smith"));
    }

    #[test]
    fn value_rule_line() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let r = &ws.spec.value_rules[0];
        assert_eq!((r.left_pos, r.right_pos), (2, 2));
        assert_eq!(r.body.free, vec![Var::new("x"), Var::new("y")]);
        assert_eq!(r.body.sims.len(), 1);
        assert_eq!(r.strength, Strength::Hard);
    }

    #[test]
    fn escapes_and_comments() {
        let text = format!("{SCHEMA}t1: Author(a1, \"say \\\"hi\\\" \\\\ # x\", \"i\") # note\n");
        let ws = parse_workspace(&text).unwrap();
        assert_eq!(ws.db.facts()[0].args[1], Constant::val("say \"hi\" \\ # x"));
    }

    #[test]
    fn diagnostic_format() {
        let e = parse_workspace("relation R(a: obj)\nt1: R(a1, $)").unwrap_err();
        assert_eq!(e.to_string(), "E001:2:11:unexpected character `$`");
    }

    #[test]
    fn rejection_codes() {
        let fx = |body: &str| format!("{SCHEMA}t1: Author(a1, \"n\", \"i\")\n{body}\n");
        let cases: Vec<(&str, String)> = vec![
            ("E001", fx("t2: Author(a2, \"n)")),
            ("E002", "relation R(a: int)".into()),
            ("E010", fx("t2: Book(a1)")),
            ("E011", fx("t2: Author(a1, \"n\")")),
            ("E012", fx("t2: Author(\"a1\", \"n\", \"i\")")),
            ("E013", fx("t1: Wrote(a1, p1)")),
            ("E014", fx("relation Wrote(obj)")),
            ("E015", fx("hard val: Author(x, a, n, i), Author(y, a, n2, i2) => EqV(x.1, y.1)")),
            ("E016", fx("deny: Author(t, a, n, i), z != n -> false")),
            ("E017", fx("hard obj: Author(t, a, x, i), Author(t2, a, y, i) => EqO(x, y)")),
            ("E018", fx("hard obj: Author(t, x, n, i), Author(t2, y, n2, i), n != n2 => EqO(x, y)")),
            ("E019", fx("soft obj: Author(t, x, n, i), Author(t2, y, n2, i), x ~ y ~> EqO(x, y)")),
            ("E022", fx("sim metric levenshtein 1.5")),
            ("E023", fx("hard obj: Author(t, x, n, i), Author(t2, y, n, i) ~> EqO(x, y)")),
            ("E024", "relation R()".into()),
        ];
        for (code, text) in cases {
            assert_eq!(code_of(&text), code, "{text}");
        }
    }

    #[test]
    fn solution_rejections() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let err = |s: &str| parse_solution(s, &ws.db).unwrap_err().code.to_string();
        assert_eq!(err("eqo: a1 zz"), "E020");
        assert_eq!(err("eqv: t1.9"), "E020");
        assert_eq!(err("eqv: t1.1 t2.1"), "E015");
        assert_eq!(err("eqo: a1 a2\neqo: a2 a3"), "E021");
        assert_eq!(err("eqo: a1\nquery(): Wrote(t, x, y)"), "E002");
    }

    #[test]
    fn solution_document() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let (e, v) = parse_solution("# merged\neqo: a1 a2 a5\neqv: t1.2 t2.2\n", &ws.db).unwrap();
        assert!(e.same(&ws.db, &Constant::obj("a1"), &Constant::obj("a5")));
        assert!(v.same(&ws.db, &Cell::new("t1", 2), &Cell::new("t2", 2)));
        assert!(!v.same(&ws.db, &Cell::new("t1", 2), &Cell::new("t5", 2)));
        let (e, v) = parse_solution("", &ws.db).unwrap();
        assert!(e.0.is_identity() && v.0.is_identity());
    }

    #[test]
    fn query_document() {
        let ws = parse_workspace(AUTHORS).unwrap();
        let q = parse_query("query(): Wrote(t, @a5, p)", ws.schema()).unwrap();
        assert!(q.is_boolean());
        assert_eq!(q.atoms[0].args[1], Term::Const(Constant::obj("a5")));
        let q = parse_query("query(x, n): Author(t, x, n, \"NYU\")", ws.schema()).unwrap();
        assert_eq!(q.free.len(), 2);
        let q = parse_query("query(): Author(@t1, x, n, i)", ws.schema()).unwrap();
        assert_eq!(q.atoms[0].args[0], Term::Const(Constant::tid("t1")));
        let e = parse_query("query(x): Author(t, a, n, i)", ws.schema()).unwrap_err();
        assert_eq!(e.code, Code::Unsafe);
        let e = parse_query("query(): Author(t, a, @n, i)", ws.schema()).unwrap_err();
        assert_eq!(e.code, Code::KindMismatch);
    }

    #[test]
    fn cell_literal() {
        assert_eq!(parse_cell("t12.3").unwrap(), Cell::new("t12", 3));
        assert!(parse_cell("t12").is_err());
    }
}
