//! Seeded generation of small random instances, rules and queries.
//!
//! Objects are named `o<k>` and values `v<k>`, so retyping objects to
//! values never merges two constants. Object and value variables also use
//! disjoint names.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Constant, Database, Fact, Partition, PosType, Schema};
use crate::parse::Workspace;
use crate::sim::SimilarityOracle;
use crate::syntax::{
    DenialConstraint, ObjectRule, Query, RelAtom, Specification, Strength, Term, ValueRule, Var,
};

pub use rand::SeedableRng;
pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct InstanceConfig {
    pub max_objects: usize,
    pub max_cells: usize,
    pub max_facts: usize,
    pub max_rules: usize,
    pub max_constraints: usize,
    pub object_rules: bool,
    pub value_rules: bool,
    pub inequalities: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            max_objects: 6,
            max_cells: 8,
            max_facts: 6,
            max_rules: 3,
            max_constraints: 2,
            object_rules: true,
            value_rules: true,
            inequalities: true,
        }
    }
}

fn random_schema(rng: &mut Rng64) -> Schema {
    let mut schema = Schema::new();
    let n = rng.gen_range(1..=2);
    for r in 0..n {
        let arity = rng.gen_range(1..=3);
        let mut types: Vec<PosType> = (0..arity)
            .map(|_| if rng.gen_bool(0.5) { PosType::Obj } else { PosType::Val })
            .collect();
        // Keep both kinds available somewhere.
        if r == 0 && arity >= 2 {
            types[0] = PosType::Obj;
            types[1] = PosType::Val;
        }
        schema.add(&format!("R{r}"), types).expect("fresh name");
    }
    schema
}

fn random_database(rng: &mut Rng64, schema: &Schema, cfg: &InstanceConfig) -> Database {
    let n_obj = rng.gen_range(2..=4);
    let n_val = rng.gen_range(2..=4);
    let mut facts = Vec::new();
    let mut objects = std::collections::BTreeSet::new();
    let mut cells = 0;
    let n_facts = rng.gen_range(1..=cfg.max_facts);
    for k in 0..n_facts {
        let rel = &schema.relations()[rng.gen_range(0..schema.len())];
        let args: Vec<Constant> = rel
            .types
            .iter()
            .map(|t| match t {
                PosType::Obj => Constant::obj(format!("o{}", rng.gen_range(0..n_obj))),
                PosType::Val => Constant::val(format!("v{}", rng.gen_range(0..n_val))),
            })
            .collect();
        let new_objects: Vec<&Constant> = args
            .iter()
            .filter(|c| c.kind == crate::model::Kind::Obj && !objects.contains(*c))
            .collect();
        let new_cells = rel.value_positions().count();
        let mut fresh = new_objects.clone();
        fresh.dedup();
        if objects.len() + fresh.len() > cfg.max_objects || cells + new_cells > cfg.max_cells {
            continue;
        }
        for c in &args {
            if c.kind == crate::model::Kind::Obj {
                objects.insert(c.clone());
            }
        }
        cells += new_cells;
        facts.push(Fact::new(&format!("t{k}"), &rel.name, args));
    }
    Database::new(schema.clone(), facts).expect("well-typed by construction")
}

fn random_oracle(rng: &mut Rng64) -> SimilarityOracle {
    let mut o = SimilarityOracle::new();
    for _ in 0..rng.gen_range(0..=3) {
        let a = rng.gen_range(0..4);
        let b = rng.gen_range(0..4);
        o.add_pair(&format!("v{a}"), &format!("v{b}"));
    }
    o
}

/// A body of 1 to 3 atoms over small shared variable pools.
fn random_atoms(rng: &mut Rng64, schema: &Schema, db: &Database, tid_prefix: &str) -> Vec<RelAtom> {
    let n = rng.gen_range(1..=3);
    let dom: Vec<Constant> = db.dom().into_iter().collect();
    (0..n)
        .map(|k| {
            let rel = &schema.relations()[rng.gen_range(0..schema.len())];
            let mut args = vec![Term::var(&format!("{tid_prefix}{k}"))];
            for t in &rel.types {
                let constant = rng.gen_bool(0.08);
                let term = match t {
                    PosType::Obj => {
                        let pool: Vec<&Constant> =
                            dom.iter().filter(|c| c.kind == crate::model::Kind::Obj).collect();
                        match pool.choose(rng) {
                            Some(c) if constant => Term::Const((*c).clone()),
                            _ => Term::var(&format!("x{}", rng.gen_range(0..3))),
                        }
                    }
                    PosType::Val => {
                        if constant {
                            Term::Const(Constant::val(format!("v{}", rng.gen_range(0..4))))
                        } else {
                            Term::var(&format!("n{}", rng.gen_range(0..3)))
                        }
                    }
                };
                args.push(term);
            }
            RelAtom::new(&rel.name, args)
        })
        .collect()
}

fn vars_of(atoms: &[RelAtom], prefix: char) -> Vec<Var> {
    let mut out: Vec<Var> = atoms
        .iter()
        .flat_map(|a| a.args.iter().skip(1))
        .filter_map(|t| t.as_var())
        .filter(|v| v.name().starts_with(prefix))
        .cloned()
        .collect();
    out.sort();
    out.dedup();
    out
}

fn add_similarities(rng: &mut Rng64, q: &mut Query) {
    let vals = vars_of(&q.atoms, 'n');
    if !vals.is_empty() && rng.gen_bool(0.4) {
        let a = vals.choose(rng).unwrap().clone();
        let b = vals.choose(rng).unwrap().clone();
        q.sims.push((Term::Var(a), Term::Var(b)));
    }
}

fn random_object_rule(rng: &mut Rng64, schema: &Schema, db: &Database) -> Option<ObjectRule> {
    let atoms = random_atoms(rng, schema, db, "t");
    let objs = vars_of(&atoms, 'x');
    if objs.is_empty() {
        return None;
    }
    let (x, y) = if objs.len() >= 2 && rng.gen_bool(0.85) {
        let two: Vec<Var> = objs.choose_multiple(rng, 2).cloned().collect();
        (two[0].clone(), two[1].clone())
    } else {
        let x = objs.choose(rng).unwrap().clone();
        (x.clone(), x)
    };
    let mut body = Query { atoms, ..Query::default() };
    add_similarities(rng, &mut body);
    let strength = if rng.gen_bool(0.35) { Strength::Hard } else { Strength::Soft };
    Some(ObjectRule::new(strength, x.name(), y.name(), body))
}

fn random_value_rule(rng: &mut Rng64, schema: &Schema, db: &Database) -> Option<ValueRule> {
    let atoms = random_atoms(rng, schema, db, "t");
    let with_values: Vec<usize> = (0..atoms.len())
        .filter(|k| schema.get(&atoms[*k].relation).unwrap().value_positions().count() > 0)
        .collect();
    let (a, b) = if with_values.len() >= 2 && rng.gen_bool(0.85) {
        let two: Vec<usize> = with_values.choose_multiple(rng, 2).copied().collect();
        (two[0], two[1])
    } else {
        let a = *with_values.choose(rng)?;
        (a, a)
    };
    let pick = |rng: &mut Rng64, k: usize| {
        let rel = schema.get(&atoms[k].relation).unwrap();
        let vs: Vec<usize> = rel.value_positions().collect();
        *vs.choose(rng).unwrap()
    };
    let i = pick(rng, a);
    let j = pick(rng, b);
    let tid = |k: usize| atoms[k].args[0].as_var().unwrap().name().to_string();
    let (xt, yt) = (tid(a), tid(b));
    let mut body = Query { atoms, ..Query::default() };
    add_similarities(rng, &mut body);
    let strength = if rng.gen_bool(0.35) { Strength::Hard } else { Strength::Soft };
    Some(ValueRule::new(strength, (&xt, i), (&yt, j), body))
}

fn random_constraint(
    rng: &mut Rng64,
    schema: &Schema,
    db: &Database,
    inequalities: bool,
) -> DenialConstraint {
    let atoms = random_atoms(rng, schema, db, "t");
    let mut body = Query { atoms, ..Query::default() };
    add_similarities(rng, &mut body);
    if inequalities && rng.gen_bool(0.6) {
        let prefix = if rng.gen_bool(0.5) { 'x' } else { 'n' };
        let pool = vars_of(&body.atoms, prefix);
        let pool = if pool.len() >= 2 { pool } else { vars_of(&body.atoms, if prefix == 'x' { 'n' } else { 'x' }) };
        if pool.len() >= 2 {
            let mut two: Vec<Var> = pool.choose_multiple(rng, 2).cloned().collect();
            two.sort();
            body.neqs.push((Term::Var(two[0].clone()), Term::Var(two[1].clone())));
        }
    }
    DenialConstraint::new(body)
}

/// A random instance within the configured size limits.
pub fn random_instance(rng: &mut Rng64, cfg: &InstanceConfig) -> Workspace {
    let schema = random_schema(rng);
    let db = random_database(rng, &schema, cfg);
    let oracle = random_oracle(rng);
    let mut spec = Specification::new();
    let n_rules = rng.gen_range(1..=cfg.max_rules);
    let mut attempts = 0;
    while spec.object_rules.len() + spec.value_rules.len() < n_rules && attempts < 20 {
        attempts += 1;
        let want_value = match (cfg.object_rules, cfg.value_rules) {
            (true, true) => rng.gen_bool(0.5),
            (false, true) => true,
            (true, false) => false,
            (false, false) => break,
        };
        if want_value {
            if let Some(r) = random_value_rule(rng, &schema, &db) {
                spec.value_rules.push(r);
            }
        } else if let Some(r) = random_object_rule(rng, &schema, &db) {
            spec.object_rules.push(r);
        }
    }
    // Constraints violated before any merge leave no solutions; keep only
    // a few of those.
    let trivial = crate::model::induce_extended_db(
        &db,
        &crate::model::ObjectPartition::trivial(&db),
        &crate::model::CellPartition::trivial(&db),
    )
    .expect("trivial partitions");
    for _ in 0..rng.gen_range(0..=cfg.max_constraints) {
        let dc = random_constraint(rng, &schema, &db, cfg.inequalities);
        let violated = !crate::eval::check_dc(&dc, &trivial, &oracle).expect("valid constraint");
        if !violated || rng.gen_bool(0.15) {
            spec.constraints.push(dc);
        }
    }
    spec.validate(&schema).expect("generated specification is well formed");
    Workspace { db, oracle, spec }
}

/// A query without inequalities and with `free` answer variables, or
/// `None` if the body has too few variables.
pub fn random_query(rng: &mut Rng64, db: &Database, free: usize) -> Option<Query> {
    let atoms = random_atoms(rng, db.schema(), db, "s");
    let mut pool = vars_of(&atoms, 'x');
    pool.extend(vars_of(&atoms, 'n'));
    if pool.len() < free {
        return None;
    }
    let mut q = Query { atoms, ..Query::default() };
    add_similarities(rng, &mut q);
    q.free = pool.choose_multiple(rng, free).cloned().collect();
    Some(q)
}

/// A partition of `0..n` produced by up to `merges` random unions.
pub fn random_partition(rng: &mut Rng64, n: usize, merges: usize) -> Partition {
    let mut p = Partition::identity(n);
    extend_partition(rng, &mut p, merges);
    p
}

pub fn extend_partition(rng: &mut Rng64, p: &mut Partition, merges: usize) {
    let n = p.len();
    if n < 2 {
        return;
    }
    for _ in 0..rng.gen_range(0..=merges) {
        p.union(rng.gen_range(0..n), rng.gen_range(0..n));
    }
}
