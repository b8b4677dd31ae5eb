//! Schemas, TID-annotated databases, cells, and the two equivalence relations
//! that make up a solution: one over objects, one over value cells.
//!
//! Constants are interned per database into dense [`ConstId`]s. Objects and
//! cells get their own dense indices so that partitions can be stored as flat
//! label vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("relation `{0}` declared twice")]
    DuplicateRelation(String),
    #[error("relation `{0}` must have at least one position")]
    EmptyRelation(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` expects {expected} arguments, got {got}")]
    Arity {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("argument {position} of `{relation}` must be {expected}, got {got}")]
    KindMismatch {
        relation: String,
        position: usize,
        expected: Kind,
        got: Kind,
    },
    #[error("tid `{0}` is used by more than one fact")]
    DuplicateTid(String),
    #[error("{0} is not an element of the universe")]
    OutsideUniverse(String),
}

/// The three disjoint constant namespaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Obj,
    Val,
    Tid,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Obj => "an object",
            Kind::Val => "a value",
            Kind::Tid => "a tid",
        })
    }
}

/// Type of a non-tid position of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosType {
    Obj,
    Val,
}

impl PosType {
    pub fn kind(self) -> Kind {
        match self {
            PosType::Obj => Kind::Obj,
            PosType::Val => Kind::Val,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant {
    pub kind: Kind,
    pub lexeme: Arc<str>,
}

impl Constant {
    pub fn new(kind: Kind, lexeme: impl Into<Arc<str>>) -> Self {
        Constant {
            kind,
            lexeme: lexeme.into(),
        }
    }
    pub fn obj(lexeme: impl Into<Arc<str>>) -> Self {
        Self::new(Kind::Obj, lexeme)
    }
    pub fn val(lexeme: impl Into<Arc<str>>) -> Self {
        Self::new(Kind::Val, lexeme)
    }
    pub fn tid(lexeme: impl Into<Arc<str>>) -> Self {
        Self::new(Kind::Tid, lexeme)
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Val => write!(f, "{:?}", &*self.lexeme),
            _ => f.write_str(&self.lexeme),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    pub name: String,
    /// Types of positions 1..=k.
    pub types: Vec<PosType>,
}

impl Relation {
    pub fn arity(&self) -> usize {
        self.types.len()
    }

    /// Type of 1-based position `i`, if it exists.
    pub fn type_at(&self, i: usize) -> Option<PosType> {
        i.checked_sub(1).and_then(|j| self.types.get(j).copied())
    }

    pub fn value_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions_of(PosType::Val)
    }

    pub fn object_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions_of(PosType::Obj)
    }

    fn positions_of(&self, ty: PosType) -> impl Iterator<Item = usize> + '_ {
        self.types
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t == ty)
            .map(|(j, _)| j + 1)
    }
}

pub type RelId = usize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    relations: Vec<Relation>,
    by_name: HashMap<String, RelId>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, types: Vec<PosType>) -> Result<RelId, ModelError> {
        if self.by_name.contains_key(name) {
            return Err(ModelError::DuplicateRelation(name.to_string()));
        }
        if types.is_empty() {
            return Err(ModelError::EmptyRelation(name.to_string()));
        }
        let id = self.relations.len();
        self.relations.push(Relation {
            name: name.to_string(),
            types,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn with(mut self, name: &str, types: &[PosType]) -> Result<Self, ModelError> {
        self.add(name, types.to_vec())?;
        Ok(self)
    }

    pub fn id(&self, name: &str) -> Option<RelId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.id(name).map(|id| &self.relations[id])
    }

    pub fn relation(&self, id: RelId) -> &Relation {
        &self.relations[id]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// All `(relation, position)` pairs with object type, in declaration order.
    pub fn object_positions(&self) -> Vec<(RelId, usize)> {
        self.relations
            .iter()
            .enumerate()
            .flat_map(|(r, rel)| rel.object_positions().map(move |i| (r, i)))
            .collect()
    }

    /// The schema with every object position turned into a value position.
    pub fn retyped_to_values(&self) -> Schema {
        let mut out = Schema::new();
        for rel in &self.relations {
            out.add(&rel.name, vec![PosType::Val; rel.arity()])
                .expect("names are unique in the source schema");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub tid: Arc<str>,
    pub relation: String,
    pub args: Vec<Constant>,
}

impl Fact {
    pub fn new(tid: &str, relation: &str, args: Vec<Constant>) -> Self {
        Fact {
            tid: tid.into(),
            relation: relation.to_string(),
            args,
        }
    }

    /// Constant at position `j` (0 is the tid).
    pub fn at(&self, j: usize) -> Constant {
        if j == 0 {
            Constant::tid(self.tid.clone())
        } else {
            self.args[j - 1].clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstId(pub u32);

pub type FactId = usize;

/// Interning table from constants to dense ids.
#[derive(Debug, Clone, Default)]
pub struct Symbols {
    consts: Vec<Constant>,
    index: HashMap<Constant, ConstId>,
}

impl Symbols {
    pub fn intern(&mut self, c: &Constant) -> ConstId {
        if let Some(id) = self.index.get(c) {
            return *id;
        }
        let id = ConstId(self.consts.len() as u32);
        self.consts.push(c.clone());
        self.index.insert(c.clone(), id);
        id
    }

    pub fn lookup(&self, c: &Constant) -> Option<ConstId> {
        self.index.get(c).copied()
    }

    pub fn get(&self, id: ConstId) -> &Constant {
        &self.consts[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.consts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConstId, &Constant)> {
        self.consts
            .iter()
            .enumerate()
            .map(|(i, c)| (ConstId(i as u32), c))
    }
}

/// A value cell `⟨t, i⟩`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub tid: Arc<str>,
    pub position: usize,
}

impl Cell {
    pub fn new(tid: &str, position: usize) -> Self {
        Cell {
            tid: tid.into(),
            position,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.tid, self.position)
    }
}

/// A TID-annotated database over a fixed schema.
#[derive(Debug, Clone)]
pub struct Database {
    schema: Schema,
    facts: Vec<Fact>,
    fact_rel: Vec<RelId>,
    /// Interned arguments, position 0 holding the tid.
    rows: Vec<Vec<ConstId>>,
    by_relation: Vec<Vec<FactId>>,
    tid_index: HashMap<Arc<str>, FactId>,
    symbols: Symbols,
    objects: Vec<ConstId>,
    object_index: HashMap<ConstId, usize>,
    cells: Vec<(FactId, usize)>,
    cell_index: HashMap<(FactId, usize), usize>,
}

impl Database {
    pub fn new(schema: Schema, facts: Vec<Fact>) -> Result<Self, ModelError> {
        let mut tid_index = HashMap::new();
        let mut fact_rel = Vec::with_capacity(facts.len());
        for (fid, f) in facts.iter().enumerate() {
            let rid = schema
                .id(&f.relation)
                .ok_or_else(|| ModelError::UnknownRelation(f.relation.clone()))?;
            let rel = schema.relation(rid);
            if rel.arity() != f.args.len() {
                return Err(ModelError::Arity {
                    relation: rel.name.clone(),
                    expected: rel.arity(),
                    got: f.args.len(),
                });
            }
            for (j, (arg, ty)) in f.args.iter().zip(&rel.types).enumerate() {
                if arg.kind != ty.kind() {
                    return Err(ModelError::KindMismatch {
                        relation: rel.name.clone(),
                        position: j + 1,
                        expected: ty.kind(),
                        got: arg.kind,
                    });
                }
            }
            if tid_index.insert(f.tid.clone(), fid).is_some() {
                return Err(ModelError::DuplicateTid(f.tid.to_string()));
            }
            fact_rel.push(rid);
        }

        let mut symbols = Symbols::default();
        let mut rows = Vec::with_capacity(facts.len());
        let mut by_relation = vec![Vec::new(); schema.len()];
        let mut object_set = BTreeSet::new();
        let mut cells = Vec::new();
        for (fid, f) in facts.iter().enumerate() {
            let mut row = vec![symbols.intern(&Constant::tid(f.tid.clone()))];
            for (j, arg) in f.args.iter().enumerate() {
                row.push(symbols.intern(arg));
                match arg.kind {
                    Kind::Obj => {
                        object_set.insert(arg.clone());
                    }
                    Kind::Val => cells.push((fid, j + 1)),
                    Kind::Tid => unreachable!("positions are typed obj/val"),
                }
            }
            rows.push(row);
            by_relation[fact_rel[fid]].push(fid);
        }
        let objects: Vec<ConstId> = object_set
            .iter()
            .map(|o| symbols.lookup(o).expect("interned"))
            .collect();
        let object_index = objects.iter().enumerate().map(|(i, o)| (*o, i)).collect();
        let cell_index = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Database {
            schema,
            facts,
            fact_rel,
            rows,
            by_relation,
            tid_index,
            symbols,
            objects,
            object_index,
            cells,
            cell_index,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        Database::new(schema, Vec::new()).expect("empty database is valid")
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, id: FactId) -> &Fact {
        &self.facts[id]
    }

    pub fn fact_relation(&self, id: FactId) -> RelId {
        self.fact_rel[id]
    }

    pub fn row(&self, id: FactId) -> &[ConstId] {
        &self.rows[id]
    }

    pub fn facts_of(&self, rel: RelId) -> &[FactId] {
        &self.by_relation[rel]
    }

    pub fn fact_by_tid(&self, tid: &str) -> Option<FactId> {
        self.tid_index.get(tid).copied()
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn constant(&self, id: ConstId) -> &Constant {
        self.symbols.get(id)
    }

    /// `Dom(D)`: every constant occurring in the database, tids included.
    pub fn dom(&self) -> BTreeSet<Constant> {
        self.symbols.iter().map(|(_, c)| c.clone()).collect()
    }

    /// `Obj(D)` in sorted order.
    pub fn objects(&self) -> Vec<Constant> {
        self.objects
            .iter()
            .map(|o| self.constant(*o).clone())
            .collect()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn object_id(&self, index: usize) -> ConstId {
        self.objects[index]
    }

    pub fn object_index(&self, id: ConstId) -> Option<usize> {
        self.object_index.get(&id).copied()
    }

    pub fn object_index_of(&self, c: &Constant) -> Option<usize> {
        self.symbols.lookup(c).and_then(|id| self.object_index(id))
    }

    /// `Cells(D)` in fact order, then position order.
    pub fn cells(&self) -> Vec<Cell> {
        (0..self.cells.len()).map(|i| self.cell(i)).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, index: usize) -> Cell {
        let (fid, pos) = self.cells[index];
        Cell {
            tid: self.facts[fid].tid.clone(),
            position: pos,
        }
    }

    pub fn cell_slot(&self, index: usize) -> (FactId, usize) {
        self.cells[index]
    }

    pub fn cell_index(&self, fact: FactId, position: usize) -> Option<usize> {
        self.cell_index.get(&(fact, position)).copied()
    }

    pub fn cell_index_of(&self, cell: &Cell) -> Option<usize> {
        self.fact_by_tid(&cell.tid)
            .and_then(|f| self.cell_index(f, cell.position))
    }

    /// Value stored in the cell with the given index.
    pub fn cell_value(&self, index: usize) -> ConstId {
        let (fid, pos) = self.cells[index];
        self.rows[fid][pos]
    }
}

/// An equivalence relation over `0..n`, stored as the smallest member of each
/// element's class. Two partitions are equal iff their label vectors are.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    repr: Vec<u32>,
}

impl Partition {
    pub fn identity(n: usize) -> Self {
        Partition {
            repr: (0..n as u32).collect(),
        }
    }

    pub fn from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ModelError> {
        let mut p = Partition::identity(n);
        for (a, b) in pairs {
            for x in [a, b] {
                if x >= n {
                    return Err(ModelError::OutsideUniverse(format!("index {x}")));
                }
            }
            p.union(a, b);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.repr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repr.is_empty()
    }

    pub fn find(&self, a: usize) -> usize {
        self.repr[a] as usize
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.repr[a] == self.repr[b]
    }

    /// Merge the classes of `a` and `b`; returns false if they already coincide.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.repr[a], self.repr[b]);
        if ra == rb {
            return false;
        }
        let (keep, drop) = (ra.min(rb), ra.max(rb));
        for r in self.repr.iter_mut() {
            if *r == drop {
                *r = keep;
            }
        }
        true
    }

    pub fn is_identity(&self) -> bool {
        self.repr.iter().enumerate().all(|(i, r)| *r as usize == i)
    }

    /// Pair-set inclusion: every pair related here is related in `other`.
    pub fn is_subset_of(&self, other: &Partition) -> bool {
        self.repr.len() == other.repr.len()
            && self
                .repr
                .iter()
                .enumerate()
                .all(|(i, r)| other.repr[i] == other.repr[*r as usize])
    }

    /// Classes ordered by smallest member, members ascending.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.repr.iter().enumerate() {
            groups.entry(*r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Members of the class of `a`.
    pub fn class_of(&self, a: usize) -> Vec<usize> {
        let r = self.repr[a];
        (0..self.repr.len())
            .filter(|i| self.repr[*i] == r)
            .collect()
    }

    /// Number of related ordered pairs, reflexive ones included.
    pub fn pair_count(&self) -> usize {
        self.classes().iter().map(|c| c.len() * c.len()).sum()
    }
}

/// `EqRel(pairs, universe)`: classes of the smallest equivalence relation on
/// `universe` containing `pairs`, each sorted, ordered by smallest member.
pub fn eqrel_close<T: Ord + Clone + fmt::Debug>(
    pairs: &[(T, T)],
    universe: &BTreeSet<T>,
) -> Result<Vec<Vec<T>>, ModelError> {
    let elems: Vec<&T> = universe.iter().collect();
    let index = |x: &T| {
        elems
            .binary_search(&x)
            .map_err(|_| ModelError::OutsideUniverse(format!("{x:?}")))
    };
    let mut p = Partition::identity(elems.len());
    for (a, b) in pairs {
        p.union(index(a)?, index(b)?);
    }
    Ok(p.classes()
        .into_iter()
        .map(|c| c.into_iter().map(|i| elems[i].clone()).collect())
        .collect())
}

/// `E`: an equivalence relation over `Obj(D)`, indexed by the database's
/// object order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectPartition(pub Partition);

/// `V`: an equivalence relation over `Cells(D)`, indexed by the database's
/// cell order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellPartition(pub Partition);

impl ObjectPartition {
    pub fn trivial(db: &Database) -> Self {
        ObjectPartition(Partition::identity(db.num_objects()))
    }

    pub fn from_pairs(db: &Database, pairs: &[(Constant, Constant)]) -> Result<Self, ModelError> {
        let idx = |c: &Constant| {
            db.object_index_of(c)
                .ok_or_else(|| ModelError::OutsideUniverse(format!("object {c}")))
        };
        let mut p = Partition::identity(db.num_objects());
        for (a, b) in pairs {
            p.union(idx(a)?, idx(b)?);
        }
        Ok(ObjectPartition(p))
    }

    pub fn from_classes(db: &Database, classes: &[Vec<Constant>]) -> Result<Self, ModelError> {
        let pairs: Vec<_> = classes
            .iter()
            .flat_map(|c| c.iter().map(move |x| (c[0].clone(), x.clone())))
            .collect();
        Self::from_pairs(db, &pairs)
    }

    pub fn same(&self, db: &Database, a: &Constant, b: &Constant) -> bool {
        match (db.object_index_of(a), db.object_index_of(b)) {
            (Some(i), Some(j)) => self.0.same(i, j),
            _ => false,
        }
    }

    /// Non-singleton classes as constants, canonically ordered.
    pub fn nontrivial_classes(&self, db: &Database) -> Vec<Vec<Constant>> {
        let mut out: Vec<Vec<Constant>> = self
            .0
            .classes()
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let mut v: Vec<Constant> = c
                    .into_iter()
                    .map(|i| db.constant(db.object_id(i)).clone())
                    .collect();
                v.sort();
                v
            })
            .collect();
        out.sort();
        out
    }
}

impl CellPartition {
    pub fn trivial(db: &Database) -> Self {
        CellPartition(Partition::identity(db.num_cells()))
    }

    pub fn from_pairs(db: &Database, pairs: &[(Cell, Cell)]) -> Result<Self, ModelError> {
        let idx = |c: &Cell| {
            db.cell_index_of(c)
                .ok_or_else(|| ModelError::OutsideUniverse(format!("cell {c}")))
        };
        let mut p = Partition::identity(db.num_cells());
        for (a, b) in pairs {
            p.union(idx(a)?, idx(b)?);
        }
        Ok(CellPartition(p))
    }

    pub fn from_classes(db: &Database, classes: &[Vec<Cell>]) -> Result<Self, ModelError> {
        let pairs: Vec<_> = classes
            .iter()
            .flat_map(|c| c.iter().map(move |x| (c[0].clone(), x.clone())))
            .collect();
        Self::from_pairs(db, &pairs)
    }

    pub fn same(&self, db: &Database, a: &Cell, b: &Cell) -> bool {
        match (db.cell_index_of(a), db.cell_index_of(b)) {
            (Some(i), Some(j)) => self.0.same(i, j),
            _ => false,
        }
    }

    pub fn nontrivial_classes(&self, db: &Database) -> Vec<Vec<Cell>> {
        let mut out: Vec<Vec<Cell>> = self
            .0
            .classes()
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let mut v: Vec<Cell> = c.into_iter().map(|i| db.cell(i)).collect();
                v.sort();
                v
            })
            .collect();
        out.sort();
        out
    }
}

/// A set of constants, sorted and deduplicated.
pub type ConstSet = Arc<[ConstId]>;

/// `D_{E,V}`: the database induced by `D`, `E`, and `V`. Arguments are
/// non-empty constant sets; position 0 of every fact is its singleton tid.
#[derive(Debug, Clone)]
pub struct ExtendedDatabase<'a> {
    db: &'a Database,
    sets: Vec<Vec<ConstSet>>,
}

impl<'a> ExtendedDatabase<'a> {
    pub fn database(&self) -> &'a Database {
        self.db
    }

    /// Argument sets of fact `id`, position 0 first.
    pub fn sets(&self, id: FactId) -> &[ConstSet] {
        &self.sets[id]
    }

    pub fn set(&self, id: FactId, position: usize) -> &ConstSet {
        &self.sets[id][position]
    }

    /// Argument sets rendered as constants, for inspection and tests.
    pub fn constants_at(&self, tid: &str, position: usize) -> Option<BTreeSet<Constant>> {
        let fid = self.db.fact_by_tid(tid)?;
        let set = self.sets[fid].get(position)?;
        Some(set.iter().map(|c| self.db.constant(*c).clone()).collect())
    }
}

/// Build `D_{E,V}`.
pub fn induce_extended_db<'a>(
    db: &'a Database,
    e: &ObjectPartition,
    v: &CellPartition,
) -> Result<ExtendedDatabase<'a>, ModelError> {
    if e.0.len() != db.num_objects() {
        return Err(ModelError::OutsideUniverse(format!(
            "object partition over {} elements, database has {} objects",
            e.0.len(),
            db.num_objects()
        )));
    }
    if v.0.len() != db.num_cells() {
        return Err(ModelError::OutsideUniverse(format!(
            "cell partition over {} elements, database has {} cells",
            v.0.len(),
            db.num_cells()
        )));
    }
    Ok(induce_unchecked(db, &e.0, &v.0))
}

pub(crate) fn induce_unchecked<'a>(
    db: &'a Database,
    e: &Partition,
    v: &Partition,
) -> ExtendedDatabase<'a> {
    let mut obj_sets: HashMap<usize, ConstSet> = HashMap::new();
    for class in e.classes() {
        let mut ids: Vec<ConstId> = class.iter().map(|i| db.object_id(*i)).collect();
        ids.sort();
        obj_sets.insert(class[0], ids.into());
    }
    let mut cell_sets: HashMap<usize, ConstSet> = HashMap::new();
    for class in v.classes() {
        let mut ids: Vec<ConstId> = class.iter().map(|i| db.cell_value(*i)).collect();
        ids.sort();
        ids.dedup();
        cell_sets.insert(class[0], ids.into());
    }
    let sets = (0..db.facts().len())
        .map(|fid| {
            let row = db.row(fid);
            row.iter()
                .enumerate()
                .map(|(j, c)| {
                    if j == 0 {
                        return Arc::from(vec![*c]);
                    }
                    match db.constant(*c).kind {
                        Kind::Obj => {
                            let oi = db.object_index(*c).expect("object of the database");
                            obj_sets[&e.find(oi)].clone()
                        }
                        _ => {
                            let ci = db.cell_index(fid, j).expect("value cell");
                            cell_sets[&v.find(ci)].clone()
                        }
                    }
                })
                .collect()
        })
        .collect();
    ExtendedDatabase { db, sets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_db() -> Database {
        let schema = Schema::new()
            .with("R", &[PosType::Obj, PosType::Val])
            .unwrap();
        Database::new(
            schema,
            vec![
                Fact::new("t1", "R", vec![Constant::obj("a"), Constant::val("x")]),
                Fact::new("t2", "R", vec![Constant::obj("b"), Constant::val("y")]),
                Fact::new("t3", "R", vec![Constant::obj("a"), Constant::val("x")]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eqrel_identity_when_no_pairs() {
        let u: BTreeSet<&str> = ["a", "b"].into_iter().collect();
        assert_eq!(eqrel_close(&[], &u).unwrap(), vec![vec!["a"], vec!["b"]]);
    }

    #[test]
    fn eqrel_transitivity() {
        let u: BTreeSet<&str> = ["a", "b", "c", "d"].into_iter().collect();
        let classes = eqrel_close(&[("a", "b"), ("b", "c")], &u).unwrap();
        assert_eq!(classes, vec![vec!["a", "b", "c"], vec!["d"]]);
    }

    #[test]
    fn eqrel_rejects_foreign_elements() {
        let u: BTreeSet<&str> = ["a"].into_iter().collect();
        assert!(matches!(
            eqrel_close(&[("a", "z")], &u),
            Err(ModelError::OutsideUniverse(_))
        ));
    }

    #[test]
    fn database_invariants() {
        let schema = Schema::new().with("R", &[PosType::Obj]).unwrap();
        let dup = Database::new(
            schema.clone(),
            vec![
                Fact::new("t", "R", vec![Constant::obj("a")]),
                Fact::new("t", "R", vec![Constant::obj("b")]),
            ],
        );
        assert_eq!(dup.unwrap_err(), ModelError::DuplicateTid("t".into()));
        let wrong_kind = Database::new(
            schema.clone(),
            vec![Fact::new("t", "R", vec![Constant::val("a")])],
        );
        assert!(matches!(wrong_kind, Err(ModelError::KindMismatch { .. })));
        let unknown = Database::new(schema, vec![Fact::new("t", "S", vec![])]);
        assert!(matches!(unknown, Err(ModelError::UnknownRelation(_))));
        assert!(Schema::new().with("Z", &[]).is_err());
    }

    #[test]
    fn cells_objects_dom() {
        let db = small_db();
        assert_eq!(db.objects(), vec![Constant::obj("a"), Constant::obj("b")]);
        assert_eq!(
            db.cells(),
            vec![Cell::new("t1", 2), Cell::new("t2", 2), Cell::new("t3", 2)]
        );
        assert_eq!(db.dom().len(), 3 + 2 + 2);
        let empty = Database::empty(db.schema().clone());
        assert!(empty.cells().is_empty() && empty.objects().is_empty() && empty.dom().is_empty());
    }

    #[test]
    fn partition_union_and_inclusion() {
        let mut p = Partition::identity(4);
        let q0 = p.clone();
        assert!(p.union(2, 3));
        assert!(!p.union(3, 2));
        assert!(p.union(0, 3));
        assert_eq!(p.classes(), vec![vec![0, 2, 3], vec![1]]);
        assert!(q0.is_subset_of(&p));
        assert!(!p.is_subset_of(&q0));
        assert_eq!(p.pair_count(), 9 + 1);
    }

    #[test]
    fn induced_sets() {
        let db = small_db();
        let e = ObjectPartition::from_pairs(&db, &[(Constant::obj("a"), Constant::obj("b"))])
            .unwrap();
        let v = CellPartition::from_pairs(&db, &[(Cell::new("t1", 2), Cell::new("t2", 2))])
            .unwrap();
        let x = induce_extended_db(&db, &e, &v).unwrap();
        let ab: BTreeSet<_> = [Constant::obj("a"), Constant::obj("b")].into();
        let xy: BTreeSet<_> = [Constant::val("x"), Constant::val("y")].into();
        assert_eq!(x.constants_at("t3", 1).unwrap(), ab);
        assert_eq!(x.constants_at("t2", 2).unwrap(), xy);
        assert_eq!(
            x.constants_at("t3", 2).unwrap(),
            [Constant::val("x")].into()
        );
        assert_eq!(x.constants_at("t1", 0).unwrap(), [Constant::tid("t1")].into());
    }

    #[test]
    fn induce_rejects_wrong_universe() {
        let db = small_db();
        let e = ObjectPartition(Partition::identity(5));
        assert!(induce_extended_db(&db, &e, &CellPartition::trivial(&db)).is_err());
    }
}
