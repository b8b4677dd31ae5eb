//! Exhaustive reference for the set of solutions.
//!
//! Explores every single-merge derivation from the trivial pair, hard and
//! soft rules alike, with no closure shortcut. Reachable states are then
//! filtered by rule and constraint satisfaction. Only the public model and
//! evaluation functions are used.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::eval::{check_dc, check_object_rule, check_value_rule, eval_answers, EvalError};
use crate::model::{induce_extended_db, Cell, CellPartition, Database, ModelError, ObjectPartition};
use crate::sim::SimilarityOracle;
use crate::syntax::Specification;

pub const MAX_OBJECTS: usize = 6;
pub const MAX_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance has {objects} objects and {cells} cells; the oracle accepts at most {MAX_OBJECTS} and {MAX_CELLS}")]
    Guard { objects: usize, cells: usize },
    #[error("more than {0} reachable states")]
    StateCap(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    /// Refuse instances above the size limits.
    Enforced,
    /// Run anyway, giving up after this many reachable states.
    Lifted { max_states: usize },
}

pub type State = (ObjectPartition, CellPartition);

fn successors(
    db: &Database,
    spec: &Specification,
    oracle: &SimilarityOracle,
    s: &State,
) -> Result<Vec<State>, OracleError> {
    let x = induce_extended_db(db, &s.0, &s.1)?;
    let mut out = Vec::new();
    for r in &spec.object_rules {
        for t in eval_answers(&r.body, &x, oracle)? {
            let (Some(a), Some(b)) = (db.object_index_of(&t[0]), db.object_index_of(&t[1])) else {
                continue;
            };
            let mut e = s.0.clone();
            if e.0.union(a, b) {
                out.push((e, s.1.clone()));
            }
        }
    }
    for r in &spec.value_rules {
        for t in eval_answers(&r.body, &x, oracle)? {
            let a = db.cell_index_of(&Cell::new(&t[0].lexeme, r.left_pos));
            let b = db.cell_index_of(&Cell::new(&t[1].lexeme, r.right_pos));
            let (Some(a), Some(b)) = (a, b) else { continue };
            let mut v = s.1.clone();
            if v.0.union(a, b) {
                out.push((s.0.clone(), v));
            }
        }
    }
    Ok(out)
}

fn is_solution(
    db: &Database,
    spec: &Specification,
    oracle: &SimilarityOracle,
    s: &State,
) -> Result<bool, OracleError> {
    let x = induce_extended_db(db, &s.0, &s.1)?;
    for r in spec.object_rules.iter().filter(|r| r.strength == crate::syntax::Strength::Hard) {
        if !check_object_rule(r, &x, &s.0, oracle)? {
            return Ok(false);
        }
    }
    for r in spec.value_rules.iter().filter(|r| r.strength == crate::syntax::Strength::Hard) {
        if !check_value_rule(r, &x, &s.1, oracle)? {
            return Ok(false);
        }
    }
    for d in &spec.constraints {
        if !check_dc(d, &x, oracle)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every candidate reachable from the trivial pair.
pub fn brute_force_candidates(
    db: &Database,
    spec: &Specification,
    oracle: &SimilarityOracle,
    guard: Guard,
) -> Result<BTreeSet<State>, OracleError> {
    let cap = match guard {
        Guard::Enforced => {
            if db.num_objects() > MAX_OBJECTS || db.num_cells() > MAX_CELLS {
                return Err(OracleError::Guard {
                    objects: db.num_objects(),
                    cells: db.num_cells(),
                });
            }
            usize::MAX
        }
        Guard::Lifted { max_states } => max_states,
    };
    let start = (ObjectPartition::trivial(db), CellPartition::trivial(db));
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for t in successors(db, spec, oracle, &s)? {
            if !seen.contains(&t) {
                if seen.len() >= cap {
                    return Err(OracleError::StateCap(cap));
                }
                seen.insert(t.clone());
                queue.push_back(t);
            }
        }
    }
    Ok(seen)
}

/// `Sol(D, Σ)` by exhaustive derivation.
pub fn brute_force_solutions(
    db: &Database,
    spec: &Specification,
    oracle: &SimilarityOracle,
    guard: Guard,
) -> Result<BTreeSet<State>, OracleError> {
    let mut out = BTreeSet::new();
    for s in brute_force_candidates(db, spec, oracle, guard)? {
        if is_solution(db, spec, oracle, &s)? {
            out.insert(s);
        }
    }
    Ok(out)
}

/// The ⊆-maximal members of a solution set.
pub fn maxima(states: &BTreeSet<State>) -> BTreeSet<State> {
    let le = |a: &State, b: &State| a.0 .0.is_subset_of(&b.0 .0) && a.1 .0.is_subset_of(&b.1 .0);
    states
        .iter()
        .filter(|s| !states.iter().any(|t| t != *s && le(s, t)))
        .cloned()
        .collect()
}
