use std::collections::BTreeSet;

use lace_core::engine::{Engine, SolutionState};
use lace_core::oracle::{brute_force_solutions, maxima, Guard};
use lace_core::random::{random_instance, rng, InstanceConfig};

fn as_set(states: Vec<SolutionState>) -> BTreeSet<(lace_core::model::ObjectPartition, lace_core::model::CellPartition)> {
    states.into_iter().map(|s| (s.e, s.v)).collect()
}

#[test]
fn engine_matches_oracle_on_random_instances() {
    let mut r = rng(7);
    let mut with_neq = 0;
    let mut branching = 0;
    let mut empty = 0;
    for k in 0..150 {
        let ws = random_instance(&mut r, &InstanceConfig::default());
        if !ws.spec.inequality_free() {
            with_neq += 1;
        }
        let eng = Engine::new(&ws.db, &ws.spec, &ws.oracle).unwrap();
        let expected = brute_force_solutions(&ws.db, &ws.spec, &ws.oracle, Guard::Enforced).unwrap();
        branching += usize::from(expected.len() > 1);
        empty += usize::from(expected.is_empty());
        let got = as_set(eng.enumerate_solutions().unwrap());
        assert_eq!(got, expected, "instance {k}");
        assert_eq!(as_set(eng.enumerate_max_solutions().unwrap()), maxima(&expected), "instance {k}");
        assert_eq!(eng.existence().unwrap(), !expected.is_empty(), "instance {k}");
    }
    assert!(with_neq > 10, "{with_neq}");
    assert!(branching > 20 && empty > 0, "{branching} {empty}");
}

#[test]
fn globalization_lifts_solutions_one_to_one() {
    use lace_core::globalize::{globalize_spec, lift_solution};
    let mut r = rng(11);
    for k in 0..120 {
        let ws = random_instance(&mut r, &InstanceConfig::default());
        let g = globalize_spec(&ws.db, &ws.spec).unwrap();
        let original = Engine::new(&ws.db, &ws.spec, &ws.oracle).unwrap().enumerate_solutions().unwrap();
        let lifted: BTreeSet<_> = original
            .iter()
            .map(|s| lift_solution(&ws.db, &g.db, &s.e, &s.v).unwrap())
            .collect();
        assert_eq!(lifted.len(), original.len(), "instance {k}: lifting is not injective");
        let global: BTreeSet<_> = Engine::new(&g.db, &g.spec, &ws.oracle)
            .unwrap()
            .enumerate_solutions()
            .unwrap()
            .into_iter()
            .map(|s| s.v)
            .collect();
        assert_eq!(lifted, global, "instance {k}");
    }
}
