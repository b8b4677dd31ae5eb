use lace_core::parse::{parse_query, parse_workspace};
use lace_core::random::{random_instance, random_query, rng, InstanceConfig};
use lace_core::render::{render_query, render_workspace};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn workspace_renders_and_parses_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ws = random_instance(&mut r, &InstanceConfig::default());
        let text = render_workspace(&ws);
        let back = parse_workspace(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&render_workspace(&back), &text);
        prop_assert_eq!(back.db.schema(), ws.db.schema());
        prop_assert_eq!(&back.spec, &ws.spec);
        prop_assert_eq!(&back.oracle, &ws.oracle);
    }

    #[test]
    fn query_renders_and_parses_back(seed in any::<u64>(), free in 0usize..3) {
        let mut r = rng(seed);
        let ws = random_instance(&mut r, &InstanceConfig::default());
        if let Some(q) = random_query(&mut r, &ws.db, free) {
            let text = render_query(&q);
            let back = parse_query(&text, ws.db.schema()).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, q);
        }
    }
}
