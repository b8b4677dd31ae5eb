use lace_core::asp::emit_program;
use lace_core::parse::parse_workspace;

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/authors.lp");

#[test]
fn authors_program_matches_golden_file() {
    let ws = parse_workspace(include_str!("../data/authors.lace")).unwrap();
    let program = emit_program(&ws.db, &ws.spec, &ws.oracle).unwrap();
    program.validate(ws.schema()).unwrap();
    let text = program.render();
    if std::env::var_os("LACE_BLESS").is_some() {
        std::fs::write(GOLDEN, &text).unwrap();
    }
    let golden = std::fs::read_to_string(GOLDEN).unwrap();
    assert_eq!(text, golden);
}
