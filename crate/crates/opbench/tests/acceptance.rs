//! Acceptance gate: runs every verification criterion and prints one
//! pass/fail line per criterion (run with `--nocapture` to see them live).

#[test]
fn acceptance() {
    let results = opbench::verify::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    assert_eq!(results.len(), 10);
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
