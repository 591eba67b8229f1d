//! Acceptance suite: one PASS/FAIL line per criterion.

use ncl::validation::run_all;

#[test]
fn acceptance() {
    let outcomes = run_all();
    println!();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
