//! Acceptance suite: the ten verification claims, run in order with one
//! pass/fail line each (visible with `cargo test --test acceptance --
//! --nocapture`). Claims run sequentially inside a single test so the
//! stated runtime budgets are measured without interference.

use ppm_lab::verify::{run_claims, CLAIM_IDS};

#[test]
fn acceptance_criteria() {
    let results = run_claims(&[]).expect("claims must run to completion");
    assert_eq!(results.len(), CLAIM_IDS.len());
    let mut failed = Vec::new();
    for r in &results {
        println!("{}", r.line());
        if !r.pass {
            failed.push(format!("{}: {}", r.id, r.detail));
        }
    }
    assert!(
        failed.is_empty(),
        "{} acceptance criteria failed:\n{}",
        failed.len(),
        failed.join("\n")
    );
}
