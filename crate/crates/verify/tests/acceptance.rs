//! Acceptance run: one PASS/FAIL line per criterion, then a full rerun to
//! compare fingerprints. Exits nonzero if any criterion fails.

use isowalk_verify as verify;
use isowalk_verify::{CheckOutcome, Scale};

fn main() {
    let checks: [fn(Scale) -> CheckOutcome; 10] = [
        verify::check_stromberg,
        verify::check_census,
        verify::check_witnesses,
        verify::check_semi_invariance,
        verify::check_set_lemmas,
        verify::check_transport,
        verify::check_nonstationary,
        verify::check_ergodic,
        verify::check_large_deviations,
        verify::check_sphere,
    ];
    let mut first = Vec::new();
    for check in checks {
        let outcome = check(Scale::Full);
        println!("{}", outcome.line());
        first.push(outcome);
    }
    let second: Vec<CheckOutcome> = checks.iter().map(|c| c(Scale::Full)).collect();
    let determinism = verify::check_determinism(&first, &second);
    println!("{}", determinism.line());
    first.push(determinism);

    let failed: Vec<u8> = first.iter().filter(|c| !c.passed).map(|c| c.criterion).collect();
    println!("\n{} of {} criteria passed", first.len() - failed.len(), first.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
