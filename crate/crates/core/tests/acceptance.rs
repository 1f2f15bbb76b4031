//! Acceptance run over the 13 numbered criteria on the reference grid
//! (1-D, n = 512, L = 40, hbar = m = 1).
//!
//! Prints one PASS/FAIL line per criterion, followed by any failed or
//! informational checks, and exits non-zero if a criterion fails.
//! Criterion numbers given as arguments restrict the run.

use std::process::ExitCode;

use qrel_core::checks::CheckKind;
use qrel_core::suite::{criterion, Settings, CRITERIA};

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<usize> = if selected.is_empty() { (1..=CRITERIA).collect() } else { selected };
    let settings = Settings::default();
    let mut failed = 0;
    for id in ids {
        let outcome = match criterion(id, &settings) {
            Ok(o) => o,
            Err(e) => {
                println!("criterion {id:>2} FAIL: {e}");
                failed += 1;
                continue;
            }
        };
        println!("{outcome}");
        for c in &outcome.checks {
            if c.is_failure() || (c.kind == CheckKind::Informational && !c.pass) {
                println!("    {c}");
            }
        }
        if outcome.runtime > outcome.budget {
            println!("    runtime {:.2} s exceeds the {} s budget", outcome.runtime.as_secs_f64(), outcome.budget.as_secs());
        }
        if !outcome.pass() {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
