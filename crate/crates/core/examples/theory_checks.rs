//! Runs the quick validation suites and prints one line per check.

use dsmm::validate::{run_suite, Suite, TheoryConstants};

fn main() -> dsmm::error::Result<()> {
    let constants = TheoryConstants::default();
    for suite in [Suite::Walk, Suite::Lemma2, Suite::PlImplications, Suite::Lyapunov] {
        let out = run_suite(suite, &constants, |l| println!("{l}"))?;
        println!("{suite}: {}\n", if out.passed() { "all passed" } else { "failures" });
    }
    Ok(())
}
