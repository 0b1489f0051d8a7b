//! One line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use fractalyze::verify::{criterion_ids, run_one};
use fractalyze_core::Tol;

fn main() -> ExitCode {
    let tol = Tol::default();
    let mut failed = 0;
    for id in criterion_ids() {
        let start = Instant::now();
        let c = run_one(id, &tol).expect("listed criterion");
        println!("{c} ({:.2}s)", start.elapsed().as_secs_f64());
        failed += !c.pass as usize;
    }
    println!("{failed} of {} criteria failed", criterion_ids().count());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
