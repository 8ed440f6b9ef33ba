//! Runs every acceptance criterion at its stated tolerance and prints one
//! pass/fail line per criterion (details indented below). Exits nonzero if
//! any criterion fails.

use tzlab::suite::run_criterion;

fn main() {
    let verbose = !std::env::args().any(|a| a == "--quiet");
    let seed = 42;
    let mut failed = Vec::new();
    for id in 1..=10 {
        let c = run_criterion(id, seed);
        let status = if c.report.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {}", c.id, c.title);
        if verbose {
            for check in &c.report.checks {
                println!("    {}", check.summary());
            }
        }
        if !c.report.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
