//! Runs the full acceptance matrix and prints one line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are run at their stated tolerances
//! and reported as they come out; they do not fail this target. Any other
//! criterion that does not pass makes the process exit nonzero.
//!
//! `BESSEL_BEL_SEED` overrides the seed, `ACCEPTANCE_SCALE` the path-count
//! multiplier (default 1, the full matrix).

use std::process::ExitCode;
use std::time::Instant;

use bessel_bel::report::Status;
use bessel_bel::suite::{run_suite, SuiteConfig, CRITERIA};

/// Hill estimates on the top 1% of a sample of 10^6 sit far above p(delta):
/// the tail carries a slowly varying factor the estimator cannot see at this
/// depth, and an exact-in-law sampler shows the same bias.
const EXPECTED_FAILURES: [usize; 1] = [11];

fn main() -> ExitCode {
    let seed = std::env::var("BESSEL_BEL_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20_240_601);
    let scale = std::env::var("ACCEPTANCE_SCALE").ok().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let cfg = SuiteConfig::new(seed).with_scale(scale);
    let ids: Vec<usize> = (1..=CRITERIA.len()).collect();
    let start = Instant::now();
    println!("acceptance: seed {seed}, scale {scale}");
    let results = match run_suite(&ids, &cfg, &|c| eprintln!("  finished criterion {} at {:.0}s", c.id, start.elapsed().as_secs_f64())) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut unexpected = Vec::new();
    for c in &results {
        let expected = EXPECTED_FAILURES.contains(&c.id);
        let suffix = match (c.passed(), expected) {
            (false, true) => " (expected failure)",
            (true, true) => " (expected failure did not occur)",
            _ => "",
        };
        println!("{}{suffix}", c.summary_line());
        for r in c.reports.iter().filter(|r| r.status != Status::Pass) {
            println!("    {}", r.summary_line());
            if let Some(w) = &r.witness {
                println!("      witness {w:?}");
            }
        }
        if !c.passed() && !expected {
            unexpected.push(c.id);
        }
    }
    let passed = results.iter().filter(|c| c.passed()).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
