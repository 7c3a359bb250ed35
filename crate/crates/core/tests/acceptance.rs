//! Acceptance gate: runs every experiment on the default instance and prints
//! one line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are expected to fail for a documented
//! reason; they are still evaluated and printed as FAIL. The gate fails when
//! any other criterion fails, when a known red starts passing (the record
//! is stale), when a criterion is missing, or when an experiment errors.
//!
//! `SCATWAVE_ACCEPTANCE_QUICK=1` runs the reduced sweeps instead.

use std::process::ExitCode;
use std::time::Instant;

use scatwave::cli::{run_experiment, ExperimentConfig, ExperimentName};

/// The Wronskian identity with the unit factor on `k²/h²` fails by a fixed
/// `3|T|²/4`; it holds with factor 4 (printed in the detail).
const KNOWN_RED: [u8; 1] = [2];

fn main() -> ExitCode {
    let mut cfg = ExperimentConfig::default();
    if std::env::var("SCATWAVE_ACCEPTANCE_QUICK").is_ok_and(|v| v == "1") {
        cfg = cfg.quick();
    }
    let start = Instant::now();
    let mut seen = Vec::new();
    let mut ok = true;
    for name in ExperimentName::EACH {
        let t0 = Instant::now();
        match run_experiment(&cfg, name) {
            Ok(reports) => {
                for c in reports.iter().flat_map(|r| &r.criteria) {
                    println!("{}", c.line());
                    seen.push(c.id);
                    let red = KNOWN_RED.contains(&c.id);
                    if c.pass == red {
                        ok = false;
                        if red {
                            println!("  C{:02} is recorded as a known red but now passes", c.id);
                        }
                    }
                }
                eprintln!("  {} took {:.1} s", name.as_str(), t0.elapsed().as_secs_f64());
            }
            Err(e) => {
                println!("[FAIL] {}: {e}", name.as_str());
                ok = false;
            }
        }
    }
    seen.sort_unstable();
    if seen != (1..=15).collect::<Vec<u8>>() {
        println!("criteria evaluated: {seen:?}; expected 1..=15");
        ok = false;
    }
    println!(
        "acceptance: {} ({} known red: {:?}) in {:.0} s",
        if ok { "ok" } else { "FAILED" },
        KNOWN_RED.len(),
        KNOWN_RED,
        start.elapsed().as_secs_f64()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
