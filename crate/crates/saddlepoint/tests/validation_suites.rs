use saddlepoint::validation::{describe, run_suite, Suite};

#[test]
fn every_suite_passes_at_default_size() {
    for suite in Suite::ALL {
        let report = run_suite(suite, 7).unwrap();
        for c in &report.checks {
            println!("{} {}", suite.name(), describe(c));
        }
        assert!(report.passed(), "suite {} failed", suite.name());
    }
}
