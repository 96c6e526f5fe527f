//! Randomized checks of the stability conditions and rotation identities.

use cbadc::harness::{rotation_identity_suite, stability_condition_suite};

fn main() -> Result<(), cbadc::Error> {
    let mut checks = stability_condition_suite(500, 1, 1.0, &[])?;
    checks.extend(rotation_identity_suite(500, 2));
    for c in &checks {
        println!(
            "{:<32} {:>5} cases  max {:.2e}  tol {:.0e}  {}",
            c.name,
            c.cases,
            c.max_residual,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
