//! Runs the analytic-versus-finite-difference gradient checks and the
//! feedback fidelity trials.

use sm2c::cli::run_checks;

fn main() -> sm2c::Result<()> {
    let report = run_checks(0, 5, 5)?;
    for c in &report.checks {
        println!(
            "{:<12} {} value {:.3e} threshold {:.1e} ({})",
            c.name,
            if c.passed { "ok  " } else { "FAIL" },
            c.value,
            c.threshold,
            c.detail
        );
    }
    Ok(())
}
