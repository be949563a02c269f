//! Nussbaum control with unknown sign of the high-frequency gain.

use funnelsim::scenarios::{load_scenario, run};

fn main() -> funnelsim::Result<()> {
    for name in ["nussbaum_pos", "nussbaum_neg", "lambda_tracker"] {
        let out = run(&load_scenario(name)?)?;
        let last = out.trajectory.last();
        println!(
            "{name:15} y(T) = {:+.3e}  k(T) = {:.5}  sup|u| = {:.2}",
            last.y[0],
            last.gains[0],
            out.report.input_sup
        );
        for c in &out.report.checks {
            println!("    {} {:.2e} <= {:.0e}: {}", c.name, c.value, c.bound, c.passed);
        }
    }
    Ok(())
}
