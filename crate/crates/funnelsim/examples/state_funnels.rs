//! Funnels on each state of a chain: prescribed performance and the PD-funnel law.

use funnelsim::scenarios::{load_scenario, run};

fn main() -> funnelsim::Result<()> {
    for name in ["ppc", "pd_funnel"] {
        let out = run(&load_scenario(name)?)?;
        println!("{name:10} {:?} per-funnel eps {:?}", out.report.termination, out.report.eps_observed);
    }
    Ok(())
}
