//! Two-link arm: derivative funnel law versus the non-backstepping law.

use funnelsim::scenarios::{load_scenario, run};

fn main() -> funnelsim::Result<()> {
    for name in ["robot_fc", "robot_nonbackstep"] {
        let out = run(&load_scenario(name)?)?;
        let r = &out.report;
        let emax = out
            .trajectory
            .samples
            .iter()
            .map(|s| s.e.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        println!(
            "{name:18} {:?}  eps {:?}  max|e| {emax:.4}  sup|u| {:.2}  steps {} (+{} guard rejections)  {:.2}s",
            r.termination, r.eps_observed, r.input_sup, r.stats.accepted, r.stats.rejected_guard, r.wall_time_s
        );
    }
    Ok(())
}
