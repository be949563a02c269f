//! Boundary-averaged heat equation under modal truncation.

use funnelsim::plants::{heat_initial_coeff, heat_output_coeff};
use funnelsim::scenarios::{load_scenario, run};

fn main() -> funnelsim::Result<()> {
    println!("output coefficients c_k: {:?}", (0..4).map(heat_output_coeff).collect::<Vec<_>>());
    println!("initial modes x_k(0): {:?}", (0..4).map(heat_initial_coeff).collect::<Vec<_>>());
    for n in [3, 10, 30] {
        let out = run(&load_scenario(&format!("heat_modal_{n}"))?)?;
        println!(
            "{n:3} modes: eps {:.8}  steps {:6}  {:.2}s",
            out.report.eps_observed[0], out.report.stats.accepted, out.report.wall_time_s
        );
    }
    Ok(())
}
