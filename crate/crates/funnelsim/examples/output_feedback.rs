//! Relative degree two with only y measured: input filter and pre-compensator.

use funnelsim::controllers::{precomp_design, PrecompDesign};
use funnelsim::scenarios::{load_scenario, run};
use nalgebra::DMatrix;

fn main() -> funnelsim::Result<()> {
    let PrecompDesign { p, residual, .. } = precomp_design(&[1.0, 1.0], &DMatrix::identity(2, 2))?;
    println!("pre-compensator gains p = {p:?} (Lyapunov residual {residual:.1e})");

    for name in ["double_integrator_filter", "double_integrator_precomp"] {
        let out = run(&load_scenario(name)?)?;
        let last = out.trajectory.last();
        println!(
            "{name:26} eps {:?}  y(10) = {:+.2e}  sup|u| = {:.2}",
            out.report.eps_observed, last.y[0], out.report.input_sup
        );
    }
    Ok(())
}
