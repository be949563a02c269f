//! Causal operators: delay responses, a BIBO probe and a closed loop with memory.

use funnelsim::operators::{bibo_probe, respond, CausalOperator};
use funnelsim::scenarios::{load_scenario, run};
use nalgebra::DMatrix;

fn main() -> funnelsim::Result<()> {
    let delay = CausalOperator::point_delay(0.5, 1.0)?;
    let ts = [0.0, 0.5, 1.0, 2.0];
    let y = respond(&delay, &|t: f64| vec![t.cos()], &ts, 1e-10)?;
    for (t, v) in ts.iter().zip(&y) {
        println!("(T y)({t}) = {:+.6}  expected {:+.6}", v[0], 0.5 * (t - 1.0).cos());
    }

    let lti = CausalOperator::internal_lti(
        &DMatrix::from_row_slice(1, 1, &[-2.0]),
        &DMatrix::from_row_slice(1, 1, &[1.0]),
        &DMatrix::from_row_slice(1, 1, &[3.0]),
    )?;
    println!("{:?}", bibo_probe(&lti, 1.0, 8, 10.0, 0)?);

    let out = run(&load_scenario("delay_rd1")?)?;
    println!(
        "delay_rd1: {:?}, eps {:?}, step cap from the delay, {} steps",
        out.report.termination, out.report.eps_observed, out.report.stats.accepted
    );
    Ok(())
}
