//! Descriptor systems: transfer function, truncated relative degree and the DAE funnel law.

use funnelsim::dae::{dae_example, dae_transfer, truncated_reldeg_from_h, Rational};
use funnelsim::scenarios::{load_scenario, run};
use nalgebra::Complex;

fn main() -> funnelsim::Result<()> {
    let (e, a, b, c) = dae_example();
    for s in [Complex::new(2.0, 0.0), Complex::new(0.0, 1.5)] {
        println!("G({s}) = {}", dae_transfer(&e, &a, &b, &c, s)?[(0, 0)]);
    }

    // H(s) = diag(s^2, 1): one differential channel of degree 2, one algebraic
    let h = vec![
        vec![Rational::new(vec![0.0, 0.0, 1.0], vec![1.0])?, Rational::zero()],
        vec![Rational::zero(), Rational::new(vec![1.0], vec![1.0])?],
    ];
    let tr = truncated_reldeg_from_h(&h)?;
    println!("truncated relative degree: {:?} (strict {:?})", tr.degrees, tr.strict);

    let out = run(&load_scenario("dae_synthetic")?)?;
    for c in &out.report.checks {
        println!("{}: {:.2e} (bound {:.0e})", c.name, c.value, c.bound);
    }
    let last = out.trajectory.last();
    println!("t = {}: e = {:?}, gains = {:?}", last.t, last.e, last.gains);
    Ok(())
}
