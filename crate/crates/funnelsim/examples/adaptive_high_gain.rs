//! Adaptive high-gain control of y' = u + d against the closed form (x, k).

use funnelsim::scenarios::{load_scenario, run};

fn main() -> funnelsim::Result<()> {
    let cfg = load_scenario("scalar_disturbance")?;
    let out = run(&cfg)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "x", "x exact", "k", "k exact");
    for t in [0.0, 1.0, 3.0, 7.0, 20.0, 50.0] {
        let st = out.trajectory.state_at(t)?;
        let x = (1.0 + t).powf(-1.0 / 3.0);
        let k = 3.0 * ((1.0 + t).cbrt() - 1.0);
        println!("{t:6.1} {:12.8} {x:12.8} {:12.8} {k:12.8}", st[0], st[1]);
    }
    for c in &out.report.checks {
        println!("{}: {:.2e} (bound {:.0e})", c.name, c.value, c.bound);
    }

    // the gain never stops growing
    let mut long = cfg.clone();
    long.sim.t_end = 1000.0;
    let out = run(&long)?;
    println!("k(1000) = {:.3}", out.trajectory.last().gains[0]);
    Ok(())
}
