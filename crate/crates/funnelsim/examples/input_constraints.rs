//! Bounded inputs: saturated funnel control with its feasibility test, and the
//! input-constrained law whose funnel widens while the input saturates.

use funnelsim::scenarios::{check, load_scenario, run};

fn main() -> funnelsim::Result<()> {
    for name in ["saturated", "saturated_mild"] {
        let cfg = load_scenario(name)?;
        let f = check(&cfg)?.feasibility.expect("scalar saturated config");
        let out = run(&cfg)?;
        println!(
            "{name:15} cb*u_hat {:.2} >= {:.2}: {}  saturated samples {}  eps {:?}",
            f.lhs, f.rhs, f.feasible, out.report.saturation_samples, out.report.eps_observed
        );
    }

    let out = run(&load_scenario("icfc")?)?;
    println!("icfc sup|u| = {}", out.report.input_sup);
    for s in out.trajectory.samples.iter().step_by(out.trajectory.samples.len() / 12) {
        println!(
            "  t={:6.2}  e={:+.4}  psi={:.5}  u={:+.4}{}",
            s.t,
            s.e[0],
            s.psi[0],
            s.u[0],
            if s.saturated { "  (saturated)" } else { "" }
        );
    }
    Ok(())
}
