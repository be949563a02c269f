//! Funnel families, their derivatives and the class checks.

use funnelsim::funnel::{check_class, check_phi2_pair, CustomExpr, FunnelFunction};

fn main() -> funnelsim::Result<()> {
    let phi = FunnelFunction::exp_decay(4.0, 2.0, 0.1)?;
    for t in [0.0, 0.5, 1.0, 5.0] {
        println!(
            "t={t:4.1}  phi={:9.5}  phi'={:9.5}  phi''={:10.5}  radius={:.5}",
            phi.value(t),
            phi.eval(t, 1)?,
            phi.eval(t, 2)?,
            phi.radius(t)
        );
    }

    let ramp = FunnelFunction::linear_ramp(0.1, 1.0)?;
    let rep = check_class(&ramp, 1, 10.0)?;
    println!("linear ramp: in_phi={} in_phi_1={} c~{:.3}", rep.in_phi, rep.in_phi_r, rep.lipschitz_constant_estimate);
    // φ(0) = 0 leaves the initial error unconstrained
    println!("ramp zero section infinite: {}", ramp.zero_section_infinite());

    // the pd_funnel scenario pair, and one with a derivative funnel too tight to be compatible
    let phi0 = FunnelFunction::exp_decay(1.0, 1.0, 0.1)?;
    for phi1 in [FunnelFunction::exp_decay(4.0, 1.0, 0.5)?, FunnelFunction::constant(1.0)?] {
        println!("pd pair: {:?}", check_phi2_pair(&phi0, &phi1, 10.0)?);
    }

    // e^{t^2}: no declared asymptote, so membership cannot be decided and it is refused
    let fast = FunnelFunction::custom(CustomExpr::ExpPolynomial { coeffs: vec![0.0, 0.0, 1.0] }, None)?;
    match check_class(&fast, 0, 3.0) {
        Ok(r) => println!("exp(t^2): in_phi={}", r.in_phi),
        Err(e) => println!("exp(t^2): {e}"),
    }
    Ok(())
}
