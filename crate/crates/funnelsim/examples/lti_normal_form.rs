//! Relative degree, Byrnes–Isidori form, zero dynamics and the high-gain threshold.

use funnelsim::lti::{
    byrnes_isidori, high_gain_threshold, is_in_lmr, transfer_eval, transfer_eval_bi, zero_dynamics, LtiSystem,
};
use nalgebra::{Complex, DMatrix};

fn main() -> funnelsim::Result<()> {
    // (s + 2) / (s^3 + s^2 + 3s + 1): relative degree 2, zero at -2
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -3.0, -1.0]);
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    let c = DMatrix::from_row_slice(1, 3, &[2.0, 1.0, 0.0]);
    let sys = LtiSystem::new(a, b, c)?;

    let bif = byrnes_isidori(&sys)?;
    println!("r = {}, gamma = {}, Q = {}", bif.r, bif.gamma[(0, 0)], bif.q);
    println!("zero dynamics: {:?}", zero_dynamics(&bif));
    println!("minimum phase with sign-definite gain: {:?}", is_in_lmr(&sys));

    for s in [Complex::new(1.0, 0.0), Complex::new(0.3, 2.0)] {
        let g = transfer_eval(&sys, s)?;
        let gb = transfer_eval_bi(&bif, s)?;
        println!("G({s}) = {:.6}  via normal form {:.6}", g[(0, 0)], gb[(0, 0)]);
    }

    let rd1 = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, -1.0]),
        DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )?;
    println!("high-gain threshold: {:?}", high_gain_threshold(&rd1, 50.0)?);
    Ok(())
}
