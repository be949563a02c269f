//! Funnel control with an input filter.
//!
//! `γ_1(κ, v) = N(κ) v` and, for `i ≥ 2`,
//! `γ_i = γ_{i-1} - (a(κ)(1 + ‖π_{i-1}ξ‖) ‖Dγ_{i-1}‖)² (μ^{2-i} ξ_{i-1} - γ_{i-1})`,
//! where `‖Dγ‖²` is the sum of squared partial derivatives over all arguments,
//! obtained by nested forward-mode differentiation.

use nalgebra::DVector;

use super::dual::{self, Num};
use super::{Alpha, NFun, GUARD};
use crate::error::{Error, Result};
use crate::funnel::FunnelFunction;
use crate::sim::{ControlOutput, Controller, Measurement};

pub(crate) fn n_num(n: NFun, k: &Num) -> Num {
    match n {
        NFun::NegIdentity => -k,
        NFun::PosIdentity => k.clone(),
        NFun::SSinS => k * &k.sin(),
        NFun::K2CosK => &(k * k) * &k.cos(),
    }
}

fn a_num(alpha: Alpha, k: &Num) -> Num {
    match alpha {
        Alpha::Reciprocal => k * k,
        Alpha::PowerReciprocal { beta } => k.powf((beta + 1.0) / beta).scale(beta),
    }
}

struct Recursion {
    alpha: Alpha,
    n: NFun,
    mu: f64,
}

impl Recursion {
    /// `γ_i(κ, v, ξ_1..ξ_{i-1})`; `xi` holds at least `i-1` blocks.
    fn gamma(&self, i: usize, kappa: &Num, v: &[Num], xi: &[Vec<Num>]) -> Vec<Num> {
        if i == 1 {
            let nk = n_num(self.n, kappa);
            return v.iter().map(|x| &nk * x).collect();
        }
        let prev = self.gamma(i - 1, kappa, v, xi);
        let dn = self.jacobian_norm_sq(i - 1, kappa, v, xi);
        let flat: Vec<Num> = xi[..i - 1].iter().flatten().cloned().collect();
        let factor = &(&a_num(self.alpha, kappa) * &dual::norm(&flat).add_f(1.0)).square() * &dn;
        let c = self.mu.powi(2 - i as i32);
        prev.iter()
            .zip(&xi[i - 2])
            .map(|(g, x)| g - &(&factor * &(&x.scale(c) - g)))
            .collect()
    }

    /// `‖Dγ_i(κ, v, ξ_1..ξ_{i-1})‖²` by one forward pass per scalar argument.
    fn jacobian_norm_sq(&self, i: usize, kappa: &Num, v: &[Num], xi: &[Vec<Num>]) -> Num {
        let xi = &xi[..i - 1];
        let n_args = 1 + v.len() + xi.iter().map(|b| b.len()).sum::<usize>();
        let mut total = Num::Re(0.0);
        for dir in 0..n_args {
            let mut idx = 0;
            let mut lift = |x: &Num| {
                let out = if idx == dir { x.seed() } else { x.lift() };
                idx += 1;
                out
            };
            let k_l = lift(kappa);
            let v_l: Vec<Num> = v.iter().map(&mut lift).collect();
            let xi_l: Vec<Vec<Num>> = xi.iter().map(|b| b.iter().map(&mut lift).collect()).collect();
            for g in self.gamma(i, &k_l, &v_l, &xi_l) {
                total = &total + &g.tangent().square();
            }
        }
        total
    }
}

/// `γ_r(κ, v, ξ)` at real arguments; `xi` has `r-1` blocks of length `m`.
pub fn gamma_r(alpha: Alpha, n: NFun, mu: f64, kappa: f64, v: &DVector<f64>, xi: &[DVector<f64>]) -> DVector<f64> {
    let rec = Recursion { alpha, n, mu };
    let r = xi.len() + 1;
    let vn: Vec<Num> = v.iter().map(|x| Num::Re(*x)).collect();
    let xin: Vec<Vec<Num>> = xi.iter().map(|b| b.iter().map(|x| Num::Re(*x)).collect()).collect();
    let g = rec.gamma(r, &Num::Re(kappa), &vn, &xin);
    DVector::from_iterator(g.len(), g.iter().map(|x| x.re()))
}

/// Output of the filter law: control, filter derivative, gain `k` and `φ‖e‖`.
pub struct FilterStep {
    pub u: DVector<f64>,
    pub xi_dot: Vec<DVector<f64>>,
    pub k: f64,
    pub margin: f64,
}

/// `k = α(φ²‖e‖²)`, `u = γ_r(k, φe, ξ)`, `ξ̇_i = -μ ξ_i + ξ_{i+1}`, `ξ̇_{r-1} = -μ ξ_{r-1} + u`.
pub fn filter_fc(alpha: Alpha, n: NFun, mu: f64, phi_t: f64, e: &DVector<f64>, xi: &[DVector<f64>]) -> Result<FilterStep> {
    let v = e * phi_t;
    let margin = v.norm();
    if !(margin <= GUARD) {
        return Err(Error::breach("filter", 0, margin));
    }
    let k = alpha.eval(margin * margin);
    let u = gamma_r(alpha, n, mu, k, &v, xi);
    let r1 = xi.len();
    let xi_dot = (0..r1)
        .map(|i| {
            let next = if i + 1 < r1 { &xi[i + 1] } else { &u };
            next - &xi[i] * mu
        })
        .collect();
    Ok(FilterStep { u, xi_dot, k, margin })
}

/// Dynamic filter controller for relative degree `r` and `m` channels.
pub struct FilterFc {
    pub alpha: Alpha,
    pub n: NFun,
    pub phi: FunnelFunction,
    pub mu: f64,
    pub r: usize,
    pub m: usize,
    pub xi0: Vec<f64>,
}

impl FilterFc {
    pub fn new(alpha: Alpha, n: NFun, phi: FunnelFunction, mu: f64, r: usize, m: usize) -> Result<Self> {
        alpha.validate()?;
        if r == 0 || m == 0 || !(mu > 0.0) {
            return Err(Error::InvalidParameter("filter needs r >= 1, m >= 1, mu > 0".into()));
        }
        Ok(FilterFc {
            alpha,
            n,
            phi,
            mu,
            r,
            m,
            xi0: vec![0.0; (r - 1) * m],
        })
    }
}

impl Controller for FilterFc {
    fn state_dim(&self) -> usize {
        (self.r - 1) * self.m
    }

    fn initial_state(&self) -> Vec<f64> {
        self.xi0.clone()
    }

    fn reference_order(&self) -> usize {
        0
    }

    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let xi: Vec<DVector<f64>> = xc.chunks(self.m).map(DVector::from_column_slice).collect();
        let phi_t = self.phi.value(meas.t);
        let step = filter_fc(self.alpha, self.n, self.mu, phi_t, &meas.e(0), &xi)?;
        Ok(ControlOutput {
            u: step.u,
            xc_dot: step.xi_dot.iter().flat_map(|v| v.iter().copied()).collect(),
            gains: vec![step.k],
            margins: vec![step.margin],
            psi: vec![self.phi.radius(meas.t)],
            saturated: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::fc_output;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn r2_matches_displayed_controller_at_zero_error() {
        for xi in [0.3, -1.7, 4.0] {
            let s = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 1.0, 1.0, &v(&[0.0]), &[v(&[xi])]).unwrap();
            let expect = -(1.0 + xi.abs()).powi(2) * xi;
            assert!((s.u[0] - expect).abs() < 1e-12 * expect.abs().max(1.0));
            assert_eq!(s.k, 1.0);
        }
        let s = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 1.0, 1.0, &v(&[0.0]), &[v(&[0.0])]).unwrap();
        assert_eq!(s.u[0], 0.0);
    }

    #[test]
    fn r2_matches_hand_formula() {
        // γ2 = -κη - (η² + κ²)(κ²(1+|ζ|))²(ζ - γ1) for N = -s, α reciprocal, m = 1
        let (phi, e, zeta): (f64, f64, f64) = (1.3, 0.4, -0.8);
        let eta = phi * e;
        let kappa = 1.0 / (1.0 - eta * eta);
        let g1 = -kappa * eta;
        let expect = g1 - (eta * eta + kappa * kappa) * (kappa * kappa * (1.0 + zeta.abs())).powi(2) * (zeta - g1);
        let s = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 1.0, phi, &v(&[e]), &[v(&[zeta])]).unwrap();
        assert!((s.u[0] - expect).abs() < 1e-10 * expect.abs(), "{} {}", s.u[0], expect);
    }

    #[test]
    fn r1_degenerates_to_funnel_rd1() {
        let s = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 2.0, 0.8, &v(&[0.5, -0.3]), &[]).unwrap();
        let (u, _) = fc_output(Alpha::Reciprocal, NFun::NegIdentity, 0.8, &[v(&[0.5, -0.3])]).unwrap();
        assert!((s.u - u).norm() < 1e-15);
    }

    #[test]
    fn r3_finite_and_odd() {
        let xi = [v(&[0.2, -0.1]), v(&[0.05, 0.3])];
        let a = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 1.5, 1.0, &v(&[0.3, 0.1]), &xi).unwrap();
        let nxi: Vec<_> = xi.iter().map(|x| -x).collect();
        let b = filter_fc(Alpha::Reciprocal, NFun::NegIdentity, 1.5, 1.0, &v(&[-0.3, -0.1]), &nxi).unwrap();
        assert!(a.u.iter().all(|x| x.is_finite()));
        assert!((a.u + b.u).norm() < 1e-9);
    }
}
