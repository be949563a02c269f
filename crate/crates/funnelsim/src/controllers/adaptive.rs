//! Adaptive high-gain prototypes: `u = -k e` with `k' = ‖e‖²`, the λ-tracker and the Nussbaum law.

use nalgebra::DVector;

use super::NFun;
use crate::error::{Error, Result};
use crate::sim::{ControlOutput, Controller, Measurement};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    pub u: DVector<f64>,
    pub k_dot: f64,
}

pub fn dist_lambda(z: f64, lambda: f64) -> f64 {
    (z.abs() - lambda).max(0.0)
}

/// `u = -k e`, `k' = ‖e‖²`.
pub fn high_gain_step(k: f64, e: &DVector<f64>) -> AdaptiveStep {
    AdaptiveStep {
        u: e * -k,
        k_dot: e.norm_squared(),
    }
}

/// `u = -k e`, `k' = ‖e‖ dist_λ(‖e‖)`.
pub fn lambda_step(k: f64, e: &DVector<f64>, lambda: f64) -> AdaptiveStep {
    let n = e.norm();
    AdaptiveStep {
        u: e * -k,
        k_dot: n * dist_lambda(n, lambda),
    }
}

/// `u = N(k) e`, `k' = ‖e‖²`.
pub fn nussbaum_step(k: f64, e: &DVector<f64>, n: NFun) -> AdaptiveStep {
    AdaptiveStep {
        u: e * n.eval(k),
        k_dot: e.norm_squared(),
    }
}

fn output(step: AdaptiveStep, k: f64) -> ControlOutput {
    ControlOutput {
        u: step.u,
        xc_dot: vec![step.k_dot],
        gains: vec![k],
        ..ControlOutput::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighGain {
    pub k0: f64,
}

impl Controller for HighGain {
    fn state_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.k0]
    }
    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let e = meas.e(0);
        Ok(output(high_gain_step(xc[0], &e), xc[0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTracker {
    pub lambda: f64,
    pub k0: f64,
}

impl LambdaTracker {
    pub fn new(lambda: f64, k0: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        Ok(LambdaTracker { lambda, k0 })
    }
}

impl Controller for LambdaTracker {
    fn state_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.k0]
    }
    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let e = meas.e(0);
        Ok(output(lambda_step(xc[0], &e, self.lambda), xc[0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nussbaum {
    pub n: NFun,
    pub k0: f64,
}

impl Controller for Nussbaum {
    fn state_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.k0]
    }
    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let e = meas.e(0);
        Ok(output(nussbaum_step(xc[0], &e, self.n), xc[0]))
    }
}
