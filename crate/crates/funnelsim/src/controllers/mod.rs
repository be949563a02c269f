//! Feedback laws: adaptive high-gain prototypes, funnel controllers and their variants.
//!
//! Every law is a pure map from the current measurement (and a small controller
//! state for dynamic laws) to the control value. Funnel laws return a
//! `FunnelBreach` error when evaluated outside their domain; the integrator
//! treats that as a step rejection.

pub mod adaptive;
pub mod dual;
pub mod filter;
pub mod laws;
pub mod precomp;
pub mod spec;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adaptive::{dist_lambda, high_gain_step, lambda_step, nussbaum_step, AdaptiveStep, HighGain, LambdaTracker, Nussbaum};
pub use filter::{filter_fc, gamma_r, FilterFc};
pub use laws::{
    feasibility_check, icfc_step, non_backstep_fc, pd_funnel, ppc, saturated_fc, t_f, FeasibilityReport, FunnelRdR,
    Icfc, IcfcStep, NonBackstepFc, PdFunnel, Ppc, SaturatedFc,
};
pub use precomp::{linsys_mp_bound, precomp_design, precomp_step, precomp_surrogate_derivatives, PreCompFc, PrecompDesign};
pub use spec::ControllerSpec;

/// Numerical interior of the open unit ball.
pub const GUARD: f64 = 1.0 - 1e-12;

/// Bijection `α: [0,1) -> [1,∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Alpha {
    /// `s ↦ 1/(1-s)`.
    #[default]
    Reciprocal,
    /// `s ↦ (1-s)^{-β}`.
    PowerReciprocal { beta: f64 },
}

impl Alpha {
    pub fn validate(&self) -> Result<()> {
        match self {
            Alpha::PowerReciprocal { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                Err(Error::InvalidParameter("alpha exponent must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Alpha::Reciprocal => 1.0 / (1.0 - s),
            Alpha::PowerReciprocal { beta } => (1.0 - s).powf(-beta),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Alpha::Reciprocal => 1.0 / ((1.0 - s) * (1.0 - s)),
            Alpha::PowerReciprocal { beta } => beta * (1.0 - s).powf(-beta - 1.0),
        }
    }

    /// The function `a` with `α' = a ∘ α`.
    pub fn a(&self, kappa: f64) -> f64 {
        match *self {
            Alpha::Reciprocal => kappa * kappa,
            Alpha::PowerReciprocal { beta } => beta * kappa.powf((beta + 1.0) / beta),
        }
    }
}

/// Surjection `N: [0,∞) -> R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NFun {
    /// `s ↦ -s`.
    #[default]
    NegIdentity,
    /// `s ↦ s`.
    PosIdentity,
    /// `s ↦ s sin s`.
    SSinS,
    /// `s ↦ s² cos s`.
    K2CosK,
}

impl NFun {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            NFun::NegIdentity => -s,
            NFun::PosIdentity => s,
            NFun::SSinS => s * s.sin(),
            NFun::K2CosK => s * s * s.cos(),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            NFun::NegIdentity => -1.0,
            NFun::PosIdentity => 1.0,
            NFun::SSinS => s.sin() + s * s.cos(),
            NFun::K2CosK => 2.0 * s * s.cos() - s * s * s.sin(),
        }
    }
}

pub(crate) fn norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

fn check_ball(w: &DVector<f64>) -> Result<f64> {
    let n = norm(w);
    if !(n <= GUARD) {
        return Err(Error::DomainViolation { norm: n });
    }
    Ok(n)
}

/// `γ(w) = α(‖w‖²) w` on the open unit ball.
pub fn gamma(w: &DVector<f64>, alpha: Alpha) -> Result<DVector<f64>> {
    let n = check_ball(w)?;
    Ok(w * alpha.eval(n * n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoOutcome {
    Inside(DVector<f64>),
    /// First recursion level (1-based) whose intermediate left the ball.
    Outside { stage: usize, norm: f64 },
}

/// `ρ_1(η_1) = η_1`, `ρ_k(η_1..η_k) = η_k + γ(ρ_{k-1}(η_1..η_{k-1}))`.
pub fn rho_r(eta: &[DVector<f64>], alpha: Alpha) -> RhoOutcome {
    let mut w = eta[0].clone();
    for (k, eta_k) in eta.iter().enumerate() {
        if k > 0 {
            let g = alpha.eval(norm(&w).powi(2));
            w = eta_k + w * g;
        }
        let n = norm(&w);
        if !(n <= GUARD) {
            return RhoOutcome::Outside { stage: k + 1, norm: n };
        }
    }
    RhoOutcome::Inside(w)
}

/// `w = ρ_r(φ 𝐞)`, `u = N(α(‖w‖²)) w`. Returns `(u, w)`.
pub fn fc_output(alpha: Alpha, n: NFun, phi_t: f64, e_vec: &[DVector<f64>]) -> Result<(DVector<f64>, DVector<f64>)> {
    let scaled: Vec<DVector<f64>> = e_vec.iter().map(|e| e * phi_t).collect();
    match rho_r(&scaled, alpha) {
        RhoOutcome::Inside(w) => {
            let s = norm(&w).powi(2);
            Ok((&w * n.eval(alpha.eval(s)), w))
        }
        RhoOutcome::Outside { stage, norm } => Err(Error::breach("funnel", stage, norm)),
    }
}

/// Gain of the classic relative-degree-one funnel controller, `φ/(1-(φe)²)`.
pub fn classic_gain(phi_t: f64, e: f64) -> Result<f64> {
    let s = phi_t * e.abs();
    if !(s <= GUARD) {
        return Err(Error::breach("funnel", 0, s));
    }
    Ok(phi_t / (1.0 - s * s))
}

/// Radial clamp onto the ball of radius `û`.
pub fn saturate(v: &DVector<f64>, u_hat: f64) -> DVector<f64> {
    let n = norm(v);
    if !(n > u_hat) {
        return v.clone();
    }
    // rounding may leave the rescaled norm one ulp above û; step the factor down
    let mut scale = u_hat / n;
    let mut out = v * scale;
    while norm(&out) > u_hat {
        scale = scale.next_down();
        out = v * scale;
    }
    out
}
