//! Static funnel laws and their constrained variants.

use nalgebra::DVector;

use super::{fc_output, saturate, Alpha, NFun, GUARD};
use crate::error::{Error, Result};
use crate::funnel::FunnelFunction;
use crate::jet::Jet;
use crate::signal::Signal;
use crate::sim::{ControlOutput, Controller, Measurement};

/// Funnel controller for relative degree `r` fed with
/// `𝐞 = (e, ..., e^(r̂-1), y^(r̂), ..., y^(r-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunnelRdR {
    pub alpha: Alpha,
    pub n: NFun,
    pub phi: FunnelFunction,
    pub r: usize,
    pub r_hat: usize,
    pub m: usize,
}

impl FunnelRdR {
    pub fn new(alpha: Alpha, n: NFun, phi: FunnelFunction, r: usize, r_hat: usize, m: usize) -> Result<Self> {
        alpha.validate()?;
        if r == 0 || m == 0 || r_hat == 0 || r_hat > r {
            return Err(Error::InvalidParameter("need 1 <= r_hat <= r and m >= 1".into()));
        }
        if r_hat < r && !phi.declared_asymptote().is_some_and(|a| a.bounded) {
            return Err(Error::InvalidParameter("phi must be bounded when r_hat < r".into()));
        }
        Ok(FunnelRdR { alpha, n, phi, r, r_hat, m })
    }

    /// Relative degree one.
    pub fn rd1(alpha: Alpha, n: NFun, phi: FunnelFunction, m: usize) -> Result<Self> {
        Self::new(alpha, n, phi, 1, 1, m)
    }

    pub fn feedback_vector(&self, meas: &Measurement) -> Vec<DVector<f64>> {
        (0..self.r)
            .map(|k| if k < self.r_hat { meas.e(k) } else { meas.y[k].clone() })
            .collect()
    }
}

impl Controller for FunnelRdR {
    fn required_derivatives(&self) -> usize {
        self.r
    }

    fn reference_order(&self) -> usize {
        self.r_hat - 1
    }

    fn eval(&self, meas: &Measurement, _xc: &[f64]) -> Result<ControlOutput> {
        let ev = self.feedback_vector(meas);
        let phi_t = self.phi.value(meas.t);
        let (u, w) = fc_output(self.alpha, self.n, phi_t, &ev)?;
        let wn = w.norm();
        Ok(ControlOutput {
            u,
            gains: vec![self.alpha.eval(wn * wn)],
            margins: vec![phi_t * ev[0].norm(), wn],
            psi: vec![self.phi.radius(meas.t)],
            ..ControlOutput::default()
        })
    }
}

/// Stage data of the non-backstepping law.
#[derive(Debug, Clone, PartialEq)]
pub struct NonBackstepStep {
    pub u: DVector<f64>,
    pub k: Vec<f64>,
    /// `φ_i(t)‖e_i(t)‖` per stage.
    pub margins: Vec<f64>,
}

/// `e_0 = e`, `e_{i+1} = e_i' + k_i e_i`, `k_i = 1/(1 - φ_i²‖e_i‖²)`, `u = -k_{r-1} e_{r-1}`.
///
/// `e_derivs` holds `e, e', ..., e^(r-1)`. The shorthand derivatives `e_i'` are
/// resolved by propagating Taylor jets of `e` and `φ_i` through the recursion.
pub fn non_backstep_fc(phis: &[FunnelFunction], t: f64, e_derivs: &[DVector<f64>]) -> Result<NonBackstepStep> {
    let r = phis.len();
    if r == 0 || e_derivs.len() < r {
        return Err(Error::Dimension(format!("need {r} error derivatives, got {}", e_derivs.len())));
    }
    let m = e_derivs[0].len();
    let mut ei: Vec<Jet> = (0..m)
        .map(|c| {
            let d: Vec<f64> = e_derivs[..r].iter().map(|v| v[c]).collect();
            Jet::from_derivatives(&d)
        })
        .collect();
    let mut ks = Vec::with_capacity(r);
    let mut margins = Vec::with_capacity(r);
    for (i, phi) in phis.iter().enumerate() {
        let order = r - 1 - i;
        let p = phi.jet(t, order)?;
        let n2 = Jet::norm_sq(&ei);
        let margin = p.value() * n2.value().sqrt();
        if !(margin <= GUARD) {
            return Err(Error::breach("nonbackstep", i, margin));
        }
        let k = (&(&p * &p) * &n2).scale(-1.0).add_scalar(1.0).recip();
        ks.push(k.value());
        margins.push(margin);
        if i + 1 < r {
            ei = ei.iter().map(|x| &x.deriv() + &(&k * x)).collect();
        } else {
            let kv = k.value();
            let u = DVector::from_iterator(m, ei.iter().map(|x| -kv * x.value()));
            return Ok(NonBackstepStep { u, k: ks, margins });
        }
    }
    unreachable!("loop returns at the last stage")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonBackstepFc {
    /// `φ_0, ..., φ_{r-1}`.
    pub phis: Vec<FunnelFunction>,
}

impl NonBackstepFc {
    pub fn new(phis: Vec<FunnelFunction>) -> Result<Self> {
        let r = phis.len();
        if r == 0 {
            return Err(Error::InvalidParameter("at least one funnel function".into()));
        }
        for (i, p) in phis.iter().enumerate() {
            if p.max_derivative_order < r - 1 - i {
                return Err(Error::UnsupportedDerivative {
                    order: r - 1 - i,
                    max: p.max_derivative_order,
                });
            }
        }
        Ok(NonBackstepFc { phis })
    }
}

impl Controller for NonBackstepFc {
    fn required_derivatives(&self) -> usize {
        self.phis.len()
    }

    fn eval(&self, meas: &Measurement, _xc: &[f64]) -> Result<ControlOutput> {
        let ed: Vec<DVector<f64>> = (0..self.phis.len()).map(|k| meas.e(k)).collect();
        let s = non_backstep_fc(&self.phis, meas.t, &ed)?;
        Ok(ControlOutput {
            u: s.u,
            gains: s.k,
            margins: s.margins,
            psi: vec![self.phis[0].radius(meas.t)],
            ..ControlOutput::default()
        })
    }
}

/// `u = -k0² e - k1 ė` (or `-k0² e - k0 k1 ė`), `k0 = φ0/(1-φ0‖e‖)`, `k1 = φ1/(1-φ1‖ė‖)`.
/// Returns `(u, k0, k1)`.
pub fn pd_funnel(
    phi0_t: f64,
    phi1_t: f64,
    e: &DVector<f64>,
    de: &DVector<f64>,
    modified: bool,
) -> Result<(DVector<f64>, f64, f64)> {
    let s0 = phi0_t * e.norm();
    if !(s0 <= GUARD) {
        return Err(Error::breach("pd_error", 0, s0));
    }
    let s1 = phi1_t * de.norm();
    if !(s1 <= GUARD) {
        return Err(Error::breach("pd_derivative", 1, s1));
    }
    let k0 = phi0_t / (1.0 - s0);
    let k1 = phi1_t / (1.0 - s1);
    let c1 = if modified { k0 * k1 } else { k1 };
    Ok((-(e * (k0 * k0)) - de * c1, k0, k1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdFunnel {
    pub phi0: FunnelFunction,
    pub phi1: FunnelFunction,
    pub modified: bool,
}

impl Controller for PdFunnel {
    fn required_derivatives(&self) -> usize {
        2
    }

    fn eval(&self, meas: &Measurement, _xc: &[f64]) -> Result<ControlOutput> {
        let (e, de) = (meas.e(0), meas.e(1));
        let (p0, p1) = (self.phi0.value(meas.t), self.phi1.value(meas.t));
        let (u, k0, k1) = pd_funnel(p0, p1, &e, &de, self.modified)?;
        Ok(ControlOutput {
            u,
            gains: vec![k0, k1],
            margins: vec![p0 * e.norm(), p1 * de.norm()],
            psi: vec![self.phi0.radius(meas.t), self.phi1.radius(meas.t)],
            ..ControlOutput::default()
        })
    }
}

/// `T_f(s) = ln((1+s)/(1-s))`.
pub fn t_f(s: f64) -> f64 {
    ((1.0 + s) / (1.0 - s)).ln()
}

/// Prescribed performance law. `x` holds the chain states `x_1..x_r`.
/// Returns `u` and the stage margins `max_j φ_i|x_{i,j} - a_{i-1,j}|`.
pub fn ppc(k: &[f64], phi_t: &[f64], x: &[DVector<f64>], yref: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
    let r = k.len();
    if phi_t.len() != r || x.len() < r {
        return Err(Error::Dimension("ppc needs r gains, r funnels and r states".into()));
    }
    let mut a = yref.clone();
    let mut margins = Vec::with_capacity(r);
    for i in 0..r {
        let z = (&x[i] - &a) * phi_t[i];
        let margin = z.amax();
        if !(margin <= GUARD) {
            return Err(Error::breach("ppc", i + 1, margin));
        }
        margins.push(margin);
        a = z.map(|s| -k[i] * t_f(s));
    }
    Ok((a, margins))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ppc {
    pub k: Vec<f64>,
    pub phis: Vec<FunnelFunction>,
}

impl Ppc {
    pub fn new(k: Vec<f64>, phis: Vec<FunnelFunction>) -> Result<Self> {
        if k.is_empty() || k.len() != phis.len() || k.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("ppc needs r positive gains and r funnels".into()));
        }
        Ok(Ppc { k, phis })
    }
}

impl Controller for Ppc {
    fn required_derivatives(&self) -> usize {
        self.k.len()
    }

    fn reference_order(&self) -> usize {
        0
    }

    fn eval(&self, meas: &Measurement, _xc: &[f64]) -> Result<ControlOutput> {
        let phi_t: Vec<f64> = self.phis.iter().map(|p| p.value(meas.t)).collect();
        let (u, margins) = ppc(&self.k, &phi_t, meas.y, &meas.yref[0])?;
        Ok(ControlOutput {
            u,
            gains: self.k.clone(),
            margins,
            psi: self.phis.iter().map(|p| p.radius(meas.t)).collect(),
            ..ControlOutput::default()
        })
    }
}

/// `u = -sat_û(k e)` with the classic gain `k = φ/(1-φ²‖e‖²)`.
/// Returns `(u, k, saturation active)`.
pub fn saturated_fc(phi_t: f64, e: &DVector<f64>, u_hat: f64) -> Result<(DVector<f64>, f64, bool)> {
    let s = phi_t * e.norm();
    if !(s <= GUARD) {
        return Err(Error::breach("funnel", 0, s));
    }
    let k = phi_t / (1.0 - s * s);
    let v = e * k;
    let active = v.norm() > u_hat;
    Ok((-saturate(&v, u_hat), k, active))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedFc {
    pub phi: FunnelFunction,
    pub u_hat: f64,
}

impl SaturatedFc {
    pub fn new(phi: FunnelFunction, u_hat: f64) -> Result<Self> {
        if !(u_hat > 0.0) {
            return Err(Error::InvalidParameter("saturation level must be positive".into()));
        }
        Ok(SaturatedFc { phi, u_hat })
    }
}

impl Controller for SaturatedFc {
    fn eval(&self, meas: &Measurement, _xc: &[f64]) -> Result<ControlOutput> {
        let e = meas.e(0);
        let p = self.phi.value(meas.t);
        let (u, k, saturated) = saturated_fc(p, &e, self.u_hat)?;
        Ok(ControlOutput {
            u,
            gains: vec![k],
            margins: vec![p * e.norm()],
            psi: vec![self.phi.radius(meas.t)],
            saturated,
            ..ControlOutput::default()
        })
    }
}

/// Scalar feasibility inequality `cb û >= |a|(‖ψ‖∞ + ‖y_ref‖∞) + ‖ẏ_ref‖∞ + ‖ψ̇‖∞`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeasibilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub feasible: bool,
    /// `φ(0)|e(0)| < û/(1+û)`: saturation never activates.
    pub saturation_free: bool,
}

/// Evaluates the inequality from the declared sup bounds of `ψ = 1/φ` and `y_ref`.
pub fn feasibility_check(
    a: f64,
    cb: f64,
    u_hat: f64,
    phi: &FunnelFunction,
    yref: &Signal,
    e0: f64,
) -> Result<FeasibilityReport> {
    let (psi_sup, dpsi_sup) = phi
        .psi_sup_bounds()
        .ok_or_else(|| Error::NotApplicable("funnel radius has no declared bound".into()))?;
    let (r_sup, dr_sup) = yref.sup_bounds();
    let lhs = cb * u_hat;
    let rhs = a.abs() * (psi_sup + r_sup) + dr_sup + dpsi_sup;
    let start = phi.value(0.0) * e0.abs();
    Ok(FeasibilityReport {
        lhs,
        rhs,
        feasible: start < 1.0 && lhs >= rhs,
        saturation_free: start < u_hat / (1.0 + u_hat),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcfcStep {
    pub u: DVector<f64>,
    pub psi_dot: f64,
    pub k: f64,
    pub kappa: f64,
}

const ICFC_DEAD_BAND: f64 = 1e-12;

/// Input-constrained funnel controller with dynamic boundary `ψ`.
pub fn icfc_step(u_hat: f64, alpha_d: f64, beta_d: f64, e: &DVector<f64>, psi: f64) -> Result<IcfcStep> {
    let en = e.norm();
    let s = en / psi;
    if !(psi > 0.0 && s <= GUARD) {
        return Err(Error::breach("icfc", 0, s));
    }
    let k = 1.0 / (1.0 - s * s);
    let v = e * -k;
    let u = saturate(&v, u_hat);
    let kappa = (&v - &u).norm();
    let mut psi_dot = -alpha_d * psi + beta_d;
    if en >= ICFC_DEAD_BAND {
        psi_dot += psi * kappa / en;
    }
    Ok(IcfcStep { u, psi_dot, k, kappa })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Icfc {
    pub u_hat: f64,
    pub alpha_d: f64,
    pub beta_d: f64,
    pub psi0: f64,
}

impl Icfc {
    pub fn new(u_hat: f64, alpha_d: f64, beta_d: f64, psi0: f64) -> Result<Self> {
        if !(u_hat > 0.0 && alpha_d > 0.0 && beta_d > 0.0) {
            return Err(Error::InvalidParameter("icfc needs positive u_hat, alpha and beta".into()));
        }
        if !(psi0 > beta_d / alpha_d) {
            return Err(Error::InvalidParameter(format!(
                "icfc needs psi0 > beta/alpha = {}",
                beta_d / alpha_d
            )));
        }
        Ok(Icfc { u_hat, alpha_d, beta_d, psi0 })
    }
}

impl Controller for Icfc {
    fn state_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.psi0]
    }

    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let e = meas.e(0);
        let psi = xc[0];
        let s = icfc_step(self.u_hat, self.alpha_d, self.beta_d, &e, psi)?;
        Ok(ControlOutput {
            u: s.u,
            xc_dot: vec![s.psi_dot],
            gains: vec![s.k],
            margins: vec![e.norm() / psi],
            psi: vec![psi],
            saturated: s.kappa > 0.0,
        })
    }
}
