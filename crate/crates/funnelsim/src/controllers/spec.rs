//! Serializable controller selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    precomp_design, Alpha, FilterFc, FunnelRdR, HighGain, Icfc, LambdaTracker, NFun, NonBackstepFc, Nussbaum, PdFunnel,
    Ppc, PreCompFc, SaturatedFc,
};
use crate::error::{Error, Result};
use crate::funnel::FunnelFunction;
use crate::lti::matrix_from_rows;
use crate::sim::Controller;

fn one() -> usize {
    1
}

fn k2cosk() -> NFun {
    NFun::K2CosK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    HighGain {
        #[serde(default)]
        k0: f64,
    },
    LambdaTracker {
        lambda: f64,
        #[serde(default)]
        k0: f64,
    },
    Nussbaum {
        #[serde(default = "k2cosk")]
        n: NFun,
        #[serde(default)]
        k0: f64,
    },
    FunnelRd1 {
        #[serde(default)]
        alpha: Alpha,
        #[serde(default)]
        n: NFun,
        phi: FunnelFunction,
    },
    FunnelRdR {
        #[serde(default)]
        alpha: Alpha,
        #[serde(default)]
        n: NFun,
        phi: FunnelFunction,
        r: usize,
        /// Defaults to `r` (all error derivatives available).
        #[serde(default)]
        r_hat: Option<usize>,
    },
    FilterFc {
        #[serde(default)]
        alpha: Alpha,
        #[serde(default)]
        n: NFun,
        phi: FunnelFunction,
        mu: f64,
        r: usize,
    },
    PreCompFc {
        #[serde(default)]
        alpha: Alpha,
        #[serde(default)]
        n: NFun,
        phi: FunnelFunction,
        rho: f64,
        q: Vec<f64>,
        /// Derived from `q` with `R = I` when absent.
        #[serde(default)]
        p: Option<Vec<f64>>,
        /// Rows of `Γ̃`; identity when absent.
        #[serde(default)]
        gamma_tilde: Option<Vec<Vec<f64>>>,
        #[serde(default = "one")]
        r_hat: usize,
    },
    NonBackstepFc {
        phis: Vec<FunnelFunction>,
    },
    PdFunnel {
        phi0: FunnelFunction,
        phi1: FunnelFunction,
        #[serde(default)]
        modified: bool,
    },
    Ppc {
        k: Vec<f64>,
        phis: Vec<FunnelFunction>,
    },
    SaturatedFc {
        phi: FunnelFunction,
        u_hat: f64,
    },
    Icfc {
        u_hat: f64,
        alpha_d: f64,
        beta_d: f64,
        psi0: f64,
    },
    DaeFc {
        #[serde(default)]
        alpha: Alpha,
        #[serde(default)]
        n: NFun,
        phi_i: FunnelFunction,
        phi_ii: FunnelFunction,
        k_hat: f64,
    },
}

impl ControllerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::HighGain { .. } => "high_gain",
            ControllerSpec::LambdaTracker { .. } => "lambda_tracker",
            ControllerSpec::Nussbaum { .. } => "nussbaum",
            ControllerSpec::FunnelRd1 { .. } => "funnel_rd1",
            ControllerSpec::FunnelRdR { .. } => "funnel_rd_r",
            ControllerSpec::FilterFc { .. } => "filter_fc",
            ControllerSpec::PreCompFc { .. } => "pre_comp_fc",
            ControllerSpec::NonBackstepFc { .. } => "non_backstep_fc",
            ControllerSpec::PdFunnel { .. } => "pd_funnel",
            ControllerSpec::Ppc { .. } => "ppc",
            ControllerSpec::SaturatedFc { .. } => "saturated_fc",
            ControllerSpec::Icfc { .. } => "icfc",
            ControllerSpec::DaeFc { .. } => "dae_fc",
        }
    }

    /// Funnel functions the law uses.
    pub fn funnels(&self) -> Vec<&FunnelFunction> {
        match self {
            ControllerSpec::HighGain { .. }
            | ControllerSpec::LambdaTracker { .. }
            | ControllerSpec::Nussbaum { .. }
            | ControllerSpec::Icfc { .. } => Vec::new(),
            ControllerSpec::FunnelRd1 { phi, .. }
            | ControllerSpec::FunnelRdR { phi, .. }
            | ControllerSpec::FilterFc { phi, .. }
            | ControllerSpec::PreCompFc { phi, .. }
            | ControllerSpec::SaturatedFc { phi, .. } => vec![phi],
            ControllerSpec::NonBackstepFc { phis } | ControllerSpec::Ppc { phis, .. } => phis.iter().collect(),
            ControllerSpec::PdFunnel { phi0, phi1, .. } => vec![phi0, phi1],
            ControllerSpec::DaeFc { phi_i, phi_ii, .. } => vec![phi_i, phi_ii],
        }
    }

    /// Builds the law for a plant with `m` outputs. DAE laws are built by the DAE closed loop.
    pub fn build(&self, m: usize) -> Result<Box<dyn Controller>> {
        Ok(match self.clone() {
            ControllerSpec::HighGain { k0 } => Box::new(HighGain { k0 }),
            ControllerSpec::LambdaTracker { lambda, k0 } => Box::new(LambdaTracker::new(lambda, k0)?),
            ControllerSpec::Nussbaum { n, k0 } => Box::new(Nussbaum { n, k0 }),
            ControllerSpec::FunnelRd1 { alpha, n, phi } => Box::new(FunnelRdR::rd1(alpha, n, phi, m)?),
            ControllerSpec::FunnelRdR { alpha, n, phi, r, r_hat } => {
                Box::new(FunnelRdR::new(alpha, n, phi, r, r_hat.unwrap_or(r), m)?)
            }
            ControllerSpec::FilterFc { alpha, n, phi, mu, r } => Box::new(FilterFc::new(alpha, n, phi, mu, r, m)?),
            ControllerSpec::PreCompFc {
                alpha,
                n,
                phi,
                rho,
                q,
                p,
                gamma_tilde,
                r_hat,
            } => {
                let p = match p {
                    Some(p) => p,
                    None => precomp_design(&q, &DMatrix::identity(q.len(), q.len()))?.p,
                };
                let g = match gamma_tilde {
                    Some(rows) => matrix_from_rows(&rows)?,
                    None => DMatrix::identity(m, m),
                };
                Box::new(PreCompFc::new(alpha, n, phi, rho, p, q, g, r_hat, m)?)
            }
            ControllerSpec::NonBackstepFc { phis } => Box::new(NonBackstepFc::new(phis)?),
            ControllerSpec::PdFunnel { phi0, phi1, modified } => Box::new(PdFunnel { phi0, phi1, modified }),
            ControllerSpec::Ppc { k, phis } => Box::new(Ppc::new(k, phis)?),
            ControllerSpec::SaturatedFc { phi, u_hat } => Box::new(SaturatedFc::new(phi, u_hat)?),
            ControllerSpec::Icfc {
                u_hat,
                alpha_d,
                beta_d,
                psi0,
            } => Box::new(Icfc::new(u_hat, alpha_d, beta_d, psi0)?),
            ControllerSpec::DaeFc { .. } => {
                return Err(Error::NotApplicable("DAE controllers need a DAE plant".into()));
            }
        })
    }

    /// Parameter checks that do not depend on the plant.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            ControllerSpec::DaeFc { alpha, k_hat, .. } => {
                alpha.validate()?;
                if !(*k_hat > 0.0) {
                    return Err(Error::InvalidParameter("k_hat must be positive".into()));
                }
                Ok(())
            }
            _ => self.build(m).map(|_| ()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_build() {
        let s: ControllerSpec = serde_json::from_str(
            r#"{"variant": "funnel_rd_r", "phi": {"family": "exp_decay_reciprocal", "a": 4, "b": 2, "c": 0.1}, "r": 2}"#,
        )
        .unwrap();
        let c = s.build(2).unwrap();
        assert_eq!(c.required_derivatives(), 2);
        let s: ControllerSpec = serde_json::from_str(
            r#"{"variant": "pre_comp_fc", "phi": {"family": "linear_ramp", "eps": 0.1, "t_ramp": 1}, "rho": 2, "q": [1, 1]}"#,
        )
        .unwrap();
        let c = s.build(1).unwrap();
        assert_eq!(c.state_dim(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: std::result::Result<ControllerSpec, _> = serde_json::from_str(r#"{"variant": "high_gain", "k1": 2}"#);
        assert!(r.is_err());
    }

    #[test]
    fn icfc_parameter_rule() {
        let s = ControllerSpec::Icfc {
            u_hat: 1.0,
            alpha_d: 1.0,
            beta_d: 2.0,
            psi0: 1.5,
        };
        assert!(matches!(s.validate(1), Err(Error::InvalidParameter(_))));
    }
}
