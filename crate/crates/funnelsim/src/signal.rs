//! Reference and disturbance signals with analytic derivatives.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Zero { dim: usize },
    Constant { value: Vec<f64> },
    /// Componentwise `offset + amplitude sin(omega t + phase)`.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
        #[serde(default)]
        offset: Vec<f64>,
    },
    /// Scalar `3 - (10 + 9t) / (3 (1+t)^{4/3})`.
    DecayingPrototype,
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal::Zero { dim }
    }

    pub fn sin(amplitude: Vec<f64>, omega: Vec<f64>) -> Self {
        Signal::Sinusoid {
            amplitude,
            omega,
            phase: Vec::new(),
            offset: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Zero { dim } => *dim,
            Signal::Constant { value } => value.len(),
            Signal::Sinusoid { amplitude, .. } => amplitude.len(),
            Signal::DecayingPrototype => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Signal::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                let n = amplitude.len();
                if omega.len() != n
                    || !(phase.is_empty() || phase.len() == n)
                    || !(offset.is_empty() || offset.len() == n)
                {
                    return Err(Error::Dimension("sinusoid component counts differ".into()));
                }
                if amplitude.iter().chain(omega).chain(phase).chain(offset).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("sinusoid parameters must be finite".into()));
                }
            }
            Signal::Constant { value } if value.iter().any(|v| !v.is_finite()) => {
                return Err(Error::InvalidParameter("constant must be finite".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// `[s(t), s'(t), ..., s^(order)(t)]`.
    pub fn derivs(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        let n = self.dim();
        let mut out = vec![DVector::zeros(n); order + 1];
        match self {
            Signal::Zero { .. } => {}
            Signal::Constant { value } => out[0] = DVector::from_column_slice(value),
            Signal::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                for i in 0..n {
                    let ph = phase.get(i).copied().unwrap_or(0.0);
                    let arg = omega[i] * t + ph;
                    for (k, o) in out.iter_mut().enumerate() {
                        // d^k/dt^k sin(arg) = ω^k sin(arg + kπ/2)
                        o[i] = amplitude[i]
                            * omega[i].powi(k as i32)
                            * (arg + k as f64 * std::f64::consts::FRAC_PI_2).sin();
                    }
                    out[0][i] += offset.get(i).copied().unwrap_or(0.0);
                }
            }
            Signal::DecayingPrototype => {
                let s = 1.0 + t;
                out[0][0] = 3.0 - (10.0 + 9.0 * t) / (3.0 * s.powf(4.0 / 3.0));
                if order >= 1 {
                    // derivative of -(10+9t)/3 * s^{-4/3}
                    out[1][0] = -3.0 * s.powf(-4.0 / 3.0)
                        + (4.0 / 9.0) * (10.0 + 9.0 * t) * s.powf(-7.0 / 3.0);
                }
            }
        }
        out
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        self.derivs(t, 0).swap_remove(0)
    }

    /// `(sup ‖s‖, sup ‖s'‖)` from the closed form.
    pub fn sup_bounds(&self) -> (f64, f64) {
        match self {
            Signal::Zero { .. } => (0.0, 0.0),
            Signal::Constant { value } => (value.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
            Signal::Sinusoid {
                amplitude,
                omega,
                offset,
                ..
            } => {
                let s0: f64 = amplitude
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.abs() + offset.get(i).map_or(0.0, |o| o.abs())).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let s1: f64 = amplitude
                    .iter()
                    .zip(omega)
                    .map(|(a, w)| (a * w).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (s0, s1)
            }
            Signal::DecayingPrototype => (3.0, 3.0),
        }
    }
}
