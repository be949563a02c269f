//! Run reports, conservation-identity checks and CSV export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{StepStats, Termination, Trajectory};
use crate::error::{Error, Result};

/// Conservation identities and monotonicity properties checked along samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum InvariantCheck {
    /// `y² = y0² - cb (k² - k0²) + 2a (k - k0)` for `u = -k y, k' = y²`.
    HighGainIdentity { a: f64, cb: f64, y0: f64, k0: f64, bound: f64 },
    /// `y² = y0² + 2 cb ∫_{k0}^{k} N + 2a (k - k0)` with `N(k) = k² cos k`.
    NussbaumIdentity { a: f64, cb: f64, y0: f64, k0: f64, bound: f64 },
    /// Gain `index` never decreases (tolerance `bound`).
    GainMonotone { index: usize, bound: f64 },
    /// Every margin stays below `bound` (< 1 means strictly inside the funnel).
    FunnelInterior { bound: f64 },
    /// Algebraic residual stays below `bound`.
    AlgebraicResidual { bound: f64 },
    /// `‖u‖` stays below `bound`.
    InputBound { bound: f64 },
    /// `(y, k)` against `((1+t)^{-1/3}, 3((1+t)^{1/3} - 1))`.
    DisturbanceOracle { bound: f64 },
    /// `dist_λ(‖e‖) <= bound` for `t >= t_from`.
    LambdaTail { lambda: f64, t_from: f64, bound: f64 },
    /// First funnel radius never drops below `bound` (reported value: its minimum).
    PsiFloor { bound: f64 },
}

/// Closed-form solution `(x, k)` of the scalar disturbance prototype.
pub fn disturbance_oracle(t: f64) -> (f64, f64) {
    let c = (1.0 + t).cbrt();
    (1.0 / c, 3.0 * (c - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub termination: Termination,
    pub eps_observed: Vec<f64>,
    pub gain_max: Vec<f64>,
    pub input_sup: f64,
    pub checks: Vec<InvariantResult>,
    pub saturation_samples: usize,
    pub wall_time_s: f64,
    pub stats: StepStats,
    pub samples: usize,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Antiderivative of `k² cos k`.
pub fn nussbaum_integral(k0: f64, k1: f64) -> f64 {
    let f = |k: f64| k * k * k.sin() + 2.0 * k * k.cos() - 2.0 * k.sin();
    f(k1) - f(k0)
}

fn first(v: &[f64], what: &str) -> Result<f64> {
    v.first()
        .copied()
        .ok_or_else(|| Error::NotApplicable(format!("sample has no {what}")))
}

/// Evaluates `checks` along the trajectory.
pub fn verify_invariants(traj: &Trajectory, checks: &[InvariantCheck]) -> Result<RunReport> {
    let mut results = Vec::new();
    for c in checks {
        let (name, value, bound) = match c {
            InvariantCheck::HighGainIdentity { a, cb, y0, k0, bound } => {
                let mut drift: f64 = 0.0;
                for s in &traj.samples {
                    let y = first(&s.y, "output")?;
                    let k = first(&s.gains, "gain")?;
                    let rhs = y0 * y0 - cb * (k * k - k0 * k0) + 2.0 * a * (k - k0);
                    drift = drift.max((y * y - rhs).abs());
                }
                ("high_gain_identity", drift, *bound)
            }
            InvariantCheck::NussbaumIdentity { a, cb, y0, k0, bound } => {
                let mut drift: f64 = 0.0;
                for s in &traj.samples {
                    let y = first(&s.y, "output")?;
                    let k = first(&s.gains, "gain")?;
                    let rhs = y0 * y0 + 2.0 * cb * nussbaum_integral(*k0, k) + 2.0 * a * (k - k0);
                    drift = drift.max((y * y - rhs).abs());
                }
                ("nussbaum_identity", drift, *bound)
            }
            InvariantCheck::GainMonotone { index, bound } => {
                let mut worst = f64::INFINITY;
                for w in traj.samples.windows(2) {
                    worst = worst.min(w[1].gains[*index] - w[0].gains[*index]);
                }
                // reported as the largest decrease
                ("gain_monotone", (-worst).max(0.0), *bound)
            }
            InvariantCheck::FunnelInterior { bound } => {
                let m = traj.eps_observed().into_iter().fold(0.0, f64::max);
                ("funnel_interior", m, *bound)
            }
            InvariantCheck::AlgebraicResidual { bound } => {
                let m = traj.samples.iter().map(|s| s.residual).fold(0.0, f64::max);
                ("algebraic_residual", m, *bound)
            }
            InvariantCheck::InputBound { bound } => ("input_bound", traj.input_sup(), *bound),
            InvariantCheck::DisturbanceOracle { bound } => {
                let mut err: f64 = 0.0;
                for s in &traj.samples {
                    let (x, k) = disturbance_oracle(s.t);
                    err = err.max((first(&s.y, "output")? - x).abs());
                    err = err.max((first(&s.gains, "gain")? - k).abs());
                }
                ("disturbance_oracle", err, *bound)
            }
            InvariantCheck::LambdaTail { lambda, t_from, bound } => {
                let mut worst: f64 = 0.0;
                for s in traj.samples.iter().filter(|s| s.t >= *t_from) {
                    let en = s.e.iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max(crate::controllers::dist_lambda(en, *lambda));
                }
                ("lambda_tail", worst, *bound)
            }
            InvariantCheck::PsiFloor { bound } => {
                let m = traj
                    .samples
                    .iter()
                    .map(|s| first(&s.psi, "radius"))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                ("psi_floor", m, *bound)
            }
        };
        let passed = match c {
            InvariantCheck::FunnelInterior { .. } => value < bound,
            InvariantCheck::PsiFloor { .. } => value >= bound,
            _ => value <= bound,
        };
        results.push(InvariantResult {
            name: name.to_string(),
            value,
            bound,
            passed,
        });
    }
    Ok(RunReport {
        termination: traj.termination.clone(),
        eps_observed: traj.eps_observed(),
        gain_max: traj.gain_max(),
        input_sup: traj.input_sup(),
        checks: results,
        saturation_samples: traj.samples.iter().filter(|s| s.saturated).count(),
        wall_time_s: traj.wall_time_s,
        stats: traj.stats,
        samples: traj.samples.len(),
    })
}

/// Writes `t, y_*, u_*, e_*, psi_*, k_*, x_*` rows with 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, out: &mut W) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    let Some(s0) = traj.samples.first() else {
        return Ok(());
    };
    let mut header = vec!["t".to_string()];
    for (prefix, n) in [
        ("y", s0.y.len()),
        ("u", s0.u.len()),
        ("e", s0.e.len()),
        ("psi", s0.psi.len()),
        ("k", s0.gains.len()),
        ("x", s0.x.len()),
    ] {
        for i in 1..=n {
            header.push(format!("{prefix}_{i}"));
        }
    }
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for s in &traj.samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.y.iter().copied())
            .chain(s.u.iter().copied())
            .chain(s.e.iter().copied())
            .chain(s.psi.iter().copied())
            .chain(s.gains.iter().copied())
            .chain(s.x.iter().copied())
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nussbaum_antiderivative_matches_quadrature() {
        let (a, b) = (0.3, 7.9);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |k: f64| k * k * k.cos();
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        let simpson = s * h / 3.0;
        assert!((simpson - nussbaum_integral(a, b)).abs() < 1e-9);
    }
}
