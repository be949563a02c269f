//! Causal operators, system nonlinearities and input nonlinearities.
//!
//! Operators map an input history `y: [-h, t] -> R^n` to `R^q`. Realizations
//! with internal state expose it so a closed loop can integrate it jointly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{sign_definite, spectral_norm};
use crate::sim::rk45::{integrate, History, IntegratorOptions, OdeSystem, Termination};

/// Input history as seen by an operator; errors with `InsufficientHistory` outside its coverage.
pub type InputFn<'a> = &'a dyn Fn(f64) -> Result<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayTerm {
    /// Row-major `q x n` gain: `Ψ_i(t, ξ) = K_i ξ`.
    pub gain: Vec<Vec<f64>>,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Realization {
    /// `Σ K_i y(t - h_i)`.
    PointDelay { terms: Vec<DelayTerm> },
    /// `∫_{-h}^0 e^{λ s} K y(t + s) ds`, composite Gauss-Legendre.
    DistributedDelay {
        gain: Vec<Vec<f64>>,
        horizon: f64,
        #[serde(default)]
        decay: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "default_panels")]
        panels: usize,
    },
    /// `S η(t)` with `η' = Q η + P y`, `η(0) = η0`.
    InternalDynamicsLti {
        q: Vec<Vec<f64>>,
        p: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
        #[serde(default)]
        eta0: Vec<f64>,
    },
    /// Scalar relay with hysteresis: switches to `high` when the first input
    /// component exceeds `on`, back to `low` below `off`. Stub for hysteresis.
    Relay {
        on: f64,
        off: f64,
        low: f64,
        high: f64,
        scan_step: f64,
    },
    /// Sum of the member outputs.
    Composite { parts: Vec<CausalOperator> },
}

fn default_nodes() -> usize {
    4
}

fn default_panels() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalOperator {
    pub input_dim: usize,
    pub output_dim: usize,
    pub realization: Realization,
}

fn mat(rows: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{what} must be {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => return Err(Error::InvalidParameter(format!("quadrature order {n} not in 1..=5"))),
    };
    Ok((x, w))
}

impl CausalOperator {
    pub fn new(input_dim: usize, output_dim: usize, realization: Realization) -> Result<Self> {
        let op = CausalOperator {
            input_dim,
            output_dim,
            realization,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn point_delay(gain: f64, delay: f64) -> Result<Self> {
        Self::new(
            1,
            1,
            Realization::PointDelay {
                terms: vec![DelayTerm {
                    gain: vec![vec![gain]],
                    delay,
                }],
            },
        )
    }

    pub fn internal_lti(q: &DMatrix<f64>, p: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        Self::new(
            p.ncols(),
            s.nrows(),
            Realization::InternalDynamicsLti {
                q: rows(q),
                p: rows(p),
                s: rows(s),
                eta0: Vec::new(),
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (n, q) = (self.input_dim, self.output_dim);
        match &self.realization {
            Realization::PointDelay { terms } => {
                for t in terms {
                    mat(&t.gain, q, n, "delay gain")?;
                    if !(t.delay >= 0.0 && t.delay.is_finite()) {
                        return Err(Error::InvalidParameter("delay must be finite and >= 0".into()));
                    }
                }
            }
            Realization::DistributedDelay {
                gain,
                horizon,
                nodes,
                panels,
                decay,
            } => {
                mat(gain, q, n, "kernel gain")?;
                gauss_legendre(*nodes)?;
                if !(*horizon > 0.0 && horizon.is_finite()) || *panels == 0 || !decay.is_finite() {
                    return Err(Error::InvalidParameter("distributed delay parameters".into()));
                }
            }
            Realization::InternalDynamicsLti { q: qm, p, s, eta0 } => {
                let k = qm.len();
                mat(qm, k, k, "Q")?;
                mat(p, k, n, "P")?;
                mat(s, q, k, "S")?;
                if !(eta0.is_empty() || eta0.len() == k) {
                    return Err(Error::Dimension("eta0 length".into()));
                }
            }
            Realization::Relay { on, off, scan_step, .. } => {
                if n != 1 || q != 1 || off > on || *scan_step <= 0.0 {
                    return Err(Error::InvalidParameter("relay needs scalar io, off <= on, scan_step > 0".into()));
                }
            }
            Realization::Composite { parts } => {
                for p in parts {
                    if p.input_dim != n || p.output_dim != q {
                        return Err(Error::Dimension("composite parts must share dimensions".into()));
                    }
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Memory length `h`.
    pub fn memory(&self) -> f64 {
        match &self.realization {
            Realization::PointDelay { terms } => terms.iter().map(|t| t.delay).fold(0.0, f64::max),
            Realization::DistributedDelay { horizon, .. } => *horizon,
            Realization::Composite { parts } => parts.iter().map(|p| p.memory()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Smallest positive point delay (caps the step size in the method of steps).
    pub fn min_delay(&self) -> Option<f64> {
        match &self.realization {
            Realization::PointDelay { terms } => terms
                .iter()
                .map(|t| t.delay)
                .filter(|d| *d > 0.0)
                .min_by(|a, b| a.total_cmp(b)),
            Realization::Composite { parts } => parts
                .iter()
                .filter_map(|p| p.min_delay())
                .min_by(|a, b| a.total_cmp(b)),
            _ => None,
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.realization {
            Realization::InternalDynamicsLti { q, .. } => q.len(),
            Realization::Composite { parts } => parts.iter().map(|p| p.state_dim()).sum(),
            _ => 0,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match &self.realization {
            Realization::InternalDynamicsLti { q, eta0, .. } => {
                if eta0.is_empty() {
                    vec![0.0; q.len()]
                } else {
                    eta0.clone()
                }
            }
            Realization::Composite { parts } => parts.iter().flat_map(|p| p.initial_state()).collect(),
            _ => Vec::new(),
        }
    }

    /// Derivative of the internal state given the current input value.
    pub fn state_rhs(&self, input: &[f64], state: &[f64], dstate: &mut [f64]) -> Result<()> {
        match &self.realization {
            Realization::InternalDynamicsLti { q, p, .. } => {
                let k = q.len();
                for i in 0..k {
                    let mut v = 0.0;
                    for j in 0..k {
                        v += q[i][j] * state[j];
                    }
                    for (j, y) in input.iter().enumerate() {
                        v += p[i][j] * y;
                    }
                    dstate[i] = v;
                }
            }
            Realization::Composite { parts } => {
                let mut off = 0;
                for part in parts {
                    let d = part.state_dim();
                    part.state_rhs(input, &state[off..off + d], &mut dstate[off..off + d])?;
                    off += d;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Output at time `t` from the input history and the current internal state.
    pub fn apply(&self, t: f64, input: InputFn, state: &[f64]) -> Result<Vec<f64>> {
        let q = self.output_dim;
        let mut out = vec![0.0; q];
        match &self.realization {
            Realization::PointDelay { terms } => {
                for term in terms {
                    let y = input(t - term.delay)?;
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += term.gain[i].iter().zip(&y).map(|(g, v)| g * v).sum::<f64>();
                    }
                }
            }
            Realization::DistributedDelay {
                gain,
                horizon,
                decay,
                nodes,
                panels,
            } => {
                let (x, w) = gauss_legendre(*nodes)?;
                let width = horizon / *panels as f64;
                for k in 0..*panels {
                    let a = -horizon + k as f64 * width;
                    for (xi, wi) in x.iter().zip(&w) {
                        let s = a + 0.5 * width * (xi + 1.0);
                        let y = input(t + s)?;
                        let weight = 0.5 * width * wi * (decay * s).exp();
                        for (i, o) in out.iter_mut().enumerate() {
                            *o += weight * gain[i].iter().zip(&y).map(|(g, v)| g * v).sum::<f64>();
                        }
                    }
                }
            }
            Realization::InternalDynamicsLti { s, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = s[i].iter().zip(state).map(|(a, b)| a * b).sum();
                }
            }
            Realization::Relay {
                on,
                off,
                low,
                high,
                scan_step,
            } => {
                // Scan backwards for the most recent threshold crossing.
                let mut tau = t;
                out[0] = *low;
                while tau >= 0.0 {
                    let y = input(tau)?[0];
                    if y >= *on {
                        out[0] = *high;
                        break;
                    }
                    if y <= *off {
                        break;
                    }
                    tau -= scan_step;
                }
            }
            Realization::Composite { parts } => {
                let mut off = 0;
                for part in parts {
                    let d = part.state_dim();
                    let y = part.apply(t, input, &state[off..off + d])?;
                    off += d;
                    for (o, v) in out.iter_mut().zip(y) {
                        *o += v;
                    }
                }
            }
        }
        Ok(out)
    }
}

struct OperatorOde<'a> {
    op: &'a CausalOperator,
    input: &'a (dyn Fn(f64) -> Vec<f64> + Sync),
}

impl OdeSystem for OperatorOde<'_> {
    fn dim(&self) -> usize {
        self.op.state_dim()
    }

    fn rhs(&self, t: f64, x: &[f64], _hist: &History, dx: &mut [f64]) -> Result<()> {
        self.op.state_rhs(&(self.input)(t), x, dx)
    }
}

/// Response of `op` to an explicit input signal defined on `[-h, ∞)`, sampled at `ts`.
pub fn respond(
    op: &CausalOperator,
    input: &(dyn Fn(f64) -> Vec<f64> + Sync),
    ts: &[f64],
    rtol: f64,
) -> Result<Vec<Vec<f64>>> {
    let t_end = ts.iter().copied().fold(0.0, f64::max);
    let input_checked = |t: f64| -> Result<Vec<f64>> {
        if t < -op.memory() - 1e-12 {
            return Err(Error::InsufficientHistory { t });
        }
        Ok(input(t))
    };
    if op.state_dim() == 0 || t_end == 0.0 {
        let x0 = op.initial_state();
        return ts.iter().map(|t| op.apply(*t, &input_checked, &x0)).collect();
    }
    let ode = OperatorOde { op, input };
    let mut opts = IntegratorOptions::new(t_end, rtol, rtol * 1e-2);
    opts.max_step = 0.05;
    let sol = integrate(&ode, 0.0, &op.initial_state(), &opts, History::new(0.0))?;
    if sol.termination != Termination::Completed {
        return Err(Error::IntegrationFailure("operator state integration stopped early".into()));
    }
    ts.iter()
        .map(|t| {
            let x = sol.history.eval(*t)?;
            op.apply(*t, &input_checked, &x)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiboReport {
    pub c2_estimate: f64,
    /// `‖S‖ ‖P‖ c1 ∫_0^∞ ‖e^{Qτ}‖ dτ` for Hurwitz internal dynamics.
    pub analytic_bound: Option<f64>,
    /// Internal dynamics with a non-Hurwitz `Q`.
    pub unbounded_warning: bool,
}

/// `∫_0^∞ ‖e^{Qτ}‖ dτ` by composite Simpson until the integrand is negligible.
pub fn exp_norm_integral(q: &DMatrix<f64>) -> f64 {
    let h = 1e-3 / (1.0 + spectral_norm(q));
    let f = |t: f64| spectral_norm(&(q * t).exp());
    let mut total = 0.0;
    let mut a = 0.0;
    let panel = 200.0 * h;
    loop {
        let n = 200;
        let mut s = f(a) + f(a + panel);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        total += s * h / 3.0;
        a += panel;
        if f(a) < 1e-12 || a > 1e4 {
            break;
        }
    }
    total
}

fn random_input(rng: &mut ChaCha8Rng, dim: usize, c1: f64) -> impl Fn(f64) -> Vec<f64> + Sync {
    let modes = 6;
    let params: Vec<Vec<(f64, f64, f64)>> = (0..dim)
        .map(|_| {
            let raw: Vec<(f64, f64, f64)> = (0..modes)
                .map(|_| (rng.random::<f64>(), rng.random_range(0.1..3.0), rng.random_range(0.0..6.3)))
                .collect();
            let total: f64 = raw.iter().map(|p| p.0).sum();
            raw.into_iter().map(|(a, w, ph)| (a / total, w, ph)).collect()
        })
        .collect();
    let scale = c1 / (dim as f64).sqrt();
    move |t: f64| {
        params
            .iter()
            .map(|ms| scale * ms.iter().map(|(a, w, ph)| a * (w * t + ph).sin()).sum::<f64>())
            .collect()
    }
}

/// Drives `op` with seeded random band-limited inputs of sup-norm at most `c1`.
pub fn bibo_probe(op: &CausalOperator, c1: f64, trials: usize, horizon: f64, seed: u64) -> Result<BiboReport> {
    if trials == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("trials >= 1 and horizon > 0 required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts: Vec<f64> = (0..=400).map(|i| horizon * i as f64 / 400.0).collect();
    let mut sup: f64 = 0.0;
    for _ in 0..trials {
        let u = random_input(&mut rng, op.input_dim, c1);
        for y in respond(op, &u, &ts, 1e-8)? {
            sup = sup.max(y.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    let (analytic_bound, unbounded_warning) = match &op.realization {
        Realization::InternalDynamicsLti { q, p, s, .. } => {
            let k = q.len();
            let qm = mat(q, k, k, "Q")?;
            let hurwitz = crate::lti::eigenvalues(&qm).iter().all(|l| l.re < 0.0);
            if hurwitz {
                let pm = mat(p, k, op.input_dim, "P")?;
                let sm = mat(s, op.output_dim, k, "S")?;
                (
                    Some(spectral_norm(&sm) * spectral_norm(&pm) * c1 * exp_norm_integral(&qm)),
                    false,
                )
            } else {
                (None, true)
            }
        }
        _ => (None, false),
    };
    Ok(BiboReport {
        c2_estimate: sup,
        analytic_bound,
        unbounded_warning,
    })
}

/// For affine `f(d, z, u) = L1 d + L2 z + Γ u`, the high-gain property holds iff `Γ` is sign-definite.
pub fn np1_linear_check(l1: &DMatrix<f64>, l2: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<bool> {
    let m = gamma.nrows();
    if gamma.ncols() != m || l1.nrows() != m || l2.nrows() != m {
        return Err(Error::Dimension("L1, L2, Γ must have m rows and Γ must be square".into()));
    }
    Ok(sign_definite(gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlDirection {
    Positive,
    Negative,
    Unknown,
}

/// System nonlinearity `f(d, z, u) = L1 d + L2 z + Γ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub control_direction: ControlDirection,
}

impl Nonlinearity {
    pub fn affine(l1: DMatrix<f64>, l2: DMatrix<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let m = gamma.nrows();
        if gamma.ncols() != m || l1.nrows() != m || l2.nrows() != m {
            return Err(Error::Dimension("nonlinearity blocks".into()));
        }
        let sym = (&gamma + gamma.transpose()) * 0.5;
        let ev = sym.symmetric_eigenvalues();
        let control_direction = if ev.iter().all(|v| *v > 0.0) {
            ControlDirection::Positive
        } else if ev.iter().all(|v| *v < 0.0) {
            ControlDirection::Negative
        } else {
            ControlDirection::Unknown
        };
        Ok(Nonlinearity {
            l1,
            l2,
            gamma,
            control_direction,
        })
    }

    pub fn p(&self) -> usize {
        self.l1.ncols()
    }

    pub fn q(&self) -> usize {
        self.l2.ncols()
    }

    pub fn m(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn affine_gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn eval(&self, d: &DVector<f64>, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.l1 * d + &self.l2 * z + &self.gamma * u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputNonlinearity {
    /// `a v + b`.
    Linear { a: f64, b: f64 },
    /// `a v |v|`.
    SignedSquare { a: f64 },
    /// Zero on `(b_l, b_r)`; `slope_r (v - b_r)` above, `slope_l (v - b_l)` below.
    DeadZone { b_l: f64, b_r: f64, slope_l: f64, slope_r: f64 },
    /// `limit · tanh(v / limit)`; bounded, hence rejected where surjectivity is needed.
    Saturating { limit: f64 },
}

impl InputNonlinearity {
    pub fn dead_zone(b_l: f64, b_r: f64) -> Result<Self> {
        let dz = InputNonlinearity::DeadZone {
            b_l,
            b_r,
            slope_l: 1.0,
            slope_r: 1.0,
        };
        dz.validate()?;
        Ok(dz)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputNonlinearity::Linear { a, .. } | InputNonlinearity::SignedSquare { a } if *a == 0.0 => {
                Err(Error::InvalidParameter("zero gain is not surjective".into()))
            }
            InputNonlinearity::DeadZone {
                b_l,
                b_r,
                slope_l,
                slope_r,
            } if !(*b_l < 0.0 && 0.0 < *b_r && *slope_l > 0.0 && *slope_r > 0.0) => Err(Error::InvalidParameter(
                "dead zone needs b_l < 0 < b_r and positive slopes".into(),
            )),
            InputNonlinearity::Saturating { limit } if *limit <= 0.0 => {
                Err(Error::InvalidParameter("saturation limit must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Surjective and unbounded (admissible as `β` in the plant input channel).
    pub fn surjective_unbounded(&self) -> bool {
        !matches!(self, InputNonlinearity::Saturating { .. })
    }

    /// Rejects kinds unusable as an input nonlinearity `β`.
    pub fn as_beta(&self) -> Result<&Self> {
        self.validate()?;
        if !self.surjective_unbounded() {
            return Err(Error::InvalidParameter("saturating input map is not surjective".into()));
        }
        Ok(self)
    }

    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            InputNonlinearity::Linear { a, b } => a * v + b,
            InputNonlinearity::SignedSquare { a } => a * v * v.abs(),
            InputNonlinearity::DeadZone { .. } => deadzone_eval(self, v).unwrap_or(f64::NAN),
            InputNonlinearity::Saturating { limit } => limit * (v / limit).tanh(),
        }
    }
}

pub fn deadzone_eval(dz: &InputNonlinearity, v: f64) -> Result<f64> {
    match *dz {
        InputNonlinearity::DeadZone {
            b_l,
            b_r,
            slope_l,
            slope_r,
        } => Ok(if v >= b_r {
            slope_r * (v - b_r)
        } else if v <= b_l {
            slope_l * (v - b_l)
        } else {
            0.0
        }),
        _ => Err(Error::NotApplicable("not a dead zone".into())),
    }
}

/// Right inverse of the dead zone outside the band: returns `v` with `D(v) = w`.
pub fn deadzone_inverse(dz: &InputNonlinearity, w: f64) -> Result<f64> {
    match *dz {
        InputNonlinearity::DeadZone {
            b_l,
            b_r,
            slope_l,
            slope_r,
        } => Ok(if w > 0.0 {
            b_r + w / slope_r
        } else if w < 0.0 {
            b_l + w / slope_l
        } else {
            0.0
        }),
        _ => Err(Error::NotApplicable("not a dead zone".into())),
    }
}
