//! Closed-loop assembly, guarded integration and run diagnostics.

pub mod report;
pub mod rk45;

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::Signal;

pub use report::{disturbance_oracle, verify_invariants, write_csv, InvariantCheck, InvariantResult, RunReport};
pub use rk45::{integrate, History, IntegratorOptions, OdeSystem, Solution, StepStats, Termination};

/// View of the plant block of the stored closed-loop history.
pub struct StateHistory<'a> {
    hist: &'a History,
    len: usize,
}

impl<'a> StateHistory<'a> {
    pub fn new(hist: &'a History, len: usize) -> Self {
        StateHistory { hist, len }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut v = self.hist.eval(t)?;
        v.truncate(self.len);
        Ok(v)
    }

    /// Latest time covered by accepted steps.
    pub fn t_max(&self) -> f64 {
        self.hist.t_max()
    }
}

/// A controlled plant with `m` outputs and `r` available output derivatives.
pub trait Plant: Send + Sync {
    fn state_dim(&self) -> usize;
    fn m(&self) -> usize;
    /// Number of output derivatives `y, y', ..., y^(r-1)` the plant exposes.
    fn r(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    fn outputs(&self, t: f64, x: &[f64], hist: &StateHistory) -> Result<Vec<DVector<f64>>>;
    fn rhs(&self, t: f64, x: &[f64], u: &DVector<f64>, hist: &StateHistory, dx: &mut [f64]) -> Result<()>;
    /// Smallest point delay, which caps the step size.
    fn min_delay(&self) -> Option<f64> {
        None
    }
}

/// What the controller sees at time `t`.
pub struct Measurement<'a> {
    pub t: f64,
    /// `y, y', ..., y^(r-1)` as exposed by the plant.
    pub y: &'a [DVector<f64>],
    /// Reference and its derivatives.
    pub yref: &'a [DVector<f64>],
}

impl Measurement<'_> {
    /// `e^(k) = y^(k) - y_ref^(k)`.
    pub fn e(&self, k: usize) -> DVector<f64> {
        &self.y[k] - &self.yref[k]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlOutput {
    pub u: DVector<f64>,
    pub xc_dot: Vec<f64>,
    pub gains: Vec<f64>,
    /// Normalized funnel distances (`φ‖e‖` and stage analogues); all < 1 inside the funnels.
    pub margins: Vec<f64>,
    /// Funnel radii.
    pub psi: Vec<f64>,
    pub saturated: bool,
}

pub trait Controller: Send + Sync {
    fn state_dim(&self) -> usize {
        0
    }
    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Output derivatives the law needs (1 means `y` only).
    fn required_derivatives(&self) -> usize {
        1
    }
    /// Reference derivatives the law needs, beyond the value.
    fn reference_order(&self) -> usize {
        self.required_derivatives().saturating_sub(1)
    }
    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput>;
}

/// One recorded sample along an accepted trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub psi: Vec<f64>,
    pub gains: Vec<f64>,
    pub margins: Vec<f64>,
    pub saturated: bool,
    /// Algebraic residual (zero for ODE loops).
    pub residual: f64,
    pub x: Vec<f64>,
}

/// A guarded closed-loop initial-value problem.
pub trait ClosedLoop: OdeSystem + Send + Sync {
    fn m(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    fn observe(&self, t: f64, x: &[f64], hist: &History) -> Result<Sample>;
    fn max_step_hint(&self) -> f64 {
        f64::INFINITY
    }
    fn prehistory(&self) -> Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>> {
        None
    }
}

/// Output and reference derivative chains, then the controller output.
type Evaluated = (Vec<DVector<f64>>, Vec<DVector<f64>>, ControlOutput);

/// Plant, controller and reference bundled into one state vector `[x_plant, x_controller]`.
pub struct ClosedLoopProblem {
    pub plant: Box<dyn Plant>,
    pub controller: Box<dyn Controller>,
    pub reference: Signal,
    np: usize,
    nc: usize,
}

impl ClosedLoopProblem {
    /// Checks compatibility and initial funnel membership.
    pub fn assemble(plant: Box<dyn Plant>, controller: Box<dyn Controller>, reference: Signal) -> Result<Self> {
        reference.validate()?;
        if reference.dim() != plant.m() {
            return Err(Error::Dimension(format!(
                "reference has dimension {}, plant has {} outputs",
                reference.dim(),
                plant.m()
            )));
        }
        if controller.required_derivatives() > plant.r() {
            return Err(Error::Dimension(format!(
                "controller needs {} output derivatives, plant exposes {}",
                controller.required_derivatives(),
                plant.r()
            )));
        }
        let np = plant.state_dim();
        let nc = controller.state_dim();
        let p = ClosedLoopProblem {
            plant,
            controller,
            reference,
            np,
            nc,
        };
        let x0 = p.initial_state_vec();
        if x0.len() != np + nc {
            return Err(Error::Dimension("initial state length".into()));
        }
        let hist = History::with_prehistory(0.0, p.constant_prehistory());
        p.evaluate(0.0, &x0, &hist)?;
        Ok(p)
    }

    fn constant_prehistory(&self) -> Box<dyn Fn(f64) -> Vec<f64> + Send + Sync> {
        let x0 = self.initial_state_vec();
        Box::new(move |_| x0.clone())
    }

    fn initial_state_vec(&self) -> Vec<f64> {
        let mut x = self.plant.initial_state();
        x.extend(self.controller.initial_state());
        x
    }

    /// Layout `(plant states, controller states)`.
    pub fn layout(&self) -> (usize, usize) {
        (self.np, self.nc)
    }

    pub fn unpack<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.np)
    }

    pub fn pack(&self, xp: &[f64], xc: &[f64]) -> Vec<f64> {
        let mut v = xp.to_vec();
        v.extend_from_slice(xc);
        v
    }

    fn evaluate(&self, t: f64, x: &[f64], hist: &History) -> Result<Evaluated> {
        let (xp, xc) = self.unpack(x);
        let sh = StateHistory::new(hist, self.np);
        let y = self.plant.outputs(t, xp, &sh)?;
        let yref = self.reference.derivs(t, self.controller.reference_order().max(y.len() - 1));
        let meas = Measurement {
            t,
            y: &y,
            yref: &yref,
        };
        let out = self.controller.eval(&meas, xc)?;
        Ok((y, yref, out))
    }
}

impl OdeSystem for ClosedLoopProblem {
    fn dim(&self) -> usize {
        self.np + self.nc
    }

    fn rhs(&self, t: f64, x: &[f64], hist: &History, dx: &mut [f64]) -> Result<()> {
        let (_, _, out) = self.evaluate(t, x, hist)?;
        let (xp, _) = self.unpack(x);
        let sh = StateHistory::new(hist, self.np);
        let (dp, dc) = dx.split_at_mut(self.np);
        self.plant.rhs(t, xp, &out.u, &sh, dp)?;
        dc.copy_from_slice(&out.xc_dot);
        Ok(())
    }
}

impl ClosedLoop for ClosedLoopProblem {
    fn m(&self) -> usize {
        self.plant.m()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial_state_vec()
    }

    fn observe(&self, t: f64, x: &[f64], hist: &History) -> Result<Sample> {
        let (y, yref, out) = self.evaluate(t, x, hist)?;
        Ok(Sample {
            t,
            y: y[0].iter().copied().collect(),
            u: out.u.iter().copied().collect(),
            e: (&y[0] - &yref[0]).iter().copied().collect(),
            psi: out.psi,
            gains: out.gains,
            margins: out.margins,
            saturated: out.saturated,
            residual: 0.0,
            x: x.to_vec(),
        })
    }

    fn max_step_hint(&self) -> f64 {
        self.plant.min_delay().unwrap_or(f64::INFINITY)
    }

    fn prehistory(&self) -> Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>> {
        Some(self.constant_prehistory())
    }
}

/// Samples, termination cause and step statistics of one run.
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: StepStats,
    pub history: History,
    pub wall_time_s: f64,
}

impl Trajectory {
    /// Sup over samples of each margin (`φ‖e‖` per funnel).
    pub fn eps_observed(&self) -> Vec<f64> {
        column_max(self.samples.iter().map(|s| &s.margins[..]))
    }

    pub fn gain_max(&self) -> Vec<f64> {
        column_max(self.samples.iter().map(|s| &s.gains[..]))
    }

    /// Sup over samples of `‖u‖`.
    pub fn input_sup(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.u.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Full state at an arbitrary time from the dense output.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        self.history.eval(t)
    }
}

fn column_max<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for r in rows {
        if out.len() < r.len() {
            out.resize(r.len(), f64::NEG_INFINITY);
        }
        for (o, v) in out.iter_mut().zip(r) {
            *o = o.max(*v);
        }
    }
    out
}

/// Integrates a closed loop and records a sample at every accepted step.
pub fn simulate(problem: &dyn ClosedLoop, opts: &IntegratorOptions) -> Result<Trajectory> {
    let start = Instant::now();
    let x0 = problem.initial_state();
    let mut opts = *opts;
    opts.max_step = opts.max_step.min(problem.max_step_hint());
    let hist = match problem.prehistory() {
        Some(f) => History::with_prehistory(0.0, f),
        None => History::new(0.0),
    };
    let sol = integrate(problem, 0.0, &x0, &opts, hist)?;
    let mut samples = Vec::with_capacity(sol.ts.len());
    if sol.termination != Termination::GuardUnsatisfiableAtStart {
        for (t, x) in sol.ts.iter().zip(&sol.xs) {
            samples.push(problem.observe(*t, x, &sol.history)?);
        }
    }
    Ok(Trajectory {
        samples,
        termination: sol.termination,
        stats: sol.stats,
        history: sol.history,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
