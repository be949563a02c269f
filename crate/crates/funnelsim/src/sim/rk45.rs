//! Dormand–Prince 5(4) with PI step control and guard-aware rejection.

use serde::Serialize;

use crate::error::{Error, Result};

/// An initial-value problem whose right-hand side may refuse a state.
///
/// `rhs` returning a breach error (see [`Error::is_breach`]) marks the trial
/// point as outside the admissible domain: the step is rejected and halved.
/// Any other error aborts the integration.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], hist: &History, dx: &mut [f64]) -> Result<()>;
    /// Called on every accepted state; may modify algebraic components.
    fn project(&self, _t: f64, _x: &mut [f64]) -> Result<()> {
        Ok(())
    }
    fn has_projection(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub t_end: f64,
}

impl IntegratorOptions {
    pub fn new(t_end: f64, rtol: f64, atol: f64) -> Self {
        IntegratorOptions {
            rtol,
            atol,
            max_step: f64::INFINITY,
            t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    MinStepReached(f64),
    GuardUnsatisfiableAtStart,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_guard: usize,
    pub rhs_evals: usize,
}

/// Dense output of accepted steps plus an optional prehistory for `t < t0`.
pub struct History {
    t0: f64,
    prehistory: Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>>,
    segs: Vec<Segment>,
}

struct Segment {
    t: f64,
    h: f64,
    // rcont[0..5] each of length dim
    rcont: Vec<Vec<f64>>,
}

impl History {
    pub fn new(t0: f64) -> Self {
        History {
            t0,
            prehistory: None,
            segs: Vec::new(),
        }
    }

    pub fn with_prehistory(t0: f64, f: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>) -> Self {
        History {
            t0,
            prehistory: Some(f),
            segs: Vec::new(),
        }
    }

    /// Latest covered time.
    pub fn t_max(&self) -> f64 {
        self.segs.last().map_or(self.t0, |s| s.t + s.h)
    }

    pub fn len(&self) -> usize {
        self.segs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// State at time `t` from the stored interpolants.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if t < self.t0 || (self.segs.is_empty() && t <= self.t0) {
            return match &self.prehistory {
                Some(f) => Ok(f(t)),
                None => Err(Error::InsufficientHistory { t }),
            };
        }
        let tol = 1e-12 * self.t_max().abs().max(1.0);
        if self.segs.is_empty() || t > self.t_max() + tol {
            return Err(Error::InsufficientHistory { t });
        }
        let i = self.segs.partition_point(|s| s.t + s.h < t).min(self.segs.len() - 1);
        let s = &self.segs[i];
        let th = ((t - s.t) / s.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let r = &s.rcont;
        Ok((0..r[0].len())
            .map(|k| {
                r[0][k] + th * (r[1][k] + th1 * (r[2][k] + th * (r[3][k] + th1 * r[4][k])))
            })
            .collect())
    }
}

pub struct Solution {
    pub ts: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub termination: Termination,
    pub stats: StepStats,
    pub history: History,
}

// Dormand–Prince coefficients
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(out: &mut [f64], x: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = x[i] + h * s;
    }
}

enum Eval {
    Ok,
    Guard,
}

fn call<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    x: &[f64],
    hist: &History,
    dx: &mut [f64],
    stats: &mut StepStats,
) -> Result<Eval> {
    stats.rhs_evals += 1;
    match sys.rhs(t, x, hist, dx) {
        Ok(()) => {
            if dx.iter().all(|v| v.is_finite()) {
                Ok(Eval::Ok)
            } else {
                Err(Error::IntegrationFailure(format!("non-finite derivative at t = {t}")))
            }
        }
        Err(e) if e.is_breach() => Ok(Eval::Guard),
        Err(e) => Err(e),
    }
}

/// Integrates `sys` from `(t0, x0)` to `opts.t_end`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    x0: &[f64],
    opts: &IntegratorOptions,
    mut history: History,
) -> Result<Solution> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    if !(opts.t_end > t0) {
        return Err(Error::InvalidParameter("t_end must exceed t0".into()));
    }
    let span = opts.t_end - t0;
    let min_step = 1e-12 * opts.t_end.abs().max(span);
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut x = x0.to_vec();
    if sys.has_projection() {
        if let Err(e) = sys.project(t, &mut x) {
            if e.is_breach() {
                return Ok(start_failure(t0, x0, stats, history));
            }
            return Err(e);
        }
    }
    let mut k1 = vec![0.0; n];
    if let Eval::Guard = call(sys, t, &x, &history, &mut k1, &mut stats)? {
        return Ok(start_failure(t0, &x, stats, history));
    }
    let mut ts = vec![t];
    let mut xs = vec![x.clone()];

    let mut h = initial_step(sys, t, &x, &k1, opts, &history, &mut stats)?;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut xt = vec![0.0; n];
    let mut xnew = vec![0.0; n];
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if t >= opts.t_end {
            break;
        }
        h = h.min(opts.max_step);
        let remaining = opts.t_end - t;
        if h >= remaining || remaining - h < min_step {
            h = remaining;
        }
        if h < min_step {
            return Ok(Solution {
                ts,
                xs,
                termination: Termination::MinStepReached(t),
                stats,
                history,
            });
        }

        let mut guard_hit = false;
        macro_rules! stage {
            ($c:expr, $terms:expr, $out:expr) => {
                if !guard_hit {
                    axpy(&mut xt, &x, h, $terms);
                    if let Eval::Guard = call(sys, t + $c * h, &xt, &history, $out, &mut stats)? {
                        guard_hit = true;
                    }
                }
            };
        }
        stage!(C2, &[(A21, &k1[..])], &mut k2);
        stage!(C3, &[(A31, &k1[..]), (A32, &k2[..])], &mut k3);
        stage!(C4, &[(A41, &k1[..]), (A42, &k2[..]), (A43, &k3[..])], &mut k4);
        stage!(
            C5,
            &[(A51, &k1[..]), (A52, &k2[..]), (A53, &k3[..]), (A54, &k4[..])],
            &mut k5
        );
        stage!(
            1.0,
            &[
                (A61, &k1[..]),
                (A62, &k2[..]),
                (A63, &k3[..]),
                (A64, &k4[..]),
                (A65, &k5[..])
            ],
            &mut k6
        );
        let t_new = if h == remaining { opts.t_end } else { t + h };
        if !guard_hit {
            axpy(
                &mut xnew,
                &x,
                h,
                &[
                    (A71, &k1[..]),
                    (A73, &k3[..]),
                    (A74, &k4[..]),
                    (A75, &k5[..]),
                    (A76, &k6[..]),
                ],
            );
            if let Eval::Guard = call(sys, t_new, &xnew, &history, &mut k7, &mut stats)? {
                guard_hit = true;
            }
        }
        if guard_hit {
            stats.rejected_guard += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        let mut err = 0.0;
        for i in 0..n {
            let sk = opts.atol + opts.rtol * x[i].abs().max(xnew[i].abs());
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / sk) * (e / sk);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };
        if !err.is_finite() {
            return Err(Error::IntegrationFailure(format!("non-finite error estimate at t = {t}")));
        }
        let fac11 = err.powf(0.17);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(0.04);
            fac = (fac / 0.9).clamp(0.2, 10.0);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);

            let mut rcont = vec![vec![0.0; n]; 5];
            for i in 0..n {
                let ydiff = xnew[i] - x[i];
                let bspl = h * k1[i] - ydiff;
                rcont[0][i] = x[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k7[i] - bspl;
                rcont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            history.segs.push(Segment {
                t,
                h: t_new - t,
                rcont,
            });
            std::mem::swap(&mut x, &mut xnew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if sys.has_projection() {
                match sys.project(t, &mut x) {
                    Ok(()) => {}
                    Err(e) if e.is_breach() => {
                        return Ok(Solution {
                            ts,
                            xs,
                            termination: Termination::MinStepReached(t),
                            stats,
                            history,
                        })
                    }
                    Err(e) => return Err(e),
                }
                if let Eval::Guard = call(sys, t, &x, &history, &mut k1, &mut stats)? {
                    return Ok(Solution {
                        ts,
                        xs,
                        termination: Termination::MinStepReached(t),
                        stats,
                        history,
                    });
                }
            }
            stats.accepted += 1;
            ts.push(t);
            xs.push(x.clone());
            h = h_new;
            last_rejected = false;
        } else {
            stats.rejected_error += 1;
            h /= (fac11 / 0.9).min(5.0);
            last_rejected = true;
        }
    }
    Ok(Solution {
        ts,
        xs,
        termination: Termination::Completed,
        stats,
        history,
    })
}

fn start_failure(t0: f64, x0: &[f64], stats: StepStats, history: History) -> Solution {
    Solution {
        ts: vec![t0],
        xs: vec![x0.to_vec()],
        termination: Termination::GuardUnsatisfiableAtStart,
        stats,
        history,
    }
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    x: &[f64],
    f0: &[f64],
    opts: &IntegratorOptions,
    hist: &History,
    stats: &mut StepStats,
) -> Result<f64> {
    let n = x.len();
    let span = opts.t_end - t;
    if n == 0 {
        return Ok(span.min(opts.max_step));
    }
    let sc: Vec<f64> = x.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(x);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(opts.max_step).min(span);
    let x1: Vec<f64> = x.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    let h1 = match call(sys, t + h0, &x1, hist, &mut f1, stats)? {
        Eval::Guard => h0 * 0.1,
        Eval::Ok => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            let d2 = rms(&diff) / h0;
            if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            }
        }
    };
    Ok((100.0 * h0).min(h1).min(opts.max_step).min(span))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, x: &[f64], _h: &History, dx: &mut [f64]) -> Result<()> {
            dx[0] = -x[0];
            Ok(())
        }
    }

    #[test]
    fn exponential_decay_accuracy() {
        let opts = IntegratorOptions::new(10.0, 1e-10, 1e-12);
        let sol = integrate(&Decay, 0.0, &[1.0], &opts, History::new(0.0)).unwrap();
        assert_eq!(sol.termination, Termination::Completed);
        assert_eq!(*sol.ts.last().unwrap(), 10.0);
        for (t, x) in sol.ts.iter().zip(&sol.xs) {
            assert!((x[0] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let opts = IntegratorOptions::new(5.0, 1e-8, 1e-10);
        let sol = integrate(&Decay, 0.0, &[1.0], &opts, History::new(0.0)).unwrap();
        for i in 0..500 {
            let t = 5.0 * i as f64 / 499.0;
            let x = sol.history.eval(t).unwrap()[0];
            assert!((x - (-t).exp()).abs() < 1e-7, "t={t}");
        }
        assert!(sol.history.eval(5.5).is_err());
        assert!(sol.history.eval(-0.1).is_err());
    }

    struct Walled;
    impl OdeSystem for Walled {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, x: &[f64], _h: &History, dx: &mut [f64]) -> Result<()> {
            if x[0] >= 1.0 {
                return Err(Error::breach("wall", 0, x[0]));
            }
            dx[0] = 1.0;
            Ok(())
        }
    }

    #[test]
    fn guard_stops_at_wall() {
        let opts = IntegratorOptions::new(2.0, 1e-8, 1e-8);
        let sol = integrate(&Walled, 0.0, &[0.0], &opts, History::new(0.0)).unwrap();
        match sol.termination {
            Termination::MinStepReached(t) => assert!((t - 1.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(sol.stats.rejected_guard > 0);
        assert!(sol.xs.iter().all(|x| x[0] < 1.0));
        let start = integrate(&Walled, 0.0, &[1.5], &opts, History::new(0.0)).unwrap();
        assert_eq!(start.termination, Termination::GuardUnsatisfiableAtStart);
    }
}
