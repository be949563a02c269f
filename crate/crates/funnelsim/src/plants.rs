//! Plant models: linear systems, scalar prototypes, the two-link robot, a
//! pure-feedback chain, functional systems with causal operators and the
//! modal truncation of a Neumann heat equation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dae::DaeNormalFormSpec;
use crate::error::{Error, Result};
use crate::lti::{matrix_from_rows, relative_degree, LtiSystem};
use crate::operators::CausalOperator;
use crate::signal::Signal;
use crate::sim::{Plant, StateHistory};

fn default_gravity() -> f64 {
    9.81
}

fn one() -> f64 {
    1.0
}

/// Serializable plant description (the `system` section of a config).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// `x' = Ax + Bu, y = Cx`; `r` defaults to the computed relative degree.
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        #[serde(default)]
        x0: Vec<f64>,
        #[serde(default)]
        r: Option<usize>,
    },
    /// `x' = ax + bu + d(t), y = cx`.
    Scalar {
        a: f64,
        b: f64,
        c: f64,
        x0: f64,
        #[serde(default)]
        disturbance: Option<Signal>,
    },
    /// Planar two-link arm `M(y)y'' + C(y,y')y' + G(y) = u`.
    Robot {
        #[serde(default = "one")]
        m1: f64,
        #[serde(default = "one")]
        m2: f64,
        #[serde(default = "one")]
        l1: f64,
        #[serde(default = "one")]
        l2: f64,
        #[serde(default = "default_gravity")]
        g: f64,
        #[serde(default)]
        y0: [f64; 2],
        #[serde(default)]
        v0: [f64; 2],
    },
    /// Galerkin truncation of `∂_t x = ∂_ξξ x + u` on `[0,1]`, Neumann ends,
    /// `y = ∫ cos²(πξ) x dξ`, initial profile `x(0,ξ) = θ0 ξ²`.
    HeatModal {
        n_modes: usize,
        #[serde(default = "one")]
        theta0: f64,
    },
    /// Pure-feedback chain of length `r` with trivial internal dynamics.
    Chain { r: usize, x0: Vec<f64> },
    /// `y' = a y + T(y) + γ u` with a causal operator `T`.
    Functional {
        a: f64,
        gamma: f64,
        x0: Vec<f64>,
        operator: CausalOperator,
    },
    /// Linear DAE in normal form; closed by the DAE funnel law only.
    Dae { normal_form: DaeNormalFormSpec },
}

impl PlantSpec {
    pub fn build(&self) -> Result<Box<dyn Plant>> {
        Ok(match self.clone() {
            PlantSpec::Lti { a, b, c, x0, r } => {
                let sys = LtiSystem::new(matrix_from_rows(&a)?, matrix_from_rows(&b)?, matrix_from_rows(&c)?)?;
                let x0 = if x0.is_empty() { vec![0.0; sys.n()] } else { x0 };
                Box::new(LtiPlant::new(sys, x0, r)?)
            }
            PlantSpec::Scalar {
                a,
                b,
                c,
                x0,
                disturbance,
            } => Box::new(ScalarPlant::new(a, b, c, x0, disturbance)?),
            PlantSpec::Robot {
                m1,
                m2,
                l1,
                l2,
                g,
                y0,
                v0,
            } => Box::new(RobotPlant::new(m1, m2, l1, l2, g, y0, v0)?),
            PlantSpec::HeatModal { n_modes, theta0 } => {
                let (sys, x0) = heat_modal(n_modes, theta0)?;
                Box::new(LtiPlant::new(sys, x0, Some(1))?)
            }
            PlantSpec::Chain { r, x0 } => Box::new(ChainPlant::new(r, x0)?),
            PlantSpec::Functional { a, gamma, x0, operator } => {
                Box::new(FunctionalPlant::new(a, gamma, x0, operator)?)
            }
            PlantSpec::Dae { .. } => {
                return Err(Error::NotApplicable("DAE systems are closed by the DAE funnel law".into()));
            }
        })
    }

    /// `(a, cb)` for scalar plants, used by the feasibility inequality and identities.
    pub fn scalar_data(&self) -> Option<(f64, f64)> {
        match self {
            PlantSpec::Scalar { a, b, c, .. } => Some((*a, c * b)),
            _ => None,
        }
    }
}

fn check_len(x0: &[f64], n: usize) -> Result<()> {
    if x0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    Ok(())
}

/// Linear plant exposing `y^(k) = C A^k x` for `k < r`.
pub struct LtiPlant {
    pub sys: LtiSystem,
    pub x0: Vec<f64>,
    r: usize,
    out: Vec<DMatrix<f64>>,
}

impl LtiPlant {
    pub fn new(sys: LtiSystem, x0: Vec<f64>, r: Option<usize>) -> Result<Self> {
        check_len(&x0, sys.n())?;
        let r = match r {
            Some(r) => r,
            None => {
                relative_degree(&sys, sys.n())
                    .ok_or_else(|| Error::NotApplicable("system has no relative degree".into()))?
                    .r
            }
        };
        if r == 0 {
            return Err(Error::InvalidParameter("r must be at least 1".into()));
        }
        for k in 0..r.saturating_sub(1) {
            if sys.markov(k).norm() > 1e-12 * (1.0 + sys.c.norm() * sys.b.norm()) {
                return Err(Error::InvalidParameter(format!("C A^{k} B is nonzero; y^({}) depends on u", k + 1)));
            }
        }
        let mut out = Vec::with_capacity(r);
        let mut cak = sys.c.clone();
        for _ in 0..r {
            out.push(cak.clone());
            cak = &cak * &sys.a;
        }
        Ok(LtiPlant { sys, x0, r, out })
    }
}

impl Plant for LtiPlant {
    fn state_dim(&self) -> usize {
        self.sys.n()
    }
    fn m(&self) -> usize {
        self.sys.m()
    }
    fn r(&self) -> usize {
        self.r
    }
    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn outputs(&self, _t: f64, x: &[f64], _h: &StateHistory) -> Result<Vec<DVector<f64>>> {
        let x = DVector::from_column_slice(x);
        Ok(self.out.iter().map(|m| m * &x).collect())
    }
    fn rhs(&self, _t: f64, x: &[f64], u: &DVector<f64>, _h: &StateHistory, dx: &mut [f64]) -> Result<()> {
        let x = DVector::from_column_slice(x);
        let d = &self.sys.a * x + &self.sys.b * u;
        dx.copy_from_slice(d.as_slice());
        Ok(())
    }
}

/// `x' = ax + bu + d(t), y = cx`.
pub struct ScalarPlant {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x0: f64,
    pub disturbance: Option<Signal>,
}

impl ScalarPlant {
    pub fn new(a: f64, b: f64, c: f64, x0: f64, disturbance: Option<Signal>) -> Result<Self> {
        if ![a, b, c, x0].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("scalar plant data must be finite".into()));
        }
        if c * b == 0.0 {
            return Err(Error::InvalidParameter("cb must be nonzero".into()));
        }
        if let Some(d) = &disturbance {
            d.validate()?;
            if d.dim() != 1 {
                return Err(Error::Dimension("disturbance must be scalar".into()));
            }
        }
        Ok(ScalarPlant { a, b, c, x0, disturbance })
    }
}

impl Plant for ScalarPlant {
    fn state_dim(&self) -> usize {
        1
    }
    fn m(&self) -> usize {
        1
    }
    fn r(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.x0]
    }
    fn outputs(&self, _t: f64, x: &[f64], _h: &StateHistory) -> Result<Vec<DVector<f64>>> {
        Ok(vec![DVector::from_element(1, self.c * x[0])])
    }
    fn rhs(&self, t: f64, x: &[f64], u: &DVector<f64>, _h: &StateHistory, dx: &mut [f64]) -> Result<()> {
        let d = self.disturbance.as_ref().map_or(0.0, |s| s.value(t)[0]);
        dx[0] = self.a * x[0] + self.b * u[0] + d;
        Ok(())
    }
}

/// Two-link planar arm with point masses; state `(y1, y2, y1', y2')`.
pub struct RobotPlant {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub y0: [f64; 2],
    pub v0: [f64; 2],
}

impl RobotPlant {
    pub fn new(m1: f64, m2: f64, l1: f64, l2: f64, g: f64, y0: [f64; 2], v0: [f64; 2]) -> Result<Self> {
        if !(m1 > 0.0 && m2 > 0.0 && l1 > 0.0 && l2 > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter("robot masses and lengths must be positive".into()));
        }
        Ok(RobotPlant {
            m1,
            m2,
            l1,
            l2,
            g,
            y0,
            v0,
        })
    }

    pub fn inertia(&self, y: &[f64]) -> DMatrix<f64> {
        let (m1, m2, l1, l2) = (self.m1, self.m2, self.l1, self.l2);
        let c2 = y[1].cos();
        let m11 = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c2);
        let m12 = m2 * (l2 * l2 + l1 * l2 * c2);
        DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m2 * l2 * l2])
    }

    pub fn coriolis(&self, y: &[f64], v: &[f64]) -> DMatrix<f64> {
        let h = self.m2 * self.l1 * self.l2 * y[1].sin();
        DMatrix::from_row_slice(2, 2, &[-2.0 * h * v[0], -h * v[1], -h * v[0], 0.0])
    }

    pub fn gravity(&self, y: &[f64]) -> DVector<f64> {
        let (m1, m2, l1, l2) = (self.m1, self.m2, self.l1, self.l2);
        let c1 = y[0].cos();
        let c12 = (y[0] + y[1]).cos();
        DVector::from_column_slice(&[
            self.g * (m1 * l1 * c1 + m2 * (l1 * c1 + l2 * c12)),
            self.g * m2 * l2 * c12,
        ])
    }
}

impl Plant for RobotPlant {
    fn state_dim(&self) -> usize {
        4
    }
    fn m(&self) -> usize {
        2
    }
    fn r(&self) -> usize {
        2
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.y0[0], self.y0[1], self.v0[0], self.v0[1]]
    }
    fn outputs(&self, _t: f64, x: &[f64], _h: &StateHistory) -> Result<Vec<DVector<f64>>> {
        Ok(vec![DVector::from_column_slice(&x[..2]), DVector::from_column_slice(&x[2..])])
    }
    fn rhs(&self, _t: f64, x: &[f64], u: &DVector<f64>, _h: &StateHistory, dx: &mut [f64]) -> Result<()> {
        let (y, v) = x.split_at(2);
        let chol = self
            .inertia(y)
            .cholesky()
            .ok_or_else(|| Error::IntegrationFailure("inertia matrix lost definiteness".into()))?;
        let rhs = u - self.coriolis(y, v) * DVector::from_column_slice(v) - self.gravity(y);
        let acc = chol.solve(&rhs);
        dx[0] = v[0];
        dx[1] = v[1];
        dx[2] = acc[0];
        dx[3] = acc[1];
        Ok(())
    }
}

/// `x_k' = x_{k+1} + 0.2 sin x_{k+1} + 0.5 sin x_k` for `k < r`,
/// `x_r' = u + 0.3 sin u + 0.5 x_1 x_r / (1 + x_1²)`, `y = x_1`.
///
/// Each `f_k` is strictly increasing in its last argument (slope ≥ 0.7).
/// The plant exposes the whole chain as its outputs.
pub struct ChainPlant {
    pub r: usize,
    pub x0: Vec<f64>,
}

impl ChainPlant {
    pub fn new(r: usize, x0: Vec<f64>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("chain length must be positive".into()));
        }
        check_len(&x0, r)?;
        Ok(ChainPlant { r, x0 })
    }
}

impl Plant for ChainPlant {
    fn state_dim(&self) -> usize {
        self.r
    }
    fn m(&self) -> usize {
        1
    }
    fn r(&self) -> usize {
        self.r
    }
    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn outputs(&self, _t: f64, x: &[f64], _h: &StateHistory) -> Result<Vec<DVector<f64>>> {
        Ok(x.iter().map(|v| DVector::from_element(1, *v)).collect())
    }
    fn rhs(&self, _t: f64, x: &[f64], u: &DVector<f64>, _h: &StateHistory, dx: &mut [f64]) -> Result<()> {
        let r = self.r;
        for k in 0..r - 1 {
            dx[k] = x[k + 1] + 0.2 * x[k + 1].sin() + 0.5 * x[k].sin();
        }
        let u = u[0];
        dx[r - 1] = u + 0.3 * u.sin() + 0.5 * x[0] * x[r - 1] / (1.0 + x[0] * x[0]);
        Ok(())
    }
}

/// `y' = a y + T(y)(t) + γ u` on `ℝ^m`; state `(y, operator state)`, constant prehistory `y0`.
pub struct FunctionalPlant {
    pub a: f64,
    pub gamma: f64,
    pub x0: Vec<f64>,
    pub operator: CausalOperator,
}

impl FunctionalPlant {
    pub fn new(a: f64, gamma: f64, x0: Vec<f64>, operator: CausalOperator) -> Result<Self> {
        operator.validate()?;
        let m = operator.input_dim;
        if operator.output_dim != m {
            return Err(Error::Dimension("operator must map R^m to R^m".into()));
        }
        if gamma == 0.0 {
            return Err(Error::InvalidParameter("gamma must be nonzero".into()));
        }
        check_len(&x0, m)?;
        Ok(FunctionalPlant { a, gamma, x0, operator })
    }

    fn m_dim(&self) -> usize {
        self.operator.input_dim
    }
}

impl Plant for FunctionalPlant {
    fn state_dim(&self) -> usize {
        self.m_dim() + self.operator.state_dim()
    }
    fn m(&self) -> usize {
        self.m_dim()
    }
    fn r(&self) -> usize {
        1
    }
    fn initial_state(&self) -> Vec<f64> {
        let mut x = self.x0.clone();
        x.extend(self.operator.initial_state());
        x
    }
    fn outputs(&self, _t: f64, x: &[f64], _h: &StateHistory) -> Result<Vec<DVector<f64>>> {
        Ok(vec![DVector::from_column_slice(&x[..self.m_dim()])])
    }
    fn rhs(&self, t: f64, x: &[f64], u: &DVector<f64>, hist: &StateHistory, dx: &mut [f64]) -> Result<()> {
        let m = self.m_dim();
        let (y, z) = x.split_at(m);
        let t_max = hist.t_max();
        // past values from the dense output; between the last accepted point and t, linear interpolation
        let input = |s: f64| -> Result<Vec<f64>> {
            if s <= t_max {
                let mut v = hist.eval(s)?;
                v.truncate(m);
                return Ok(v);
            }
            if t <= t_max {
                return Ok(y.to_vec());
            }
            let mut base = hist.eval(t_max)?;
            base.truncate(m);
            let th = (s - t_max) / (t - t_max);
            Ok(base.iter().zip(y).map(|(b, c)| b + th * (c - b)).collect())
        };
        let ty = self.operator.apply(t, &input, z)?;
        for i in 0..m {
            dx[i] = self.a * y[i] + ty[i] + self.gamma * u[i];
        }
        self.operator.state_rhs(y, z, &mut dx[m..])?;
        Ok(())
    }
    fn min_delay(&self) -> Option<f64> {
        self.operator.min_delay()
    }
}

/// Orthonormal Neumann basis `e_0 = 1, e_k = √2 cos(kπξ)`:
/// `⟨cos²(πξ), e_k⟩` is `1/2` for `k = 0`, `√2/4` for `k = 2`, zero otherwise.
pub fn heat_output_coeff(k: usize) -> f64 {
    match k {
        0 => 0.5,
        2 => 2f64.sqrt() / 4.0,
        _ => 0.0,
    }
}

/// `⟨ξ², e_k⟩`: `1/3` for `k = 0`, `2√2 (-1)^k / (kπ)²` otherwise.
pub fn heat_initial_coeff(k: usize) -> f64 {
    if k == 0 {
        1.0 / 3.0
    } else {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        2.0 * 2f64.sqrt() * sign / (k as f64 * PI).powi(2)
    }
}

/// Modal truncation with `n_modes` modes: `A = diag(-(kπ)²)`, `b = e_0`, `c_k = ⟨cos²(πξ), e_k⟩`.
pub fn heat_modal(n_modes: usize, theta0: f64) -> Result<(LtiSystem, Vec<f64>)> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let a = DMatrix::from_fn(n_modes, n_modes, |i, j| if i == j { -(i as f64 * PI).powi(2) } else { 0.0 });
    let mut b = DMatrix::zeros(n_modes, 1);
    b[(0, 0)] = 1.0;
    let c = DMatrix::from_fn(1, n_modes, |_, j| heat_output_coeff(j));
    let x0 = (0..n_modes).map(|k| theta0 * heat_initial_coeff(k)).collect();
    Ok((LtiSystem::new(a, b, c)?, x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::History;

    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    fn basis(k: usize, xi: f64) -> f64 {
        if k == 0 {
            1.0
        } else {
            2f64.sqrt() * (k as f64 * PI * xi).cos()
        }
    }

    #[test]
    fn heat_coefficients_match_quadrature() {
        for k in 0..12 {
            let c = simpson(|x| (PI * x).cos().powi(2) * basis(k, x), 2000);
            assert!((c - heat_output_coeff(k)).abs() < 1e-12, "c_{k}");
            let x0 = simpson(|x| x * x * basis(k, x), 2000);
            assert!((x0 - heat_initial_coeff(k)).abs() < 1e-11, "x0_{k}");
        }
        let (sys, _) = heat_modal(5, 1.0).unwrap();
        assert_eq!(sys.markov(0)[(0, 0)], 0.5);
        // remaining modes are stable with eigenvalues at most -π²
        for k in 1..5 {
            assert!(sys.a[(k, k)] <= -PI * PI + 1e-12);
        }
    }

    #[test]
    fn robot_inertia_at_rest() {
        let p = RobotPlant::new(1.0, 1.0, 1.0, 1.0, 9.81, [0.0; 2], [0.0; 2]).unwrap();
        let m = p.inertia(&[0.0, 0.0]);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[5.0, 2.0, 2.0, 1.0]));
        // M is positive definite along a grid of configurations
        for i in 0..50 {
            let y2 = i as f64 * 0.13;
            assert!(p.inertia(&[0.3, y2]).cholesky().is_some());
        }
    }

    #[test]
    fn robot_rhs_balances_gravity() {
        let p = RobotPlant::new(1.0, 1.0, 1.0, 1.0, 9.81, [0.0; 2], [0.0; 2]).unwrap();
        let x = [0.4, -0.7, 0.0, 0.0];
        let u = p.gravity(&x[..2]);
        let hist = History::new(0.0);
        let sh = StateHistory::new(&hist, 4);
        let mut dx = [0.0; 4];
        p.rhs(0.0, &x, &u, &sh, &mut dx).unwrap();
        assert!(dx.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lti_outputs_are_derivatives() {
        let sys = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let p = LtiPlant::new(sys, vec![0.5, -0.25], None).unwrap();
        assert_eq!(p.r(), 2);
        let hist = History::new(0.0);
        let sh = StateHistory::new(&hist, 2);
        let y = p.outputs(0.0, &[0.5, -0.25], &sh).unwrap();
        assert_eq!((y[0][0], y[1][0]), (0.5, -0.25));
    }

    #[test]
    fn spec_round_trip() {
        let s = PlantSpec::Robot {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            g: 9.81,
            y0: [0.0; 2],
            v0: [0.0; 2],
        };
        let j = serde_json::to_string(&s).unwrap();
        let back: PlantSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.build().unwrap().state_dim(), 4);
        let bad: std::result::Result<PlantSpec, _> = serde_json::from_str(r#"{"kind": "scalar", "a": 1, "b": 1, "c": 1, "x0": 0, "z": 1}"#);
        assert!(bad.is_err());
    }
}
