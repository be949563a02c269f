//! Funnel pre-compensator cascade.
//!
//! Each stage `i = 1..r-1` has state `ξ_i = (ξ_{i,1}, ..., ξ_{i,r}) ∈ R^{rm}` and is
//! driven by the previous stage's first block (the plant output for stage 1).
//! The funnel controller then acts on `z = ξ_{r-1,1}` whose derivatives up to
//! order `r-1` are available from the cascade alone.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{fc_output, Alpha, NFun, GUARD};
use crate::error::{Error, Result};
use crate::funnel::FunnelFunction;
use crate::jet::Jet;
use crate::lti::eigenvalues;
use crate::sim::{ControlOutput, Controller, Measurement};

/// Lyapunov solution and the derived gain vector `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecompDesign {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub lyapunov: DMatrix<f64>,
    /// `‖QᵀP + PQ + R‖`.
    pub residual: f64,
}

/// Companion-like matrix with first column `-q` and ones on the superdiagonal.
pub fn q_matrix(q: &[f64]) -> DMatrix<f64> {
    let r = q.len();
    DMatrix::from_fn(r, r, |i, j| {
        if j == 0 {
            -q[i]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Solves `QᵀP + PQ + R = 0` and returns `p = (1, -P_4^{-1} P_2ᵀ)`.
pub fn precomp_design(q: &[f64], r_mat: &DMatrix<f64>) -> Result<PrecompDesign> {
    let r = q.len();
    if r == 0 || r_mat.shape() != (r, r) {
        return Err(Error::Dimension("R must be r x r".into()));
    }
    if (r_mat - r_mat.transpose()).amax() > 1e-12 * r_mat.amax().max(1.0) || Cholesky::new(r_mat.clone()).is_none() {
        return Err(Error::Design("R must be symmetric positive definite".into()));
    }
    let qm = q_matrix(q);
    if eigenvalues(&qm).iter().any(|l| !(l.re < 0.0)) {
        return Err(Error::Design("Q is not Hurwitz".into()));
    }
    // vec(QᵀP + PQ) = (I ⊗ Qᵀ + Qᵀ ⊗ I) vec(P)
    let id = DMatrix::<f64>::identity(r, r);
    let qt = qm.transpose();
    let kron = id.kronecker(&qt) + qt.kronecker(&id);
    let rhs = -DVector::from_column_slice(r_mat.as_slice());
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Design("Lyapunov operator is singular".into()))?;
    let mut pm = DMatrix::from_column_slice(r, r, sol.as_slice());
    pm = (&pm + pm.transpose()) * 0.5;
    if Cholesky::new(pm.clone()).is_none() {
        return Err(Error::Design("Lyapunov solution is not positive definite".into()));
    }
    let residual = (qm.transpose() * &pm + &pm * &qm + r_mat).norm();
    let mut p = vec![1.0];
    if r > 1 {
        let p2 = pm.view((0, 1), (1, r - 1)).transpose();
        let p4 = pm.view((1, 1), (r - 1, r - 1)).into_owned();
        let tail = p4
            .lu()
            .solve(&p2)
            .ok_or_else(|| Error::Design("P_4 is singular".into()))?;
        p.extend(tail.iter().map(|v| -v));
    }
    Ok(PrecompDesign {
        q: q.to_vec(),
        p,
        lyapunov: pm,
        residual,
    })
}

/// `min{(ρ-1)/(r-2), ρ/(4ρ²(ρ+1)^{r-2} - 1)}`; unrestricted for `r < 3`.
pub fn linsys_mp_bound(rho: f64, r: usize) -> f64 {
    if r < 3 {
        return f64::INFINITY;
    }
    let a = (rho - 1.0) / (r - 2) as f64;
    let b = rho / (4.0 * rho * rho * (rho + 1.0).powi(r as i32 - 2) - 1.0);
    a.min(b)
}

/// One stage: `k = 1/(1-φ²‖y_prev - ξ_1‖²)`, `ξ̇_i = ξ_{i+1} + (q_i + p_i k)(y_prev - ξ_1)`,
/// `ξ̇_r = (q_r + p_r k)(y_prev - ξ_1) + Γ̃ u`. Returns `(ξ̇, k)`.
pub fn precomp_step(
    p: &[f64],
    q: &[f64],
    gamma_tilde: &DMatrix<f64>,
    phi_t: f64,
    y_prev: &DVector<f64>,
    xi: &[DVector<f64>],
    u: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let r = xi.len();
    let err = y_prev - &xi[0];
    let s = phi_t * err.norm();
    if !(s <= GUARD) {
        return Err(Error::breach("precomp", 1, s));
    }
    let k = 1.0 / (1.0 - s * s);
    let xi_dot = (0..r)
        .map(|i| {
            let corr = &err * (q[i] + p[i] * k);
            if i + 1 < r {
                &xi[i + 1] + corr
            } else {
                corr + gamma_tilde * u
            }
        })
        .collect();
    Ok((xi_dot, k))
}

fn jet_vec(v: &DVector<f64>) -> Vec<Jet> {
    v.iter().map(|x| Jet::constant(*x, 0)).collect()
}

/// `z, ż, ..., z^(r-1)` for `z = ξ_{r-1,1}`.
///
/// Stage `i` receives its input to order `i-1` and returns its first block to
/// order `i`; each extra order comes from the stage's own right-hand side, so
/// the plant derivatives and the input `u` are never needed.
pub fn precomp_surrogate_derivatives(
    p: &[f64],
    q: &[f64],
    stage_phis: &[FunnelFunction],
    t: f64,
    y: &DVector<f64>,
    xi: &[Vec<DVector<f64>>],
) -> Result<Vec<DVector<f64>>> {
    let r = p.len();
    let m = y.len();
    let mut input = jet_vec(y);
    for (s, (stage, phi)) in xi.iter().zip(stage_phis).enumerate() {
        let order = s + 1;
        let mut x: Vec<Vec<Jet>> = stage.iter().map(jet_vec).collect();
        for n in 0..order {
            let e: Vec<Jet> = (0..m).map(|c| &input[c].truncate(n) - &x[0][c].truncate(n)).collect();
            let f = phi.jet(t, n)?;
            let k = (&(&f * &f) * &Jet::norm_sq(&e)).scale(-1.0).add_scalar(1.0).recip();
            for j in 0..r - 1 {
                if x[j + 1][0].order() < n || x[j][0].order() != n {
                    continue;
                }
                let gain = k.scale(p[j]).add_scalar(q[j]);
                for c in 0..m {
                    let d = &x[j + 1][c].truncate(n) + &(&gain * &e[c]);
                    let mut coeffs = x[j][c].coeffs().to_vec();
                    coeffs.push(d.coeffs()[n] / (n + 1) as f64);
                    x[j][c] = Jet::from_coeffs(coeffs);
                }
            }
        }
        input = x.swap_remove(0);
    }
    let order = xi.len();
    Ok((0..=order)
        .map(|k| DVector::from_iterator(m, input.iter().map(|j| j.derivative(k))))
        .collect())
}

/// Funnel controller applied to the output of an `(r-1)`-stage pre-compensator cascade.
///
/// Stage funnels: `φ_1 = 2(ρ+r-2)/ρ · φ`, `φ_i = ρ φ_1` for `i >= 2`; the controller
/// on `z` uses `2φ`. Then `‖y - z‖ < 1/(2φ)` and `‖z - y_ref‖ < 1/(2φ)` give `‖e‖ < 1/φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreCompFc {
    pub alpha: Alpha,
    pub n: NFun,
    pub phi: FunnelFunction,
    pub rho: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub gamma_tilde: DMatrix<f64>,
    pub r: usize,
    pub r_hat: usize,
    pub m: usize,
    pub stage_phis: Vec<FunnelFunction>,
    pub fc_phi: FunnelFunction,
    pub xi0: Vec<f64>,
}

impl PreCompFc {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: Alpha,
        n: NFun,
        phi: FunnelFunction,
        rho: f64,
        p: Vec<f64>,
        q: Vec<f64>,
        gamma_tilde: DMatrix<f64>,
        r_hat: usize,
        m: usize,
    ) -> Result<Self> {
        alpha.validate()?;
        let r = q.len();
        if r < 2 || p.len() != r {
            return Err(Error::InvalidParameter("pre-compensation needs r >= 2 and |p| = |q| = r".into()));
        }
        if r_hat == 0 || r_hat > r {
            return Err(Error::InvalidParameter("need 1 <= r_hat <= r".into()));
        }
        if p.iter().chain(&q).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("p and q must be positive".into()));
        }
        if !(rho > 1.0) {
            return Err(Error::InvalidParameter("rho must exceed 1".into()));
        }
        if gamma_tilde.shape() != (m, m) || gamma_tilde.clone().lu().determinant() == 0.0 {
            return Err(Error::InvalidParameter("gamma_tilde must be an invertible m x m matrix".into()));
        }
        let phi1 = phi.scaled(2.0 * (rho + r as f64 - 2.0) / rho)?;
        let mut stage_phis = vec![phi1.clone()];
        for _ in 1..r - 1 {
            stage_phis.push(phi1.scaled(rho)?);
        }
        for (i, f) in stage_phis.iter().enumerate() {
            if f.max_derivative_order < i {
                return Err(Error::UnsupportedDerivative {
                    order: i,
                    max: f.max_derivative_order,
                });
            }
        }
        let fc_phi = phi.scaled(2.0)?;
        Ok(PreCompFc {
            alpha,
            n,
            phi,
            rho,
            p,
            q,
            gamma_tilde,
            r,
            r_hat,
            m,
            stage_phis,
            fc_phi,
            xi0: vec![0.0; (r - 1) * r * m],
        })
    }

    fn stages(&self, xc: &[f64]) -> Vec<Vec<DVector<f64>>> {
        xc.chunks(self.r * self.m)
            .map(|s| s.chunks(self.m).map(DVector::from_column_slice).collect())
            .collect()
    }
}

impl Controller for PreCompFc {
    fn state_dim(&self) -> usize {
        (self.r - 1) * self.r * self.m
    }

    fn initial_state(&self) -> Vec<f64> {
        self.xi0.clone()
    }

    fn reference_order(&self) -> usize {
        self.r_hat - 1
    }

    fn eval(&self, meas: &Measurement, xc: &[f64]) -> Result<ControlOutput> {
        let t = meas.t;
        let y = &meas.y[0];
        let xi = self.stages(xc);
        // stage margins first so a breach names the stage
        let mut margins = vec![self.phi.value(t) * meas.e(0).norm()];
        let mut gains = Vec::with_capacity(self.r);
        for (s, stage) in xi.iter().enumerate() {
            let input = if s == 0 { y } else { &xi[s - 1][0] };
            let m = self.stage_phis[s].value(t) * (input - &stage[0]).norm();
            if !(m <= GUARD) {
                return Err(Error::breach("precomp", s + 1, m));
            }
            margins.push(m);
        }
        let z = precomp_surrogate_derivatives(&self.p, &self.q, &self.stage_phis, t, y, &xi)?;
        let ev: Vec<DVector<f64>> = (0..self.r)
            .map(|k| if k < self.r_hat { &z[k] - &meas.yref[k] } else { z[k].clone() })
            .collect();
        let fphi = self.fc_phi.value(t);
        let (u, w) = fc_output(self.alpha, self.n, fphi, &ev)?;
        margins.push(fphi * ev[0].norm());
        margins.push(w.norm());
        gains.push(self.alpha.eval(w.norm_squared()));
        let mut xc_dot = Vec::with_capacity(xc.len());
        for (s, stage) in xi.iter().enumerate() {
            let input = if s == 0 { y } else { &xi[s - 1][0] };
            let (d, k) = precomp_step(&self.p, &self.q, &self.gamma_tilde, self.stage_phis[s].value(t), input, stage, &u)?;
            gains.push(k);
            xc_dot.extend(d.iter().flat_map(|v| v.iter().copied()));
        }
        Ok(ControlOutput {
            u,
            xc_dot,
            gains,
            margins,
            psi: vec![self.phi.radius(t)],
            saturated: false,
        })
    }
}
