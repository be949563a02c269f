//! Linear differential-algebraic systems in normal form.
//!
//! ```text
//! y_I^(r) = Σ R_{k,1} y_I^(k-1) + P_1 y_II + S_1 x_3 + Γ̂ u_I
//!       0 = Σ R_{k,2} y_I^(k-1) + P_2 y_II + S_2 x_3 + Γ̃ u_I + u_II
//!    x_3' = Q x_3 + A_31 y
//! ```
//!
//! The funnel controller drives `u_I` from the `y_I` chain and closes the
//! algebraic row with `u_II = -k̂ α(‖v‖²) v`, `v = φ_II (y_II - y_ref,II)`.
//! The algebraic variable `y_II` is solved from the row at every evaluation
//! and stored in the state vector by projection after each accepted step.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controllers::{fc_output, Alpha, NFun, GUARD};
use crate::error::{Error, Result};
use crate::funnel::FunnelFunction;
use crate::lti::sign_definite;
use crate::signal::Signal;
use crate::sim::{ClosedLoop, History, OdeSystem, Sample};

type CMat = DMatrix<Complex<f64>>;

fn cplx(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex::new(v, 0.0))
}

fn pencil(e: &DMatrix<f64>, a: &DMatrix<f64>, s: Complex<f64>) -> CMat {
    cplx(e) * s - cplx(a)
}

/// Probe points for the regularity test of `sE - A`.
const PROBES: [(f64, f64); 4] = [(0.37, 1.13), (-1.31, 0.23), (2.9, -0.71), (0.05, -2.4)];

/// `det(sE - A) ≢ 0`, decided at a few generic points.
pub fn pencil_is_regular(e: &DMatrix<f64>, a: &DMatrix<f64>) -> bool {
    let n = e.nrows();
    let scale = (e.norm() + a.norm()).max(1.0);
    PROBES.iter().any(|&(re, im)| {
        let s = Complex::new(re, im);
        let smin = pencil(e, a, s).svd(false, false).singular_values.min();
        n == 0 || smin > 1e-10 * scale * (1.0 + s.norm())
    })
}

/// `G(s) = C (sE - A)^{-1} B`.
pub fn dae_transfer(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    s: Complex<f64>,
) -> Result<CMat> {
    let n = e.nrows();
    if e.ncols() != n || a.shape() != (n, n) || b.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension("E, A must be n x n, B n x m, C p x n".into()));
    }
    if !pencil_is_regular(e, a) {
        return Err(Error::SingularPencil);
    }
    let p = pencil(e, a, s);
    let scale = (e.norm() * s.norm() + a.norm()).max(1.0);
    if p.clone().svd(false, false).singular_values.min() <= 1e-13 * scale {
        return Err(Error::Pole);
    }
    let x = p.lu().solve(&cplx(b)).ok_or(Error::Pole)?;
    Ok(cplx(c) * x)
}

/// The two-state example with `y = u'`: `E = [[0,0],[1,0]]`, `A = I`, `B = (-1, 0)`, `C = (0, 1)`.
pub fn dae_example() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )
}

/// Real rational function `num(s)/den(s)`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn poly_degree(p: &[f64]) -> Option<usize> {
    p.iter().rposition(|c| *c != 0.0)
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if poly_degree(&den).is_none() {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        Ok(Rational { num, den })
    }

    pub fn zero() -> Self {
        Rational {
            num: vec![0.0],
            den: vec![1.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        poly_degree(&self.num).is_none()
    }

    /// `deg num - deg den`; `None` for the zero function.
    pub fn degree(&self) -> Option<i64> {
        let dn = poly_degree(&self.num)? as i64;
        let dd = poly_degree(&self.den)? as i64;
        Some(dn - dd)
    }

    /// `lim s^{-d} h(s)` for `d = degree`.
    pub fn leading(&self) -> f64 {
        match (poly_degree(&self.num), poly_degree(&self.den)) {
            (Some(i), Some(j)) => self.num[i] / self.den[j],
            _ => 0.0,
        }
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        let h = |p: &[f64]| p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, c| acc * s + c);
        h(&self.num) / h(&self.den)
    }
}

/// Truncated vector relative degree of `H(s) = G(s)^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedRelDegree {
    /// Column degrees `r_1 >= ... >= r_m >= 0` after reordering.
    pub degrees: Vec<usize>,
    /// `perm[i]` is the original column placed at position `i`.
    pub perm: Vec<usize>,
    pub ell: usize,
    /// `[ĥ_1, ..., ĥ_ℓ]`, `m x ℓ`.
    #[serde(skip)]
    pub gamma_ell: DMatrix<f64>,
    /// `rank Γ_ℓ = ℓ`.
    pub truncated: bool,
    /// `(r, ℓ)` when `r_1 = ... = r_ℓ = r > 0` and `rank Γ_ℓ = ℓ`.
    pub strict: Option<(usize, usize)>,
}

/// Column degrees by leading-coefficient inspection; `h` is given by rows.
pub fn truncated_reldeg_from_h(h: &[Vec<Rational>]) -> Result<TruncatedRelDegree> {
    let m = h.len();
    if m == 0 || h.iter().any(|row| row.len() != m) {
        return Err(Error::Dimension("H must be square and nonempty".into()));
    }
    let col_deg: Vec<i64> = (0..m)
        .map(|j| (0..m).filter_map(|i| h[i][j].degree()).max().unwrap_or(i64::MIN))
        .collect();
    let r: Vec<usize> = col_deg.iter().map(|d| (*d).max(0) as usize).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    perm.sort_by(|a, b| r[*b].cmp(&r[*a]));
    let degrees: Vec<usize> = perm.iter().map(|j| r[*j]).collect();
    let ell = degrees.iter().filter(|d| **d > 0).count();
    // ĥ_j = lim s^{-r_j} h_j(s): leading coefficients of the entries attaining the column degree
    let gamma_ell = DMatrix::from_fn(m, ell, |i, k| {
        let j = perm[k];
        let x = &h[i][j];
        if x.degree() == Some(r[j] as i64) {
            x.leading()
        } else {
            0.0
        }
    });
    let rank = if ell == 0 {
        0
    } else {
        let sv = gamma_ell.clone().svd(false, false).singular_values;
        let tol = 1e-10 * sv.max().max(f64::MIN_POSITIVE);
        sv.iter().filter(|v| **v > tol).count()
    };
    let truncated = rank == ell;
    let strict = (truncated && ell > 0 && degrees[..ell].iter().all(|d| *d == degrees[0])).then(|| (degrees[0], ell));
    Ok(TruncatedRelDegree {
        degrees,
        perm,
        ell,
        gamma_ell,
        truncated,
        strict,
    })
}

/// Normal-form data as it appears in a config (matrices by rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaeNormalFormSpec {
    pub r: usize,
    pub ell: usize,
    pub m: usize,
    /// `R_{1,1}, ..., R_{r,1}`, each `ℓ x ℓ`.
    pub r1: Vec<Vec<Vec<f64>>>,
    /// `R_{1,2}, ..., R_{r,2}`, each `(m-ℓ) x ℓ`.
    #[serde(default)]
    pub r2: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p1: Vec<Vec<f64>>,
    #[serde(default)]
    pub p2: Vec<Vec<f64>>,
    #[serde(default)]
    pub s1: Vec<Vec<f64>>,
    #[serde(default)]
    pub s2: Vec<Vec<f64>>,
    #[serde(default)]
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub a31: Vec<Vec<f64>>,
    pub gamma_hat: Vec<Vec<f64>>,
    #[serde(default)]
    pub gamma_tilde: Vec<Vec<f64>>,
    /// `y_I, y_I', ..., y_I^(r-1)` at `t = 0`, concatenated.
    #[serde(default)]
    pub y_i0: Vec<f64>,
    #[serde(default)]
    pub x30: Vec<f64>,
    /// Solved from the algebraic row when absent; checked for consistency when given.
    #[serde(default)]
    pub y_ii0: Option<Vec<f64>>,
}

/// Validated normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeNormalForm {
    pub r: usize,
    pub ell: usize,
    pub m: usize,
    pub n3: usize,
    pub r1: Vec<DMatrix<f64>>,
    pub r2: Vec<DMatrix<f64>>,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub a31: DMatrix<f64>,
    pub gamma_hat: DMatrix<f64>,
    pub gamma_tilde: DMatrix<f64>,
    pub y_i0: Vec<f64>,
    pub x30: Vec<f64>,
    pub y_ii0: Option<Vec<f64>>,
}

fn shaped(rows: &[Vec<f64>], r: usize, c: usize, name: &str) -> Result<DMatrix<f64>> {
    // absent blocks are zero
    if rows.is_empty() {
        return Ok(DMatrix::zeros(r, c));
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{name} must be {r}x{c}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vec_or_zero(v: &[f64], n: usize, name: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(vec![0.0; n]);
    }
    if v.len() != n {
        return Err(Error::Dimension(format!("{name} must have {n} entries")));
    }
    Ok(v.to_vec())
}

impl DaeNormalFormSpec {
    /// Missing coupling blocks default to zero; `Γ̂` must be given.
    pub fn build(&self) -> Result<DaeNormalForm> {
        let (r, l, m) = (self.r, self.ell, self.m);
        if r == 0 || l == 0 || l > m {
            return Err(Error::InvalidParameter("need r >= 1 and 1 <= ell <= m".into()));
        }
        let n3 = self.q.len();
        let k = m - l;
        if self.r1.len() != r || !(self.r2.is_empty() || self.r2.len() == r) {
            return Err(Error::Dimension("r1 (and r2 when given) must hold r blocks".into()));
        }
        let r1 = self
            .r1
            .iter()
            .enumerate()
            .map(|(i, b)| shaped(b, l, l, &format!("R_{},1", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let r2 = (0..r)
            .map(|i| match self.r2.get(i) {
                Some(b) => shaped(b, k, l, &format!("R_{},2", i + 1)),
                None => Ok(DMatrix::zeros(k, l)),
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma_hat = shaped(&self.gamma_hat, l, l, "gamma_hat")?;
        if !sign_definite(&gamma_hat) {
            return Err(Error::InvalidParameter("gamma_hat must be sign definite".into()));
        }
        let nf = DaeNormalForm {
            r,
            ell: l,
            m,
            n3,
            r1,
            r2,
            p1: shaped(&self.p1, l, k, "P_1")?,
            p2: shaped(&self.p2, k, k, "P_2")?,
            s1: shaped(&self.s1, l, n3, "S_1")?,
            s2: shaped(&self.s2, k, n3, "S_2")?,
            q: shaped(&self.q, n3, n3, "Q")?,
            a31: shaped(&self.a31, n3, m, "A_31")?,
            gamma_hat,
            gamma_tilde: shaped(&self.gamma_tilde, k, l, "gamma_tilde")?,
            y_i0: vec_or_zero(&self.y_i0, r * l, "y_i0")?,
            x30: vec_or_zero(&self.x30, n3, "x30")?,
            y_ii0: match &self.y_ii0 {
                Some(v) => Some(vec_or_zero(v, k, "y_ii0")?),
                None => None,
            },
        };
        Ok(nf)
    }
}

impl DaeNormalForm {
    /// `Σ R_{k,2} y_I^(k-1) + P_2 y_II + S_2 x_3 + Γ̃ u_I + u_II`.
    pub fn algebraic_row(
        &self,
        chain: &[f64],
        x3: &DVector<f64>,
        y_ii: &DVector<f64>,
        u_i: &DVector<f64>,
        u_ii: &DVector<f64>,
    ) -> DVector<f64> {
        let mut out = &self.p2 * y_ii + &self.s2 * x3 + &self.gamma_tilde * u_i + u_ii;
        for (k, rk) in self.r2.iter().enumerate() {
            out += rk * DVector::from_column_slice(&chain[k * self.ell..(k + 1) * self.ell]);
        }
        out
    }

    /// `y_I^(r)` from the first row.
    pub fn differential_row(
        &self,
        chain: &[f64],
        x3: &DVector<f64>,
        y_ii: &DVector<f64>,
        u_i: &DVector<f64>,
    ) -> DVector<f64> {
        let mut out = &self.p1 * y_ii + &self.s1 * x3 + &self.gamma_hat * u_i;
        for (k, rk) in self.r1.iter().enumerate() {
            out += rk * DVector::from_column_slice(&chain[k * self.ell..(k + 1) * self.ell]);
        }
        out
    }

    pub fn p2_norm(&self) -> f64 {
        if self.p2.is_empty() {
            0.0
        } else {
            self.p2.clone().svd(false, false).singular_values.max()
        }
    }
}

/// Norm of the algebraic row at `t = 0` for the given initial data and inputs.
pub fn dae_consistency_residual(
    nf: &DaeNormalForm,
    y_ii0: &DVector<f64>,
    u_i0: &DVector<f64>,
    u_ii0: &DVector<f64>,
) -> f64 {
    let x3 = DVector::from_column_slice(&nf.x30);
    nf.algebraic_row(&nf.y_i0, &x3, y_ii0, u_i0, u_ii0).norm()
}

/// Output of the DAE funnel law.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeFcStep {
    pub u_i: DVector<f64>,
    pub u_ii: DVector<f64>,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
}

/// `u_I` from the `e_I` chain as in the ODE law; `u_II = -k̂ α(‖v‖²) v`, `v = φ_II e_II`.
pub fn dae_fc(
    alpha: Alpha,
    n: NFun,
    phi_i_t: f64,
    phi_ii_t: f64,
    k_hat: f64,
    e_i: &[DVector<f64>],
    e_ii: &DVector<f64>,
) -> Result<DaeFcStep> {
    let (u_i, w) = fc_output(alpha, n, phi_i_t, e_i).map_err(|e| match e {
        Error::FunnelBreach { stage, value, .. } => Error::breach("dae_i", stage, value),
        other => other,
    })?;
    let v = e_ii * phi_ii_t;
    let vn = v.norm();
    if !(vn <= GUARD) {
        return Err(Error::breach("dae_ii", 0, vn));
    }
    let u_ii = &v * (-k_hat * alpha.eval(vn * vn));
    Ok(DaeFcStep { u_i, u_ii, w, v })
}

/// DAE funnel controller parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeFc {
    pub alpha: Alpha,
    pub n: NFun,
    pub phi_i: FunnelFunction,
    pub phi_ii: FunnelFunction,
    pub k_hat: f64,
}

/// Guarded closed loop; state `(y_I chain, x_3, y_II)`.
pub struct DaeClosedLoop {
    pub nf: DaeNormalForm,
    pub fc: DaeFc,
    pub reference: Signal,
    x0: Vec<f64>,
}

struct Eval {
    y_ii: DVector<f64>,
    step: DaeFcStep,
}

impl DaeClosedLoop {
    /// Validates the gain rule `k̂ > ‖P_2‖`, `φ_II >= 1`, initial funnel membership and consistency.
    pub fn assemble(nf: DaeNormalForm, fc: DaeFc, reference: Signal) -> Result<Self> {
        fc.alpha.validate()?;
        reference.validate()?;
        if reference.dim() != nf.m {
            return Err(Error::Dimension(format!("reference has dimension {}, system has {}", reference.dim(), nf.m)));
        }
        let p2n = nf.p2_norm();
        if !(fc.k_hat > p2n) {
            return Err(Error::InvalidParameter(format!(
                "k_hat = {} must exceed ||P_2|| = {p2n}",
                fc.k_hat
            )));
        }
        if nf.ell < nf.m {
            match (fc.phi_ii.psi_sup_bounds(), fc.phi_ii.sup_bounds()) {
                (Some((psi_sup, _)), Some(_)) if psi_sup <= 1.0 => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "phi_II must be bounded with phi_II >= 1 on the whole half line".into(),
                    ))
                }
            }
        }
        let mut x0 = nf.y_i0.clone();
        x0.extend_from_slice(&nf.x30);
        x0.extend(vec![0.0; nf.m - nf.ell]);
        let mut cl = DaeClosedLoop {
            nf,
            fc,
            reference,
            x0,
        };
        let off = cl.y_ii_offset();
        match cl.nf.y_ii0.clone() {
            Some(y2) => {
                cl.x0[off..].copy_from_slice(&y2);
                let (chain, _, _) = cl.split(&cl.x0);
                let y_ii = DVector::from_column_slice(&y2);
                let yref = cl.yref(0.0);
                let step = cl.law(0.0, chain, &y_ii, &yref)?;
                let res = dae_consistency_residual(&cl.nf, &y_ii, &step.u_i, &step.u_ii);
                if !(res <= 1e-8) {
                    return Err(Error::InconsistentInitialization { residual: res });
                }
            }
            None => {
                let mut x = cl.x0.clone();
                cl.project(0.0, &mut x)?;
                cl.x0 = x;
            }
        }
        let x0 = cl.x0.clone();
        cl.evaluate(0.0, &x0)?;
        Ok(cl)
    }

    fn y_ii_offset(&self) -> usize {
        self.nf.r * self.nf.ell + self.nf.n3
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], DVector<f64>, &'a [f64]) {
        let nc = self.nf.r * self.nf.ell;
        let (chain, rest) = x.split_at(nc);
        let (x3, y_ii) = rest.split_at(self.nf.n3);
        (chain, DVector::from_column_slice(x3), y_ii)
    }

    fn yref(&self, t: f64) -> Vec<DVector<f64>> {
        self.reference.derivs(t, self.nf.r.saturating_sub(1))
    }

    fn law(&self, t: f64, chain: &[f64], y_ii: &DVector<f64>, yref: &[DVector<f64>]) -> Result<DaeFcStep> {
        let l = self.nf.ell;
        let e_i: Vec<DVector<f64>> = (0..self.nf.r)
            .map(|k| DVector::from_column_slice(&chain[k * l..(k + 1) * l]) - yref[k].rows(0, l))
            .collect();
        let e_ii = y_ii - yref[0].rows(l, self.nf.m - l);
        dae_fc(
            self.fc.alpha,
            self.fc.n,
            self.fc.phi_i.value(t),
            self.fc.phi_ii.value(t),
            self.fc.k_hat,
            &e_i,
            &e_ii,
        )
    }

    /// Solves `k̂ α(‖v‖²) v - P_2 v / φ_II = b` for `v` in the unit ball by damped Newton.
    ///
    /// The map is strongly monotone when `k̂ φ_II > ‖P_2‖`, so the root is unique.
    fn solve_v(&self, phi: f64, b: &DVector<f64>, v0: &DVector<f64>) -> Result<DVector<f64>> {
        let k = b.len();
        let kh = self.fc.k_hat;
        let alpha = self.fc.alpha;
        let p = &self.nf.p2 / phi;
        let f = |v: &DVector<f64>| -> DVector<f64> {
            let s = v.norm_squared();
            v * (kh * alpha.eval(s)) - &p * v - b
        };
        let mut v = if v0.norm() < 0.999 { v0.clone() } else { DVector::zeros(k) };
        let mut fv = f(&v);
        let tol = 1e-15 * (1.0 + b.norm());
        for _ in 0..200 {
            if fv.norm() <= tol {
                return Ok(v);
            }
            let s = v.norm_squared();
            let jac = DMatrix::identity(k, k) * (kh * alpha.eval(s)) + &v * v.transpose() * (2.0 * kh * alpha.deriv(s))
                - &p;
            let Some(delta) = jac.lu().solve(&(-&fv)) else {
                break;
            };
            let mut lam = 1.0;
            let mut improved = false;
            for _ in 0..60 {
                let cand = &v + &delta * lam;
                if cand.norm() < GUARD {
                    let fc = f(&cand);
                    if fc.norm() < fv.norm() {
                        v = cand;
                        fv = fc;
                        improved = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if fv.norm() <= 1e-12 * (1.0 + b.norm()) {
            return Ok(v);
        }
        Err(Error::breach("dae_algebraic", 0, fv.norm()))
    }

    /// Solves the algebraic row for `y_II` given the differential states.
    fn solve_y_ii(&self, t: f64, chain: &[f64], x3: &DVector<f64>, guess: &[f64], yref: &[DVector<f64>]) -> Result<DVector<f64>> {
        let l = self.nf.ell;
        let k = self.nf.m - l;
        if k == 0 {
            return Ok(DVector::zeros(0));
        }
        // u_I does not depend on y_II
        let step = self.law(t, chain, &DVector::from_column_slice(&yref[0].as_slice()[l..]), yref)?;
        let zero = DVector::zeros(k);
        let yr = yref[0].rows(l, k).into_owned();
        let c = self.nf.algebraic_row(chain, x3, &zero, &step.u_i, &zero);
        let b = c + &self.nf.p2 * &yr;
        let phi = self.fc.phi_ii.value(t);
        let v0 = (DVector::from_column_slice(guess) - &yr) * phi;
        let v = self.solve_v(phi, &b, &v0)?;
        Ok(yr + v / phi)
    }

    fn evaluate(&self, t: f64, x: &[f64]) -> Result<Eval> {
        let (chain, x3, guess) = self.split(x);
        let yref = self.yref(t);
        let y_ii = self.solve_y_ii(t, chain, &x3, guess, &yref)?;
        let step = self.law(t, chain, &y_ii, &yref)?;
        Ok(Eval { y_ii, step })
    }
}

impl OdeSystem for DaeClosedLoop {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn rhs(&self, t: f64, x: &[f64], _hist: &History, dx: &mut [f64]) -> Result<()> {
        let ev = self.evaluate(t, x)?;
        let (chain, x3, _) = self.split(x);
        let (r, l, n3) = (self.nf.r, self.nf.ell, self.nf.n3);
        dx[..(r - 1) * l].copy_from_slice(&chain[l..]);
        let top = self.nf.differential_row(chain, &x3, &ev.y_ii, &ev.step.u_i);
        dx[(r - 1) * l..r * l].copy_from_slice(top.as_slice());
        let mut y = chain[..l].to_vec();
        y.extend(ev.y_ii.iter());
        let dx3 = &self.nf.q * &x3 + &self.nf.a31 * DVector::from_vec(y);
        dx[r * l..r * l + n3].copy_from_slice(dx3.as_slice());
        for v in &mut dx[r * l + n3..] {
            *v = 0.0;
        }
        Ok(())
    }

    fn project(&self, t: f64, x: &mut [f64]) -> Result<()> {
        let off = self.y_ii_offset();
        let (chain, x3, guess) = self.split(x);
        let yref = self.yref(t);
        let y_ii = self.solve_y_ii(t, chain, &x3, guess, &yref)?;
        x[off..].copy_from_slice(y_ii.as_slice());
        Ok(())
    }

    fn has_projection(&self) -> bool {
        self.nf.ell < self.nf.m
    }
}

impl ClosedLoop for DaeClosedLoop {
    fn m(&self) -> usize {
        self.nf.m
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    /// Records the stored `y_II` and the algebraic residual it leaves.
    fn observe(&self, t: f64, x: &[f64], _hist: &History) -> Result<Sample> {
        let (chain, x3, stored) = self.split(x);
        let l = self.nf.ell;
        let yref = self.yref(t);
        let y_ii = DVector::from_column_slice(stored);
        let step = self.law(t, chain, &y_ii, &yref)?;
        let residual = self.nf.algebraic_row(chain, &x3, &y_ii, &step.u_i, &step.u_ii).norm();
        let mut y: Vec<f64> = chain[..l].to_vec();
        y.extend(y_ii.iter());
        let e: Vec<f64> = y.iter().zip(yref[0].iter()).map(|(a, b)| a - b).collect();
        let mut u: Vec<f64> = step.u_i.iter().copied().collect();
        u.extend(step.u_ii.iter());
        let phi_i = self.fc.phi_i.value(t);
        let wn = step.w.norm();
        let vn = step.v.norm();
        let e_i_norm = e[..l].iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Sample {
            t,
            y,
            u,
            e,
            psi: vec![self.fc.phi_i.radius(t), self.fc.phi_ii.radius(t)],
            gains: vec![self.fc.alpha.eval(wn * wn), self.fc.k_hat * self.fc.alpha.eval(vn * vn)],
            margins: vec![phi_i * e_i_norm, wn, vn],
            saturated: false,
            residual,
            x: x.to_vec(),
        })
    }
}
