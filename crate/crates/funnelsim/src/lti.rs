//! Linear time-invariant systems `x' = Ax + Bu, y = Cx`.
//!
//! Relative degree, Byrnes–Isidori coordinates, zero dynamics, transfer
//! function evaluation and the high-gain threshold probe.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance for rank and zero decisions.
pub const REL_TOL: f64 = 1e-10;

type CMat = DMatrix<Complex<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || b.ncols() != c.nrows() {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if b.ncols() > n {
            return Err(Error::Dimension("m must not exceed n".into()));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(LtiSystem { a, b, c })
    }

    /// Scalar system `x' = a x + b u, y = c x`.
    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        LtiSystem::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
        )
        .expect("scalar system is well formed")
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Markov parameter `C A^k B`.
    pub fn markov(&self, k: usize) -> DMatrix<f64> {
        let mut x = self.b.clone();
        for _ in 0..k {
            x = &self.a * x;
        }
        &self.c * x
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub(crate) fn min_singular(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDegree {
    pub r: usize,
    pub gamma: DMatrix<f64>,
}

/// Smallest `r <= r_max` with `C A^k B = 0` for `k < r-1` and `C A^{r-1} B` invertible.
pub fn relative_degree(sys: &LtiSystem, r_max: usize) -> Option<RelativeDegree> {
    let na = spectral_norm(&sys.a);
    let scale0 = spectral_norm(&sys.c) * spectral_norm(&sys.b);
    let m = sys.m();
    for k in 0..r_max.min(sys.n()) {
        let mk = sys.markov(k);
        let scale = (scale0 * na.powi(k as i32)).max(f64::MIN_POSITIVE);
        if m > 0 && min_singular(&mk) > REL_TOL * scale {
            return Some(RelativeDegree { r: k + 1, gamma: mk });
        }
        if mk.norm() > REL_TOL * scale {
            return None;
        }
    }
    None
}

/// Byrnes–Isidori coordinates `(ξ, η) = U x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ByrnesIsidoriForm {
    pub r: usize,
    pub m: usize,
    /// `R_1, ..., R_r`, each `m x m`.
    pub r_blocks: Vec<DMatrix<f64>>,
    pub gamma: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub u_inv: DMatrix<f64>,
}

fn stack_rows(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(b);
        r0 += b.nrows();
    }
    out
}

fn stack_cols(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(b);
        c0 += b.ncols();
    }
    out
}

/// Orthonormal basis of `ker M` (columns) of the expected dimension.
fn kernel_basis(mat: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = mat.ncols();
    if dim == 0 {
        return DMatrix::zeros(n, 0);
    }
    // pad to a square matrix so the SVD returns the full right singular basis
    let mut sq = DMatrix::zeros(n.max(mat.nrows()), n);
    sq.view_mut((0, 0), (mat.nrows(), n)).copy_from(mat);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap());
    let mut w = DMatrix::zeros(n, dim);
    for (col, &i) in idx.iter().take(dim).enumerate() {
        w.set_column(col, &vt.row(i).transpose());
    }
    w
}

/// Constructs the Byrnes–Isidori form.
pub fn byrnes_isidori(sys: &LtiSystem) -> Result<ByrnesIsidoriForm> {
    let n = sys.n();
    let m = sys.m();
    let rd = relative_degree(sys, n)
        .ok_or_else(|| Error::NotApplicable("system has no strict relative degree".into()))?;
    let r = rd.r;
    let mut ca = vec![sys.c.clone()];
    let mut ab = vec![sys.b.clone()];
    for k in 1..r {
        ca.push(&ca[k - 1] * &sys.a);
        ab.push(&sys.a * &ab[k - 1]);
    }
    let c_r = stack_rows(&ca);
    let b_r = stack_cols(&ab);
    let crbr = &c_r * &b_r;
    let sv = crbr.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= 1e12) {
        return Err(Error::NumericalRank(format!("cond(C_r B_r) = {cond:e}")));
    }
    let crbr_inv = crbr
        .try_inverse()
        .ok_or_else(|| Error::NumericalRank("C_r B_r singular".into()))?;
    let w = kernel_basis(&c_r, n - r * m);
    let wtw_inv = (w.transpose() * &w)
        .try_inverse()
        .unwrap_or_else(|| DMatrix::zeros(w.ncols(), w.ncols()));
    let proj = DMatrix::identity(n, n) - &b_r * &crbr_inv * &c_r;
    let v = wtw_inv * w.transpose() * proj;
    let u = stack_rows(&[c_r.clone(), v.clone()]);
    let u_inv = stack_cols(&[&b_r * &crbr_inv, w.clone()]);

    let car = &ca[r - 1] * &sys.a;
    let gamma = rd.gamma;
    let rr = &car * &b_r * &crbr_inv;
    let r_blocks = (0..r)
        .map(|k| rr.view((0, k * m), (m, m)).into_owned())
        .collect();
    let mut arb = sys.b.clone();
    for _ in 0..r {
        arb = &sys.a * arb;
    }
    let gamma_inv = gamma
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalRank("Γ singular".into()))?;
    let p = &v * arb * gamma_inv;
    let q = &v * &sys.a * &w;
    let s = car * &w;
    Ok(ByrnesIsidoriForm {
        r,
        m,
        r_blocks,
        gamma,
        q,
        p,
        s,
        u,
        u_inv,
    })
}

fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex::new(v, 0.0))
}

fn resolvent_solve(a: &DMatrix<f64>, s: Complex<f64>, rhs: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut m = -to_complex(a);
    for i in 0..n {
        m[(i, i)] += s;
    }
    let scale = to_complex(a).norm().max(s.norm()).max(1.0);
    let lu = m.clone().lu();
    let x = lu.solve(rhs).ok_or(Error::Pole)?;
    let svd = m.svd(false, false);
    if svd.singular_values.min() <= 1e-13 * scale {
        return Err(Error::Pole);
    }
    Ok(x)
}

/// `C (sI - A)^{-1} B`.
pub fn transfer_eval(sys: &LtiSystem, s: Complex<f64>) -> Result<CMat> {
    let x = resolvent_solve(&sys.a, s, &to_complex(&sys.b))?;
    Ok(to_complex(&sys.c) * x)
}

/// `G(s) = -(Σ R_i s^{i-1} - s^r I + S (sI - Q)^{-1} P)^{-1} Γ`.
pub fn transfer_eval_bi(bif: &ByrnesIsidoriForm, s: Complex<f64>) -> Result<CMat> {
    let m = bif.m;
    let mut acc = CMat::zeros(m, m);
    let mut sp = Complex::new(1.0, 0.0);
    for rk in &bif.r_blocks {
        acc += to_complex(rk) * sp;
        sp *= s;
    }
    for i in 0..m {
        acc[(i, i)] -= sp;
    }
    if bif.q.nrows() > 0 {
        let x = resolvent_solve(&bif.q, s, &to_complex(&bif.p))?;
        acc += to_complex(&bif.s) * x;
    }
    let inv = acc.try_inverse().ok_or(Error::Pole)?;
    Ok(-(inv * to_complex(&bif.gamma)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroDynamicsReport {
    pub spectrum_q: Vec<(f64, f64)>,
    pub asymptotically_stable: bool,
    pub bounded: bool,
}

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Spectrum of `Q` and the resulting stability verdicts.
pub fn zero_dynamics(bif: &ByrnesIsidoriForm) -> ZeroDynamicsReport {
    let eig = eigenvalues(&bif.q);
    let scale = spectral_norm(&bif.q).max(1.0);
    let tol = 1e-9 * scale;
    let asymptotically_stable = eig.iter().all(|l| l.re < 0.0);
    let mut bounded = eig.iter().all(|l| l.re <= tol);
    if bounded {
        // eigenvalues on the imaginary axis must be semisimple
        let n = bif.q.nrows();
        for l in eig.iter().filter(|l| l.re.abs() <= tol) {
            let mult = eig.iter().filter(|k| (*k - l).norm() <= 1e-6 * scale).count();
            let mut shifted = to_complex(&bif.q);
            for i in 0..n {
                shifted[(i, i)] -= l;
            }
            let sv = shifted.svd(false, false).singular_values;
            let rank = sv.iter().filter(|v| **v > 1e-8 * scale).count();
            if n - rank < mult {
                bounded = false;
            }
        }
    }
    ZeroDynamicsReport {
        spectrum_q: eig.iter().map(|c| (c.re, c.im)).collect(),
        asymptotically_stable,
        bounded,
    }
}

/// `det [A - λI, B; C, 0]`.
pub fn pencil_determinant(sys: &LtiSystem, lambda: Complex<f64>) -> Complex<f64> {
    let n = sys.n();
    let m = sys.m();
    let mut big = CMat::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&to_complex(&sys.a));
    for i in 0..n {
        big[(i, i)] -= lambda;
    }
    big.view_mut((0, n), (n, m)).copy_from(&to_complex(&sys.b));
    big.view_mut((n, 0), (m, n)).copy_from(&to_complex(&sys.c));
    big.determinant()
}

/// True iff all eigenvalues of the symmetric part are strictly of one sign.
pub fn sign_definite(gamma: &DMatrix<f64>) -> bool {
    if gamma.nrows() != gamma.ncols() || gamma.nrows() == 0 {
        return false;
    }
    let sym = (gamma + gamma.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let scale = spectral_norm(gamma).max(f64::MIN_POSITIVE);
    let tol = REL_TOL * scale;
    ev.iter().all(|v| *v > tol) || ev.iter().all(|v| *v < -tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmrReport {
    pub member: bool,
    pub r: Option<usize>,
    pub sign_definite: bool,
    pub zd_stable: bool,
}

/// Membership in the class of minimum-phase systems with strict relative degree and
/// sign-definite high-frequency gain.
pub fn is_in_lmr(sys: &LtiSystem) -> LmrReport {
    let rd = relative_degree(sys, sys.n());
    let Some(rd) = rd else {
        return LmrReport {
            member: false,
            r: None,
            sign_definite: false,
            zd_stable: false,
        };
    };
    let sd = sign_definite(&rd.gamma);
    let zd = byrnes_isidori(sys)
        .map(|b| zero_dynamics(&b).asymptotically_stable)
        .unwrap_or(false);
    LmrReport {
        member: sd && zd,
        r: Some(rd.r),
        sign_definite: sd,
        zd_stable: zd,
    }
}

fn closed_loop_stable(sys: &LtiSystem, k: f64) -> bool {
    let acl = &sys.a - &sys.b * &sys.c * k;
    eigenvalues(&acl).iter().all(|l| l.re < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighGainThreshold {
    pub k_star: f64,
}

/// Smallest sampled `k*` such that `A - kBC` is Hurwitz for all sampled `k` in `[k*, k_max]`.
pub fn high_gain_threshold(sys: &LtiSystem, k_max: f64) -> Result<Option<HighGainThreshold>> {
    let rd = relative_degree(sys, 1)
        .ok_or_else(|| Error::NotApplicable("relative degree is not one".into()))?;
    if !eigenvalues(&rd.gamma).iter().all(|l| l.re > 0.0) {
        return Err(Error::NotApplicable("spectrum of CB not in the open right half plane".into()));
    }
    let bif = byrnes_isidori(sys)?;
    if !zero_dynamics(&bif).asymptotically_stable {
        return Err(Error::NotApplicable("zero dynamics not asymptotically stable".into()));
    }
    if !(k_max > 0.0) {
        return Err(Error::InvalidParameter("k_max must be positive".into()));
    }
    const SAMPLES: usize = 400;
    let k_lo = k_max * 1e-9;
    let ks: Vec<f64> = (0..SAMPLES)
        .map(|i| k_lo * (k_max / k_lo).powf(i as f64 / (SAMPLES - 1) as f64))
        .collect();
    if !closed_loop_stable(sys, k_max) {
        return Ok(None);
    }
    let mut idx = SAMPLES - 1;
    while idx > 0 && closed_loop_stable(sys, ks[idx - 1]) {
        idx -= 1;
    }
    let (mut lo, mut hi) = if idx == 0 { (0.0, ks[0]) } else { (ks[idx - 1], ks[idx]) };
    while hi - lo > 1e-6 * hi.max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if closed_loop_stable(sys, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(HighGainThreshold { k_star: hi }))
}

/// Matrix from row-major nested rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}
