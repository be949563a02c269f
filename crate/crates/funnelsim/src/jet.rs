//! Truncated Taylor series in one variable (time).
//!
//! A `Jet` of order `k` stores normalized coefficients `c[j] = f^(j)(t0) / j!`
//! for `j = 0..=k`. Arithmetic is exact up to the truncation order, so
//! feedback laws built from derivatives of derivatives can be evaluated
//! without symbolic expansion.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable expanded at `t0`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut j = Jet::constant(t0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    /// Builds a jet from plain derivatives `[f, f', f'', ...]`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        assert!(!d.is_empty());
        Jet {
            c: d.iter().enumerate().map(|(k, v)| v / factorial(k)).collect(),
        }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.derivative(k)).collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let n = order.min(self.order()) + 1;
        Jet {
            c: self.c[..n].to_vec(),
        }
    }

    /// Time derivative; the order drops by one (a constant at order 0 yields the zero jet).
    pub fn deriv(&self) -> Jet {
        if self.order() == 0 {
            return Jet::constant(0.0, 0);
        }
        Jet {
            c: (1..self.c.len()).map(|k| k as f64 * self.c[k]).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    pub fn recip(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut r = vec![0.0; n];
        r[0] = 1.0 / a0;
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| self.c[i] * r[k - i]).sum();
            r[k] = -s / a0;
        }
        Jet { c: r }
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| i as f64 * self.c[i] * e[k - i]).sum();
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.c.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for i in 1..=k {
                ss += i as f64 * self.c[i] * c[k - i];
                cc -= i as f64 * self.c[i] * s[k - i];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        (Jet { c: s }, Jet { c })
    }

    /// Squared Euclidean norm of a vector of jets.
    pub fn norm_sq(v: &[Jet]) -> Jet {
        let order = v.iter().map(Jet::order).min().unwrap_or(0);
        v.iter()
            .fold(Jet::constant(0.0, order), |acc, x| &acc + &(x * x))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        let n = self.c.len().min(o.c.len());
        Jet {
            c: (0..n).map(|k| self.c[k] + o.c[k]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        let n = self.c.len().min(o.c.len());
        Jet {
            c: (0..n).map(|k| self.c[k] - o.c[k]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let n = self.c.len().min(o.c.len());
        Jet {
            c: (0..n)
                .map(|k| (0..=k).map(|i| self.c[i] * o.c[k - i]).sum())
                .collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_variable() {
        let t = Jet::variable(0.3, 5);
        let e = t.exp();
        for k in 0..=5 {
            assert!((e.derivative(k) - 0.3f64.exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn recip_matches_series() {
        // 1/(1+t) at t0 = 0.5: derivatives (-1)^k k! / 1.5^(k+1)
        let t = Jet::variable(0.5, 6);
        let r = t.add_scalar(1.0).recip();
        for k in 0..=6 {
            let expect = (-1f64).powi(k as i32) * factorial(k) / 1.5f64.powi(k as i32 + 1);
            assert!((r.derivative(k) - expect).abs() < 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn product_rule_and_shift() {
        let t = Jet::variable(2.0, 4);
        let sq = &t * &t;
        assert_eq!(sq.derivatives(), vec![4.0, 4.0, 2.0, 0.0, 0.0]);
        assert_eq!(sq.deriv().derivatives(), vec![4.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn sin_cos_derivatives() {
        let (s, c) = Jet::variable(1.1, 4).sin_cos();
        let x = 1.1f64;
        let ds = [x.sin(), x.cos(), -x.sin(), -x.cos(), x.sin()];
        let dc = [x.cos(), -x.sin(), -x.cos(), x.sin(), x.cos()];
        for k in 0..=4 {
            assert!((s.derivative(k) - ds[k]).abs() < 1e-12);
            assert!((c.derivative(k) - dc[k]).abs() < 1e-12);
        }
    }
}
