//! Nested forward-mode dual numbers.
//!
//! `Dual(a, b)` is `a + b ε` where `a`, `b` are themselves numbers one level
//! down. Nesting depth is decided at runtime, so derivatives of derivatives
//! (needed by the filter recursion) come out of the same code path. Callers
//! must lift every input at each level so binary operations always pair
//! values of equal depth; plain `Re` values act as constants at any depth.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub enum Num {
    Re(f64),
    Dual(Box<Num>, Box<Num>),
}

use Num::{Dual, Re};

impl Num {
    pub fn re(&self) -> f64 {
        match self {
            Re(x) => *x,
            Dual(a, _) => a.re(),
        }
    }

    /// Embeds one level up with zero tangent.
    pub fn lift(&self) -> Num {
        Dual(Box::new(self.clone()), Box::new(Re(0.0)))
    }

    /// Embeds one level up with unit tangent.
    pub fn seed(&self) -> Num {
        Dual(Box::new(self.clone()), Box::new(Re(1.0)))
    }

    pub fn primal(&self) -> Num {
        match self {
            Re(x) => Re(*x),
            Dual(a, _) => (**a).clone(),
        }
    }

    pub fn tangent(&self) -> Num {
        match self {
            Re(_) => Re(0.0),
            Dual(_, b) => (**b).clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Num {
        match self {
            Re(x) => Re(x * s),
            Dual(a, b) => Dual(Box::new(a.scale(s)), Box::new(b.scale(s))),
        }
    }

    pub fn add_f(&self, s: f64) -> Num {
        match self {
            Re(x) => Re(x + s),
            Dual(a, b) => Dual(Box::new(a.add_f(s)), b.clone()),
        }
    }

    pub fn recip(&self) -> Num {
        match self {
            Re(x) => Re(1.0 / x),
            Dual(a, b) => {
                let ia = a.recip();
                let d = -(&(&**b * &ia) * &ia);
                Dual(Box::new(ia), Box::new(d))
            }
        }
    }

    pub fn sqrt(&self) -> Num {
        match self {
            Re(x) => Re(x.sqrt()),
            Dual(a, b) => {
                let s = a.sqrt();
                let d = &**b * &s.scale(2.0).recip();
                Dual(Box::new(s), Box::new(d))
            }
        }
    }

    pub fn sin(&self) -> Num {
        match self {
            Re(x) => Re(x.sin()),
            Dual(a, b) => Dual(Box::new(a.sin()), Box::new(&**b * &a.cos())),
        }
    }

    pub fn cos(&self) -> Num {
        match self {
            Re(x) => Re(x.cos()),
            Dual(a, b) => Dual(Box::new(a.cos()), Box::new(-(&**b * &a.sin()))),
        }
    }

    pub fn powf(&self, p: f64) -> Num {
        match self {
            Re(x) => Re(x.powf(p)),
            Dual(a, b) => {
                let d = &**b * &a.powf(p - 1.0).scale(p);
                Dual(Box::new(a.powf(p)), Box::new(d))
            }
        }
    }

    pub fn square(&self) -> Num {
        self * self
    }
}

impl Add for &Num {
    type Output = Num;
    fn add(self, o: &Num) -> Num {
        match (self, o) {
            (Re(a), Re(b)) => Re(a + b),
            (Dual(a, da), Dual(b, db)) => Dual(Box::new(&**a + &**b), Box::new(&**da + &**db)),
            (Dual(a, da), Re(c)) | (Re(c), Dual(a, da)) => Dual(Box::new(a.add_f(*c)), da.clone()),
        }
    }
}

impl Neg for Num {
    type Output = Num;
    fn neg(self) -> Num {
        self.scale(-1.0)
    }
}

impl Neg for &Num {
    type Output = Num;
    fn neg(self) -> Num {
        self.scale(-1.0)
    }
}

impl Sub for &Num {
    type Output = Num;
    fn sub(self, o: &Num) -> Num {
        self + &(-o)
    }
}

impl Mul for &Num {
    type Output = Num;
    fn mul(self, o: &Num) -> Num {
        match (self, o) {
            (Re(a), Re(b)) => Re(a * b),
            (Dual(a, da), Dual(b, db)) => {
                let d = &(&**a * &**db) + &(&**da * &**b);
                Dual(Box::new(&**a * &**b), Box::new(d))
            }
            (Dual(a, da), Re(c)) | (Re(c), Dual(a, da)) => Dual(Box::new(a.scale(*c)), Box::new(da.scale(*c))),
        }
    }
}

/// Euclidean norm; returns a constant zero at the origin where the norm is not differentiable.
pub fn norm(v: &[Num]) -> Num {
    let mut s = Re(0.0);
    for x in v {
        s = &s + &x.square();
    }
    if s.re() == 0.0 {
        Re(0.0)
    } else {
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_and_second_derivatives() {
        // f(x) = sin(x) / x at x = 0.7
        let x0 = 0.7f64;
        let f = |x: &Num| &x.sin() * &x.recip();
        let d1 = f(&Re(x0).seed()).tangent().re();
        let exact1 = (x0 * x0.cos() - x0.sin()) / (x0 * x0);
        assert!((d1 - exact1).abs() < 1e-14);
        // second derivative by nesting
        let x = Re(x0).seed().seed();
        let d2 = f(&x).tangent().tangent().re();
        let exact2 = -x0.sin() / x0 - 2.0 * x0.cos() / (x0 * x0) + 2.0 * x0.sin() / x0.powi(3);
        assert!((d2 - exact2).abs() < 1e-12, "{d2} {exact2}");
    }

    #[test]
    fn powf_and_sqrt() {
        let x = Re(2.0).seed();
        assert!((x.powf(1.5).tangent().re() - 1.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((x.sqrt().tangent().re() - 0.5 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_at_origin_is_constant() {
        let v = [Re(0.0).seed(), Re(0.0).lift()];
        assert_eq!(norm(&v), Re(0.0));
        let v = [Re(3.0).seed(), Re(4.0).lift()];
        let n = norm(&v);
        assert!((n.re() - 5.0).abs() < 1e-15 && (n.tangent().re() - 0.6).abs() < 1e-15);
    }
}
