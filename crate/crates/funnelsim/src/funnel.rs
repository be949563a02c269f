//! Funnel functions `φ` and their class checks.
//!
//! The funnel at time `t` is the open ball of radius `1/φ(t)`. All shipped
//! families are closed forms with analytic derivatives; the asymptotic
//! clauses of the class definitions (positive liminf, boundedness) are
//! declared per family and only falsified, never proven, by the grid checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Number of uniform grid points used by the class checks.
pub const GRID_POINTS: usize = 10_000;

const DEFAULT_MAX_ORDER: usize = 12;

/// Closed-form expressions for user supplied funnels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CustomExpr {
    /// `φ(t) = Σ c_k t^k`
    Polynomial { coeffs: Vec<f64> },
    /// `φ(t) = exp(Σ c_k t^k)`
    ExpPolynomial { coeffs: Vec<f64> },
}

impl CustomExpr {
    fn coeffs(&self) -> &[f64] {
        match self {
            CustomExpr::Polynomial { coeffs } | CustomExpr::ExpPolynomial { coeffs } => coeffs,
        }
    }

    fn poly_jet(coeffs: &[f64], t: f64, order: usize) -> Jet {
        let x = Jet::variable(t, order);
        coeffs
            .iter()
            .rev()
            .fold(Jet::constant(0.0, order), |acc, c| (&acc * &x).add_scalar(*c))
    }

    fn jet(&self, t: f64, order: usize) -> Jet {
        match self {
            CustomExpr::Polynomial { coeffs } => Self::poly_jet(coeffs, t, order),
            CustomExpr::ExpPolynomial { coeffs } => Self::poly_jet(coeffs, t, order).exp(),
        }
    }

    fn degree(&self) -> usize {
        let c = self.coeffs();
        c.iter().rposition(|v| *v != 0.0).unwrap_or(0)
    }

    /// Whether `|φ'| <= c (1 + φ)` holds for some `c` on the whole half line.
    fn growth_bounded(&self) -> bool {
        match self {
            // p'/(1+p) is bounded on [0,∞) for any polynomial positive there
            CustomExpr::Polynomial { .. } => true,
            CustomExpr::ExpPolynomial { coeffs } => {
                let d = self.degree();
                d <= 1 || coeffs[d] < 0.0
            }
        }
    }
}

/// Declared asymptotic behaviour of a custom funnel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asymptote {
    pub liminf_positive: bool,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `φ(t) = c`
    ConstantReciprocal { c: f64 },
    /// `φ(t) = 1 / (a e^{-bt} + c)`
    ExpDecayReciprocal { a: f64, b: f64, c: f64 },
    /// `φ(t) = min(t/T, 1) / ε`
    LinearRamp { eps: f64, t_ramp: f64 },
    Custom {
        expr: CustomExpr,
        #[serde(default)]
        asymptote: Option<Asymptote>,
    },
}

/// A funnel function: a family plus the highest derivative order it serves.
///
/// Serialized as its family; deserialization validates the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct FunnelFunction {
    pub family: Family,
    pub max_derivative_order: usize,
}

impl TryFrom<Family> for FunnelFunction {
    type Error = Error;
    fn try_from(f: Family) -> Result<Self> {
        FunnelFunction::new(f)
    }
}

impl From<FunnelFunction> for Family {
    fn from(f: FunnelFunction) -> Family {
        f.family
    }
}

fn finite(v: f64, name: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

impl FunnelFunction {
    pub fn new(family: Family) -> Result<Self> {
        match &family {
            Family::ConstantReciprocal { c } => {
                finite(*c, "c")?;
                if *c <= 0.0 {
                    return Err(Error::InvalidParameter("c must be positive".into()));
                }
            }
            Family::ExpDecayReciprocal { a, b, c } => {
                finite(*a, "a")?;
                finite(*b, "b")?;
                finite(*c, "c")?;
                if *a < 0.0 || *c < 0.0 || *a + *c <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "need a >= 0, c >= 0 and a + c > 0".into(),
                    ));
                }
                if *c == 0.0 && *b < 0.0 {
                    return Err(Error::InvalidParameter("b must be >= 0 when c = 0".into()));
                }
            }
            Family::LinearRamp { eps, t_ramp } => {
                finite(*eps, "eps")?;
                finite(*t_ramp, "t_ramp")?;
                if *eps <= 0.0 || *t_ramp <= 0.0 {
                    return Err(Error::InvalidParameter("eps and T must be positive".into()));
                }
            }
            Family::Custom { expr, .. } => {
                let c = expr.coeffs();
                if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "custom coefficients must be finite and non-empty".into(),
                    ));
                }
            }
        }
        let max_derivative_order = match family {
            Family::LinearRamp { .. } => 1,
            _ => DEFAULT_MAX_ORDER,
        };
        Ok(FunnelFunction {
            family,
            max_derivative_order,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Family::ConstantReciprocal { c })
    }

    pub fn exp_decay(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(Family::ExpDecayReciprocal { a, b, c })
    }

    pub fn linear_ramp(eps: f64, t_ramp: f64) -> Result<Self> {
        Self::new(Family::LinearRamp { eps, t_ramp })
    }

    pub fn custom(expr: CustomExpr, asymptote: Option<Asymptote>) -> Result<Self> {
        Self::new(Family::Custom { expr, asymptote })
    }

    fn smoothness_cap(&self) -> usize {
        match self.family {
            Family::LinearRamp { .. } => 1,
            _ => usize::MAX,
        }
    }

    /// Lowers the supported derivative order.
    pub fn with_max_order(mut self, order: usize) -> Self {
        self.max_derivative_order = order.min(self.smoothness_cap());
        self
    }

    /// `s·φ`, staying inside the family.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        let family = match &self.family {
            Family::ConstantReciprocal { c } => Family::ConstantReciprocal { c: c * s },
            Family::ExpDecayReciprocal { a, b, c } => Family::ExpDecayReciprocal {
                a: a / s,
                b: *b,
                c: c / s,
            },
            Family::LinearRamp { eps, t_ramp } => Family::LinearRamp {
                eps: eps / s,
                t_ramp: *t_ramp,
            },
            Family::Custom { expr, asymptote } => {
                let expr = match expr {
                    CustomExpr::Polynomial { coeffs } => CustomExpr::Polynomial {
                        coeffs: coeffs.iter().map(|c| c * s).collect(),
                    },
                    CustomExpr::ExpPolynomial { coeffs } => {
                        let mut coeffs = coeffs.clone();
                        coeffs[0] += s.ln();
                        CustomExpr::ExpPolynomial { coeffs }
                    }
                };
                Family::Custom {
                    expr,
                    asymptote: *asymptote,
                }
            }
        };
        Ok(FunnelFunction {
            family,
            max_derivative_order: self.max_derivative_order,
        })
    }

    /// Taylor jet of `φ` at `t` up to `order`.
    pub fn jet(&self, t: f64, order: usize) -> Result<Jet> {
        if order > self.max_derivative_order {
            return Err(Error::UnsupportedDerivative {
                order,
                max: self.max_derivative_order,
            });
        }
        Ok(match &self.family {
            Family::ConstantReciprocal { c } => Jet::constant(*c, order),
            Family::ExpDecayReciprocal { a, b, c } => Jet::variable(t, order)
                .scale(-b)
                .exp()
                .scale(*a)
                .add_scalar(*c)
                .recip(),
            Family::LinearRamp { eps, t_ramp } => {
                let mut d = vec![(t / t_ramp).min(1.0) / eps];
                if order >= 1 {
                    d.push(if t < *t_ramp { 1.0 / (eps * t_ramp) } else { 0.0 });
                }
                Jet::from_derivatives(&d)
            }
            Family::Custom { expr, .. } => expr.jet(t, order),
        })
    }

    /// `d^order φ / dt^order` at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        Ok(self.jet(t, order)?.derivative(order))
    }

    /// `φ(t)`.
    pub fn value(&self, t: f64) -> f64 {
        match &self.family {
            Family::ConstantReciprocal { c } => *c,
            Family::ExpDecayReciprocal { a, b, c } => 1.0 / (a * (-b * t).exp() + c),
            Family::LinearRamp { eps, t_ramp } => (t / t_ramp).min(1.0) / eps,
            Family::Custom { expr, .. } => expr.jet(t, 0).value(),
        }
    }

    /// Funnel radius `1/φ(t)`; infinite where `φ(t) = 0`.
    pub fn radius(&self, t: f64) -> f64 {
        let v = self.value(t);
        if v == 0.0 {
            f64::INFINITY
        } else {
            1.0 / v
        }
    }

    /// True when the 0-section of the funnel is the whole space.
    pub fn zero_section_infinite(&self) -> bool {
        self.value(0.0) == 0.0
    }

    /// Declared `(liminf φ > 0, φ bounded)`; `None` for undeclared custom funnels.
    pub fn declared_asymptote(&self) -> Option<Asymptote> {
        match &self.family {
            Family::ConstantReciprocal { .. } => Some(Asymptote {
                liminf_positive: true,
                bounded: true,
            }),
            Family::ExpDecayReciprocal { c, .. } => Some(Asymptote {
                liminf_positive: true,
                bounded: *c > 0.0,
            }),
            Family::LinearRamp { .. } => Some(Asymptote {
                liminf_positive: true,
                bounded: true,
            }),
            Family::Custom { asymptote, .. } => *asymptote,
        }
    }

    fn growth_bounded(&self) -> bool {
        match &self.family {
            Family::Custom { expr, .. } => expr.growth_bounded(),
            _ => true,
        }
    }

    /// Upper bounds `(sup φ, sup |φ'|)` from the closed form, when bounded.
    pub fn sup_bounds(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::ConstantReciprocal { c } => Some((*c, 0.0)),
            Family::ExpDecayReciprocal { a, b, c } => {
                if *c <= 0.0 {
                    return None;
                }
                // φ' = a b e^{-bt} / g², maximal where g is smallest, i.e. bounded by a|b|/c²
                let sup = if *b >= 0.0 { 1.0 / c } else { 1.0 / (a + c) };
                Some((sup, a * b.abs() / (c * c)))
            }
            Family::LinearRamp { eps, t_ramp } => Some((1.0 / eps, 1.0 / (eps * t_ramp))),
            Family::Custom { .. } => None,
        }
    }
}

impl FunnelFunction {
    /// Upper bounds `(sup ψ, sup |ψ'|)` for the radius `ψ = 1/φ`, when bounded.
    pub fn psi_sup_bounds(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::ConstantReciprocal { c } => Some((1.0 / c, 0.0)),
            Family::ExpDecayReciprocal { a, b, c } => {
                if *b < 0.0 && *a > 0.0 {
                    return None;
                }
                Some((a + c, a * b))
            }
            Family::LinearRamp { .. } | Family::Custom { .. } => None,
        }
    }
}

/// Result of [`check_class`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelClassReport {
    pub in_phi: bool,
    pub r: usize,
    pub in_phi_r: bool,
    /// Smallest `c` with `|φ'| <= c(1+φ)` on the grid.
    pub lipschitz_constant_estimate: f64,
    pub liminf_positive: bool,
    pub bounded: bool,
    pub positive_on_grid: bool,
    pub growth_bounded: bool,
    pub zero_section_infinite: bool,
}

fn grid(horizon: f64) -> impl Iterator<Item = f64> {
    (0..GRID_POINTS).map(move |i| horizon * i as f64 / (GRID_POINTS - 1) as f64)
}

/// Checks membership in the class `Φ` and in `Φ_r` on `[0, horizon]`.
pub fn check_class(f: &FunnelFunction, r: usize, horizon: f64) -> Result<FunnelClassReport> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let asym = f.declared_asymptote().ok_or_else(|| {
        Error::ClassUndecidable("custom funnel without declared asymptotics".into())
    })?;
    let d1 = f.max_derivative_order >= 1;
    let mut positive = true;
    let mut c_est: f64 = 0.0;
    let mut finite_derivs = true;
    for t in grid(horizon) {
        let v = f.value(t);
        if t > 0.0 && !(v > 0.0) {
            positive = false;
        }
        if d1 {
            let dv = f.eval(t, 1)?;
            let ratio = dv.abs() / (1.0 + v);
            if ratio.is_finite() {
                c_est = c_est.max(ratio);
            } else {
                c_est = f64::INFINITY;
            }
        }
        if r <= f.max_derivative_order {
            let j = f.jet(t, r)?;
            if j.coeffs().iter().any(|c| !c.is_finite()) {
                finite_derivs = false;
            }
        }
    }
    let growth = f.growth_bounded() && c_est.is_finite() && d1;
    let in_phi = positive && asym.liminf_positive && growth;
    let smooth = match f.family {
        Family::LinearRamp { .. } => r == 0,
        _ => r <= f.max_derivative_order,
    };
    let in_phi_r = smooth && positive && asym.liminf_positive && asym.bounded && finite_derivs;
    Ok(FunnelClassReport {
        in_phi,
        r,
        in_phi_r,
        lipschitz_constant_estimate: c_est,
        liminf_positive: asym.liminf_positive,
        bounded: asym.bounded,
        positive_on_grid: positive,
        growth_bounded: growth,
        zero_section_infinite: f.zero_section_infinite(),
    })
}

/// Result of [`check_phi2_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Phi2Report {
    pub ok: bool,
    pub delta: f64,
}

/// Grid infimum of `1/φ1 + d/dt(1/φ0)`, the compatibility condition for the PD funnel pair.
pub fn check_phi2_pair(f0: &FunnelFunction, f1: &FunnelFunction, horizon: f64) -> Result<Phi2Report> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    for f in [f0, f1] {
        if f.max_derivative_order < 1 {
            return Err(Error::UnsupportedDerivative {
                order: 1,
                max: f.max_derivative_order,
            });
        }
    }
    let mut delta = f64::INFINITY;
    for t in grid(horizon) {
        let p0 = f0.value(t);
        let dp0 = f0.eval(t, 1)?;
        let p1 = f1.value(t);
        let inv1 = if p1 == 0.0 { f64::INFINITY } else { 1.0 / p1 };
        let dinv0 = if p0 == 0.0 {
            if dp0 > 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        } else {
            -dp0 / (p0 * p0)
        };
        let v = inv1 + dinv0;
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        delta = delta.min(v);
    }
    Ok(Phi2Report {
        ok: delta > 0.0,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ramp_value() {
        let f = FunnelFunction::linear_ramp(0.1, 2.0).unwrap();
        assert!((f.eval(1.0, 0).unwrap() - 5.0).abs() < 1e-15);
        assert!(f.zero_section_infinite());
        assert!(matches!(
            f.eval(1.0, 2),
            Err(Error::UnsupportedDerivative { order: 2, max: 1 })
        ));
    }

    #[test]
    fn exp_decay_at_zero() {
        let f = FunnelFunction::exp_decay(4.0, 2.0, 0.1).unwrap();
        assert!((f.eval(0.0, 0).unwrap() - 1.0 / 4.1).abs() < 1e-15);
        assert!(!f.zero_section_infinite());
    }

    #[test]
    fn constant_has_zero_derivative() {
        let f = FunnelFunction::constant(2.0).unwrap();
        assert_eq!(f.eval(3.7, 1).unwrap(), 0.0);
    }

    #[test]
    fn exp_decay_derivative_closed_form() {
        // φ' = a b e^{-bt} / (a e^{-bt} + c)^2
        let (a, b, c) = (4.0, 2.0, 0.1);
        let f = FunnelFunction::exp_decay(a, b, c).unwrap();
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            let g: f64 = a * (-b * t).exp() + c;
            let d1 = a * b * (-b * t).exp() / (g * g);
            assert!((f.eval(t, 1).unwrap() - d1).abs() < 1e-12 * d1.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_stays_in_family() {
        let f = FunnelFunction::linear_ramp(0.2, 1.0).unwrap();
        let g = f.scaled(2.0).unwrap();
        assert!((g.value(0.5) - 2.0 * f.value(0.5)).abs() < 1e-14);
        let e = FunnelFunction::exp_decay(4.0, 2.0, 0.1).unwrap();
        assert!((e.scaled(3.0).unwrap().value(0.7) - 3.0 * e.value(0.7)).abs() < 1e-12);
    }

    #[test]
    fn class_of_square_and_exp_square() {
        let sq = FunnelFunction::custom(
            CustomExpr::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
            Some(Asymptote {
                liminf_positive: true,
                bounded: false,
            }),
        )
        .unwrap();
        let rep = check_class(&sq, 1, 10.0).unwrap();
        assert!(rep.in_phi);
        assert!(!rep.in_phi_r);

        let ex = FunnelFunction::custom(
            CustomExpr::ExpPolynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
            Some(Asymptote {
                liminf_positive: true,
                bounded: false,
            }),
        )
        .unwrap();
        assert!(!check_class(&ex, 1, 3.0).unwrap().in_phi);
    }

    #[test]
    fn undeclared_custom_is_undecidable() {
        let f = FunnelFunction::custom(CustomExpr::Polynomial { coeffs: vec![1.0] }, None).unwrap();
        assert!(matches!(check_class(&f, 1, 1.0), Err(Error::ClassUndecidable(_))));
    }

    #[test]
    fn constant_in_every_class() {
        let f = FunnelFunction::constant(3.0).unwrap();
        for r in 0..5 {
            let rep = check_class(&f, r, 5.0).unwrap();
            assert!(rep.in_phi && rep.in_phi_r);
        }
    }

    #[test]
    fn phi2_constant_pair() {
        let f = FunnelFunction::constant(2.0).unwrap();
        let rep = check_phi2_pair(&f, &f, 10.0).unwrap();
        assert!(rep.ok);
        assert!((rep.delta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let f = FunnelFunction::exp_decay(4.0, 2.0, 0.1).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: FunnelFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let bad = r#"{"family":"constant_reciprocal","c":1.0,"extra":2}"#;
        assert!(serde_json::from_str::<FunnelFunction>(bad).is_err());
    }
}
