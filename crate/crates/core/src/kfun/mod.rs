//! K-functional machinery: certified K_t brackets, projection functionals, the
//! (θ,q) quadrature and single-matrix closed forms.

mod curve;
mod projection;
mod upper;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::{conjugate, extended_real, StepFunction};

pub use curve::{build_curve, fmt17, log_grid, theta_q_norm, KCurve, KSample};
pub(crate) use curve::theta_q_parts;
pub use projection::{
    kt_generalized_lower, kt_projection_lower, kt_projection_nested, weak_type_generalized,
    weak_type_norm, BasisFamily, Nesting, ProjectionPair, ProjectionTable, SearchStrategy,
};
pub use upper::{endpoint0_norm, kt_solve, kt_upper, KPair, WarmStart};

/// Interpolation parameters θ, q together with the endpoint exponents p0, p1 of the
/// generalized row/column couple (p0 = p1 = ∞ for the plain one).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThetaQ")]
pub struct ThetaQ {
    pub theta: f64,
    #[serde(with = "extended_real")]
    pub q: f64,
    #[serde(with = "extended_real", default = "infinity")]
    pub p0: f64,
    #[serde(with = "extended_real", default = "infinity")]
    pub p1: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThetaQ {
    theta: f64,
    #[serde(with = "extended_real")]
    q: f64,
    #[serde(with = "extended_real", default = "infinity")]
    p0: f64,
    #[serde(with = "extended_real", default = "infinity")]
    p1: f64,
}

impl TryFrom<RawThetaQ> for ThetaQ {
    type Error = Error;

    fn try_from(r: RawThetaQ) -> Result<Self> {
        ThetaQ::generalized(r.theta, r.q, r.p0, r.p1)
    }
}

fn infinity() -> f64 {
    f64::INFINITY
}

impl ThetaQ {
    pub fn new(theta: f64, q: f64) -> Result<Self> {
        ThetaQ::generalized(theta, q, f64::INFINITY, f64::INFINITY)
    }

    pub fn generalized(theta: f64, q: f64, p0: f64, p1: f64) -> Result<Self> {
        let e = ThetaQ { theta, q, p0, p1 };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidExponent(format!("θ = {} must lie in (0, 1)", self.theta)));
        }
        if self.q.is_nan() || self.q < 1.0 {
            return Err(Error::InvalidExponent(format!("q = {} must lie in [1, ∞]", self.q)));
        }
        for p in [self.p0, self.p1] {
            if p.is_nan() || p <= 2.0 {
                return Err(Error::InvalidExponent(format!("endpoint exponent {p} must lie in (2, ∞]")));
            }
        }
        Ok(())
    }

    /// p = 1/θ.
    pub fn p(&self) -> f64 {
        1.0 / self.theta
    }

    /// 1/p_θ = (1−θ)/p0 + θ/p1.
    pub fn p_theta(&self) -> f64 {
        1.0 / ((1.0 - self.theta) / self.p0 + self.theta / self.p1)
    }

    /// α0 = 1/2 − 1/p0.
    pub fn alpha0(&self) -> f64 {
        0.5 - 1.0 / self.p0
    }

    /// α1 = 1/2 − 1/p1.
    pub fn alpha1(&self) -> f64 {
        0.5 - 1.0 / self.p1
    }

    /// r = p1'/θ.
    pub fn r(&self) -> f64 {
        conjugate(self.p1) / self.theta
    }

    /// s = p0 / (1 − θ + θ p0), i.e. 1/s = (1−θ)/p0 + θ.
    pub fn s(&self) -> f64 {
        if self.p0.is_infinite() {
            1.0 / self.theta
        } else {
            self.p0 / (1.0 - self.theta + self.theta * self.p0)
        }
    }

    pub fn s_conjugate(&self) -> f64 {
        conjugate(self.s())
    }
}

/// Which classical couple `classical_kt` evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalPair {
    /// K_t(f; L_1, L_∞) = ∫_0^t f*.
    L1Linf,
    /// K_t(f; L_2, L_∞) ≍ (∫_0^{t²} (f*)²)^{1/2}.
    L2Linf,
}

/// Closed-form single-function K-functional expressions on a rearrangement.
pub fn classical_kt(f: &StepFunction, t: f64, pair: ClassicalPair) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive")));
    }
    Ok(match pair {
        ClassicalPair::L1Linf => f.integral_to(t),
        ClassicalPair::L2Linf => f.power_integral_to(t * t, 2.0).sqrt(),
    })
}

/// K_t(A; S_∞, S_1) = t ∫_0^{1/t} s*(A), from the exchange K_t(x; X, Y) = t K_{1/t}(x; Y, X).
pub fn classical_kt_inf_one(f: &StepFunction, t: f64) -> Result<f64> {
    Ok(t * classical_kt(f, 1.0 / t, ClassicalPair::L1Linf)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_arithmetic() {
        let e = ThetaQ::generalized(0.3, 2.0, 4.0, 6.0).unwrap();
        assert!((1.0 / e.s() - ((1.0 - 0.3) / 4.0 + 0.3)).abs() < 1e-15);
        assert!((e.r() - (6.0 / 5.0) / 0.3).abs() < 1e-14);
        assert!((e.alpha0() - 0.25).abs() < 1e-15);
        let inf = ThetaQ::new(0.4, 1.0).unwrap();
        assert_eq!(inf.alpha0(), 0.5);
        assert!((inf.r() - 2.5).abs() < 1e-15 && (inf.s() - 2.5).abs() < 1e-15);
        // at p0 = p1 = ∞ the weak-type exponents are θ and 1 − θ
        assert!((1.0 / inf.r() - 0.4).abs() < 1e-15);
        assert!((1.0 / inf.s_conjugate() - 0.6).abs() < 1e-15);
        assert!(ThetaQ::new(1.0, 1.0).is_err());
        assert!(ThetaQ::generalized(0.5, 1.0, 2.0, 3.0).is_err());
        let j: ThetaQ = serde_json::from_str(r#"{"theta":0.5,"q":"inf"}"#).unwrap();
        assert!(j.q.is_infinite() && j.p0.is_infinite());
    }

    #[test]
    fn classical_examples() {
        let f = StepFunction::from_pairs([(3.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!((classical_kt(&f, 1.5, ClassicalPair::L1Linf).unwrap() - 3.5).abs() < 1e-15);
        assert_eq!(classical_kt(&f, 10.0, ClassicalPair::L1Linf).unwrap(), 4.0);
        assert!((classical_kt(&f, 10.0, ClassicalPair::L2Linf).unwrap() - 10f64.sqrt()).abs() < 1e-15);
        let small = classical_kt(&f, 1e-6, ClassicalPair::L1Linf).unwrap();
        assert!((small / 1e-6 - 3.0).abs() < 1e-9);
        assert!((classical_kt_inf_one(&f, 2.0).unwrap() - 3.0).abs() < 1e-15);
    }
}
