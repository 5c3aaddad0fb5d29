//! Decreasing rearrangements as step functions and the Lorentz/Schatten norms on them.
//!
//! A [`StepFunction`] stores f* as pairs (value, measure) with strictly decreasing
//! values. The Lorentz norm uses the rearrangement-integral definition
//!
//! ```text
//! ‖f‖_{p,q} = ( ∫_0^∞ (s^{1/p} f*(s))^q ds/s )^{1/q},   ‖f‖_{p,∞} = sup_s s^{1/p} f*(s)
//! ```
//!
//! which is evaluated in closed form step by step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{singular_values, ComplexMatrix};

/// Relative tolerance under which adjacent levels are merged.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFile", into = "StepFile")]
pub struct StepFunction {
    values: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepFile {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<StepFile> for StepFunction {
    type Error = Error;
    fn try_from(f: StepFile) -> Result<Self> {
        StepFunction::new(f.values, f.weights)
    }
}

impl From<StepFunction> for StepFile {
    fn from(s: StepFunction) -> Self {
        StepFile {
            values: s.values,
            weights: s.weights,
        }
    }
}

impl StepFunction {
    /// Builds f* from arbitrary (value, weight) pairs: sorts, merges equal levels and
    /// drops zero-weight pieces.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (x, w) in pairs {
            if !x.is_finite() || !w.is_finite() || x < 0.0 || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "step ({x}, {w}) must have finite nonnegative value and weight"
                )));
            }
            if w > 0.0 {
                v.push((x, w));
            }
        }
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out = StepFunction::default();
        for (x, w) in v {
            out.push_merged(x, w);
        }
        Ok(out)
    }

    /// Validating constructor: values strictly decreasing, weights positive.
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        for (k, (&x, &w)) in values.iter().zip(&weights).enumerate() {
            if !(x.is_finite() && x >= 0.0 && w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("bad step {k}: ({x}, {w})")));
            }
            if k > 0 && values[k - 1] <= x {
                return Err(Error::InvalidParameter(
                    "step values must be strictly decreasing".into(),
                ));
            }
        }
        Ok(StepFunction { values, weights })
    }

    fn push_merged(&mut self, x: f64, w: f64) {
        if let Some(last) = self.values.last() {
            if *last - x <= MERGE_TOL * last.abs() {
                *self.weights.last_mut().unwrap() += w;
                return;
            }
        }
        self.values.push(x);
        self.weights.push(w);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// f*(0), the largest value (0 for the empty function).
    pub fn sup(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, c: f64) -> StepFunction {
        assert!(c >= 0.0 && c.is_finite());
        if c == 0.0 {
            let mut out = StepFunction::default();
            if !self.is_empty() {
                out.push_merged(0.0, self.total_measure());
            }
            return out;
        }
        StepFunction {
            values: self.values.iter().map(|v| v * c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// f*(s) for s ≥ 0 (right-continuous convention is irrelevant for integrals).
    pub fn value_at(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.steps() {
            acc += w;
            if s < acc {
                return v;
            }
        }
        0.0
    }

    /// ∫_0^u (f*)^r ds for r > 0.
    pub fn power_integral_to(&self, u: f64, r: f64) -> f64 {
        let mut acc = 0.0;
        let mut left = 0.0;
        for (v, w) in self.steps() {
            if left >= u {
                break;
            }
            let len = w.min(u - left);
            acc += v.powf(r) * len;
            left += w;
        }
        acc
    }

    /// ∫_0^u f*(s) ds.
    pub fn integral_to(&self, u: f64) -> f64 {
        self.power_integral_to(u, 1.0)
    }
}

/// Exponent pair (p, q) with p ∈ (0, ∞], q ∈ [1, ∞]; infinity is `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExponents")]
pub struct Exponents {
    #[serde(with = "extended_real")]
    pub p: f64,
    #[serde(with = "extended_real")]
    pub q: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    #[serde(with = "extended_real")]
    p: f64,
    #[serde(with = "extended_real")]
    q: f64,
}

impl TryFrom<RawExponents> for Exponents {
    type Error = Error;

    fn try_from(r: RawExponents) -> Result<Self> {
        Exponents::new(r.p, r.q)
    }
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if p.is_nan() || p <= 0.0 {
            return Err(Error::InvalidExponent(format!("p = {p} must lie in (0, ∞]")));
        }
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(format!("q = {q} must lie in [1, ∞]")));
        }
        Ok(Exponents { p, q })
    }

    /// Schatten exponent (p, p).
    pub fn schatten(p: f64) -> Result<Self> {
        Exponents::new(p, p.max(1.0))
    }

    pub fn operator() -> Self {
        Exponents {
            p: f64::INFINITY,
            q: f64::INFINITY,
        }
    }

    pub fn trace_class() -> Self {
        Exponents { p: 1.0, q: 1.0 }
    }

    pub fn is_schatten(&self) -> bool {
        self.p == self.q
    }

    /// Conjugate exponent of p (requires p ≥ 1; 1' = ∞, ∞' = 1).
    pub fn p_conjugate(&self) -> f64 {
        conjugate(self.p)
    }
}

/// Conjugate exponent r' with 1/r + 1/r' = 1, for r ∈ [1, ∞].
pub fn conjugate(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// Serde helper accepting numbers or the strings "inf"/"infinity"/"∞".
pub mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
            },
        }
    }
}

/// Singular values of `a`, each carrying measure `trace_weight`, as a step function.
pub fn s_numbers(a: &ComplexMatrix, trace_weight: f64) -> Result<StepFunction> {
    if !(trace_weight > 0.0 && trace_weight.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "trace weight {trace_weight} must be positive"
        )));
    }
    let sv = singular_values(a)?;
    Ok(from_sorted_levels(&sv, trace_weight))
}

/// Levels sorted descending, each of measure `weight`.
pub(crate) fn from_sorted_levels(levels: &[f64], weight: f64) -> StepFunction {
    let mut out = StepFunction::default();
    for &x in levels {
        out.push_merged(x.max(0.0), weight);
    }
    out
}

/// Decreasing rearrangement of a disjoint union of step functions.
pub fn merge(parts: &[StepFunction]) -> StepFunction {
    let mut all: Vec<(f64, f64)> = parts.iter().flat_map(|p| p.steps()).collect();
    // stable order within equal values keeps the result independent of float summation order
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let mut out = StepFunction::default();
    for (x, w) in all {
        out.push_merged(x, w);
    }
    out
}

/// Lorentz L_{p,q} norm of f*, exact for step functions.
pub fn lorentz_norm(f: &StepFunction, e: Exponents) -> Result<f64> {
    let (p, q) = (e.p, e.q);
    if p.is_infinite() {
        if q.is_infinite() {
            return Ok(f.sup());
        }
        return Err(Error::DivergentNorm);
    }
    if q.is_infinite() {
        let mut s = 0.0;
        let mut best: f64 = 0.0;
        for (v, w) in f.steps() {
            s += w;
            best = best.max(v * s.powf(1.0 / p));
        }
        return Ok(best);
    }
    if p == q {
        // ∫ f*^p ds directly, avoiding differences of powers
        let total: f64 = f.steps().map(|(v, w)| v.powf(p) * w).sum();
        return Ok(total.powf(1.0 / p));
    }
    let r = q / p;
    let mut prev: f64 = 0.0;
    let mut s = 0.0;
    let mut total = 0.0;
    for (v, w) in f.steps() {
        s += w;
        let cur = s.powf(r);
        total += v.powf(q) * (cur - prev);
        prev = cur;
    }
    Ok((total / r).powf(1.0 / q))
}

/// sup_{u>0} u^{-1/p'} ∫_0^u f*, the averaged weak-L_p functional, for p > 1.
pub fn weak_bracket_norm(f: &StepFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidExponent(format!("weak bracket needs p > 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.sup());
    }
    let gamma = 1.0 / conjugate(p);
    let h = |u: f64, integral: f64| integral * u.powf(-gamma);
    let mut best: f64 = 0.0;
    let mut s_prev = 0.0;
    let mut c_prev = 0.0;
    for (v, w) in f.steps() {
        let s = s_prev + w;
        let c = c_prev + v * w;
        best = best.max(h(s, c));
        // on this step ∫_0^u f* = a + v u; the stationary point u = a(p−1)/v
        let a = c_prev - v * s_prev;
        if v > 0.0 {
            let u = a * (p - 1.0) / v;
            if u > s_prev && u < s {
                best = best.max(h(u, a + v * u));
            }
        }
        s_prev = s;
        c_prev = c;
    }
    Ok(best)
}
