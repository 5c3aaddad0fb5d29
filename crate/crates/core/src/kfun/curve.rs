//! Sampled K-functional brackets and the (θ,q) quadrature on them.
//!
//! Between samples the true K_t is only known to be nondecreasing with K_t/t
//! nonincreasing, so on [t_i, t_{i+1}]
//!
//! ```text
//! max(L_i, L_{i+1} t/t_{i+1}) ≤ K_t ≤ min(U_{i+1}, U_i t/t_i)
//! ```
//!
//! and the same two facts bound the tails outside the grid. Both envelopes integrate
//! in closed form against t^{−θq} dt/t, so the returned bracket is rigorous given
//! rigorous samples.

use serde::{Deserialize, Serialize};

use super::projection::ProjectionTable;
use super::upper::{kt_solve, KPair, WarmStart};
use super::ThetaQ;
use crate::error::{Error, Result};
use crate::seqnorms::MatrixSeq;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KCurve {
    samples: Vec<KSample>,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

impl KCurve {
    pub fn new(samples: Vec<KSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("a K-curve needs at least one sample".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t > 0.0 && s.t.is_finite() && s.lower.is_finite() && s.upper.is_finite()) {
                return Err(Error::InvalidParameter(format!("sample {i} is not finite and positive")));
            }
            if s.lower > s.upper {
                return Err(Error::InvalidParameter(format!(
                    "sample {i}: lower {} exceeds upper {}",
                    s.lower, s.upper
                )));
            }
            if i > 0 && samples[i - 1].t >= s.t {
                return Err(Error::InvalidParameter("t must be strictly increasing".into()));
            }
        }
        Ok(KCurve { samples })
    }

    /// Curve with lower = upper = k(t).
    pub fn exact(ts: &[f64], k: impl Fn(f64) -> f64) -> Result<Self> {
        KCurve::new(
            ts.iter()
                .map(|&t| KSample {
                    t,
                    lower: k(t),
                    upper: k(t),
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[KSample] {
        &self.samples
    }

    pub fn scaled(&self, c: f64) -> KCurve {
        KCurve {
            samples: self
                .samples
                .iter()
                .map(|s| KSample {
                    t: s.t,
                    lower: s.lower * c,
                    upper: s.upper * c,
                })
                .collect(),
        }
    }

    /// Sharpens the bounds using only monotonicity of K_t and of K_t/t.
    pub fn tightened(&self) -> KCurve {
        let mut s = self.samples.clone();
        let n = s.len();
        for i in 1..n {
            let r = s[i].t / s[i - 1].t;
            s[i].lower = s[i].lower.max(s[i - 1].lower);
            s[i].upper = s[i].upper.min(s[i - 1].upper * r);
        }
        for i in (0..n - 1).rev() {
            let r = s[i].t / s[i + 1].t;
            s[i].upper = s[i].upper.min(s[i + 1].upper);
            s[i].lower = s[i].lower.max(s[i + 1].lower * r);
        }
        KCurve { samples: s }
    }

    /// Checks that some nondecreasing concave function fits between the bounds: every
    /// chord of the lower samples stays below the upper sample it spans (relative slack).
    pub fn check_shape(&self, slack: f64) -> std::result::Result<(), String> {
        let s = &self.samples;
        for k in 0..s.len() {
            for i in 0..k {
                if s[i].lower > s[k].upper * (1.0 + slack) + slack {
                    return Err(format!("lower at t={} exceeds upper at t={}", s[i].t, s[k].t));
                }
                for j in k + 1..s.len() {
                    let w = (s[k].t - s[i].t) / (s[j].t - s[i].t);
                    let chord = s[i].lower * (1.0 - w) + s[j].lower * w;
                    if chord > s[k].upper * (1.0 + slack) + slack {
                        return Err(format!("concavity violated at t={}", s[k].t));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "lower", "upper"])?;
        for s in &self.samples {
            wr.write_record([fmt17(s.t), fmt17(s.lower), fmt17(s.upper)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// cq · ∫_a^b t^{e−1} dt.
fn integral_power(cq: f64, a: f64, b: f64, e: f64) -> f64 {
    cq * (b.powf(e) - a.powf(e)) / e
}

struct Quad {
    theta: f64,
    q: f64,
}

impl Quad {
    /// ∫_a^b (c t^{−θ})^q dt/t.
    fn constant(&self, c: f64, a: f64, b: f64) -> f64 {
        if c == 0.0 || b <= a {
            return 0.0;
        }
        integral_power(c.powf(self.q), a, b, -self.theta * self.q)
    }

    /// ∫_a^b (s t^{1−θ})^q dt/t.
    fn linear(&self, s: f64, a: f64, b: f64) -> f64 {
        if s == 0.0 || b <= a {
            return 0.0;
        }
        integral_power(s.powf(self.q), a, b, (1.0 - self.theta) * self.q)
    }
}

/// Bracket on (∫_0^∞ (t^{−θ}K_t)^q dt/t)^{1/q} (sup for q = ∞) from a sampled curve.
///
/// Fails with `InsufficientGrid` when the tails beyond the grid exceed 10% of the
/// integral over the grid.
pub fn theta_q_norm(curve: &KCurve, e: &ThetaQ) -> Result<(f64, f64)> {
    let (lower, upper, tail, main) = theta_q_parts(curve, e);
    if tail > 0.1 * main {
        return Err(Error::InsufficientGrid { tail, main });
    }
    // the two envelopes are summed in different orders; keep roundoff from inverting them
    Ok((lower.min(upper), upper))
}

/// (lower, upper, upper tail mass, upper main mass); the masses are q-th powers.
pub(crate) fn theta_q_parts(curve: &KCurve, e: &ThetaQ) -> (f64, f64, f64, f64) {
    let c = curve.tightened();
    let s = c.samples();
    let theta = e.theta;
    let first = s[0];
    let last = s[s.len() - 1];
    if e.q.is_infinite() {
        let lower = s.iter().map(|x| x.t.powf(-theta) * x.lower).fold(0.0, f64::max);
        let mut upper = first.t.powf(-theta) * first.upper;
        for w in s.windows(2) {
            let (a, b) = (w[0], w[1]);
            let ts = if a.upper > 0.0 {
                (a.t * b.upper / a.upper).clamp(a.t, b.t)
            } else {
                b.t
            };
            let u = b.upper.min(a.upper * ts / a.t);
            upper = upper.max(ts.powf(-theta) * u);
        }
        upper = upper.max(last.t.powf(-theta) * last.upper);
        return (lower, upper, 0.0, upper);
    }
    let quad = Quad { theta, q: e.q };
    let mut lo_main = 0.0;
    let mut up_main = 0.0;
    for w in s.windows(2) {
        let (a, b) = (w[0], w[1]);
        // lower envelope: constant L_i, then through the origin with slope L_{i+1}/t_{i+1}
        let tl = if b.lower > 0.0 {
            (b.t * a.lower / b.lower).clamp(a.t, b.t)
        } else {
            b.t
        };
        lo_main += quad.constant(a.lower, a.t, tl) + quad.linear(b.lower / b.t, tl, b.t);
        // upper envelope: slope U_i/t_i through the origin, then constant U_{i+1}
        let tu = if a.upper > 0.0 {
            (a.t * b.upper / a.upper).clamp(a.t, b.t)
        } else {
            b.t
        };
        up_main += quad.linear(a.upper / a.t, a.t, tu) + quad.constant(b.upper, tu, b.t);
    }
    let left = |v: f64| quad.linear(v / first.t, 0.0, first.t);
    let right = |v: f64| v.powf(e.q) * last.t.powf(-theta * e.q) / (theta * e.q);
    let lo_tail = left(first.lower) + right(last.lower);
    let up_tail = left(first.upper) + right(last.upper);
    (
        (lo_main + lo_tail).powf(1.0 / e.q),
        (up_main + up_tail).powf(1.0 / e.q),
        up_tail,
        up_main,
    )
}

/// Samples a K-curve on the grid `ts` (increasing), warm-starting each solve from the
/// previous one. For the row/column couple the projection functional from `table`, when
/// given, also serves as a lower bound.
pub fn build_curve(
    a: &MatrixSeq,
    pair: KPair,
    ts: &[f64],
    budget: usize,
    rel_gap: f64,
    table: Option<&ProjectionTable>,
) -> Result<KCurve> {
    let mut warm: Option<WarmStart> = None;
    let mut samples = Vec::with_capacity(ts.len());
    for &t in ts {
        let (split, w) = kt_solve(a, t, pair, budget, rel_gap, warm.as_ref())?;
        let mut lower = split.lower;
        if let (KPair::Rc, Some(tab)) = (pair, table) {
            lower = lower.max(tab.k_t(t).0);
        }
        samples.push(KSample {
            t,
            lower: lower.min(split.cost),
            upper: split.cost,
        });
        warm = Some(w);
    }
    KCurve::new(samples)
}
