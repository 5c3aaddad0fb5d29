//! Seeded ratio studies between two norm functionals.

use std::cell::OnceCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{interp_curve, interp_norm_from_curve, mixed_from, pattern_spectra, sign_average_from, SignMode};
use crate::error::{Error, Result};
use crate::kfun::{fmt17, KCurve};
use crate::lorentz::{lorentz_norm, Exponents, StepFunction};
use crate::matcore::{derive_seed, random_instance, InstanceFamily};
use crate::seqnorms::{MatrixSeq, DEFAULT_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// E‖Σ ε_n x_n‖_{S_{p,q}}.
    SignAverage,
    /// ‖Σ ε_n ⊗ x_n‖_{L_{p,q}(μ × tr)}.
    MixedLorentz,
    /// Midpoint of the |||x|||_{p,q} bracket.
    InterpMidpoint,
    /// ‖Σ ξ_n ⊗ x_n‖_{L_{p,q}(φ ⊗ tr)} with GUE ξ_n.
    Free,
}

fn default_family() -> InstanceFamily {
    InstanceFamily::Ginibre
}
fn default_big_n() -> usize {
    128
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_mode() -> SignMode {
    SignMode::Exact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    pub left: Functional,
    pub right: Functional,
    #[serde(default = "default_family")]
    pub family: InstanceFamily,
    pub seed: u64,
    /// Number of instances.
    pub count: usize,
    /// Instance k is made of 1 + (k / n_max) mod len_max matrices of size 1 + k mod n_max.
    pub n_max: usize,
    pub len_max: usize,
    pub exponents: Vec<Exponents>,
    #[serde(default = "default_big_n")]
    pub big_n: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_mode")]
    pub sign_mode: SignMode,
}

impl StudySettings {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("no instances".into()));
        }
        if self.n_max == 0 || self.len_max == 0 {
            return Err(Error::InvalidParameter("n_max and len_max must be at least 1".into()));
        }
        if self.exponents.is_empty() {
            return Err(Error::InvalidParameter("no exponents".into()));
        }
        for e in &self.exponents {
            Exponents::new(e.p, e.q)?;
        }
        Ok(())
    }

    pub fn instance_size(&self, k: usize) -> (usize, usize) {
        (1 + k % self.n_max, 1 + (k / self.n_max) % self.len_max)
    }

    pub fn instance(&self, k: usize) -> MatrixSeq {
        let (n, len) = self.instance_size(k);
        random_instance(derive_seed(self.seed, k as u64), n, len, self.family)
    }

    /// Seed of the GUE family used for instance k.
    pub fn free_seed(&self, k: usize) -> u64 {
        derive_seed(derive_seed(self.seed, k as u64), u64::MAX)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub id: usize,
    pub n: usize,
    pub len: usize,
    #[serde(with = "crate::lorentz::extended_real")]
    pub p: f64,
    #[serde(with = "crate::lorentz::extended_real")]
    pub q: f64,
    pub left: f64,
    pub right: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    #[serde(with = "crate::lorentz::extended_real")]
    pub p: f64,
    #[serde(with = "crate::lorentz::extended_real")]
    pub q: f64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub settings: StudySettings,
    pub rows: Vec<RatioRow>,
    pub summary: Vec<RatioSummary>,
}

impl RatioReport {
    /// min and max ratio over all rows.
    pub fn range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.ratio), hi.max(r.ratio))
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["id", "n", "len", "p", "q", "left", "right", "ratio"])?;
        for r in &self.rows {
            out.write_record([
                r.id.to_string(),
                r.n.to_string(),
                r.len.to_string(),
                fmt17(r.p),
                fmt17(r.q),
                fmt17(r.left),
                fmt17(r.right),
                fmt17(r.ratio),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-instance cache so that each expensive object is built once for all exponents.
struct Evaluator<'a> {
    x: MatrixSeq,
    settings: &'a StudySettings,
    free_seed: u64,
    spectra: OnceCell<(Vec<Vec<f64>>, f64)>,
    curve: OnceCell<KCurve>,
    free: OnceCell<StepFunction>,
}

impl Evaluator<'_> {
    fn spectra(&self) -> Result<&(Vec<Vec<f64>>, f64)> {
        if self.spectra.get().is_none() {
            let s = pattern_spectra(&self.x, self.settings.sign_mode)?;
            let _ = self.spectra.set(s);
        }
        Ok(self.spectra.get().unwrap())
    }

    fn curve(&self) -> Result<&KCurve> {
        if self.curve.get().is_none() {
            let interior: Vec<Exponents> = self
                .settings
                .exponents
                .iter()
                .copied()
                .filter(|e| !(e.p == 1.0 && e.q == 1.0))
                .collect();
            let c = interp_curve(&self.x, &interior, self.settings.budget)?;
            let _ = self.curve.set(c);
        }
        Ok(self.curve.get().unwrap())
    }

    fn free(&self) -> Result<&StepFunction> {
        if self.free.get().is_none() {
            let f = super::free_s_numbers(&self.x, self.settings.big_n, self.free_seed)?;
            let _ = self.free.set(f);
        }
        Ok(self.free.get().unwrap())
    }

    fn eval(&self, f: Functional, e: Exponents) -> Result<f64> {
        match f {
            Functional::SignAverage => {
                let (s, _) = self.spectra()?;
                Ok(sign_average_from(s, e, self.settings.sign_mode == SignMode::Exact)?.mean)
            }
            Functional::MixedLorentz => {
                let (s, w) = self.spectra()?;
                mixed_from(s, *w, e)
            }
            Functional::InterpMidpoint => {
                let (lo, up) = interp_norm_from_curve(&self.x, self.curve()?, e, self.settings.budget)?;
                Ok(0.5 * (lo + up))
            }
            Functional::Free => lorentz_norm(self.free()?, e),
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Evaluates both functionals on every instance and exponent. Constants are never
/// asserted here, only recorded. Instances run in parallel; rows come back in
/// (instance, exponent) order regardless of scheduling.
pub fn ratio_study(settings: &StudySettings) -> Result<RatioReport> {
    settings.validate()?;
    let per_instance: Vec<Vec<RatioRow>> = (0..settings.count)
        .into_par_iter()
        .map(|k| {
            let (n, len) = settings.instance_size(k);
            let ev = Evaluator {
                x: settings.instance(k),
                settings,
                free_seed: settings.free_seed(k),
                spectra: OnceCell::new(),
                curve: OnceCell::new(),
                free: OnceCell::new(),
            };
            settings
                .exponents
                .iter()
                .map(|&e| {
                    let left = ev.eval(settings.left, e)?;
                    let right = if settings.right == settings.left {
                        left
                    } else {
                        ev.eval(settings.right, e)?
                    };
                    Ok(RatioRow {
                        id: k,
                        n,
                        len,
                        p: e.p,
                        q: e.q,
                        left,
                        right,
                        ratio: left / right,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<RatioRow> = per_instance.into_iter().flatten().collect();
    let summary = settings
        .exponents
        .iter()
        .map(|e| {
            let mut r: Vec<f64> = rows
                .iter()
                .filter(|row| row.p == e.p && row.q == e.q)
                .map(|row| row.ratio)
                .collect();
            let min = r.iter().copied().fold(f64::INFINITY, f64::min);
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            RatioSummary {
                p: e.p,
                q: e.q,
                count: r.len(),
                min,
                max,
                median: median(&mut r),
            }
        })
        .collect();
    Ok(RatioReport {
        settings: settings.clone(),
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(left: Functional, right: Functional) -> StudySettings {
        StudySettings {
            left,
            right,
            family: InstanceFamily::Ginibre,
            seed: 7,
            count: 4,
            n_max: 2,
            len_max: 3,
            exponents: vec![Exponents::schatten(2.0).unwrap(), Exponents::new(3.0, 2.0).unwrap()],
            big_n: 8,
            budget: 500,
            sign_mode: SignMode::Exact,
        }
    }

    #[test]
    fn identical_functionals_give_unit_ratios() {
        let r = ratio_study(&settings(Functional::SignAverage, Functional::SignAverage)).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.iter().all(|row| row.ratio == 1.0));
    }

    #[test]
    fn fubini_at_p_equals_q() {
        let mut s = settings(Functional::MixedLorentz, Functional::SignAverage);
        s.exponents = vec![Exponents::schatten(1.0).unwrap()];
        let r = ratio_study(&s).unwrap();
        assert!(r.rows.iter().all(|row| (row.ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_suite_is_rejected() {
        let mut s = settings(Functional::Free, Functional::SignAverage);
        s.count = 0;
        assert!(ratio_study(&s).is_err());
    }

    #[test]
    fn csv_is_sorted_and_stable() {
        let s = settings(Functional::Free, Functional::MixedLorentz);
        let mut a = Vec::new();
        let mut b = Vec::new();
        ratio_study(&s).unwrap().write_csv(&mut a).unwrap();
        ratio_study(&s).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("id,n,len,p,q,left,right,ratio\n0,"));
    }
}
