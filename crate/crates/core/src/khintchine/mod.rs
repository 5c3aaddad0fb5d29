//! Rademacher averages, mixed Lorentz norms, the (A0, A1) interpolation norm and
//! their free (GUE) counterparts.

mod free;
mod study;

pub use free::{
    divergence_study, free_norm, free_s_numbers, free_sum, gue_sample, ks_distance,
    semicircle_cdf, semicircle_ks, DivergenceRow, MAX_FREE_DIM,
};
pub use study::{ratio_study, Functional, RatioReport, RatioRow, RatioSummary, StudySettings};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kfun::{build_curve, log_grid, theta_q_norm, theta_q_parts, KCurve, KPair, KSample, ThetaQ};
use crate::lorentz::{from_sorted_levels, lorentz_norm, merge, Exponents};
use crate::matcore::{rng_for, singular_values, ComplexMatrix};
use crate::seqnorms::spectral::{norming_dual, Block, Layout, Program, SolveOptions, Term};
use crate::seqnorms::{
    col_norm, col_s_numbers, row_norm, row_s_numbers, sum_norm_unchecked, MatrixSeq,
    DEFAULT_REL_GAP,
};

/// Largest N for exact enumeration of sign patterns.
pub const MAX_EXACT_TERMS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern {
    signs: Vec<i8>,
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;
    fn try_from(signs: Vec<i8>) -> Result<Self> {
        SignPattern::new(signs)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(p: SignPattern) -> Self {
        p.signs
    }
}

impl SignPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::InvalidParameter(format!("sign entries must be ±1, got {s}")));
        }
        Ok(SignPattern { signs })
    }

    /// The pattern with ε_1 = +1 and ε_{k+1} = −1 exactly when bit k of `mask` is set.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        let signs = (0..len)
            .map(|k| if k > 0 && mask >> (k - 1) & 1 == 1 { -1 } else { 1 })
            .collect();
        SignPattern { signs }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let signs = (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        SignPattern { signs }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Σ ε_n x_n.
    pub fn apply(&self, x: &MatrixSeq) -> ComplexMatrix {
        assert_eq!(self.signs.len(), x.len(), "pattern length must match the sequence");
        let (r, c) = x.shape();
        let mut out = ComplexMatrix::zeros(r, c);
        for (s, a) in self.signs.iter().zip(x.items()) {
            out.axpy(f64::from(*s), a);
        }
        out
    }
}

/// How sign averages are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SignMode {
    /// All 2^N patterns, using ε → −ε symmetry to visit 2^{N−1} of them.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignEstimate {
    pub mean: f64,
    /// Standard error of the mean; 0 in exact mode.
    pub std_err: f64,
    pub patterns: usize,
}

/// Singular values of Σ ε_n x_n for each visited pattern, and the probability weight of
/// each pattern.
pub(crate) fn pattern_spectra(x: &MatrixSeq, mode: SignMode) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = x.len();
    match mode {
        SignMode::Exact => {
            if n > MAX_EXACT_TERMS {
                return Err(Error::TooManyTerms(n));
            }
            let count = 1u64 << (n - 1);
            let spectra = (0..count)
                .map(|m| singular_values(&SignPattern::from_mask(n, m).apply(x)))
                .collect::<Result<Vec<_>>>()?;
            Ok((spectra, 1.0 / count as f64))
        }
        SignMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
            }
            let mut rng = rng_for(seed, 0);
            let spectra = (0..samples)
                .map(|_| singular_values(&SignPattern::random(&mut rng, n).apply(x)))
                .collect::<Result<Vec<_>>>()?;
            Ok((spectra, 1.0 / samples as f64))
        }
    }
}

fn average(values: &[f64]) -> SignEstimate {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    SignEstimate {
        mean,
        std_err: (var / k).sqrt(),
        patterns: values.len(),
    }
}

pub(crate) fn sign_average_from(spectra: &[Vec<f64>], e: Exponents, exact: bool) -> Result<SignEstimate> {
    let norms = spectra
        .iter()
        .map(|s| lorentz_norm(&from_sorted_levels(s, 1.0), e))
        .collect::<Result<Vec<_>>>()?;
    let mut est = average(&norms);
    if exact {
        est.std_err = 0.0;
    }
    Ok(est)
}

pub(crate) fn mixed_from(spectra: &[Vec<f64>], weight: f64, e: Exponents) -> Result<f64> {
    let parts: Vec<_> = spectra.iter().map(|s| from_sorted_levels(s, weight)).collect();
    lorentz_norm(&merge(&parts), e)
}

/// E‖Σ ε_n x_n‖_{S_{p,q}} over independent uniform signs.
pub fn sign_average(x: &MatrixSeq, e: Exponents, mode: SignMode) -> Result<SignEstimate> {
    let (spectra, _) = pattern_spectra(x, mode)?;
    sign_average_from(&spectra, e, mode == SignMode::Exact)
}

/// ‖Σ ε_n ⊗ x_n‖ in L_{p,q}(μ × tr): the s-numbers of every pattern, each carrying the
/// pattern's probability, merged into one rearrangement.
pub fn mixed_lorentz_norm(x: &MatrixSeq, e: Exponents, mode: SignMode) -> Result<f64> {
    let (spectra, w) = pattern_spectra(x, mode)?;
    mixed_from(&spectra, w, e)
}

/// Exact ‖Σ ε_n x_n‖_{L_∞(μ)} for real scalars x_n: the best signs align every term.
pub fn rademacher_sup_scalar(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

const INTERP_POINTS: usize = 41;
const TAIL_TARGET: f64 = 0.01;
const MAX_EXTENSIONS: usize = 8;

fn interp_theta_q(e: Exponents) -> Result<Option<ThetaQ>> {
    if e.p == 1.0 && e.q == 1.0 {
        return Ok(None);
    }
    if !(e.p > 1.0 && e.p.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "interpolation norm needs 1 < p < ∞ (or p = q = 1), got p = {}",
            e.p
        )));
    }
    Ok(Some(ThetaQ::new(1.0 / e.p, e.q)?))
}

/// Samples K_t(x; A0, A1) around the crossover ‖x‖_{A0}/‖x‖_{A1}, widening the grid
/// until the tails are below 1% of the (θ,q) integral for every exponent in `exps`.
pub fn interp_curve(x: &MatrixSeq, exps: &[Exponents], budget: usize) -> Result<KCurve> {
    let tqs: Vec<ThetaQ> = exps
        .iter()
        .map(|&e| interp_theta_q(e))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if x.is_zero() {
        return KCurve::new(vec![KSample { t: 1.0, lower: 0.0, upper: 0.0 }]);
    }
    let tr = Exponents::trace_class();
    let a0 = crate::seqnorms::intersect_norm(x, Exponents::operator())?;
    let a1 = row_norm(x, tr)?.min(col_norm(x, tr)?);
    let center = a0 / a1;
    let (mut lo, mut hi) = (center / 100.0, center * 100.0);
    let mut curve = build_curve(x, KPair::A0a1, &log_grid(lo, hi, INTERP_POINTS), budget, DEFAULT_REL_GAP, None)?;
    for _ in 0..MAX_EXTENSIONS {
        let worst = tqs
            .iter()
            .map(|tq| {
                let (_, _, tail, main) = theta_q_parts(&curve, tq);
                tail / main
            })
            .fold(0.0, f64::max);
        if !(worst > TAIL_TARGET) {
            break;
        }
        let left = build_curve(x, KPair::A0a1, &log_grid(lo / 10.0, lo, 11)[..10], budget, DEFAULT_REL_GAP, None)?;
        let right = build_curve(x, KPair::A0a1, &log_grid(hi, hi * 10.0, 11)[1..], budget, DEFAULT_REL_GAP, None)?;
        let mut samples = left.samples().to_vec();
        samples.extend_from_slice(curve.samples());
        samples.extend_from_slice(right.samples());
        curve = KCurve::new(samples)?;
        lo /= 10.0;
        hi *= 10.0;
    }
    Ok(curve)
}

/// Bracket on |||x|||_{p,q} = ‖x‖_{(A0,A1)_{1/p,q}} from a curve made by [`interp_curve`].
/// At p = q = 1 the norm is that of A1 and `curve` is ignored.
pub fn interp_norm_from_curve(
    x: &MatrixSeq,
    curve: &KCurve,
    e: Exponents,
    budget: usize,
) -> Result<(f64, f64)> {
    match interp_theta_q(e)? {
        Some(tq) => theta_q_norm(curve, &tq),
        None => {
            let s = sum_norm_unchecked(x, Exponents::trace_class(), budget, 1e-6)?;
            Ok((s.lower, s.cost))
        }
    }
}

/// Bracket on |||x|||_{p,q} for 1 < p < ∞ (and the endpoint p = q = 1, where it is ‖x‖_{A1}).
pub fn interp_norm(x: &MatrixSeq, e: Exponents, budget: usize) -> Result<(f64, f64)> {
    let curve = match interp_theta_q(e)? {
        Some(_) => interp_curve(x, &[e], budget)?,
        None => KCurve::new(vec![KSample { t: 1.0, lower: 0.0, upper: 0.0 }])?,
    };
    interp_norm_from_curve(x, &curve, e, budget)
}

/// For the couple (X^r_2 ∩ X^c_2, X^r_∞ ∩ X^c_∞): returns
/// (max of the row and column (∫_0^{t²} s*²)^{1/2}, best upper bound on K_t found).
/// The first entry is a lower bound on K_t.
pub fn rc_l2_linf_bracket(x: &MatrixSeq, t: f64, budget: usize) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t = {t} must be positive and finite")));
    }
    let one_sided = |f: crate::lorentz::StepFunction| f.power_integral_to(t * t, 2.0).sqrt();
    let lower = one_sided(row_s_numbers(x)?).max(one_sided(col_s_numbers(x)?));
    if x.is_zero() {
        return Ok((0.0, 0.0));
    }
    // ‖·‖_{ℓ2(S2)} pooled over the row and column block counts the same mass twice
    let prog = Program::new(
        1,
        x,
        vec![
            Term::new(
                std::f64::consts::FRAC_1_SQRT_2,
                2.0,
                vec![
                    Block::new(Layout::Row, vec![1.0], None),
                    Block::new(Layout::Col, vec![1.0], None),
                ],
            ),
            Term::new(
                t,
                f64::INFINITY,
                vec![
                    Block::new(Layout::Row, vec![-1.0], Some(x.clone())),
                    Block::new(Layout::Col, vec![-1.0], Some(x.clone())),
                ],
            ),
        ],
    );
    let zero = x.scale(0.0);
    let init = [vec![x.clone()], vec![zero]]
        .into_iter()
        .map(|v| prog.objective(&v).map(|c| (c, v)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, v)| v)
        .unwrap();
    let mut seeds = Vec::new();
    for r in [2.0, f64::INFINITY] {
        let dr = norming_dual(x, Layout::Row, r)?;
        let dc = norming_dual(x, Layout::Col, r)?;
        seeds.push(vec![vec![dr.clone(), dc.clone()], vec![dr, dc]]);
    }
    let sol = prog.solve(
        init,
        &seeds,
        SolveOptions {
            budget,
            rel_gap: DEFAULT_REL_GAP,
            ..SolveOptions::default()
        },
    )?;
    Ok((lower, sol.cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kfun::classical_kt_inf_one;
    use crate::lorentz::s_numbers;
    use crate::matcore::{random_instance, InstanceFamily};

    fn units() -> MatrixSeq {
        MatrixSeq::new(vec![ComplexMatrix::unit(2, 2, 0, 0), ComplexMatrix::unit(2, 2, 0, 1)]).unwrap()
    }

    #[test]
    fn hand_examples() {
        let x = units();
        let e22 = Exponents::schatten(2.0).unwrap();
        let avg = sign_average(&x, e22, SignMode::Exact).unwrap();
        assert!((avg.mean - 2f64.sqrt()).abs() < 1e-14 && avg.patterns == 2);
        assert!((mixed_lorentz_norm(&x, e22, SignMode::Exact).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let weak = Exponents::new(2.0, f64::INFINITY).unwrap();
        assert!((mixed_lorentz_norm(&x, weak, SignMode::Exact).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn single_term_is_the_norm() {
        let x = random_instance(3, 4, 1, InstanceFamily::Ginibre);
        let e = Exponents::new(3.0, 2.0).unwrap();
        let want = lorentz_norm(&s_numbers(&x.items()[0], 1.0).unwrap(), e).unwrap();
        let got = sign_average(&x, e, SignMode::Exact).unwrap().mean;
        assert!((got - want).abs() < 1e-13 * want);
    }

    #[test]
    fn too_many_terms() {
        let x = random_instance(3, 1, 17, InstanceFamily::Ginibre);
        assert!(matches!(
            sign_average(&x, Exponents::trace_class(), SignMode::Exact),
            Err(Error::TooManyTerms(17))
        ));
    }

    #[test]
    fn patterns() {
        assert_eq!(SignPattern::from_mask(3, 0b10).signs(), &[1, 1, -1]);
        assert!(SignPattern::new(vec![1, 0]).is_err());
        let p: SignPattern = serde_json::from_str("[1,-1]").unwrap();
        assert_eq!(p.signs(), &[1, -1]);
    }

    #[test]
    fn scalar_sup_matches_enumeration() {
        let xs = [0.3, -1.2, 2.0, 0.7];
        let x = MatrixSeq::new(
            xs.iter().map(|&v| ComplexMatrix::from_real(1, 1, &[v]).unwrap()).collect(),
        )
        .unwrap();
        let sup = mixed_lorentz_norm(&x, Exponents::operator(), SignMode::Exact).unwrap();
        assert!((sup - rademacher_sup_scalar(&xs)).abs() < 1e-12);
    }

    #[test]
    fn interp_single_matrix_matches_classical() {
        let x = random_instance(8, 4, 1, InstanceFamily::Ginibre);
        let f = s_numbers(&x.items()[0], 1.0).unwrap();
        let e = Exponents::new(2.0, 2.0).unwrap();
        let (lo, up) = interp_norm(&x, e, 2000).unwrap();
        // reference: the same quadrature on the closed-form curve
        let curve = interp_curve(&x, &[e], 2000).unwrap();
        let ts: Vec<f64> = curve.samples().iter().map(|s| s.t).collect();
        let exact = KCurve::exact(&ts, |t| classical_kt_inf_one(&f, t).unwrap()).unwrap();
        let (rl, ru) = theta_q_norm(&exact, &ThetaQ::new(0.5, 2.0).unwrap()).unwrap();
        let mid = 0.5 * (rl + ru);
        assert!(lo <= mid * 1.05 && up >= mid * 0.95, "[{lo}, {up}] vs {mid}");
    }

    #[test]
    fn interp_rejects_endpoints() {
        let x = units();
        assert!(interp_norm(&x, Exponents::operator(), 10).is_err());
        assert!(interp_norm(&x, Exponents::new(1.0, 2.0).unwrap(), 10).is_err());
        let (lo, up) = interp_norm(&x, Exponents::trace_class(), 2000).unwrap();
        assert!(lo <= up && up <= 2f64.sqrt() + 1e-8 && lo >= 1.0 - 1e-8);
    }

    #[test]
    fn l2_linf_bracket_is_ordered() {
        let x = random_instance(4, 3, 3, InstanceFamily::Ginibre);
        for t in [0.5, 1.0, 2.0] {
            let (lo, up) = rc_l2_linf_bracket(&x, t, 1000).unwrap();
            assert!(lo <= up * (1.0 + 1e-9), "t={t}: {lo} > {up}");
        }
    }
}
