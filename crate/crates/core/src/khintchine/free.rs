//! GUE stand-ins for free semicircular families.

use serde::{Deserialize, Serialize};

use super::rademacher_sup_scalar;
use crate::error::{Error, Result};
use crate::lorentz::{from_sorted_levels, lorentz_norm, Exponents, StepFunction};
use crate::matcore::{
    ginibre, hermitian_eigvals, rng_for, singular_values, ComplexMatrix, DEFAULT_HERMITIAN_TOL,
};
use crate::seqnorms::MatrixSeq;

/// Largest matrix dimension formed by [`free_sum`].
pub const MAX_FREE_DIM: usize = 4096;

/// `count` independent GUE(big_n) matrices (G + G*)/√(2·big_n); matrix k uses stream k.
/// Their spectra approach the semicircle law on [−2, 2].
pub fn gue_sample(seed: u64, big_n: usize, count: usize) -> Result<MatrixSeq> {
    if big_n < 2 || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "GUE sample needs dimension ≥ 2 and count ≥ 1, got {big_n} and {count}"
        )));
    }
    let c = 1.0 / (2.0 * big_n as f64).sqrt();
    let items = (0..count)
        .map(|k| {
            let g = ginibre(&mut rng_for(seed, k as u64), big_n, big_n);
            (&g + &g.adjoint()).scale(c)
        })
        .collect();
    MatrixSeq::new(items)
}

/// Σ ξ_k ⊗ x_k with ξ from [`gue_sample`].
pub fn free_sum(x: &MatrixSeq, big_n: usize, seed: u64) -> Result<ComplexMatrix> {
    let (r, c) = x.shape();
    let dim = big_n.saturating_mul(r.max(c));
    if dim > MAX_FREE_DIM {
        return Err(Error::DimensionTooLarge(dim));
    }
    let xi = gue_sample(seed, big_n, x.len())?;
    let mut s = ComplexMatrix::zeros(big_n * r, big_n * c);
    for (g, a) in xi.items().iter().zip(x.items()) {
        s = &s + &g.kron(a);
    }
    Ok(s)
}

/// s-numbers of Σ ξ_k ⊗ x_k under the trace φ ⊗ tr, φ the normalized trace.
pub fn free_s_numbers(x: &MatrixSeq, big_n: usize, seed: u64) -> Result<StepFunction> {
    let s = free_sum(x, big_n, seed)?;
    Ok(from_sorted_levels(&singular_values(&s)?, 1.0 / big_n as f64))
}

/// ‖Σ ξ_k ⊗ x_k‖_{L_{p,q}(φ ⊗ tr)}.
pub fn free_norm(x: &MatrixSeq, e: Exponents, big_n: usize, seed: u64) -> Result<f64> {
    lorentz_norm(&free_s_numbers(x, big_n, seed)?, e)
}

/// Semicircle distribution function on [−2, 2].
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
            + (x / 2.0).asin() / std::f64::consts::PI
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS distance of one GUE(big_n) spectrum to the semicircle law.
pub fn semicircle_ks(seed: u64, big_n: usize) -> Result<f64> {
    let h = gue_sample(seed, big_n, 1)?;
    let eig = hermitian_eigvals(&h.items()[0], DEFAULT_HERMITIAN_TOL)?;
    Ok(ks_distance(&eig, semicircle_cdf))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub terms: usize,
    /// ‖Σ ε_n‖_{L_∞(μ)} = N.
    pub rademacher: f64,
    /// ‖Σ ξ_n‖_op for the GUE family.
    pub free: f64,
    pub ratio: f64,
}

/// The p = ∞ comparison with x_n = 1 for every n: the Rademacher side grows like N
/// while the free side grows like 2√N. The GUE family for N terms extends the one for
/// fewer terms, since matrix k always comes from stream k of `seed`.
pub fn divergence_study(terms: &[usize], big_n: usize, seed: u64) -> Result<Vec<DivergenceRow>> {
    terms
        .iter()
        .map(|&n| {
            let ones = vec![1.0; n];
            let x = MatrixSeq::new(vec![ComplexMatrix::from_real(1, 1, &[1.0])?; n])?;
            let rademacher = rademacher_sup_scalar(&ones);
            let free = free_norm(&x, Exponents::operator(), big_n, seed)?;
            Ok(DivergenceRow {
                terms: n,
                rademacher,
                free,
                ratio: rademacher / free,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::random_instance;
    use crate::matcore::InstanceFamily;

    #[test]
    fn gue_is_hermitian_and_reproducible() {
        let a = gue_sample(5, 8, 2).unwrap();
        for h in a.items() {
            assert!(h.is_hermitian(0.0));
        }
        let b = gue_sample(5, 8, 2).unwrap();
        assert_eq!(a.items()[1], b.items()[1]);
    }

    #[test]
    fn semicircle_cdf_shape() {
        assert_eq!(semicircle_cdf(0.0), 0.5);
        assert!((semicircle_cdf(2.0 - 1e-12) - 1.0).abs() < 1e-6);
        assert!(semicircle_cdf(1.0) > semicircle_cdf(0.5));
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // sample at the mid-quantiles of the uniform law on [0, 1]
        let n = 100;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&s, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn scalar_item_is_one_gue_spectrum() {
        let x = MatrixSeq::single(ComplexMatrix::from_real(1, 1, &[1.0]).unwrap());
        let e = Exponents::new(3.0, 2.0).unwrap();
        let h = gue_sample(11, 16, 1).unwrap();
        let direct = lorentz_norm(&from_sorted_levels(&singular_values(&h.items()[0]).unwrap(), 1.0 / 16.0), e).unwrap();
        assert!((free_norm(&x, e, 16, 11).unwrap() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn homogeneous_in_x() {
        let x = random_instance(2, 3, 2, InstanceFamily::Ginibre);
        let e = Exponents::new(2.0, 4.0).unwrap();
        let a = free_norm(&x, e, 8, 1).unwrap();
        let b = free_norm(&x.scale(2.5), e, 8, 1).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn dimension_limit() {
        let x = random_instance(2, 5, 1, InstanceFamily::Ginibre);
        assert!(matches!(free_sum(&x, 1000, 0), Err(Error::DimensionTooLarge(5000))));
    }
}
