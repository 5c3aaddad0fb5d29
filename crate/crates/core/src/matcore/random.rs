//! Seeded random instance generation.
//!
//! Every randomized routine derives its generator from `(seed, stream)` so that
//! independent tasks never share state and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::eig::{cdot, cnorm};
use super::matrix::{c64, ComplexMatrix, C64};
use crate::seqnorms::MatrixSeq;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for the k-th member of a suite derived from `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Complex standard normal: E|z|² = 1.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with R's diagonal made positive.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        // modified Gram-Schmidt; the implied R has positive diagonal
        for _ in 0..2 {
            for q in &cols {
                let c = cdot(q, &v);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= y * c;
                }
            }
        }
        let r = cnorm(&v);
        cols.push(v.iter().map(|z| z / r).collect());
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        u.set_column(j, c);
    }
    u
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    /// i.i.d. complex standard normal entries.
    Ginibre,
    /// (G + G*)/2 for Ginibre G.
    Hermitian,
    /// Diagonal with complex standard normal entries.
    Diagonal,
    /// u v* with complex standard normal vectors.
    RankOne,
}

impl std::str::FromStr for InstanceFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ginibre" => Ok(Self::Ginibre),
            "hermitian" => Ok(Self::Hermitian),
            "diagonal" => Ok(Self::Diagonal),
            "rank_one" => Ok(Self::RankOne),
            other => Err(format!("unknown instance family `{other}`")),
        }
    }
}

/// A reproducible sequence of `len` n×n matrices. Item k is drawn from stream k of `seed`.
pub fn random_instance(seed: u64, n: usize, len: usize, family: InstanceFamily) -> MatrixSeq {
    assert!(n >= 1 && len >= 1, "random_instance needs n ≥ 1 and N ≥ 1");
    let items = (0..len)
        .map(|k| {
            let mut rng = rng_for(seed, k as u64);
            match family {
                InstanceFamily::Ginibre => ginibre(&mut rng, n, n),
                InstanceFamily::Hermitian => ginibre(&mut rng, n, n).hermitian_part(),
                InstanceFamily::Diagonal => {
                    let d: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
                    ComplexMatrix::from_diag(&d)
                }
                InstanceFamily::RankOne => {
                    let u = ginibre(&mut rng, n, 1);
                    let v = ginibre(&mut rng, n, 1);
                    u.mul_adj(&v)
                }
            }
        })
        .collect();
    MatrixSeq::new(items).expect("generated items share a shape")
}
