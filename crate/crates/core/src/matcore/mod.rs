//! Dense complex linear algebra and seeded instance generation.

mod eig;
mod matrix;
mod random;
mod svd;

pub use eig::{
    hermitian_eig, hermitian_eigvals, singular_values, tridiagonal_eigenvalues, HermitianEig,
    DEFAULT_HERMITIAN_TOL,
};
pub use matrix::{c64, ComplexMatrix, C64};
pub use random::{
    complex_normal, derive_seed, ginibre, haar_unitary, random_instance, rng_for, InstanceFamily,
};
pub use svd::{psd_sqrt, svd, Svd};
