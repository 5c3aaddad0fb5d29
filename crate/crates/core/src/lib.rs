//! Numerical tools for real interpolation between row and column spaces of matrix
//! sequences: K-functional brackets, Lorentz–Schatten norms, constructive splittings
//! and Khintchine-type ratio experiments.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod kfun;
pub mod khintchine;
pub mod lorentz;
pub mod matcore;
pub mod seqnorms;

pub use error::{Error, Result};
