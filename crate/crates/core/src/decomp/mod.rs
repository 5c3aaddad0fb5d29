//! Constructive decompositions with checkable certificates.

mod layer_cake;
mod schur;

pub use layer_cake::{
    atom_row_col_bound, layer_cake, random_layer_cake_input, reconstruct, RectAtom,
};
pub use schur::{
    schur_split, simultaneous_split_rc, Bound, Observation, SplitCertificate, CERT_REL_TOL,
    DEFAULT_EPS_REL,
};
