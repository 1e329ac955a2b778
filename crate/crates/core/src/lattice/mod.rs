//! Exact integer and rational linear algebra for frequency vectors.

mod bigmat;
mod matrix;
mod number;
mod relation;
mod split;

pub use matrix::{ext_gcd, hermite_normal_form, hnf_rank, smith_normal_form, IntMatrix};
pub use number::{
    int_dot, parse_rational, rational_to_string, BasisNumber, FrequencyVector,
    IrrationalityBasis,
};
pub use relation::{integer_kernel, relation_lattice, IntegerLattice};
pub use split::{
    find_resonant_mode, resonance_defect, split_frequencies, UnimodularSplitting,
};

/// Default bound on `|alpha|_inf` for the resonant-mode search.
pub const DEFAULT_RESONANCE_BOX: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("invalid irrationality basis: {0}")]
    Basis(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("frequency vector is identically zero")]
    ZeroFrequency,
    #[error("integer overflow during lattice reduction")]
    Overflow,
    #[error("matrix is not unimodular")]
    NotUnimodular,
    #[error("invariant violated: {0}")]
    Invariant(String),
}
