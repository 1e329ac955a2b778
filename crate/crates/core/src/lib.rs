//! Numerical and exact-arithmetic tools for quasimodes of completely
//! integrable model operators on the n-torus.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: exact frequency vectors, relation lattices, the orbit-closure
//!   splitting `T^n = T x T'` and the resonant-mode search.
//! - [`nondegeneracy`]: the bordered frequency determinant and quasiconvexity.
//! - [`trig`]: finitely supported trigonometric polynomials on `T^n`.
//! - [`operator`]: the model operator and its quadratic form in split
//!   coordinates.
//! - [`quasimode`]: certified quasimode families, mode decompositions, decay
//!   fits, Galerkin nullspaces, unique-continuation constants and the Maslov
//!   congruence.
//! - [`wavefront`]: coherent-state mass maps and nonconcentration verdicts.
//!
//! Conventions: characters are `e_a(x) = exp(2 pi i a.x)` on `R^n / Z^n`, and
//! `D_j e_a = a_j e_a`.

pub mod lattice;
pub mod linalg;
pub mod nondegeneracy;
pub mod operator;
pub mod quasimode;
pub mod trig;
pub mod wavefront;

pub use lattice::{
    relation_lattice, split_frequencies, BasisNumber, FrequencyVector, IntMatrix,
    IntegerLattice, IrrationalityBasis, LatticeError, UnimodularSplitting,
};
pub use trig::TrigPolynomial;
