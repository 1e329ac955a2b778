//! Quasimode families and the analysis run on them.

mod decompose;
mod factory;
mod family;
pub mod fit;
mod galerkin;
mod maslov;
mod verify;

use std::path::Path;

use thiserror::Error;

use crate::lattice::LatticeError;
use crate::operator::OperatorError;
use crate::trig::TrigError;

pub use decompose::{decompose_along_t, lift_mode, zero_mode, ModeDecomposition};
pub use factory::{
    build_factory_quasimode, FactoryOutput, FactoryTemplate, NONVANISHING_MARGIN, R0_TRUNCATION,
};
pub use family::{QuasimodeFamily, NORM_TOL};
pub use fit::{dyadic_ladder, fit_decay_exponent, fit_log_decay, DecayFit};
pub use galerkin::{
    effective_radius, frequency_box, galerkin_matrix, galerkin_nullspace, solve_on_range,
    unique_continuation_constant, BoxDomain, GalerkinNullspace, RangeSolution,
    UniqueContinuation, DEFAULT_NULL_TOL, MIN_TRUNCATION,
};
pub use maslov::maslov_admissible;
pub use verify::{
    check_mode_concentration, verify_quasimode_order, ConcentrationReport, ModeFit,
    OrderReport, EXACT_KERNEL_TOL, FIT_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum QuasimodeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("decay fit: {0}")]
    Fit(String),
    #[error("h ladder: {0}")]
    Ladder(String),
    #[error("family member has zero norm")]
    ZeroMember,
    #[error("profile v is not real-valued (imaginary part {0:e})")]
    NonRealProfile(f64),
    #[error("profile v vanishes or nearly vanishes: min |v| = {min:e}, max |v| = {max:e}")]
    VanishingProfile { min: f64, max: f64 },
    #[error("derived multiplier is not real-valued (imaginary part {0:e})")]
    NonRealPotential(f64),
    #[error("alpha0 is not resonant for the given c")]
    NotResonant,
    #[error("transversal block is not positive definite (min eigenvalue {0:e})")]
    NotElliptic(f64),
    #[error("truncation radius {got} too small, need at least {needed}")]
    Truncation { got: usize, needed: usize },
    #[error("nullspace is empty")]
    EmptyNullspace,
    #[error("subdomain: {0}")]
    Domain(String),
    #[error("h must be positive")]
    NonPositiveH,
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trig(#[from] TrigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl QuasimodeError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}
