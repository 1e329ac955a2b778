//! Isoenergetic nondegeneracy and Nekhoroshev quasiconvexity at a torus.
//!
//! Both conditions are open, so they are decided against scale-relative
//! thresholds: `|det| > TOL_DET * max|B|^(n+1)` for the bordered matrix and
//! `min eig > TOL_PD * max|H|` for the restricted Hessian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{max_abs, orthocomplement, symmetric_eigenvalues};

pub const TOL_DET: f64 = 1e-9;
pub const TOL_PD: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NondegeneracyError {
    #[error("dimension mismatch: hessian is {hessian}x{hessian}, frequency vector has {omega} entries")]
    Dimension { hessian: usize, omega: usize },
    #[error("hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("hessian must be square and non-empty")]
    Shape,
    #[error("frequency vector is zero")]
    ZeroFrequency,
    #[error("non-finite entry")]
    NonFinite,
}

/// Second derivatives `d^2 p / dI_i dI_j` at the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct HessianForm(DMatrix<f64>);

impl HessianForm {
    pub fn new(m: DMatrix<f64>) -> Result<Self, NondegeneracyError> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(NondegeneracyError::Shape);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(NondegeneracyError::NonFinite);
        }
        let scale = max_abs(&m);
        let asym = (&m - m.transpose()).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if asym > SYMMETRY_TOL * scale {
            return Err(NondegeneracyError::NotSymmetric(asym));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NondegeneracyError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(NondegeneracyError::Shape);
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `xi^T H xi`.
    pub fn quadratic(&self, xi: &[f64]) -> f64 {
        let v = DVector::from_column_slice(xi);
        v.dot(&(&self.0 * &v))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for HessianForm {
    type Error = NondegeneracyError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<HessianForm> for Vec<Vec<f64>> {
    fn from(h: HessianForm) -> Self {
        h.to_rows()
    }
}

/// The `(n+1) x (n+1)` matrix `[[H, w], [w^T, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderedMatrix(DMatrix<f64>);

impl BorderedMatrix {
    pub fn new(h: &HessianForm, omega: &[f64]) -> Result<Self, NondegeneracyError> {
        let n = h.n();
        if omega.len() != n {
            return Err(NondegeneracyError::Dimension {
                hessian: n,
                omega: omega.len(),
            });
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(NondegeneracyError::NonFinite);
        }
        let mut b = DMatrix::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(h.matrix());
        for (i, &w) in omega.iter().enumerate() {
            b[(i, n)] = w;
            b[(n, i)] = w;
        }
        Ok(Self(b))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderedDeterminant {
    pub det: f64,
    pub threshold: f64,
    pub nondegenerate: bool,
}

/// Determinant of the bordered frequency matrix and the isoenergetic
/// nondegeneracy verdict.
pub fn bordered_determinant(
    h: &HessianForm,
    omega: &[f64],
) -> Result<BorderedDeterminant, NondegeneracyError> {
    let b = BorderedMatrix::new(h, omega)?;
    let n = h.n();
    let det = b.matrix().clone().determinant();
    let threshold = TOL_DET * max_abs(b.matrix()).powi(n as i32 + 1);
    Ok(BorderedDeterminant {
        det,
        threshold,
        nondegenerate: det.abs() > threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quasiconvexity {
    /// Smallest eigenvalue of `H` restricted to `w^perp` (`+inf` when `n = 1`).
    pub min_eigenvalue: f64,
    pub threshold: f64,
    pub quasiconvex: bool,
}

/// Positive definiteness of `H` on the orthogonal complement of `omega`.
pub fn quasiconvexity(
    h: &HessianForm,
    omega: &[f64],
) -> Result<Quasiconvexity, NondegeneracyError> {
    let n = h.n();
    if omega.len() != n {
        return Err(NondegeneracyError::Dimension {
            hessian: n,
            omega: omega.len(),
        });
    }
    let basis = orthocomplement(omega).ok_or(NondegeneracyError::ZeroFrequency)?;
    let threshold = TOL_PD * max_abs(h.matrix());
    if n == 1 {
        return Ok(Quasiconvexity {
            min_eigenvalue: f64::INFINITY,
            threshold,
            quasiconvex: true,
        });
    }
    let restricted = basis.transpose() * h.matrix() * &basis;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let min_eigenvalue = symmetric_eigenvalues(&restricted)[0];
    Ok(Quasiconvexity {
        min_eigenvalue,
        threshold,
        quasiconvex: min_eigenvalue > threshold,
    })
}

pub fn is_quasiconvex(h: &HessianForm, omega: &[f64]) -> Result<bool, NondegeneracyError> {
    Ok(quasiconvexity(h, omega)?.quasiconvex)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_with_unit_frequency() {
        let r = bordered_determinant(&HessianForm::identity(2), &[1.0, 0.0]).unwrap();
        // cofactor expansion of [[1,0,1],[0,1,0],[1,0,0]] gives -1
        assert!((r.det + 1.0).abs() < 1e-14);
        assert!(r.nondegenerate);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let h = HessianForm::from_rows(&[vec![0.0]]).unwrap();
        let r = bordered_determinant(&h, &[3.0]).unwrap();
        assert!((r.det + 9.0).abs() < 1e-12);
        assert!(r.nondegenerate);
    }

    #[test]
    fn zero_border_is_degenerate() {
        let r = bordered_determinant(&HessianForm::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(r.det, 0.0);
        assert!(!r.nondegenerate);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            bordered_determinant(&HessianForm::identity(2), &[1.0]),
            Err(NondegeneracyError::Dimension { .. })
        ));
    }

    #[test]
    fn quasiconvex_examples() {
        for n in 1..=5 {
            let w: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            assert!(is_quasiconvex(&HessianForm::identity(n), &w).unwrap());
        }
        let saddle = HessianForm::diagonal(&[1.0, -1.0]);
        assert!(!is_quasiconvex(&saddle, &[1.0, 1.0]).unwrap());
        let q = quasiconvexity(&saddle, &[1.0, 0.0]).unwrap();
        assert!((q.min_eigenvalue + 1.0).abs() < 1e-14);
        assert!(!q.quasiconvex);
        assert!(matches!(
            is_quasiconvex(&saddle, &[0.0, 0.0]),
            Err(NondegeneracyError::ZeroFrequency)
        ));
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        assert!(matches!(
            HessianForm::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]),
            Err(NondegeneracyError::NotSymmetric(_))
        ));
    }
}
