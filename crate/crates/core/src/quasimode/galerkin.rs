//! Spectral Galerkin treatment of `L = Q_a + r0` on `T'`.
//!
//! The trial space is spanned by the characters `e_b`, `|b|_inf <= N`. In it
//! `L` is the Hermitian matrix `A[b', b] = sym(b) delta + r0(b' - b)`. Its
//! near-zero eigenvectors approximate the nullspace and its pseudoinverse on
//! the remaining spectrum realizes the partial inverse `G`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use serde::Serialize;

use crate::linalg::hermitian_eigen;
use crate::operator::OperatorOnTPrime;
use crate::trig::TrigPolynomial;

use super::QuasimodeError;

pub const DEFAULT_NULL_TOL: f64 = 1e-8;
pub const MIN_TRUNCATION: usize = 4;
/// Number of smallest-modulus eigenvalues kept in the spectrum report.
const SPECTRUM_REPORT: usize = 8;

/// Near-zero spectrum of a Galerkin truncation, with the eigen-decomposition
/// retained for the pseudoinverse.
#[derive(Clone, Debug, Serialize)]
pub struct GalerkinNullspace {
    pub truncation: usize,
    pub dim: usize,
    pub null_tol: f64,
    /// Operator-norm estimate the matrix was divided by before thresholding.
    pub scale: f64,
    /// Orthonormal nullspace basis.
    pub basis: Vec<TrigPolynomial>,
    /// Retained scaled eigenvalues (`|lambda| < null_tol`).
    pub eigenvalues: Vec<f64>,
    /// Smallest-modulus scaled eigenvalues, retained or not.
    pub near_zero_spectrum: Vec<f64>,
    #[serde(skip)]
    frequencies: Vec<Vec<i64>>,
    #[serde(skip)]
    all_eigenvalues: Vec<f64>,
    #[serde(skip)]
    eigenvectors: DMatrix<Complex64>,
}

impl GalerkinNullspace {
    pub fn nullity(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Index set of the trial space, in matrix order.
    pub fn frequencies(&self) -> &[Vec<i64>] {
        &self.frequencies
    }
}

/// All `b` in `Z^d` with `|b|_inf <= n`, lexicographic.
pub fn frequency_box(d: usize, n: usize) -> Vec<Vec<i64>> {
    let n = n as i64;
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-n..=n).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Galerkin matrix of `op` on the characters of radius `truncation`.
pub fn galerkin_matrix(op: &OperatorOnTPrime, freqs: &[Vec<i64>]) -> DMatrix<Complex64> {
    let m = freqs.len();
    let r0 = &op.zero_mode_multiplier;
    let index: BTreeMap<&[i64], usize> = freqs
        .iter()
        .enumerate()
        .map(|(i, f)| (f.as_slice(), i))
        .collect();
    let mut a = DMatrix::<Complex64>::zeros(m, m);
    for (j, b) in freqs.iter().enumerate() {
        a[(j, j)] += Complex64::new(op.symbol(b), 0.0);
        // column j: r0 * e_b has coefficient r0(s) at b + s
        for (s, c) in r0.iter() {
            let target: Vec<i64> = b.iter().zip(s).map(|(x, y)| x + y).collect();
            if let Some(&i) = index.get(target.as_slice()) {
                a[(i, j)] += c;
            }
        }
    }
    a
}

pub fn galerkin_nullspace(
    op: &OperatorOnTPrime,
    truncation: usize,
    null_tol: f64,
) -> Result<GalerkinNullspace, QuasimodeError> {
    let d = op.dim();
    if d > 0 {
        let min_eig = crate::linalg::symmetric_eigenvalues(&op.omega_block)[0];
        let scale = op.omega_block.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(min_eig > 1e-12 * scale) {
            return Err(QuasimodeError::NotElliptic(min_eig));
        }
    }
    if !op.zero_mode_multiplier.is_real_valued(1e-12 * op.zero_mode_multiplier.max_coeff().max(1.0)) {
        return Err(QuasimodeError::NonRealPotential(
            (&op.zero_mode_multiplier - &op.zero_mode_multiplier.conj()).max_coeff(),
        ));
    }
    if truncation < MIN_TRUNCATION {
        return Err(QuasimodeError::Truncation {
            got: truncation,
            needed: MIN_TRUNCATION,
        });
    }
    let freqs = frequency_box(d, truncation);
    let a = galerkin_matrix(op, &freqs);
    let a = (&a + a.adjoint()).map(|x| x * 0.5);
    // infinity-norm bounds the spectral radius of a Hermitian matrix
    let scale = (0..a.nrows())
        .map(|i| a.row(i).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let needed = effective_radius(&op.zero_mode_multiplier, null_tol * scale) + 2;
    if truncation < needed {
        return Err(QuasimodeError::Truncation {
            got: truncation,
            needed,
        });
    }
    let (values, vectors) = hermitian_eigen(a.map(|x| x / scale));

    let mut basis = Vec::new();
    let mut retained = Vec::new();
    for (i, &lam) in values.iter().enumerate() {
        if lam.abs() < null_tol {
            retained.push(lam);
            basis.push(column_to_poly(&vectors.column(i).into_owned(), &freqs, d));
        }
    }
    let mut by_modulus = values.clone();
    by_modulus.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    by_modulus.truncate(SPECTRUM_REPORT);

    Ok(GalerkinNullspace {
        truncation,
        dim: d,
        null_tol,
        scale,
        basis,
        eigenvalues: retained,
        near_zero_spectrum: by_modulus,
        frequencies: freqs,
        all_eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Smallest `K` such that the coefficients of `r0` outside `|s|_inf <= K`
/// have l1 mass below `tol`. By Young's inequality that tail moves no
/// eigenvalue by more than `tol`.
pub fn effective_radius(r0: &TrigPolynomial, tol: f64) -> usize {
    let mut by_radius: Vec<(i64, f64)> = r0
        .iter()
        .map(|(s, c)| (s.iter().map(|x| x.abs()).max().unwrap_or(0), c.norm()))
        .collect();
    by_radius.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let mut tail = 0.0;
    for (rad, c) in by_radius {
        if tail + c >= tol {
            return rad as usize;
        }
        tail += c;
    }
    0
}

/// Fixes the phase (largest coefficient real positive) and converts an
/// eigenvector to a polynomial.
fn column_to_poly(col: &DVector<Complex64>, freqs: &[Vec<i64>], d: usize) -> TrigPolynomial {
    let pivot = col
        .iter()
        .copied()
        .enumerate()
        .max_by(|(i, x), (j, y)| x.norm().total_cmp(&y.norm()).then(j.cmp(i)))
        .map(|(_, x)| x)
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    TrigPolynomial::from_terms(
        d,
        freqs
            .iter()
            .zip(col.iter())
            .map(|(f, c)| (f.clone(), c * phase)),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct RangeSolution {
    pub w: TrigPolynomial,
    /// Smallest `|lambda|` (scaled) among the inverted eigenvalues.
    pub smallest_inverted: f64,
    pub ill_conditioned: bool,
}

/// Minimal-norm solution `w ⊥ null` of `L w = P g`, `P` the projection onto
/// the orthocomplement of the nullspace.
pub fn solve_on_range(
    op: &OperatorOnTPrime,
    null: &GalerkinNullspace,
    g: &TrigPolynomial,
) -> Result<RangeSolution, QuasimodeError> {
    if op.dim() != null.dim || g.dim() != null.dim {
        return Err(QuasimodeError::Dimension(
            "operator, nullspace and right-hand side disagree on dim T'".into(),
        ));
    }
    if g.radius() as usize > null.truncation {
        return Err(QuasimodeError::Truncation {
            got: null.truncation,
            needed: g.radius() as usize,
        });
    }
    let gv = DVector::from_iterator(
        null.frequencies.len(),
        null.frequencies.iter().map(|f| g.coeff(f)),
    );
    let mut wv = DVector::<Complex64>::zeros(gv.len());
    let mut smallest = f64::INFINITY;
    for (i, &lam) in null.all_eigenvalues.iter().enumerate() {
        if lam.abs() < null.null_tol {
            continue;
        }
        smallest = smallest.min(lam.abs());
        let v = null.eigenvectors.column(i);
        let coeff = v.dotc(&gv) / (lam * null.scale);
        wv.axpy(coeff, &v, Complex64::new(1.0, 0.0));
    }
    let w = TrigPolynomial::from_terms(
        null.dim,
        null.frequencies.iter().cloned().zip(wv.iter().copied()),
    );
    Ok(RangeSolution {
        w,
        smallest_inverted: smallest,
        ill_conditioned: smallest < 1e3 * null.null_tol,
    })
}

/// Axis-aligned box `prod [lower_i, upper_i]` in `T'`.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, QuasimodeError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn whole(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    fn validate(&self) -> Result<(), QuasimodeError> {
        if self.lower.len() != self.upper.len() {
            return Err(QuasimodeError::Domain("bounds of different length".into()));
        }
        for (a, b) in self.lower.iter().zip(&self.upper) {
            if !(a.is_finite() && b.is_finite()) || !(b > a) || b - a > 1.0 {
                return Err(QuasimodeError::Domain(format!(
                    "side [{a}, {b}] must have length in (0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Exact `integral_box e_m(z) dz`.
    pub fn character_integral(&self, m: &[i64]) -> Complex64 {
        m.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&k, (&a, &b))| {
                if k == 0 {
                    Complex64::new(b - a, 0.0)
                } else {
                    let w = 2.0 * PI * k as f64;
                    (Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a))
                        / Complex64::new(0.0, w)
                }
            })
            .product()
    }

    /// `integral_box f`, exact for trigonometric polynomials.
    pub fn integrate(&self, f: &TrigPolynomial) -> Complex64 {
        f.iter().map(|(m, c)| c * self.character_integral(m)).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniqueContinuation {
    /// `min { integral_box |f|^2 : f in null, |f| = 1 }`.
    pub constant: f64,
    /// Coefficients of the minimizer in the nullspace basis.
    pub combination: Vec<(f64, f64)>,
    pub minimizer: TrigPolynomial,
    pub gram: Vec<Vec<(f64, f64)>>,
}

/// Smallest eigenvalue of the Gram matrix `integral_box f_i conj(f_j)` over
/// the orthonormal nullspace basis. The box integrals of characters are
/// evaluated in closed form, so the result is exact for the truncated basis.
pub fn unique_continuation_constant(
    null: &GalerkinNullspace,
    subdomain: &BoxDomain,
) -> Result<UniqueContinuation, QuasimodeError> {
    subdomain.validate()?;
    if null.is_empty() {
        return Err(QuasimodeError::EmptyNullspace);
    }
    if subdomain.dim() != null.dim {
        return Err(QuasimodeError::Dimension(format!(
            "subdomain has dimension {} but T' has {}",
            subdomain.dim(),
            null.dim
        )));
    }
    let p = null.basis.len();
    let mut gram = DMatrix::<Complex64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let prod = &null.basis[i] * &null.basis[j].conj();
            let v = subdomain.integrate(&prod);
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    let (vals, vecs) = hermitian_eigen(gram.clone());
    let coeffs = vecs.column(0).into_owned();
    let mut minimizer = TrigPolynomial::zero(null.dim);
    for (f, c) in null.basis.iter().zip(coeffs.iter()) {
        minimizer = &minimizer + &f.scale(*c);
    }
    Ok(UniqueContinuation {
        constant: vals[0],
        combination: coeffs.iter().map(|c| (c.re, c.im)).collect(),
        minimizer,
        gram: (0..p)
            .map(|i| (0..p).map(|j| (gram[(i, j)].re, gram[(i, j)].im)).collect())
            .collect(),
    })
}
