//! Finitely supported trigonometric polynomials on `T^d = R^d / Z^d`.
//!
//! `u(x) = sum_a c_a exp(2 pi i a.x)`. Characters are orthonormal, so the
//! `L^2(T^d)` norm is the `l^2` norm of the coefficients. Coefficients are
//! kept in a `BTreeMap` keyed by frequency, which fixes iteration order and
//! makes every derived quantity deterministic.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num::complex::Complex64;
use num::Zero;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrigError {
    #[error("frequency {alpha:?} has length {got}, expected {expected}")]
    Dimension {
        alpha: Vec<i64>,
        got: usize,
        expected: usize,
    },
    #[error("non-finite coefficient at {0:?}")]
    NonFinite(Vec<i64>),
    #[error("cannot infer the dimension of an empty coefficient list")]
    UnknownDimension,
}

/// One serialized coefficient: `{"alpha": [..], "re": .., "im": ..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub alpha: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    dim: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl TrigPolynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Sums duplicate frequencies and drops exact zeros.
    pub fn from_terms<I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut p = Self::zero(dim);
        for (a, c) in terms {
            assert_eq!(a.len(), dim, "frequency length mismatch");
            p.add_term(a, c);
        }
        p
    }

    pub fn try_from_json_terms(dim: usize, terms: &[TrigTerm]) -> Result<Self, TrigError> {
        let mut p = Self::zero(dim);
        for t in terms {
            if t.alpha.len() != dim {
                return Err(TrigError::Dimension {
                    alpha: t.alpha.clone(),
                    got: t.alpha.len(),
                    expected: dim,
                });
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(TrigError::NonFinite(t.alpha.clone()));
            }
            p.add_term(t.alpha.clone(), Complex64::new(t.re, t.im));
        }
        Ok(p)
    }

    /// Parses a JSON-style term list, taking the dimension from the first
    /// term.
    pub fn try_from_terms_infer(terms: &[TrigTerm]) -> Result<Self, TrigError> {
        let dim = terms.first().ok_or(TrigError::UnknownDimension)?.alpha.len();
        Self::try_from_json_terms(dim, terms)
    }

    pub fn to_json_terms(&self) -> Vec<TrigTerm> {
        self.coeffs
            .iter()
            .map(|(a, c)| TrigTerm {
                alpha: a.clone(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::from_terms(dim, [(vec![0; dim], c)])
    }

    pub fn character(alpha: &[i64]) -> Self {
        Self::from_terms(alpha.len(), [(alpha.to_vec(), Complex64::new(1.0, 0.0))])
    }

    /// `cos(2 pi a.x)`.
    pub fn cosine(alpha: &[i64]) -> Self {
        let neg: Vec<i64> = alpha.iter().map(|x| -x).collect();
        let half = Complex64::new(0.5, 0.0);
        Self::from_terms(alpha.len(), [(alpha.to_vec(), half), (neg, half)])
    }

    fn add_term(&mut self, a: Vec<i64>, c: Complex64) {
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(a) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if !c.is_zero() {
                    e.insert(c);
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, alpha: &[i64]) -> Complex64 {
        self.coeffs.get(alpha).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.coeffs.keys()
    }

    /// `max |a|_inf` over the support (0 for the zero polynomial).
    pub fn radius(&self) -> i64 {
        self.coeffs
            .keys()
            .flat_map(|a| a.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(Complex64::norm_sqr).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `<self, other> = integral self * conj(other)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .filter_map(|(a, c)| other.coeffs.get(a).map(|d| c * d.conj()))
            .sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.dim, self.coeffs.iter().map(|(a, c)| (a.clone(), c * s)))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Unit-norm copy; `None` for the zero polynomial.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.l2_norm();
        (n > 0.0).then(|| self.scale_real(1.0 / n))
    }

    /// Applies the Fourier multiplier `a -> m(a)`.
    pub fn multiplier<F>(&self, mut m: F) -> Self
    where
        F: FnMut(&[i64]) -> Complex64,
    {
        Self::from_terms(
            self.dim,
            self.coeffs.iter().map(|(a, c)| (a.clone(), c * m(a))),
        )
    }

    /// Drops coefficients with modulus below `tol`.
    pub fn truncated(&self, tol: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| c.norm() >= tol)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self::from_terms(
            self.dim,
            self.coeffs
                .iter()
                .map(|(a, c)| (a.iter().map(|x| -x).collect(), c.conj())),
        )
    }

    /// Whether `c(-a) = conj(c(a))` within `tol`, i.e. the function is real.
    pub fn is_real_valued(&self, tol: f64) -> bool {
        (self - &self.conj()).max_coeff() <= tol
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        self.coeffs
            .iter()
            .map(|(a, c)| {
                let phase: f64 = a.iter().zip(x).map(|(&ai, xi)| ai as f64 * xi).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    }

    /// Values on the uniform grid `x = i / g`, `i in {0..g-1}^d`, row-major
    /// with the first axis slowest. Exact up to rounding: coefficients are
    /// folded modulo `g` before the inverse transform.
    pub fn sample_grid(&self, g: usize) -> Vec<Complex64> {
        let mut data = vec![Complex64::zero(); g.pow(self.dim as u32)];
        for (a, c) in &self.coeffs {
            data[grid_index(a, g)] += c;
        }
        fft_nd(&mut data, g, self.dim, Direction::Inverse);
        data
    }

    /// Coefficients of the trigonometric interpolant of grid `values`, with
    /// frequencies taken in `[-g/2, g/2)` per axis, dropping moduli below
    /// `tol`.
    pub fn from_grid(values: &[Complex64], g: usize, dim: usize, tol: f64) -> Self {
        assert_eq!(values.len(), g.pow(dim as u32), "grid size mismatch");
        let mut data = values.to_vec();
        fft_nd(&mut data, g, dim, Direction::Forward);
        let scale = 1.0 / values.len() as f64;
        let half = (g / 2) as i64;
        let g_i = g as i64;
        let terms = data.into_iter().enumerate().filter_map(|(idx, c)| {
            let c = c * scale;
            if c.norm() < tol {
                return None;
            }
            let mut rem = idx;
            let mut alpha = vec![0i64; dim];
            for k in (0..dim).rev() {
                let i = (rem % g) as i64;
                rem /= g;
                alpha[k] = if i >= g_i - half && i >= half { i - g_i } else { i };
            }
            Some((alpha, c))
        });
        Self::from_terms(dim, terms)
    }

    /// Lifts a polynomial on a coordinate factor into `dim` variables through
    /// an arbitrary frequency map.
    pub fn relabel<F>(&self, dim: usize, mut f: F) -> Self
    where
        F: FnMut(&[i64]) -> Vec<i64>,
    {
        Self::from_terms(dim, self.coeffs.iter().map(|(a, c)| (f(a), *c)))
    }
}

impl Add for &TrigPolynomial {
    type Output = TrigPolynomial;
    fn add(self, rhs: &TrigPolynomial) -> TrigPolynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = self.clone();
        for (a, c) in &rhs.coeffs {
            out.add_term(a.clone(), *c);
        }
        out
    }
}

impl Sub for &TrigPolynomial {
    type Output = TrigPolynomial;
    fn sub(self, rhs: &TrigPolynomial) -> TrigPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &TrigPolynomial {
    type Output = TrigPolynomial;
    fn neg(self) -> TrigPolynomial {
        self.scale_real(-1.0)
    }
}

/// Pointwise product: exact discrete convolution of the coefficient maps.
impl Mul for &TrigPolynomial {
    type Output = TrigPolynomial;
    fn mul(self, rhs: &TrigPolynomial) -> TrigPolynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut acc: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (a, c) in &self.coeffs {
            for (b, d) in &rhs.coeffs {
                let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *acc.entry(s).or_insert_with(Complex64::zero) += c * d;
            }
        }
        acc.retain(|_, v| !v.is_zero());
        TrigPolynomial {
            dim: self.dim,
            coeffs: acc,
        }
    }
}

impl Serialize for TrigPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json_terms().serialize(s)
    }
}

fn grid_index(alpha: &[i64], g: usize) -> usize {
    alpha
        .iter()
        .fold(0usize, |idx, &a| idx * g + a.rem_euclid(g as i64) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `X_k = sum_n x_n exp(-2 pi i k n / g)`
    Forward,
    /// `x_n = sum_k X_k exp(+2 pi i k n / g)` (unnormalized)
    Inverse,
}

/// In-place unnormalized d-dimensional DFT on a row-major `g^d` array.
pub fn fft_nd(data: &mut [Complex64], g: usize, dim: usize, dir: Direction) {
    if dim == 0 || g <= 1 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(g),
        Direction::Inverse => planner.plan_fft_inverse(g),
    };
    let total = data.len();
    let mut line = vec![Complex64::zero(); g];
    for axis in 0..dim {
        let stride = g.pow((dim - 1 - axis) as u32);
        for start in 0..total {
            // visit each line once: its first element has axis index 0
            if (start / stride) % g != 0 {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                data[start + i * stride] = *l;
            }
        }
    }
}

/// Grid point `i / g` for a row-major flat index.
pub fn grid_point(idx: usize, g: usize, dim: usize) -> Vec<f64> {
    let mut rem = idx;
    let mut x = vec![0.0; dim];
    for k in (0..dim).rev() {
        x[k] = (rem % g) as f64 / g as f64;
        rem /= g;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parseval_and_inner() {
        let p = TrigPolynomial::from_terms(2, [(vec![1, 0], c(3.0, 0.0)), (vec![0, -2], c(0.0, 4.0))]);
        assert!((p.l2_norm() - 5.0).abs() < 1e-15);
        assert!((p.inner(&p).re - 25.0).abs() < 1e-13);
    }

    #[test]
    fn product_is_convolution() {
        let cos = TrigPolynomial::cosine(&[1]);
        let sq = &cos * &cos;
        // cos^2 = 1/2 + cos(2x)/2
        assert!((sq.coeff(&[0]) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((sq.coeff(&[2]) - c(0.25, 0.0)).norm() < 1e-15);
        assert_eq!(sq.len(), 3);
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = TrigPolynomial::character(&[3]);
        assert!((&p - &p).is_empty());
    }

    #[test]
    fn grid_round_trip() {
        let p = TrigPolynomial::from_terms(
            2,
            [
                (vec![0, 0], c(2.0, 0.0)),
                (vec![-3, 1], c(0.5, -0.25)),
                (vec![2, 5], c(-1.0, 0.0)),
            ],
        );
        let g = 16;
        let vals = p.sample_grid(g);
        for idx in [0, 7, 100, 255] {
            let x = grid_point(idx, g, 2);
            assert!((vals[idx] - p.eval(&x)).norm() < 1e-12);
        }
        let back = TrigPolynomial::from_grid(&vals, g, 2, 1e-14);
        assert!((&back - &p).max_coeff() < 1e-14);
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn zero_dimensional_polynomials() {
        let p = TrigPolynomial::constant(0, c(2.0, 0.0));
        assert_eq!(p.sample_grid(8), vec![c(2.0, 0.0)]);
        assert_eq!(p.eval(&[]), c(2.0, 0.0));
        assert!((p.l2_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn real_valued_check() {
        assert!(TrigPolynomial::cosine(&[1, 2]).is_real_valued(0.0));
        assert!(!TrigPolynomial::character(&[1]).is_real_valued(1e-12));
    }

    #[test]
    fn json_terms() {
        let p = TrigPolynomial::from_terms(1, [(vec![-1], c(0.5, 0.0)), (vec![1], c(0.5, 0.0))]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"[{"alpha":[-1],"re":0.5,"im":0.0},{"alpha":[1],"re":0.5,"im":0.0}]"#
        );
        let terms: Vec<TrigTerm> = serde_json::from_str(&s).unwrap();
        assert_eq!(TrigPolynomial::try_from_terms_infer(&terms).unwrap(), p);
        let bad = vec![TrigTerm { alpha: vec![1, 2], re: 1.0, im: 0.0 }];
        assert!(TrigPolynomial::try_from_json_terms(1, &bad).is_err());
    }
}
