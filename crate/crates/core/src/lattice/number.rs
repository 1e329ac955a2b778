//! Exact numbers over a declared irrationality basis.
//!
//! A value `x = q_1 * b_1 + ... + q_m * b_m` is stored by its rational
//! coordinates `q`. The basis elements `b_2, ..., b_m` are declared linearly
//! independent over the rationals together with `b_1 = 1`; that declaration is
//! trusted. Under it, `x == 0` iff every coordinate is zero, so questions such
//! as "is there a rational relation among these frequencies" become exact
//! integer linear algebra.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::LatticeError;

/// The declared basis `1 = b_1, b_2, ..., b_m` with decimal values used only
/// when a magnitude has to be computed in floating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrrationalityBasis {
    names: Vec<String>,
    values: Vec<f64>,
}

impl IrrationalityBasis {
    /// The basis `{1}`: every number is rational.
    pub fn rational() -> Self {
        Self {
            names: vec!["1".to_string()],
            values: vec![1.0],
        }
    }

    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, LatticeError> {
        if names.is_empty() || names.len() != values.len() {
            return Err(LatticeError::Basis(format!(
                "basis needs matching non-empty names and values (got {} names, {} values)",
                names.len(),
                values.len()
            )));
        }
        if values[0] != 1.0 {
            return Err(LatticeError::Basis(format!(
                "the first basis element must be 1, got {}",
                values[0]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(LatticeError::Basis(format!("non-finite basis value {v}")));
        }
        Ok(Self { names, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// An exact real number written in rational coordinates over an
/// [`IrrationalityBasis`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisNumber {
    coeffs: Vec<BigRational>,
}

impl BasisNumber {
    pub fn new(coeffs: Vec<BigRational>) -> Result<Self, LatticeError> {
        if coeffs.is_empty() {
            return Err(LatticeError::Basis(
                "a basis number needs at least one coordinate".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![BigRational::zero(); dim.max(1)],
        }
    }

    /// The rational number `num/den` embedded in a basis of dimension `dim`.
    pub fn rational(num: i64, den: i64, dim: usize) -> Self {
        let mut x = Self::zero(dim);
        x.coeffs[0] = BigRational::new(num.into(), den.into());
        x
    }

    pub fn integer(value: i64, dim: usize) -> Self {
        Self::rational(value, 1, dim)
    }

    /// Parses coordinates such as `["3", "-1/2"]`.
    pub fn parse<S: AsRef<str>>(coords: &[S]) -> Result<Self, LatticeError> {
        let coeffs = coords
            .iter()
            .map(|s| parse_rational(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Rational value when the number has no irrational part.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    pub fn scale_int(&self, k: i64) -> Self {
        let k = BigRational::from_integer(BigInt::from(k));
        Self {
            coeffs: self.coeffs.iter().map(|q| q * &k).collect(),
        }
    }

    pub fn to_f64(&self, basis: &IrrationalityBasis) -> f64 {
        debug_assert_eq!(self.dim(), basis.dim());
        self.coeffs
            .iter()
            .zip(basis.values())
            .map(|(q, b)| q.to_f64().unwrap_or(f64::NAN) * b)
            .sum()
    }

    /// Coordinates as strings, `"p"` or `"p/q"`.
    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(rational_to_string).collect()
    }

    fn check_dim(&self, other: &Self) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "basis numbers over different bases cannot be combined"
        );
    }
}

impl Add for &BasisNumber {
    type Output = BasisNumber;
    fn add(self, rhs: &BasisNumber) -> BasisNumber {
        self.check_dim(rhs);
        BasisNumber {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &BasisNumber {
    type Output = BasisNumber;
    fn sub(self, rhs: &BasisNumber) -> BasisNumber {
        self + &(-rhs)
    }
}

impl Neg for &BasisNumber {
    type Output = BasisNumber;
    fn neg(self) -> BasisNumber {
        BasisNumber {
            coeffs: self.coeffs.iter().map(|q| -q).collect(),
        }
    }
}

impl Mul<&BigRational> for &BasisNumber {
    type Output = BasisNumber;
    fn mul(self, rhs: &BigRational) -> BasisNumber {
        BasisNumber {
            coeffs: self.coeffs.iter().map(|q| q * rhs).collect(),
        }
    }
}

impl fmt::Display for BasisNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_strings().join(", "))
    }
}

impl Serialize for BasisNumber {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisNumber {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let coords = Vec::<String>::deserialize(d)?;
        BasisNumber::parse(&coords).map_err(serde::de::Error::custom)
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational, LatticeError> {
    let s = s.trim();
    let bad = || LatticeError::Parse(format!("not a rational number: {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}

pub fn rational_to_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact dot product of an integer vector with a vector of basis numbers.
pub fn int_dot(alpha: &[i64], xs: &[BasisNumber]) -> BasisNumber {
    assert_eq!(alpha.len(), xs.len());
    let dim = xs.first().map_or(1, BasisNumber::dim);
    let mut acc = BasisNumber::zero(dim);
    for (a, x) in alpha.iter().zip(xs) {
        if *a != 0 {
            acc = &acc + &x.scale_int(*a);
        }
    }
    acc
}

/// The frequency vector `(w_1, ..., w_n)` of a linear flow on the n-torus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<BasisNumber>", into = "Vec<BasisNumber>")]
pub struct FrequencyVector {
    entries: Vec<BasisNumber>,
}

impl FrequencyVector {
    pub fn new(entries: Vec<BasisNumber>) -> Result<Self, LatticeError> {
        let Some(first) = entries.first() else {
            return Err(LatticeError::Dimension("frequency vector is empty".into()));
        };
        let m = first.dim();
        if entries.iter().any(|e| e.dim() != m) {
            return Err(LatticeError::Dimension(
                "frequency entries use different basis dimensions".into(),
            ));
        }
        if entries.iter().all(BasisNumber::is_zero) {
            return Err(LatticeError::ZeroFrequency);
        }
        Ok(Self { entries })
    }

    /// Rational frequencies given as `(numerator, denominator)` pairs.
    pub fn from_rationals(values: &[(i64, i64)]) -> Result<Self, LatticeError> {
        Self::new(
            values
                .iter()
                .map(|&(p, q)| BasisNumber::rational(p, q, 1))
                .collect(),
        )
    }

    pub fn from_integers(values: &[i64]) -> Result<Self, LatticeError> {
        Self::new(values.iter().map(|&p| BasisNumber::integer(p, 1)).collect())
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn basis_dim(&self) -> usize {
        self.entries[0].dim()
    }

    pub fn entries(&self) -> &[BasisNumber] {
        &self.entries
    }

    pub fn dot(&self, alpha: &[i64]) -> BasisNumber {
        int_dot(alpha, &self.entries)
    }

    pub fn to_f64(&self, basis: &IrrationalityBasis) -> Vec<f64> {
        self.entries.iter().map(|e| e.to_f64(basis)).collect()
    }
}

impl TryFrom<Vec<BasisNumber>> for FrequencyVector {
    type Error = LatticeError;
    fn try_from(v: Vec<BasisNumber>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FrequencyVector> for Vec<BasisNumber> {
    fn from(f: FrequencyVector) -> Self {
        f.entries
    }
}

/// Clears denominators row by row: returns integer rows spanning the same
/// rational row space as `rows`.
pub(crate) fn integer_rows(rows: &[Vec<BigRational>]) -> Result<Vec<Vec<i64>>, LatticeError> {
    rows.iter()
        .map(|row| {
            let lcm = row
                .iter()
                .fold(BigInt::one(), |acc, q| num::integer::lcm(acc, q.denom().clone()));
            row.iter()
                .map(|q| {
                    let v = q.numer() * (&lcm / q.denom());
                    v.to_i64().ok_or(LatticeError::Overflow)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let x = BasisNumber::parse(&["3", "-4/6"]).unwrap();
        assert_eq!(x.to_strings(), vec!["3", "-2/3"]);
        assert!(BasisNumber::parse(&["1/0"]).is_err());
        assert!(BasisNumber::parse(&["x"]).is_err());
    }

    #[test]
    fn equality_is_coordinatewise() {
        let a = BasisNumber::parse(&["1", "1"]).unwrap();
        let b = BasisNumber::parse(&["2/2", "3/3"]).unwrap();
        assert_eq!(a, b);
        assert!((&a - &b).is_zero());
    }

    #[test]
    fn float_conversion_uses_declared_values() {
        let basis =
            IrrationalityBasis::new(vec!["1".into(), "sqrt2".into()], vec![1.0, 2f64.sqrt()])
                .unwrap();
        let x = BasisNumber::parse(&["3", "2"]).unwrap();
        assert!((x.to_f64(&basis) - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn basis_must_start_with_one() {
        assert!(IrrationalityBasis::new(vec!["pi".into()], vec![3.14]).is_err());
    }

    #[test]
    fn zero_frequency_rejected() {
        assert!(matches!(
            FrequencyVector::from_integers(&[0, 0]),
            Err(LatticeError::ZeroFrequency)
        ));
    }

    #[test]
    fn clearing_denominators() {
        let rows = vec![vec![
            BigRational::new(1.into(), 2.into()),
            BigRational::new(1.into(), 3.into()),
        ]];
        assert_eq!(integer_rows(&rows).unwrap(), vec![vec![3, 2]]);
    }
}
