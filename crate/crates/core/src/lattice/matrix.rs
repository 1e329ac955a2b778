//! Dense integer matrices and the two canonical forms used by the lattice
//! code: column Hermite normal form and Smith normal form.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::bigmat::{self, BigMat};
use super::LatticeError;

/// Row-major integer matrix. Entries are `i64`; every arithmetic step is
/// checked and overflow surfaces as [`LatticeError::Overflow`].
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    /// Builds a matrix from rows. Panics on ragged input; use
    /// [`IntMatrix::try_from`] for untrusted data.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        Self::try_from(rows.to_vec()).expect("ragged integer matrix")
    }

    /// Builds an `n x cols.len()` matrix whose columns are `cols`.
    pub fn from_cols(n: usize, cols: &[Vec<i64>]) -> Self {
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n, "column length mismatch");
            for (i, &x) in c.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<i64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Columns `range` as a new matrix.
    pub fn cols_range(&self, range: std::ops::Range<usize>) -> Self {
        let cols: Vec<Vec<i64>> = range.map(|j| self.col(j)).collect();
        Self::from_cols(self.rows, &cols)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self, LatticeError> {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc: i128 = 0;
                for k in 0..self.cols {
                    acc += self[(i, k)] as i128 * rhs[(k, j)] as i128;
                }
                out[(i, j)] = narrow(acc)?;
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[i64]) -> Result<Vec<i64>, LatticeError> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let acc: i128 = (0..self.cols)
                    .map(|k| self[(i, k)] as i128 * v[k] as i128)
                    .sum();
                narrow(acc)
            })
            .collect()
    }

    /// Exact determinant (fraction-free elimination in big integers).
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a: Vec<Vec<BigInt>> = self
            .to_rows()
            .into_iter()
            .map(|r| r.into_iter().map(BigInt::from).collect())
            .collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.det().abs().is_one()
    }

    /// Exact inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Result<Self, LatticeError> {
        if !self.is_unimodular() {
            return Err(LatticeError::NotUnimodular);
        }
        let n = self.rows;
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..2 * n)
                    .map(|j| {
                        let x = if j < n {
                            self[(i, j)]
                        } else {
                            i64::from(j - n == i)
                        };
                        BigRational::from_integer(x.into())
                    })
                    .collect()
            })
            .collect();
        for k in 0..n {
            let p = (k..n)
                .find(|&i| !a[i][k].is_zero())
                .ok_or(LatticeError::NotUnimodular)?;
            a.swap(p, k);
            let piv = a[k][k].clone();
            for x in a[k].iter_mut() {
                *x = &*x / &piv;
            }
            for i in 0..n {
                if i != k && !a[i][k].is_zero() {
                    let f = a[i][k].clone();
                    for j in 0..2 * n {
                        let d = &f * &a[k][j];
                        a[i][j] -= d;
                    }
                }
            }
        }
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let q = &a[i][n + j];
                debug_assert!(q.is_integer());
                inv[(i, j)] = q.to_integer().to_i64().ok_or(LatticeError::Overflow)?;
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;
    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        self.checked_mul(rhs).expect("integer overflow in matrix product")
    }
}

impl TryFrom<Vec<Vec<i64>>> for IntMatrix {
    type Error = LatticeError;
    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self, Self::Error> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LatticeError::Dimension("ragged integer matrix".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }
}

impl From<IntMatrix> for Vec<Vec<i64>> {
    fn from(m: IntMatrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_rows())
    }
}

fn narrow(x: i128) -> Result<i64, LatticeError> {
    i64::try_from(x).map_err(|_| LatticeError::Overflow)
}

/// Extended gcd: `(g, s, t)` with `s a + t b = g >= 0`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a as i128, b as i128);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (r0, s0, t0) = (-r0, -s0, -t0);
    }
    (r0 as i64, s0 as i64, t0 as i64)
}

/// Column Hermite normal form: returns `(H, U)` with `H = A U`, `U`
/// unimodular, and `H` lower-triangular in profile. Each nonzero column has
/// a positive pivot strictly below the previous column's pivot, entries in a
/// pivot row to the left of the pivot lie in `[0, pivot)`, and zero columns
/// are moved to the right.
pub fn hermite_normal_form(a: &IntMatrix) -> Result<(IntMatrix, IntMatrix), LatticeError> {
    let (h, mut u) = bigmat::hnf(&BigMat::from_int(a));
    bigmat::reduce_transform(&mut u, bigmat::rank_of_hnf(&h));
    Ok((h.to_int()?, u.to_int()?))
}

/// Hermite normal form alone; the transform is never narrowed.
pub(crate) fn hermite_form(a: &IntMatrix) -> Result<IntMatrix, LatticeError> {
    bigmat::hnf(&BigMat::from_int(a)).0.to_int()
}

/// Number of nonzero columns of a matrix in column Hermite normal form.
pub fn hnf_rank(h: &IntMatrix) -> usize {
    (0..h.ncols())
        .take_while(|&j| h.col(j).iter().any(|&x| x != 0))
        .count()
}

/// Smith normal form: returns `(D, U, V)` with `U A V = D`, `U` and `V`
/// unimodular, `D` diagonal with nonnegative entries `d_1 | d_2 | ...`.
pub fn smith_normal_form(
    a: &IntMatrix,
) -> Result<(IntMatrix, IntMatrix, IntMatrix), LatticeError> {
    let (d, u, v) = bigmat::snf(&BigMat::from_int(a));
    Ok((d.to_int()?, u.to_int()?, v.to_int()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_column_hnf(h: &IntMatrix) -> bool {
        let r = hnf_rank(h);
        let mut last_pivot: Option<usize> = None;
        for j in 0..h.ncols() {
            let col = h.col(j);
            let Some(p) = col.iter().position(|&x| x != 0) else {
                if j < r {
                    return false;
                }
                continue;
            };
            if j >= r || col[p] <= 0 || last_pivot.is_some_and(|lp| p <= lp) {
                return false;
            }
            for jj in 0..j {
                if !(0..col[p]).contains(&h[(p, jj)]) {
                    return false;
                }
            }
            last_pivot = Some(p);
        }
        true
    }

    #[test]
    fn identity_is_fixed() {
        let (h, u) = hermite_normal_form(&IntMatrix::identity(2)).unwrap();
        assert_eq!(h, IntMatrix::identity(2));
        assert_eq!(u, IntMatrix::identity(2));
    }

    #[test]
    fn single_column_is_kept() {
        let a = IntMatrix::from_rows(&[vec![2], vec![3]]);
        let (h, u) = hermite_normal_form(&a).unwrap();
        assert_eq!(h, a);
        assert_eq!(u, IntMatrix::identity(1));
        let neg = IntMatrix::from_rows(&[vec![-2], vec![3]]);
        let (h, u) = hermite_normal_form(&neg).unwrap();
        assert_eq!(h.to_rows(), vec![vec![2], vec![-3]]);
        assert_eq!(u.to_rows(), vec![vec![-1]]);
    }

    #[test]
    fn unimodular_input_reduces_to_identity_matching_brute_force() {
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]);
        let (h, u) = hermite_normal_form(&a).unwrap();
        assert!(u.is_unimodular());
        assert_eq!(&a * &u, h);
        // every unimodular U with entries in [-3, 3] giving an HNF yields the same H
        let mut found = Vec::new();
        for e in 0..7i64.pow(4) {
            let d = |k: u32| (e / 7i64.pow(k)) % 7 - 3;
            let cand = IntMatrix::from_rows(&[vec![d(0), d(1)], vec![d(2), d(3)]]);
            if !cand.is_unimodular() {
                continue;
            }
            let prod = &a * &cand;
            if is_column_hnf(&prod) {
                found.push(prod);
            }
        }
        assert!(!found.is_empty());
        assert!(found.iter().all(|f| *f == h));
        assert_eq!(h.det().abs(), BigInt::one());
    }

    #[test]
    fn rank_deficient_rows() {
        let a = IntMatrix::from_rows(&[vec![2, 4, 6], vec![1, 2, 3]]);
        let (h, u) = hermite_normal_form(&a).unwrap();
        assert!(is_column_hnf(&h));
        assert_eq!(hnf_rank(&h), 1);
        assert_eq!(&a * &u, h);
        assert_eq!(h.col(0), vec![2, 1]);
    }

    #[test]
    fn smith_form_of_small_matrix() {
        let a = IntMatrix::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
        let (d, u, v) = smith_normal_form(&a).unwrap();
        assert!(u.is_unimodular() && v.is_unimodular());
        assert_eq!(&(&u * &a) * &v, d);
        assert_eq!((d[(0, 0)], d[(1, 1)], d[(2, 2)]), (2, 6, 12));
    }

    #[test]
    fn inverse_of_unimodular() {
        let m = IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]);
        let inv = m.inverse_unimodular().unwrap();
        assert_eq!(inv.to_rows(), vec![vec![2, -1], vec![-3, 2]]);
        assert!(IntMatrix::from_rows(&[vec![2, 0], vec![0, 1]])
            .inverse_unimodular()
            .is_err());
    }

    #[test]
    fn ext_gcd_identity() {
        for (a, b) in [(12, 18), (-4, 6), (0, -5), (7, 0), (0, 0)] {
            let (g, s, t) = ext_gcd(a, b);
            assert_eq!(s * a + t * b, g);
            assert!(g >= 0);
        }
    }
}
