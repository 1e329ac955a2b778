//! Arbitrary-precision kernels behind the `i64` matrix API.
//!
//! Hermite and Smith reductions blow up intermediate entries even when the
//! inputs and the final forms are small, so they run on big integers. Kernel
//! and completion columns are LLL-reduced before they are narrowed back.

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};

use super::matrix::IntMatrix;
use super::LatticeError;

/// Dense row-major big-integer matrix with explicit column count, so that
/// `0 x n` matrices keep their shape.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BigMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<BigInt>>,
}

impl BigMat {
    pub fn identity(n: usize) -> Self {
        let data = (0..n)
            .map(|i| (0..n).map(|j| BigInt::from(i64::from(i == j))).collect())
            .collect();
        Self { rows: n, cols: n, data }
    }

    pub fn from_int(m: &IntMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m
                .to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(BigInt::from).collect())
                .collect(),
        }
    }

    pub fn to_int(&self) -> Result<IntMatrix, LatticeError> {
        let mut m = IntMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.data[i][j].to_i64().ok_or(LatticeError::Overflow)?;
            }
        }
        Ok(m)
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        self.data.iter().map(|r| r[j].clone()).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[BigInt]) {
        for (r, x) in self.data.iter_mut().zip(v) {
            r[j] = x.clone();
        }
    }

    pub fn from_cols(rows: usize, cols: &[Vec<BigInt>]) -> Self {
        let data = (0..rows)
            .map(|i| cols.iter().map(|c| c[i].clone()).collect())
            .collect();
        Self {
            rows,
            cols: cols.len(),
            data,
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for r in &mut self.data {
            r.swap(a, b);
        }
    }

    fn negate_col(&mut self, j: usize) {
        for r in &mut self.data {
            r[j] = -&r[j];
        }
    }

    fn negate_row(&mut self, i: usize) {
        for x in &mut self.data[i] {
            *x = -&*x;
        }
    }

    /// `(col_p, col_q) <- (a col_p + b col_q, c col_p + d col_q)`.
    fn combine_cols(&mut self, p: usize, q: usize, [a, b, c, d]: &[BigInt; 4]) {
        for r in &mut self.data {
            let (x, y) = (r[p].clone(), r[q].clone());
            r[p] = a * &x + b * &y;
            r[q] = c * &x + d * &y;
        }
    }

    fn combine_rows(&mut self, p: usize, q: usize, [a, b, c, d]: &[BigInt; 4]) {
        let (x, y) = (self.data[p].clone(), self.data[q].clone());
        self.data[p] = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        self.data[q] = x.iter().zip(&y).map(|(x, y)| c * x + d * y).collect();
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let data = (0..self.rows)
            .map(|i| {
                (0..rhs.cols)
                    .map(|j| (0..self.cols).map(|k| &self.data[i][k] * &rhs.data[k][j]).sum())
                    .collect()
            })
            .collect();
        Self {
            rows: self.rows,
            cols: rhs.cols,
            data,
        }
    }

    /// Exact inverse; `None` unless the matrix is unimodular.
    pub fn inverse_unimodular(&self) -> Option<Self> {
        let n = self.rows;
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..2 * n)
                    .map(|j| {
                        let x = if j < n {
                            self.data[i][j].clone()
                        } else {
                            BigInt::from(i64::from(j - n == i))
                        };
                        BigRational::from_integer(x)
                    })
                    .collect()
            })
            .collect();
        for k in 0..n {
            let p = (k..n).find(|&i| !a[i][k].is_zero())?;
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
        let mut data = Vec::with_capacity(n);
        for row in &a {
            let mut r = Vec::with_capacity(n);
            for q in &row[n..] {
                if !q.is_integer() {
                    return None;
                }
                r.push(q.to_integer());
            }
            data.push(r);
        }
        Some(Self { rows: n, cols: n, data })
    }
}

fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Unimodular 2x2 operation mapping `(a, b)` to `(gcd, 0)`.
fn gcd_op(a: &BigInt, b: &BigInt) -> [BigInt; 4] {
    // plain elimination when possible; a swap here can cycle the Smith loop
    if !a.is_zero() && b.is_multiple_of(a) {
        return [BigInt::one(), BigInt::zero(), -(b / a), BigInt::one()];
    }
    let (g, s, t) = ext_gcd(a, b);
    [s, t, -(b / &g), a / &g]
}

/// Column Hermite normal form `H = A U`; see [`super::hermite_normal_form`].
pub(crate) fn hnf(a: &BigMat) -> (BigMat, BigMat) {
    let (m, n) = (a.rows, a.cols);
    let mut h = a.clone();
    let mut u = BigMat::identity(n);
    let mut pc = 0;
    for row in 0..m {
        if pc == n {
            break;
        }
        for j in pc + 1..n {
            if !h.data[row][j].is_zero() {
                let op = gcd_op(&h.data[row][pc], &h.data[row][j]);
                h.combine_cols(pc, j, &op);
                u.combine_cols(pc, j, &op);
            }
        }
        if h.data[row][pc].is_zero() {
            continue;
        }
        if h.data[row][pc].is_negative() {
            h.negate_col(pc);
            u.negate_col(pc);
        }
        let p = h.data[row][pc].clone();
        for j in 0..pc {
            let q = h.data[row][j].div_floor(&p);
            if !q.is_zero() {
                let op = [BigInt::one(), -q, BigInt::zero(), BigInt::one()];
                h.combine_cols(j, pc, &op);
                u.combine_cols(j, pc, &op);
            }
        }
        pc += 1;
    }
    (h, u)
}

pub(crate) fn rank_of_hnf(h: &BigMat) -> usize {
    (0..h.cols)
        .take_while(|&j| h.data.iter().any(|r| !r[j].is_zero()))
        .count()
}

/// Shrinks the transform of a Hermite reduction without changing `A U`:
/// the kernel columns are LLL-reduced and the remaining columns are reduced
/// modulo the kernel.
pub(crate) fn reduce_transform(u: &mut BigMat, rank: usize) {
    let mut kernel: Vec<Vec<BigInt>> = (rank..u.cols).map(|j| u.col(j)).collect();
    if kernel.is_empty() {
        return;
    }
    lll(&mut kernel);
    for (j, v) in (rank..u.cols).zip(&kernel) {
        u.set_col(j, v);
    }
    for j in 0..rank {
        let mut c = u.col(j);
        size_reduce(&mut c, &kernel);
        u.set_col(j, &c);
    }
}

/// Smith normal form `U A V = D`; see [`super::smith_normal_form`].
pub(crate) fn snf(a: &BigMat) -> (BigMat, BigMat, BigMat) {
    let (m, n) = (a.rows, a.cols);
    let mut d = a.clone();
    let mut u = BigMat::identity(m);
    let mut v = BigMat::identity(n);
    for t in 0..m.min(n) {
        // smallest nonzero entry of the trailing block becomes the pivot
        let Some((pi, pj)) = (t..m)
            .flat_map(|i| (t..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !d.data[i][j].is_zero())
            .min_by(|&(i, j), &(k, l)| d.data[i][j].abs().cmp(&d.data[k][l].abs()))
        else {
            break;
        };
        d.data.swap(t, pi);
        u.data.swap(t, pi);
        d.swap_cols(t, pj);
        v.swap_cols(t, pj);
        loop {
            for j in t + 1..n {
                if !d.data[t][j].is_zero() {
                    let op = gcd_op(&d.data[t][t], &d.data[t][j]);
                    d.combine_cols(t, j, &op);
                    v.combine_cols(t, j, &op);
                }
            }
            let mut clean = true;
            for i in t + 1..m {
                if !d.data[i][t].is_zero() {
                    clean = false;
                    let op = gcd_op(&d.data[t][t], &d.data[i][t]);
                    d.combine_rows(t, i, &op);
                    u.combine_rows(t, i, &op);
                }
            }
            if !clean && (t + 1..n).any(|j| !d.data[t][j].is_zero()) {
                continue;
            }
            // divisibility: fold any entry not divisible by the pivot into row t
            let p = d.data[t][t].clone();
            let bad = (t + 1..m)
                .flat_map(|i| (t + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| !p.is_zero() && !(&d.data[i][j] % &p).is_zero());
            match bad {
                Some((i, _)) => {
                    let op = [BigInt::one(), BigInt::one(), BigInt::zero(), BigInt::one()];
                    d.combine_rows(t, i, &op);
                    u.combine_rows(t, i, &op);
                }
                None => break,
            }
        }
        if d.data[t][t].is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    (d, u, v)
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(target: &mut [BigInt], q: &BigInt, v: &[BigInt]) {
    for (t, x) in target.iter_mut().zip(v) {
        *t -= q * x;
    }
}

/// Nearest integer to `a / b`, `b > 0`.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * &two))
}

/// Integral Gram-Schmidt data: `d[i]` is the Gram determinant of the first
/// `i` vectors (`d[0] = 1`) and `lam[k][j] = d[j + 1] mu_kj`, all integers.
struct IntegralGs {
    d: Vec<BigInt>,
    lam: Vec<Vec<BigInt>>,
}

impl IntegralGs {
    fn new(n: usize) -> Self {
        Self {
            d: vec![BigInt::one(); n + 1],
            lam: vec![vec![BigInt::zero(); n]; n],
        }
    }

    /// Fills row `k` of `lam` and, if `k < b.len()` is a basis vector,
    /// `d[k + 1]`; rows `0..k` must be done.
    fn extend(&mut self, b: &[Vec<BigInt>], k: usize, v: &[BigInt]) -> Option<BigInt> {
        let mut last = BigInt::zero();
        for j in 0..=k.min(b.len().saturating_sub(1)) {
            let target = if j == k { v } else { &b[j] };
            let mut u = dot(v, target);
            for i in 0..j {
                u = (&self.d[i + 1] * u - &self.lam[k][i] * &self.lam[j][i]) / &self.d[i];
            }
            if j < k {
                self.lam[k][j] = u;
            } else {
                last = u;
            }
        }
        (k < b.len()).then_some(last)
    }

    /// `b[k] -= q b[l]` with `q` the rounded `mu_kl`.
    fn red(&mut self, b: &mut [Vec<BigInt>], k: usize, l: usize) {
        let dl = &self.d[l + 1];
        if (&self.lam[k][l] * BigInt::from(2)).abs() <= *dl {
            return;
        }
        let q = round_div(&self.lam[k][l], dl);
        let bl = b[l].clone();
        axpy(&mut b[k], &q, &bl);
        self.lam[k][l] -= &q * dl;
        for i in 0..l {
            let t = &q * &self.lam[l][i];
            self.lam[k][i] -= t;
        }
    }
}

/// In-place LLL reduction (`delta = 3/4`) of linearly independent vectors,
/// integral variant: every intermediate quantity is an exact integer.
pub(crate) fn lll(b: &mut [Vec<BigInt>]) {
    let n = b.len();
    if n < 2 {
        return;
    }
    let mut gs = IntegralGs::new(n);
    gs.d[1] = dot(&b[0], &b[0]);
    let (mut k, mut kmax) = (1, 0);
    while k < n {
        if k > kmax {
            kmax = k;
            let v = b[k].clone();
            let dk = gs.extend(b, k, &v).expect("basis vector");
            assert!(!dk.is_zero(), "LLL input must be linearly independent");
            gs.d[k + 1] = dk;
        }
        loop {
            gs.red(b, k, k - 1);
            let lam = &gs.lam[k][k - 1];
            let lhs = &gs.d[k + 1] * &gs.d[k - 1] * 4;
            let rhs = &gs.d[k] * &gs.d[k] * 3 - lam * lam * 4;
            if lhs >= rhs {
                break;
            }
            // swap b[k-1], b[k] and update the integral data
            b.swap(k, k - 1);
            for j in 0..k - 1 {
                let t = gs.lam[k][j].clone();
                gs.lam[k][j] = std::mem::replace(&mut gs.lam[k - 1][j], t);
            }
            let lam = gs.lam[k][k - 1].clone();
            let big_b = (&gs.d[k - 1] * &gs.d[k + 1] + &lam * &lam) / &gs.d[k];
            for i in k + 1..=kmax {
                let t = gs.lam[i][k].clone();
                gs.lam[i][k] = (&gs.d[k + 1] * &gs.lam[i][k - 1] - &lam * &t) / &gs.d[k];
                gs.lam[i][k - 1] = (&big_b * t + &lam * &gs.lam[i][k]) / &gs.d[k + 1];
            }
            gs.d[k] = big_b;
            if k > 1 {
                k -= 1;
            }
        }
        for l in (0..k - 1).rev() {
            gs.red(b, k, l);
        }
        k += 1;
    }
}

/// Nearest-plane reduction of `t` modulo the lattice spanned by the
/// linearly independent vectors `basis`.
pub(crate) fn size_reduce(t: &mut [BigInt], basis: &[Vec<BigInt>]) {
    let n = basis.len();
    if n == 0 {
        return;
    }
    let mut gs = IntegralGs::new(n + 1);
    let mut rows: Vec<Vec<BigInt>> = basis.to_vec();
    for k in 0..n {
        let v = rows[k].clone();
        gs.d[k + 1] = gs.extend(&rows, k, &v).expect("basis vector");
    }
    rows.push(t.to_vec());
    let v = rows[n].clone();
    gs.extend(&rows[..n], n, &v);
    for l in (0..n).rev() {
        gs.red(&mut rows, n, l);
    }
    t.clone_from_slice(&rows[n]);
}
