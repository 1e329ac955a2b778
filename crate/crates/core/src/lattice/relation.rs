use serde::{Deserialize, Serialize};

use super::matrix::{hermite_form, hermite_normal_form, hnf_rank, IntMatrix};
use super::number::{integer_rows, FrequencyVector};
use super::LatticeError;

/// A sublattice of `Z^n`, stored by its canonical basis: the nonzero
/// columns of the column Hermite normal form of any generating set.
/// Two lattices are equal iff their stored bases are equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerLattice {
    ambient_dim: usize,
    /// Basis vectors, one per row.
    generators: Vec<Vec<i64>>,
}

impl IntegerLattice {
    /// The lattice generated by `vectors` (any generating set, possibly
    /// dependent) inside `Z^n`.
    pub fn from_generators(n: usize, vectors: &[Vec<i64>]) -> Result<Self, LatticeError> {
        if vectors.iter().any(|v| v.len() != n) {
            return Err(LatticeError::Dimension(format!(
                "generators must have length {n}"
            )));
        }
        if vectors.is_empty() {
            return Ok(Self::trivial(n));
        }
        let h = hermite_form(&IntMatrix::from_cols(n, vectors))?;
        let r = hnf_rank(&h);
        Ok(Self {
            ambient_dim: n,
            generators: (0..r).map(|j| h.col(j)).collect(),
        })
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            ambient_dim: n,
            generators: Vec::new(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Vec<i64>] {
        &self.generators
    }

    /// `n x rank` basis matrix (basis vectors as columns).
    pub fn basis_matrix(&self) -> IntMatrix {
        IntMatrix::from_cols(self.ambient_dim, &self.generators)
    }

    /// Whether `v` lies in the rational span of the lattice.
    pub fn spans_rationally(&self, v: &[i64]) -> Result<bool, LatticeError> {
        let mut cols = self.generators.clone();
        cols.push(v.to_vec());
        let h = hermite_form(&IntMatrix::from_cols(self.ambient_dim, &cols))?;
        Ok(hnf_rank(&h) == self.rank())
    }

    /// Whether `v` is an integer combination of the basis.
    pub fn contains(&self, v: &[i64]) -> Result<bool, LatticeError> {
        if v.len() != self.ambient_dim {
            return Ok(false);
        }
        // forward substitution along the echelon profile of the HNF basis
        let mut rest: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for g in &self.generators {
            let p = g.iter().position(|&x| x != 0).expect("zero basis vector");
            if rest[..p].iter().any(|&x| x != 0) {
                return Ok(false);
            }
            let gp = g[p] as i128;
            if rest[p] % gp != 0 {
                return Ok(false);
            }
            let q = rest[p] / gp;
            for (r, &x) in rest.iter_mut().zip(g) {
                *r -= q * x as i128;
            }
        }
        Ok(rest.iter().all(|&x| x == 0))
    }
}

/// Integer kernel `{x in Z^n : A x = 0}` of an `m x n` integer matrix.
/// The result is saturated: `Z^n / ker` is torsion-free.
pub fn integer_kernel(a: &IntMatrix) -> Result<IntegerLattice, LatticeError> {
    let n = a.ncols();
    let (h, u) = hermite_normal_form(a)?;
    let r = hnf_rank(&h);
    let kernel: Vec<Vec<i64>> = (r..n).map(|j| u.col(j)).collect();
    IntegerLattice::from_generators(n, &kernel)
}

/// The lattice of integer relations `{alpha in Z^n : alpha . omega = 0}`.
///
/// Each basis coordinate of `alpha . omega` must vanish separately, so the
/// relation lattice is the integer kernel of the `m x n` matrix of rational
/// coordinates of `omega` (denominators cleared row by row).
pub fn relation_lattice(omega: &FrequencyVector) -> Result<IntegerLattice, LatticeError> {
    let m = omega.basis_dim();
    let rows: Vec<Vec<_>> = (0..m)
        .map(|b| {
            omega
                .entries()
                .iter()
                .map(|e| e.coeffs()[b].clone())
                .collect()
        })
        .collect();
    let a = IntMatrix::try_from(integer_rows(&rows)?)?;
    integer_kernel(&a)
}
