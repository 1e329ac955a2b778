//! Orbit-closure splitting `T^n = T x T'` of the torus for a linear flow.

use num::{BigInt, BigRational, One};
use serde::{Deserialize, Serialize};

use super::bigmat::{self, BigMat};
use super::matrix::IntMatrix;
use super::number::{BasisNumber, FrequencyVector};
use super::relation::{integer_kernel, relation_lattice, IntegerLattice};
use super::LatticeError;

/// Integer change of coordinates `x = M (y, z)` adapted to the orbit closure.
///
/// The first `k` columns of `M` are a basis of `L = V ∩ Z^n`, where `V` is the
/// tangent space of the orbit closure. In the new coordinates the flow is
/// `sum_j omega_tilde_j d/dy_j` and has no rational relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnimodularSplitting {
    m: IntMatrix,
    m_inv: IntMatrix,
    k: usize,
    omega_tilde: Vec<BasisNumber>,
}

impl UnimodularSplitting {
    /// Checks the invariants against `omega` and assembles the splitting.
    pub fn new(m: IntMatrix, k: usize, omega: &FrequencyVector) -> Result<Self, LatticeError> {
        let n = omega.n();
        if m.nrows() != n || m.ncols() != n || k == 0 || k > n {
            return Err(LatticeError::Dimension(format!(
                "splitting matrix must be {n}x{n} with 1 <= k <= {n}"
            )));
        }
        let m_inv = m.inverse_unimodular()?;
        let image = apply_int_matrix(&m_inv, omega.entries());
        if image[k..].iter().any(|x| !x.is_zero()) {
            return Err(LatticeError::Invariant(
                "trailing coordinates of M^-1 omega are not zero".into(),
            ));
        }
        let omega_tilde = image[..k].to_vec();
        let tilde = FrequencyVector::new(omega_tilde.clone())?;
        if relation_lattice(&tilde)?.rank() != 0 {
            return Err(LatticeError::Invariant(
                "reduced frequencies satisfy a rational relation".into(),
            ));
        }
        Ok(Self {
            m,
            m_inv,
            k,
            omega_tilde,
        })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Dimension of the orbit closure `T`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the transversal torus `T'`.
    pub fn transversal_dim(&self) -> usize {
        self.n() - self.k
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.m
    }

    pub fn inverse(&self) -> &IntMatrix {
        &self.m_inv
    }

    pub fn omega_tilde(&self) -> &[BasisNumber] {
        &self.omega_tilde
    }

    /// Basis of `L` (the first `k` columns of `M`).
    pub fn orbit_lattice(&self) -> Result<IntegerLattice, LatticeError> {
        let cols: Vec<Vec<i64>> = (0..self.k).map(|j| self.m.col(j)).collect();
        IntegerLattice::from_generators(self.n(), &cols)
    }

    /// Frequency relabeling `xi -> M^T xi = (alpha, beta)`.
    pub fn to_split_frequency(&self, xi: &[i64]) -> Result<(Vec<i64>, Vec<i64>), LatticeError> {
        let eta = self.m.transpose().mul_vec(xi)?;
        let (a, b) = eta.split_at(self.k);
        Ok((a.to_vec(), b.to_vec()))
    }

    /// Inverse relabeling `(alpha, beta) -> xi = M^-T (alpha, beta)`.
    pub fn from_split_frequency(&self, alpha: &[i64], beta: &[i64]) -> Result<Vec<i64>, LatticeError> {
        assert_eq!(alpha.len(), self.k);
        assert_eq!(beta.len(), self.n() - self.k);
        let eta: Vec<i64> = alpha.iter().chain(beta).copied().collect();
        self.m_inv.transpose().mul_vec(&eta)
    }
}

fn apply_int_matrix(m: &IntMatrix, xs: &[BasisNumber]) -> Vec<BasisNumber> {
    (0..m.nrows())
        .map(|i| super::number::int_dot(&m.row(i), xs))
        .collect()
}

/// Splits the torus along the orbit closure of the flow with frequencies
/// `omega`.
///
/// `V` is the annihilator of the relation lattice and `L = V ∩ Z^n` is
/// computed as a saturated integer kernel. Its basis `B` is completed to a
/// unimodular `M` through the Smith form `U B W = [I_k; 0]`: the matrix
/// `U^-1 diag(W^-1, I)` has `B` as its first `k` columns.
pub fn split_frequencies(omega: &FrequencyVector) -> Result<UnimodularSplitting, LatticeError> {
    let n = omega.n();
    let relations = relation_lattice(omega)?;
    let orbit = if relations.rank() == 0 {
        IntegerLattice::from_generators(n, &identity_cols(n))?
    } else {
        integer_kernel(&IntMatrix::try_from(relations.generators().to_vec())?)?
    };
    let k = orbit.rank();
    let basis: Vec<Vec<BigInt>> = orbit
        .generators()
        .iter()
        .map(|g| g.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let b = BigMat::from_cols(n, &basis);
    let (d, u, w) = bigmat::snf(&b);
    if (0..k).any(|i| !d.data[i][i].is_one()) {
        return Err(LatticeError::Invariant(
            "orbit lattice is not saturated (torsion in the quotient)".into(),
        ));
    }
    let u_inv = u.inverse_unimodular().ok_or(LatticeError::NotUnimodular)?;
    let w_inv = w.inverse_unimodular().ok_or(LatticeError::NotUnimodular)?;
    let mut block = BigMat::identity(n);
    for i in 0..k {
        for j in 0..k {
            block.data[i][j] = w_inv.data[i][j].clone();
        }
    }
    let m = u_inv.mul(&block);
    debug_assert!((0..k).all(|j| m.col(j) == basis[j]));
    // shorten the completion: reduce it among itself, then modulo the orbit lattice
    let mut completion: Vec<Vec<BigInt>> = (k..n).map(|j| m.col(j)).collect();
    bigmat::lll(&mut completion);
    for c in &mut completion {
        bigmat::size_reduce(c, &basis);
    }
    let cols: Vec<Vec<BigInt>> = basis.into_iter().chain(completion).collect();
    let m = BigMat::from_cols(n, &cols).to_int()?;
    UnimodularSplitting::new(m, k, omega)
}

fn identity_cols(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|j| (0..n).map(|i| i64::from(i == j)).collect())
        .collect()
}

/// Exact value `omega_tilde . alpha + c`.
pub fn resonance_defect(omega_tilde: &[BasisNumber], alpha: &[i64], c: &BasisNumber) -> BasisNumber {
    &super::number::int_dot(alpha, omega_tilde) + c
}

/// The unique `alpha_0` with `|alpha_0|_inf <= bound` and
/// `omega_tilde . alpha_0 + c = 0`, if any.
///
/// Each basis coordinate of the resonance equation is a rational linear
/// equation in `alpha`; the solution set is an affine integer lattice found by
/// Hermite reduction. With `omega_tilde` free of rational relations that
/// lattice is a single point or empty. More than one solution in the box
/// means the irrationality invariant was broken upstream.
pub fn find_resonant_mode(
    omega_tilde: &[BasisNumber],
    c: &BasisNumber,
    bound: i64,
) -> Result<Option<Vec<i64>>, LatticeError> {
    let k = omega_tilde.len();
    if k == 0 {
        return Err(LatticeError::Dimension("empty reduced frequency vector".into()));
    }
    let m = omega_tilde[0].dim();
    if c.dim() != m {
        return Err(LatticeError::Dimension(
            "constant and frequencies use different bases".into(),
        ));
    }
    // rows: [omega_tilde coords | c coord], cleared to integers
    let rows: Vec<Vec<BigRational>> = (0..m)
        .map(|b| {
            omega_tilde
                .iter()
                .map(|w| w.coeffs()[b].clone())
                .chain(std::iter::once(c.coeffs()[b].clone()))
                .collect()
        })
        .collect();
    let ints = IntMatrix::try_from(super::number::integer_rows(&rows)?)?;
    // solutions of [A | a] (alpha, t) = 0 with t = 1
    let kernel = integer_kernel(&ints)?;
    let sols = affine_solutions(&kernel, k, bound)?;
    match sols.len() {
        0 => Ok(None),
        1 => Ok(sols.into_iter().next()),
        _ => Err(LatticeError::Invariant(format!(
            "resonance has {} solutions in the box; reduced frequencies are rationally related",
            sols.len()
        ))),
    }
}

/// Integer points of `kernel ∩ {t = 1}` projected to the first `k`
/// coordinates, restricted to the box. Returns at most two points.
fn affine_solutions(
    kernel: &IntegerLattice,
    k: usize,
    bound: i64,
) -> Result<Vec<Vec<i64>>, LatticeError> {
    let gens = kernel.generators();
    // last coordinate t across generators; need an integer combination with t = 1
    let ts: Vec<i64> = gens.iter().map(|g| g[k]).collect();
    let nz: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] != 0).collect();
    if nz.is_empty() {
        return Ok(Vec::new());
    }
    // HNF of the t-row gives one generator with t = gcd and the rest with t = 0
    let row = IntMatrix::from_rows(&[ts.clone()]);
    let (h, u) = super::matrix::hermite_normal_form(&row)?;
    if h[(0, 0)] != 1 {
        return Ok(Vec::new());
    }
    let combine = |coeffs: Vec<i64>| -> Result<Vec<i64>, LatticeError> {
        let mut v = vec![0i128; k + 1];
        for (g, &c) in gens.iter().zip(&coeffs) {
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi += c as i128 * gi as i128;
            }
        }
        v.into_iter()
            .map(|x| i64::try_from(x).map_err(|_| LatticeError::Overflow))
            .collect()
    };
    let particular = combine(u.col(0))?;
    let homogeneous: Vec<Vec<i64>> = (1..gens.len())
        .map(|j| combine(u.col(j)))
        .collect::<Result<_, _>>()?;
    let particular = particular[..k].to_vec();
    let homogeneous: Vec<Vec<i64>> = homogeneous.into_iter().map(|v| v[..k].to_vec()).collect();
    let in_box = |v: &[i64]| v.iter().all(|x| x.abs() <= bound);
    if homogeneous.is_empty() {
        return Ok(if in_box(&particular) {
            vec![particular]
        } else {
            Vec::new()
        });
    }
    // A nontrivial homogeneous solution means omega_tilde has a relation;
    // report up to two points in the box to flag it.
    let mut found = Vec::new();
    let h0 = &homogeneous[0];
    let step = h0.iter().map(|x| x.unsigned_abs()).max().unwrap_or(1).max(1) as i64;
    let reach = (bound.saturating_mul(2) / step).saturating_add(
        particular.iter().map(|x| x.abs()).max().unwrap_or(0) / step + 1,
    );
    for t in -reach..=reach {
        let cand: Vec<i64> = particular
            .iter()
            .zip(h0)
            .map(|(p, h)| p + t * h)
            .collect();
        if in_box(&cand) {
            found.push(cand);
            if found.len() == 2 {
                break;
            }
        }
    }
    Ok(found)
}
