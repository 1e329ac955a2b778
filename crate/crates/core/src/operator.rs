//! The model operator
//!
//! `P = h (w.D + c) + h^2 sum_ij H_ij D_i D_j + h^2 r(x) [+ h^3 R]`
//!
//! acting on trigonometric polynomials, and its second-order part rewritten
//! in the split coordinates `x = M (y, z)`.

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use serde::Serialize;

use crate::lattice::{BasisNumber, FrequencyVector, IrrationalityBasis, LatticeError, UnimodularSplitting};
use crate::linalg::symmetric_eigenvalues;
use crate::nondegeneracy::HessianForm;
use crate::trig::TrigPolynomial;

/// Relative accuracy required when checking the transformed form against the
/// original one.
pub const FORM_CHECK_TOL: f64 = 1e-10;
const REAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("semiclassical parameter must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("multiplier r is not real-valued (asymmetry {0:e})")]
    NonRealPotential(f64),
    #[error("basis numbers use {got} coordinates but the basis has {expected}")]
    Basis { got: usize, expected: usize },
    #[error("transformed quadratic form disagrees with the original (relative error {0:e})")]
    FormCheck(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Bounded `O(h^3)` term: `h^3 (a / (1 + |xi|^2)) u + h^3 q(x) u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemainderModel {
    pub multiplier: f64,
    pub potential: TrigPolynomial,
}

impl RemainderModel {
    pub fn apply(&self, u: &TrigPolynomial) -> TrigPolynomial {
        let a = self.multiplier;
        let diag = u.multiplier(|xi| {
            let s: f64 = xi.iter().map(|&x| (x * x) as f64).sum();
            Complex64::new(a / (1.0 + s), 0.0)
        });
        &diag + &(&self.potential * u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelOperatorSpec {
    basis: IrrationalityBasis,
    omega: FrequencyVector,
    hessian: HessianForm,
    c: BasisNumber,
    r: TrigPolynomial,
    remainder: Option<RemainderModel>,
}

impl ModelOperatorSpec {
    pub fn new(
        basis: IrrationalityBasis,
        omega: FrequencyVector,
        hessian: HessianForm,
        c: BasisNumber,
        r: TrigPolynomial,
    ) -> Result<Self, OperatorError> {
        let n = omega.n();
        if hessian.n() != n {
            return Err(OperatorError::Dimension(format!(
                "hessian is {0}x{0} but omega has {n} entries",
                hessian.n()
            )));
        }
        if r.dim() != n {
            return Err(OperatorError::Dimension(format!(
                "r lives on T^{} but omega has {n} entries",
                r.dim()
            )));
        }
        for d in [omega.basis_dim(), c.dim()] {
            if d != basis.dim() {
                return Err(OperatorError::Basis {
                    got: d,
                    expected: basis.dim(),
                });
            }
        }
        let asym = (&r - &r.conj()).max_coeff();
        if asym > REAL_TOL * r.max_coeff().max(1.0) {
            return Err(OperatorError::NonRealPotential(asym));
        }
        Ok(Self {
            basis,
            omega,
            hessian,
            c,
            r,
            remainder: None,
        })
    }

    pub fn with_remainder(mut self, remainder: Option<RemainderModel>) -> Result<Self, OperatorError> {
        if let Some(rem) = &remainder {
            if rem.potential.dim() != self.n() {
                return Err(OperatorError::Dimension(
                    "remainder potential dimension".into(),
                ));
            }
        }
        self.remainder = remainder;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.omega.n()
    }

    pub fn basis(&self) -> &IrrationalityBasis {
        &self.basis
    }

    pub fn omega(&self) -> &FrequencyVector {
        &self.omega
    }

    pub fn hessian(&self) -> &HessianForm {
        &self.hessian
    }

    pub fn c(&self) -> &BasisNumber {
        &self.c
    }

    pub fn r(&self) -> &TrigPolynomial {
        &self.r
    }

    pub fn remainder(&self) -> Option<&RemainderModel> {
        self.remainder.as_ref()
    }

    /// `w.xi + c` evaluated exactly, then converted to floating point.
    pub fn transport_symbol(&self, xi: &[i64]) -> f64 {
        (&self.omega.dot(xi) + &self.c).to_f64(&self.basis)
    }

    /// Diagonal symbol `h (w.xi + c) + h^2 xi^T H xi` at an integer frequency.
    pub fn diagonal_symbol(&self, xi: &[i64], h: f64) -> f64 {
        let xf: Vec<f64> = xi.iter().map(|&x| x as f64).collect();
        h * self.transport_symbol(xi) + h * h * self.hessian.quadratic(&xf)
    }
}

/// Applies the model operator in coefficient space.
///
/// `(Pu)(xi) = [h (w.xi + c) + h^2 xi^T H xi] u(xi) + h^2 (r * u)(xi)`, plus
/// the modeled remainder when enabled. The convolution is exact.
pub fn apply_model_operator(
    spec: &ModelOperatorSpec,
    u: &TrigPolynomial,
    h: f64,
) -> Result<TrigPolynomial, OperatorError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(OperatorError::NonPositiveH(h));
    }
    if u.dim() != spec.n() {
        return Err(OperatorError::Dimension(format!(
            "u lives on T^{} but the operator on T^{}",
            u.dim(),
            spec.n()
        )));
    }
    let diag = u.multiplier(|xi| Complex64::new(spec.diagonal_symbol(xi, h), 0.0));
    let mut out = &diag + &(&spec.r * u).scale_real(h * h);
    if let Some(rem) = &spec.remainder {
        out = &out + &rem.apply(u).scale_real(h * h * h);
    }
    Ok(out)
}

/// `sum_ij H_ij D_i D_j` in the coordinates `x = M (y, z)`, split into the
/// `y`-`y`, `y`-`z` and `z`-`z` blocks:
/// `Q = sum rho1_ij D_yi D_yj + sum rho2_ij D_yi D_zj + sum W_ij D_zi D_zj`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformedQuadraticForm {
    /// Full matrix `M^-1 H M^-T` in the `(y, z)` dual variables.
    full: DMatrix<f64>,
    pub k: usize,
    pub rho1: DMatrix<f64>,
    pub rho2: DMatrix<f64>,
    pub omega_block: DMatrix<f64>,
}

impl TransformedQuadraticForm {
    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    /// Value of the form on the split covector `(alpha, beta)`.
    pub fn eval(&self, alpha: &[i64], beta: &[i64]) -> f64 {
        let eta = DVector::from_iterator(
            alpha.len() + beta.len(),
            alpha.iter().chain(beta).map(|&x| x as f64),
        );
        eta.dot(&(&self.full * &eta))
    }

    /// Smallest eigenvalue of the `z`-`z` block (`+inf` when it is empty).
    pub fn omega_block_min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.omega_block)
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    pub fn is_elliptic_in_z(&self) -> bool {
        let scale = self.omega_block.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.omega_block.nrows() == 0 || self.omega_block_min_eigenvalue() > 1e-12 * scale
    }
}

/// Rewrites `xi^T H xi` in the dual coordinates of `x = M (y, z)`.
///
/// Covectors transform contragrediently: `xi = M^-T eta`, so the new matrix is
/// `M^-1 H M^-T`. The result is checked against the original form on 20
/// pseudo-random covectors.
pub fn transform_quadratic_form(
    h: &HessianForm,
    split: &UnimodularSplitting,
) -> Result<TransformedQuadraticForm, OperatorError> {
    let n = split.n();
    if h.n() != n {
        return Err(OperatorError::Dimension(format!(
            "hessian is {0}x{0} but the splitting acts on T^{n}",
            h.n()
        )));
    }
    let k = split.k();
    let minv = int_to_real(split.inverse());
    let full = &minv * h.matrix() * minv.transpose();
    let full = (&full + full.transpose()) * 0.5;

    let m = int_to_real(split.matrix());
    let mut rng = SplitMix64(0x9e37_79b9_7f4a_7c15);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let xi = DVector::from_iterator(n, (0..n).map(|_| rng.next_f64() * 2.0 - 1.0));
        let eta = m.transpose() * &xi;
        let q0 = xi.dot(&(h.matrix() * &xi));
        let q1 = eta.dot(&(&full * &eta));
        let scale = xi.norm_squared() * crate::linalg::max_abs(h.matrix()).max(f64::MIN_POSITIVE);
        worst = worst.max((q0 - q1).abs() / scale);
    }
    if worst > FORM_CHECK_TOL {
        return Err(OperatorError::FormCheck(worst));
    }

    let rho1 = full.view((0, 0), (k, k)).into_owned();
    let rho2 = full.view((0, k), (k, n - k)).into_owned() * 2.0;
    let omega_block = full.view((k, k), (n - k, n - k)).into_owned();
    Ok(TransformedQuadraticForm {
        full,
        k,
        rho1,
        rho2,
        omega_block,
    })
}

/// `Q_a + r0` acting on functions on `T'`:
/// symbol `beta^T W beta + gamma.beta + rho` plus multiplication by `r0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorOnTPrime {
    pub omega_block: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub rho: f64,
    pub zero_mode_multiplier: TrigPolynomial,
}

impl OperatorOnTPrime {
    pub fn dim(&self) -> usize {
        self.omega_block.nrows()
    }

    pub fn symbol(&self, beta: &[i64]) -> f64 {
        let b = DVector::from_iterator(beta.len(), beta.iter().map(|&x| x as f64));
        b.dot(&(&self.omega_block * &b)) + self.gamma.dot(&b) + self.rho
    }

    /// `(Q_a + r0) w`, exact in coefficient space.
    pub fn apply(&self, w: &TrigPolynomial) -> TrigPolynomial {
        let diag = w.multiplier(|b| Complex64::new(self.symbol(b), 0.0));
        &diag + &(&self.zero_mode_multiplier * w)
    }

    /// The constant-coefficient part `Q_a` alone.
    pub fn apply_constant_part(&self, w: &TrigPolynomial) -> TrigPolynomial {
        w.multiplier(|b| Complex64::new(self.symbol(b), 0.0))
    }
}

/// Collects the `y`-mode `alpha` of `Q` and attaches the multiplier `r0`.
pub fn assemble_q_alpha(
    form: &TransformedQuadraticForm,
    alpha: &[i64],
    r0_hat: &TrigPolynomial,
) -> Result<OperatorOnTPrime, OperatorError> {
    if alpha.len() != form.k {
        return Err(OperatorError::Dimension(format!(
            "alpha has {} entries, expected {}",
            alpha.len(),
            form.k
        )));
    }
    if r0_hat.dim() != form.omega_block.nrows() {
        return Err(OperatorError::Dimension(format!(
            "r0 lives on T^{} but T' has dimension {}",
            r0_hat.dim(),
            form.omega_block.nrows()
        )));
    }
    let a = DVector::from_iterator(alpha.len(), alpha.iter().map(|&x| x as f64));
    let gamma = form.rho2.transpose() * &a;
    let rho = a.dot(&(&form.rho1 * &a));
    Ok(OperatorOnTPrime {
        omega_block: form.omega_block.clone(),
        gamma,
        rho,
        zero_mode_multiplier: r0_hat.clone(),
    })
}

pub(crate) fn int_to_real(m: &crate::lattice::IntMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] as f64)
}

/// Deterministic generator for internal self-checks.
pub(crate) struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{split_frequencies, IntMatrix};

    fn golden_split() -> (FrequencyVector, UnimodularSplitting) {
        let omega = FrequencyVector::from_integers(&[2, 3]).unwrap();
        let m = IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]);
        let split = UnimodularSplitting::new(m, 1, &omega).unwrap();
        (omega, split)
    }

    fn spec_1d(r: TrigPolynomial) -> ModelOperatorSpec {
        ModelOperatorSpec::new(
            IrrationalityBasis::rational(),
            FrequencyVector::from_integers(&[1]).unwrap(),
            HessianForm::identity(1),
            BasisNumber::integer(-5, 1),
            r,
        )
        .unwrap()
    }

    #[test]
    fn identity_split_partitions_hessian() {
        let omega = FrequencyVector::new(vec![
            BasisNumber::parse(&["1", "0"]).unwrap(),
            BasisNumber::parse(&["0", "1"]).unwrap(),
        ])
        .unwrap();
        let split = split_frequencies(&omega).unwrap();
        let h = HessianForm::from_rows(&[vec![2.0, 0.5], vec![0.5, 3.0]]).unwrap();
        let f = transform_quadratic_form(&h, &split).unwrap();
        assert_eq!(f.rho1, *h.matrix());
        assert_eq!(f.omega_block.nrows(), 0);
    }

    #[test]
    fn golden_form_block() {
        let (_, split) = golden_split();
        let f = transform_quadratic_form(&HessianForm::identity(2), &split).unwrap();
        // M^-1 = [[2,-1],[-3,2]]; z-dual covector eta = (0,1) maps to xi = M^-T eta = (-3, 2)
        let xi = split.from_split_frequency(&[0], &[1]).unwrap();
        assert_eq!(xi, vec![-3, 2]);
        let direct = (xi[0] * xi[0] + xi[1] * xi[1]) as f64;
        assert!((f.omega_block[(0, 0)] - direct).abs() < 1e-12);
        assert!((f.omega_block[(0, 0)] - 13.0).abs() < 1e-12);
        assert!(f.is_elliptic_in_z());
    }

    #[test]
    fn q_alpha_homogeneity_and_zero_mode() {
        let (_, split) = golden_split();
        let f = transform_quadratic_form(&HessianForm::identity(2), &split).unwrap();
        let r0 = TrigPolynomial::zero(1);
        let q0 = assemble_q_alpha(&f, &[0], &r0).unwrap();
        assert_eq!(q0.rho, 0.0);
        assert!(q0.gamma.iter().all(|&g| g == 0.0));
        let q1 = assemble_q_alpha(&f, &[3], &r0).unwrap();
        let q2 = assemble_q_alpha(&f, &[6], &r0).unwrap();
        assert!((q2.gamma[0] - 2.0 * q1.gamma[0]).abs() < 1e-12);
        assert!((q2.rho - 4.0 * q1.rho).abs() < 1e-12);
    }

    #[test]
    fn q_alpha_matches_full_form_on_characters() {
        let (_, split) = golden_split();
        let h = HessianForm::from_rows(&[vec![1.5, 0.25], vec![0.25, 0.75]]).unwrap();
        let f = transform_quadratic_form(&h, &split).unwrap();
        let q = assemble_q_alpha(&f, &[5], &TrigPolynomial::zero(1)).unwrap();
        for beta in -4..=4i64 {
            // apply the full Q to e_alpha(y) e_beta(z) = e_xi(x)
            let xi = split.from_split_frequency(&[5], &[beta]).unwrap();
            let xf: Vec<f64> = xi.iter().map(|&x| x as f64).collect();
            let full = h.quadratic(&xf);
            assert!((q.symbol(&[beta]) - full).abs() < 1e-9 * full.abs().max(1.0));
        }
    }

    #[test]
    fn constants_are_in_the_kernel_without_potential() {
        let spec = ModelOperatorSpec::new(
            IrrationalityBasis::rational(),
            FrequencyVector::from_integers(&[2, 3]).unwrap(),
            HessianForm::identity(2),
            BasisNumber::integer(0, 1),
            TrigPolynomial::zero(2),
        )
        .unwrap();
        let u = TrigPolynomial::constant(2, Complex64::new(1.0, 0.0));
        assert!(apply_model_operator(&spec, &u, 0.1).unwrap().is_empty());
    }

    #[test]
    fn characters_are_eigenfunctions() {
        let spec = spec_1d(TrigPolynomial::zero(1));
        let h = 0.01;
        let u = TrigPolynomial::character(&[3]);
        let pu = apply_model_operator(&spec, &u, h).unwrap();
        let expected = h * (3.0 - 5.0) + h * h * 9.0;
        assert_eq!(pu.len(), 1);
        assert!((pu.coeff(&[3]).re - expected).abs() < 1e-15);
    }

    #[test]
    fn resonant_character_with_cosine_potential() {
        let spec = spec_1d(TrigPolynomial::cosine(&[1]));
        let h = 0.125;
        let pu = apply_model_operator(&spec, &TrigPolynomial::character(&[5]), h).unwrap();
        let h2 = h * h;
        assert!((pu.coeff(&[5]).re - 25.0 * h2).abs() < 1e-14);
        assert!((pu.coeff(&[6]).re - 0.5 * h2).abs() < 1e-14);
        assert!((pu.coeff(&[4]).re - 0.5 * h2).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = spec_1d(TrigPolynomial::zero(1));
        let u = TrigPolynomial::character(&[1]);
        assert!(matches!(
            apply_model_operator(&spec, &u, 0.0),
            Err(OperatorError::NonPositiveH(_))
        ));
        let nonreal = ModelOperatorSpec::new(
            IrrationalityBasis::rational(),
            FrequencyVector::from_integers(&[1]).unwrap(),
            HessianForm::identity(1),
            BasisNumber::integer(0, 1),
            TrigPolynomial::character(&[1]),
        );
        assert!(matches!(nonreal, Err(OperatorError::NonRealPotential(_))));
    }
}
