use std::collections::BTreeMap;

use serde::Serialize;

use crate::lattice::UnimodularSplitting;
use crate::trig::TrigPolynomial;

use super::QuasimodeError;

/// Fourier modes of `u` along the orbit closure:
/// `u = sum_a e_a(y) u_a(z)` with each `u_a` a polynomial on `T'`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeDecomposition {
    pub modes: BTreeMap<Vec<i64>, TrigPolynomial>,
    pub k: usize,
    pub transversal_dim: usize,
}

impl ModeDecomposition {
    pub fn mode(&self, alpha: &[i64]) -> Option<&TrigPolynomial> {
        self.modes.get(alpha)
    }

    pub fn mode_norm(&self, alpha: &[i64]) -> f64 {
        self.mode(alpha).map_or(0.0, TrigPolynomial::l2_norm)
    }

    /// Inverse relabeling back to `T^n` coefficients.
    pub fn reassemble(&self, split: &UnimodularSplitting) -> Result<TrigPolynomial, QuasimodeError> {
        let mut terms = Vec::new();
        for (alpha, mode) in &self.modes {
            for (beta, c) in mode.iter() {
                terms.push((split.from_split_frequency(alpha, beta)?, *c));
            }
        }
        Ok(TrigPolynomial::from_terms(split.n(), terms))
    }
}

/// Relabels every coefficient at `xi` to `(alpha, beta) = M^T xi`. No
/// arithmetic touches the coefficients.
pub fn decompose_along_t(
    u: &TrigPolynomial,
    split: &UnimodularSplitting,
) -> Result<ModeDecomposition, QuasimodeError> {
    if u.dim() != split.n() {
        return Err(QuasimodeError::Dimension(format!(
            "u lives on T^{} but the splitting on T^{}",
            u.dim(),
            split.n()
        )));
    }
    let d = split.transversal_dim();
    let mut buckets: BTreeMap<Vec<i64>, Vec<(Vec<i64>, num::complex::Complex64)>> =
        BTreeMap::new();
    for (xi, c) in u.iter() {
        let (alpha, beta) = split.to_split_frequency(xi)?;
        buckets.entry(alpha).or_default().push((beta, *c));
    }
    Ok(ModeDecomposition {
        modes: buckets
            .into_iter()
            .map(|(a, terms)| (a, TrigPolynomial::from_terms(d, terms)))
            .collect(),
        k: split.k(),
        transversal_dim: d,
    })
}

/// `r0(z)`: the `alpha = 0` mode of a multiplier `r(y, z)`.
pub fn zero_mode(r: &TrigPolynomial, split: &UnimodularSplitting) -> Result<TrigPolynomial, QuasimodeError> {
    let dec = decompose_along_t(r, split)?;
    Ok(dec
        .mode(&vec![0; split.k()])
        .cloned()
        .unwrap_or_else(|| TrigPolynomial::zero(split.transversal_dim())))
}

/// `e_alpha(y) w(z)` written on `T^n`.
pub fn lift_mode(
    alpha: &[i64],
    w: &TrigPolynomial,
    split: &UnimodularSplitting,
) -> Result<TrigPolynomial, QuasimodeError> {
    if w.dim() != split.transversal_dim() || alpha.len() != split.k() {
        return Err(QuasimodeError::Dimension(
            "mode does not match the splitting".into(),
        ));
    }
    let mut terms = Vec::with_capacity(w.len());
    for (beta, c) in w.iter() {
        terms.push((split.from_split_frequency(alpha, beta)?, *c));
    }
    Ok(TrigPolynomial::from_terms(split.n(), terms))
}
