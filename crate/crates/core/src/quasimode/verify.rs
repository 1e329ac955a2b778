use std::collections::BTreeSet;

use serde::Serialize;

use crate::lattice::UnimodularSplitting;
use crate::operator::{apply_model_operator, ModelOperatorSpec};

use super::decompose::decompose_along_t;
use super::family::QuasimodeFamily;
use super::fit::{fit_decay_exponent, DecayFit};
use super::QuasimodeError;

/// Slack allowed between a fitted exponent and its target.
pub const FIT_TOLERANCE: f64 = 0.1;
/// Residuals all below this count as an exact kernel element.
pub const EXACT_KERNEL_TOL: f64 = 1e-13;
/// Lower bound on the resonant-mode norm at the smallest `h`.
const RESONANT_MASS_FLOOR: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub delta: f64,
    pub target: f64,
    pub residual_norms: Vec<f64>,
    pub fit: DecayFit,
    pub exact_kernel: bool,
    pub pass: bool,
}

/// Measures `|P u(.; h)|` along the ladder and checks `O(h^{2 + delta})`.
pub fn verify_quasimode_order(
    family: &QuasimodeFamily,
    spec: &ModelOperatorSpec,
    delta: f64,
) -> Result<OrderReport, QuasimodeError> {
    if family.dim() != spec.n() {
        return Err(QuasimodeError::Dimension(format!(
            "family on T^{} but operator on T^{}",
            family.dim(),
            spec.n()
        )));
    }
    let residual_norms = family
        .iter()
        .map(|(h, u)| apply_model_operator(spec, u, h).map(|pu| pu.l2_norm()))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = fit_decay_exponent(family.h_ladder(), &residual_norms)?;
    let target = 2.0 + delta;
    let exact_kernel = residual_norms.iter().all(|&r| r < EXACT_KERNEL_TOL);
    let pass = exact_kernel || fit.exponent >= target - FIT_TOLERANCE;
    Ok(OrderReport {
        delta,
        target,
        residual_norms,
        fit,
        exact_kernel,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeFit {
    pub alpha: Vec<i64>,
    pub fit: DecayFit,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    pub alpha0: Vec<i64>,
    pub epsilon: f64,
    pub threshold: f64,
    /// `|u_{alpha0}(.; h)|` along the ladder.
    pub resonant_norms: Vec<f64>,
    pub resonant_mass_ok: bool,
    pub other_modes: Vec<ModeFit>,
    pub pass: bool,
}

/// Fits the decay of every mode `alpha != alpha0` and requires
/// `O(h^{1 - epsilon})`; the resonant mode must keep norm at least 1/2 at
/// the smallest `h`.
pub fn check_mode_concentration(
    family: &QuasimodeFamily,
    split: &UnimodularSplitting,
    alpha0: &[i64],
    epsilon: f64,
) -> Result<ConcentrationReport, QuasimodeError> {
    if alpha0.len() != split.k() {
        return Err(QuasimodeError::Dimension(format!(
            "alpha0 has {} entries but the orbit closure has dimension {}",
            alpha0.len(),
            split.k()
        )));
    }
    let decs = family
        .members()
        .iter()
        .map(|u| decompose_along_t(u, split))
        .collect::<Result<Vec<_>, _>>()?;
    let alphas: BTreeSet<&Vec<i64>> = decs.iter().flat_map(|d| d.modes.keys()).collect();
    let threshold = 1.0 - epsilon - FIT_TOLERANCE;
    let mut other_modes = Vec::new();
    for alpha in alphas {
        if alpha.as_slice() == alpha0 {
            continue;
        }
        let norms: Vec<f64> = decs.iter().map(|d| d.mode_norm(alpha)).collect();
        let fit = fit_decay_exponent(family.h_ladder(), &norms)?;
        let pass = fit.exponent >= threshold;
        other_modes.push(ModeFit {
            alpha: alpha.clone(),
            fit,
            pass,
        });
    }
    let resonant_norms: Vec<f64> = decs.iter().map(|d| d.mode_norm(alpha0)).collect();
    let resonant_mass_ok = resonant_norms.last().is_some_and(|&m| m >= RESONANT_MASS_FLOOR);
    let pass = resonant_mass_ok && other_modes.iter().all(|m| m.pass);
    Ok(ConcentrationReport {
        alpha0: alpha0.to_vec(),
        epsilon,
        threshold,
        resonant_norms,
        resonant_mass_ok,
        other_modes,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{BasisNumber, FrequencyVector, IntMatrix, IrrationalityBasis};
    use crate::nondegeneracy::HessianForm;
    use crate::quasimode::decompose::lift_mode;
    use crate::quasimode::fit::dyadic_ladder;
    use crate::trig::TrigPolynomial;
    use num::complex::Complex64;

    fn golden_split() -> (FrequencyVector, UnimodularSplitting) {
        let omega = FrequencyVector::from_integers(&[2, 3]).unwrap();
        let split =
            UnimodularSplitting::new(IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]), 1, &omega)
                .unwrap();
        (omega, split)
    }

    #[test]
    fn off_resonance_character_fails_at_order_one() {
        let (omega, _) = golden_split();
        let spec = ModelOperatorSpec::new(
            IrrationalityBasis::rational(),
            omega,
            HessianForm::identity(2),
            BasisNumber::zero(1),
            TrigPolynomial::zero(2),
        )
        .unwrap();
        let fam = QuasimodeFamily::constant(dyadic_ladder(4, 12), TrigPolynomial::character(&[1, 0]))
            .unwrap();
        let rep = verify_quasimode_order(&fam, &spec, 0.5).unwrap();
        assert!((rep.fit.exponent - 1.0).abs() < 0.05, "{}", rep.fit.exponent);
        assert!(!rep.pass);
    }

    #[test]
    fn two_mode_family() {
        let (_, split) = golden_split();
        let v = &TrigPolynomial::constant(1, Complex64::new(2.0, 0.0)) + &TrigPolynomial::cosine(&[1]);
        let w = TrigPolynomial::character(&[2]);
        let ladder = dyadic_ladder(4, 12);
        let build = |leak: &dyn Fn(f64) -> f64| {
            let members = ladder
                .iter()
                .map(|&h| {
                    &lift_mode(&[0], &v, &split).unwrap()
                        + &lift_mode(&[1], &w, &split).unwrap().scale_real(leak(h))
                })
                .collect();
            QuasimodeFamily::new(ladder.clone(), members).unwrap()
        };
        let decaying = check_mode_concentration(&build(&|h| h), &split, &[0], 0.05).unwrap();
        assert!(decaying.pass);
        assert_eq!(decaying.other_modes.len(), 1);
        let e = decaying.other_modes[0].fit.exponent;
        assert!((0.9..=1.1).contains(&e), "{e}");

        let leaking = check_mode_concentration(&build(&|_| 1.0), &split, &[0], 0.05).unwrap();
        assert!(!leaking.pass);
    }
}
