//! Certified quasimodes built backwards from a chosen transversal profile.
//!
//! Pick `alpha_0` and a real nonvanishing `v` on `T'`, then choose the
//! multiplier so that `(Q_{alpha_0} + r0) v = 0`: `r0 = -(Q_{alpha_0} v) / v`.
//! With `r(y, z) = r0(z)` and `c = -w~.alpha_0`, the function
//! `u = e_{alpha_0}(y) v(z)` satisfies `Pu = h^2 (Q_{alpha_0} + r0) v`, which
//! vanishes up to the truncation of the re-expanded `r0`.

use num::complex::Complex64;
use serde::Serialize;

use crate::lattice::{resonance_defect, BasisNumber, FrequencyVector, IrrationalityBasis, UnimodularSplitting};
use crate::nondegeneracy::HessianForm;
use crate::operator::{assemble_q_alpha, transform_quadratic_form, ModelOperatorSpec, RemainderModel};
use crate::trig::TrigPolynomial;

use super::decompose::lift_mode;
use super::family::QuasimodeFamily;
use super::QuasimodeError;

/// Coefficients of the re-expanded multiplier below this modulus are dropped.
pub const R0_TRUNCATION: f64 = 1e-14;
/// `v` must satisfy `min |v| >= NONVANISHING_MARGIN * max |v|` on the check grid.
pub const NONVANISHING_MARGIN: f64 = 1e-3;
const REAL_TOL: f64 = 1e-12;

/// Everything about the operator except the parts the factory derives.
#[derive(Clone, Debug)]
pub struct FactoryTemplate {
    pub basis: IrrationalityBasis,
    pub omega: FrequencyVector,
    pub hessian: HessianForm,
    /// `None` back-solves `c = -w~.alpha_0`; `Some(c)` must be resonant.
    pub c: Option<BasisNumber>,
    pub remainder: Option<RemainderModel>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactoryOutput {
    pub spec: ModelOperatorSpec,
    pub family: QuasimodeFamily,
    /// `r0` on `T'`.
    pub r0_hat: TrigPolynomial,
    pub alpha0: Vec<i64>,
    /// Normalized transversal profile `v / |v|`.
    pub profile: TrigPolynomial,
    /// `|(Q_{alpha_0} + r0) v| / |v|` with the truncated `r0`.
    pub transversal_residual: f64,
    /// Grid used for the nonvanishing check and the re-expansion.
    pub check_grid: usize,
    pub expansion_grid: usize,
    pub min_over_max: f64,
}

/// Builds the operator and the `h`-independent family
/// `u(.; h) = e_{alpha_0}(y) v(z) / |v|`.
///
/// `truncation` is the Galerkin radius `N` the output is meant for; the
/// nonvanishing margin is checked on a `4N`-point grid per axis.
pub fn build_factory_quasimode(
    template: &FactoryTemplate,
    split: &UnimodularSplitting,
    alpha0: &[i64],
    v: &TrigPolynomial,
    h_ladder: Vec<f64>,
    truncation: usize,
) -> Result<FactoryOutput, QuasimodeError> {
    let n = template.omega.n();
    let d = split.transversal_dim();
    if split.n() != n || alpha0.len() != split.k() || v.dim() != d {
        return Err(QuasimodeError::Dimension(format!(
            "split acts on T^{}, k = {}; got alpha0 of length {} and v on T^{}",
            split.n(),
            split.k(),
            alpha0.len(),
            v.dim()
        )));
    }
    let asym = (v - &v.conj()).max_coeff();
    if asym > REAL_TOL * v.max_coeff().max(1.0) {
        return Err(QuasimodeError::NonRealProfile(asym));
    }

    let check_grid = (4 * truncation).max(8);
    let values = v.sample_grid(check_grid);
    let max = values.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    let min = values.iter().fold(f64::INFINITY, |m, x| m.min(x.norm()));
    if !(max > 0.0) || min < NONVANISHING_MARGIN * max {
        return Err(QuasimodeError::VanishingProfile { min, max });
    }

    let c = match &template.c {
        Some(c) => {
            if !resonance_defect(split.omega_tilde(), alpha0, c).is_zero() {
                return Err(QuasimodeError::NotResonant);
            }
            c.clone()
        }
        None => -&crate::lattice::int_dot(alpha0, split.omega_tilde()),
    };

    let form = transform_quadratic_form(&template.hessian, split)?;
    let q = assemble_q_alpha(&form, alpha0, &TrigPolynomial::zero(d))?;
    let qv = q.apply_constant_part(v);

    let radius = v.radius().max(qv.radius()) as usize;
    let expansion_grid = (4 * truncation).max(64).max(8 * (radius + 1)).next_power_of_two();
    let vs = v.sample_grid(expansion_grid);
    let qs = qv.sample_grid(expansion_grid);
    let ratio: Vec<Complex64> = qs.iter().zip(&vs).map(|(q, v)| -q / v).collect();
    let r0 = TrigPolynomial::from_grid(&ratio, expansion_grid, d, R0_TRUNCATION);
    let r0_asym = (&r0 - &r0.conj()).max_coeff();
    if r0_asym > 1e-10 * r0.max_coeff().max(1.0) {
        return Err(QuasimodeError::NonRealPotential(r0_asym));
    }
    // symmetrize away rounding so the multiplier is exactly Hermitian
    let r0 = (&r0 + &r0.conj()).scale_real(0.5).truncated(R0_TRUNCATION);

    let zero_alpha = vec![0; split.k()];
    let r = lift_mode(&zero_alpha, &r0, split)?;
    let spec = ModelOperatorSpec::new(
        template.basis.clone(),
        template.omega.clone(),
        template.hessian.clone(),
        c,
        r,
    )?
    .with_remainder(template.remainder.clone())?;

    let l = assemble_q_alpha(&form, alpha0, &r0)?;
    let transversal_residual = l.apply(v).l2_norm() / v.l2_norm();

    let profile = v.normalized().ok_or(QuasimodeError::ZeroMember)?;
    let u = lift_mode(alpha0, &profile, split)?;
    let family = QuasimodeFamily::constant(h_ladder, u)?;
    Ok(FactoryOutput {
        spec,
        family,
        r0_hat: r0,
        alpha0: alpha0.to_vec(),
        profile,
        transversal_residual,
        check_grid,
        expansion_grid,
        min_over_max: min / max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{split_frequencies, IntMatrix};
    use crate::operator::apply_model_operator;
    use crate::quasimode::fit::dyadic_ladder;

    fn golden() -> (FactoryTemplate, UnimodularSplitting) {
        let omega = FrequencyVector::from_integers(&[2, 3]).unwrap();
        let split =
            UnimodularSplitting::new(IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]), 1, &omega)
                .unwrap();
        let template = FactoryTemplate {
            basis: IrrationalityBasis::rational(),
            omega,
            hessian: HessianForm::identity(2),
            c: None,
            remainder: None,
        };
        (template, split)
    }

    fn two_plus_cos() -> TrigPolynomial {
        &TrigPolynomial::constant(1, Complex64::new(2.0, 0.0)) + &TrigPolynomial::cosine(&[1])
    }

    #[test]
    fn golden_multiplier_matches_closed_form() {
        let (t, split) = golden();
        let out = build_factory_quasimode(&t, &split, &[0], &two_plus_cos(), dyadic_ladder(4, 12), 16)
            .unwrap();
        // r0(z) = -13 cos(2 pi z) / (2 + cos(2 pi z)) since W_zz = 13
        for i in 0..50 {
            let z = i as f64 / 50.0;
            let cz = (2.0 * std::f64::consts::PI * z).cos();
            let exact = -13.0 * cz / (2.0 + cz);
            assert!((out.r0_hat.eval(&[z]).re - exact).abs() < 1e-12);
        }
        for (h, u) in out.family.iter() {
            let pu = apply_model_operator(&out.spec, u, h).unwrap();
            assert!(pu.l2_norm() <= 1e-10 * h * h, "h = {h}: {}", pu.l2_norm());
        }
        assert!(out.spec.c().is_zero());
    }

    #[test]
    fn full_torus_character() {
        let omega = FrequencyVector::new(vec![
            BasisNumber::parse(&["1", "0"]).unwrap(),
            BasisNumber::parse(&["0", "1"]).unwrap(),
        ])
        .unwrap();
        let split = split_frequencies(&omega).unwrap();
        let basis =
            IrrationalityBasis::new(vec!["1".into(), "sqrt2".into()], vec![1.0, 2f64.sqrt()])
                .unwrap();
        let template = FactoryTemplate {
            basis,
            omega,
            hessian: HessianForm::identity(2),
            c: None,
            remainder: None,
        };
        let v = TrigPolynomial::constant(0, Complex64::new(1.0, 0.0));
        for alpha0 in [[0, 0], [2, -1]] {
            let out =
                build_factory_quasimode(&template, &split, &alpha0, &v, dyadic_ladder(4, 8), 4)
                    .unwrap();
            let u = &out.family.members()[0];
            assert_eq!(u, &TrigPolynomial::character(&alpha0));
            // r is the constant -rho(alpha0); zero when alpha0 = 0
            let rho = (alpha0[0] * alpha0[0] + alpha0[1] * alpha0[1]) as f64;
            assert!((out.spec.r().coeff(&[0, 0]).re + rho).abs() < 1e-12);
            for (h, u) in out.family.iter() {
                assert!(apply_model_operator(&out.spec, u, h).unwrap().l2_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_profile_rejected() {
        let (t, split) = golden();
        let err = build_factory_quasimode(
            &t,
            &split,
            &[0],
            &TrigPolynomial::cosine(&[1]),
            dyadic_ladder(4, 12),
            16,
        )
        .unwrap_err();
        assert!(matches!(err, QuasimodeError::VanishingProfile { .. }));
    }

    #[test]
    fn complex_profile_rejected() {
        let (t, split) = golden();
        let v = &TrigPolynomial::constant(1, Complex64::new(2.0, 0.0)) + &TrigPolynomial::character(&[1]);
        assert!(matches!(
            build_factory_quasimode(&t, &split, &[0], &v, dyadic_ladder(4, 12), 16),
            Err(QuasimodeError::NonRealProfile(_))
        ));
    }

    #[test]
    fn non_resonant_constant_rejected() {
        let (mut t, split) = golden();
        t.c = Some(BasisNumber::rational(1, 2, 1));
        assert!(matches!(
            build_factory_quasimode(&t, &split, &[0], &two_plus_cos(), dyadic_ladder(4, 12), 16),
            Err(QuasimodeError::NotResonant)
        ));
    }
}
