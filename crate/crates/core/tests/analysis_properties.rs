mod common;

use nalgebra::DMatrix;
use num::complex::Complex64;
use proptest::prelude::*;

use qmlab::lattice::{split_frequencies, BasisNumber, FrequencyVector, IrrationalityBasis};
use qmlab::nondegeneracy::{bordered_determinant, is_quasiconvex, HessianForm};
use qmlab::operator::{apply_model_operator, assemble_q_alpha, transform_quadratic_form, ModelOperatorSpec};
use qmlab::quasimode::{
    decompose_along_t, frequency_box, galerkin_matrix, galerkin_nullspace, unique_continuation_constant,
    BoxDomain, DEFAULT_NULL_TOL,
};
use qmlab::trig::TrigPolynomial;
use qmlab::wavefront::{coherent_mass, nonconcentration_report, wavefront_mass_map, PhaseSpaceGrid, Thresholds};

use common::{golden_factory, golden_split};

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn covector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n).prop_filter("nonzero", |w| w.iter().any(|x| x.abs() > 1e-3))
}

fn poly(dim: usize, radius: i64, len: usize) -> impl Strategy<Value = TrigPolynomial> {
    prop::collection::vec(
        (prop::collection::vec(-radius..=radius, dim), -1.0f64..1.0, -1.0f64..1.0),
        1..=len,
    )
    .prop_map(move |terms| {
        TrigPolynomial::from_terms(dim, terms.into_iter().map(|(a, re, im)| (a, Complex64::new(re, im))))
    })
}

fn hermitian(p: &TrigPolynomial) -> TrigPolynomial {
    (p + &p.conj()).scale_real(0.5)
}

fn rotation(n: usize, angles: &[f64]) -> DMatrix<f64> {
    // product of Givens rotations in consecutive planes
    let mut q = DMatrix::identity(n, n);
    for (i, &t) in angles.iter().enumerate().take(n.saturating_sub(1)) {
        let mut g = DMatrix::identity(n, n);
        g[(i, i)] = t.cos();
        g[(i + 1, i + 1)] = t.cos();
        g[(i, i + 1)] = -t.sin();
        g[(i + 1, i)] = t.sin();
        q = g * q;
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quasiconvex_implies_nondegenerate((h, w) in (2usize..=5).prop_flat_map(|n| (symmetric(n), covector(n)))) {
        let hf = HessianForm::new(h).unwrap();
        if is_quasiconvex(&hf, &w).unwrap() {
            prop_assert!(bordered_determinant(&hf, &w).unwrap().nondegenerate);
        }
    }

    #[test]
    fn bordered_det_is_orthogonally_invariant(
        (h, w, angles) in (2usize..=5).prop_flat_map(|n| (symmetric(n), covector(n), prop::collection::vec(0.0f64..6.3, n)))
    ) {
        let n = w.len();
        let q = rotation(n, &angles);
        let d0 = bordered_determinant(&HessianForm::new(h.clone()).unwrap(), &w).unwrap().det;
        let h2 = &q * &h * q.transpose();
        let w2: Vec<f64> = (&q * nalgebra::DVector::from_vec(w.clone())).iter().copied().collect();
        let d1 = bordered_determinant(&HessianForm::new((&h2 + h2.transpose()) * 0.5).unwrap(), &w2).unwrap().det;
        prop_assert!((d0.abs() - d1.abs()).abs() <= 1e-9 * d0.abs().max(1.0));
    }

    #[test]
    fn quasiconvexity_is_scale_invariant(
        (h, w) in (2usize..=5).prop_flat_map(|n| (symmetric(n), covector(n))),
        lambda in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
    ) {
        let hf = HessianForm::new(h).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| x * lambda).collect();
        prop_assert_eq!(is_quasiconvex(&hf, &w).unwrap(), is_quasiconvex(&hf, &scaled).unwrap());
    }

    #[test]
    fn operator_is_linear(u in poly(2, 5, 12), v in poly(2, 5, 12), r in poly(2, 3, 6), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let spec = golden_spec(hermitian(&r));
        let h = 0.03;
        let lhs = apply_model_operator(&spec, &(&u.scale_real(a) + &v.scale_real(b)), h).unwrap();
        let rhs = &apply_model_operator(&spec, &u, h).unwrap().scale_real(a)
            + &apply_model_operator(&spec, &v, h).unwrap().scale_real(b);
        prop_assert!((&lhs - &rhs).l2_norm() <= 1e-12 * rhs.l2_norm().max(1e-300) + 1e-15);
    }

    #[test]
    fn operator_is_formally_self_adjoint(u in poly(2, 5, 12), v in poly(2, 5, 12), r in poly(2, 3, 6)) {
        let real = |p: &TrigPolynomial| TrigPolynomial::from_terms(2, p.iter().map(|(a, c)| (a.clone(), Complex64::new(c.re, 0.0))));
        let (u, v) = (real(&u), real(&v));
        let spec = golden_spec(hermitian(&r));
        let h = 0.07;
        let pu = apply_model_operator(&spec, &u, h).unwrap();
        let pv = apply_model_operator(&spec, &v, h).unwrap();
        let d = pu.inner(&v) - u.inner(&pv);
        let scale = pu.l2_norm() * v.l2_norm() + u.l2_norm() * pv.l2_norm();
        prop_assert!(d.norm() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn coefficient_and_grid_application_agree(u in poly(2, 8, 16), r in poly(2, 8, 8)) {
        let r = hermitian(&r);
        let spec = golden_spec(r.clone());
        let h = 0.05;
        let coeff = apply_model_operator(&spec, &u, h).unwrap();
        // grid oracle: differentiate through the DFT and multiply pointwise
        let g = 64;
        let us = u.sample_grid(g);
        let rs = r.sample_grid(g);
        let prod: Vec<Complex64> = us.iter().zip(&rs).map(|(a, b)| a * b).collect();
        let ru = TrigPolynomial::from_grid(&prod, g, 2, 0.0);
        let uu = TrigPolynomial::from_grid(&us, g, 2, 0.0);
        let diag = uu.multiplier(|xi| Complex64::new(spec.diagonal_symbol(xi, h), 0.0));
        let grid = &diag + &ru.scale_real(h * h);
        prop_assert!((&coeff - &grid).l2_norm() <= 1e-10 * coeff.l2_norm().max(1e-12));
    }

    #[test]
    fn parseval_through_decomposition(u in poly(3, 4, 50)) {
        let omega = FrequencyVector::from_integers(&[1, 2, 2]).unwrap();
        let split = split_frequencies(&omega).unwrap();
        let dec = decompose_along_t(&u, &split).unwrap();
        let total: f64 = dec.modes.values().map(TrigPolynomial::norm_sq).sum();
        prop_assert!((total - u.norm_sq()).abs() <= 4.0 * f64::EPSILON * u.norm_sq());
        prop_assert_eq!(dec.reassemble(&split).unwrap(), u);
    }

    #[test]
    fn unique_continuation_is_monotone(lo in 0.0f64..0.5, inner in 0.01f64..0.3, extra in 0.0f64..0.2) {
        let null = factory_nullspace();
        let small = BoxDomain::new(vec![lo], vec![lo + inner]).unwrap();
        let big = BoxDomain::new(vec![lo], vec![lo + inner + extra]).unwrap();
        let c1 = unique_continuation_constant(&null, &small).unwrap().constant;
        let c2 = unique_continuation_constant(&null, &big).unwrap().constant;
        prop_assert!(c1 <= c2 + 1e-12);
    }

    #[test]
    fn mass_is_phase_invariant(u in poly(2, 4, 10), theta in 0.0f64..6.3, x0 in prop::collection::vec(0.0f64..1.0, 2), xi0 in prop::collection::vec(-1.0f64..1.0, 2)) {
        let h = 0.02;
        let m0 = coherent_mass(&u, &x0, &xi0, h);
        let m1 = coherent_mass(&u.scale(Complex64::from_polar(1.0, theta)), &x0, &xi0, h);
        prop_assert!((m0 - m1).abs() <= 1e-12 * m0.max(1e-300));
    }
}

fn golden_spec(r: TrigPolynomial) -> ModelOperatorSpec {
    ModelOperatorSpec::new(
        IrrationalityBasis::rational(),
        FrequencyVector::from_integers(&[2, 3]).unwrap(),
        HessianForm::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.7]]).unwrap(),
        BasisNumber::rational(-1, 3, 1),
        r,
    )
    .unwrap()
}

fn factory_nullspace() -> qmlab::quasimode::GalerkinNullspace {
    let (out, split) = golden_factory();
    let form = transform_quadratic_form(out.spec.hessian(), &split).unwrap();
    let op = assemble_q_alpha(&form, &[0], &out.r0_hat).unwrap();
    galerkin_nullspace(&op, 16, DEFAULT_NULL_TOL).unwrap()
}

#[test]
fn factory_alpha0_mode_is_a_galerkin_null_vector() {
    let (out, split) = golden_factory();
    let form = transform_quadratic_form(out.spec.hessian(), &split).unwrap();
    let op = assemble_q_alpha(&form, &[0], &out.r0_hat).unwrap();
    let supp = out.profile.radius() as usize;
    for n in [supp + 8, 16, 24] {
        let freqs = frequency_box(1, n);
        let a = galerkin_matrix(&op, &freqs);
        let v = nalgebra::DVector::from_iterator(freqs.len(), freqs.iter().map(|f| out.profile.coeff(f)));
        let res = (&a * v).norm();
        assert!(res < 1e-8, "N = {n}: {res}");
    }
}

#[test]
fn galerkin_null_eigenvalue_decreases_with_truncation() {
    // straight from the Galerkin matrix: N = 8 is below the nullspace
    // routine's truncation guard but the eigenvalue is still meaningful
    let (out, split) = golden_factory();
    let form = transform_quadratic_form(out.spec.hessian(), &split).unwrap();
    let op = assemble_q_alpha(&form, &[0], &out.r0_hat).unwrap();
    let mut last = f64::INFINITY;
    for n in [8, 16, 32] {
        let a = galerkin_matrix(&op, &frequency_box(1, n));
        let (vals, _) = qmlab::linalg::hermitian_eigen((&a + a.adjoint()).map(|x| x * 0.5));
        let lam = vals.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        assert!(lam <= last + 1e-12, "N = {n}: {lam} after {last}");
        last = lam;
    }
    assert!(last < 1e-10);
}

#[test]
fn range_solve_round_trip() {
    let (out, split) = golden_factory();
    let form = transform_quadratic_form(out.spec.hessian(), &split).unwrap();
    let op = assemble_q_alpha(&form, &[0], &out.r0_hat).unwrap();
    let null = galerkin_nullspace(&op, 16, DEFAULT_NULL_TOL).unwrap();
    assert_eq!(null.nullity(), 1);
    // w0 orthogonal to the kernel, Lw0 taken through the Galerkin matrix
    let raw = TrigPolynomial::from_terms(
        1,
        (-6i64..=6).map(|k| (vec![k], Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))),
    );
    let f = &null.basis[0];
    let w0 = &raw - &f.scale(raw.inner(f));
    let freqs = null.frequencies().to_vec();
    let a = galerkin_matrix(&op, &freqs);
    let wv = nalgebra::DVector::from_iterator(freqs.len(), freqs.iter().map(|b| w0.coeff(b)));
    let gv = &a * wv;
    let g = TrigPolynomial::from_terms(1, freqs.iter().cloned().zip(gv.iter().copied()));
    let sol = qmlab::quasimode::solve_on_range(&op, &null, &g).unwrap();
    assert!((&sol.w - &w0).l2_norm() < 1e-8, "{}", (&sol.w - &w0).l2_norm());
}

#[test]
fn range_solve_without_kernel() {
    let split = golden_split();
    let form = transform_quadratic_form(&HessianForm::identity(2), &split).unwrap();
    let r0 = TrigPolynomial::from_terms(1, [(vec![0], Complex64::new(0.8, 0.0)), (vec![1], Complex64::new(0.3, 0.0)), (vec![-1], Complex64::new(0.3, 0.0))]);
    let op = assemble_q_alpha(&form, &[0], &r0).unwrap();
    let null = galerkin_nullspace(&op, 12, DEFAULT_NULL_TOL).unwrap();
    assert!(null.is_empty());
    let g = TrigPolynomial::from_terms(1, (-4i64..=4).map(|k| (vec![k], Complex64::new(1.0 / (1.0 + k.abs() as f64), 0.5))));
    let sol = qmlab::quasimode::solve_on_range(&op, &null, &g).unwrap();
    let freqs = null.frequencies();
    let a = galerkin_matrix(&op, freqs);
    let wv = nalgebra::DVector::from_iterator(freqs.len(), freqs.iter().map(|b| sol.w.coeff(b)));
    let lw = &a * wv;
    let gv = nalgebra::DVector::from_iterator(freqs.len(), freqs.iter().map(|b| g.coeff(b)));
    assert!((lw - gv).norm() < 1e-8);
}

#[test]
fn factory_wavefront_is_stable_and_flow_invariant() {
    let (out, _) = golden_factory();
    let th = Thresholds::default();
    let coarse = nonconcentration_report(&wavefront_mass_map(&out.family, &PhaseSpaceGrid::standard(2, 16)).unwrap(), &th).unwrap();
    let fine = nonconcentration_report(&wavefront_mass_map(&out.family, &PhaseSpaceGrid::standard(2, 32)).unwrap(), &th).unwrap();
    assert!(coarse.pass && fine.pass);
    // every coarse node is also a fine node (index 2i per axis)
    for (i, c) in coarse.zero_section_classes().iter().enumerate() {
        let (a, b) = (i / 16, i % 16);
        let f = fine.zero_section_classes()[(2 * a) * 32 + 2 * b];
        use qmlab::wavefront::NodeClass::*;
        assert!(!matches!((c, f), (In, Out) | (Out, In)));
    }
    for t in [0.1, 0.2] {
        assert!(fine.in_set_shift_invariant(&[2.0 * t, 3.0 * t]));
    }
}

#[test]
fn factory_mass_row_tracks_profile() {
    let (out, _) = golden_factory();
    let grid = PhaseSpaceGrid::standard(2, 32);
    let map = wavefront_mass_map(&out.family, &grid).unwrap();
    let last = out.family.h_ladder().len() - 1;
    let u = &out.family.members()[last];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..grid.x_count() {
        xs.push(map.mass(0, last, i));
        ys.push(u.eval(&grid.x_point(i)).norm_sqr());
    }
    let corr = pearson(&xs, &ys);
    assert!(corr >= 0.99, "{corr}");
    // total mass after quadrature normalization does not exceed |u|^2
    for h_i in 0..out.family.h_ladder().len() {
        for xi_i in 0..grid.xi_points().len() {
            let total: f64 = (0..grid.x_count()).map(|x| map.mass(xi_i, h_i, x)).sum::<f64>() / grid.x_count() as f64;
            assert!(total <= 1.0 + 1e-6, "{total}");
        }
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
