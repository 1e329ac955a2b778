#![allow(dead_code)]

use num::complex::Complex64;
use qmlab::lattice::{IntMatrix, IrrationalityBasis};
use qmlab::nondegeneracy::HessianForm;
use qmlab::quasimode::{build_factory_quasimode, dyadic_ladder, FactoryOutput, FactoryTemplate};
use qmlab::trig::TrigPolynomial;
use qmlab::{FrequencyVector, UnimodularSplitting};

pub fn golden_split() -> UnimodularSplitting {
    let omega = FrequencyVector::from_integers(&[2, 3]).unwrap();
    UnimodularSplitting::new(IntMatrix::from_rows(&[vec![2, 1], vec![3, 2]]), 1, &omega).unwrap()
}

pub fn two_plus_cos() -> TrigPolynomial {
    &TrigPolynomial::constant(1, Complex64::new(2.0, 0.0)) + &TrigPolynomial::cosine(&[1])
}

pub fn golden_factory() -> (FactoryOutput, UnimodularSplitting) {
    let split = golden_split();
    let template = FactoryTemplate {
        basis: IrrationalityBasis::rational(),
        omega: FrequencyVector::from_integers(&[2, 3]).unwrap(),
        hessian: HessianForm::identity(2),
        c: None,
        remainder: None,
    };
    let out =
        build_factory_quasimode(&template, &split, &[0], &two_plus_cos(), dyadic_ladder(4, 12), 16)
            .unwrap();
    (out, split)
}
