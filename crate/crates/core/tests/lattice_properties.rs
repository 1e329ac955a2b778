use num::BigRational;
use proptest::prelude::*;

use qmlab::lattice::{
    find_resonant_mode, hermite_normal_form, int_dot, relation_lattice, split_frequencies,
    BasisNumber, FrequencyVector, IntMatrix,
};

fn rational_pairs(max_n: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-20i64..=20, 1i64..=20), 1..=max_n)
        .prop_filter("nonzero", |v| v.iter().any(|(p, _)| *p != 0))
}

fn rational_omega(max_n: usize) -> impl Strategy<Value = FrequencyVector> {
    rational_pairs(max_n).prop_map(|v| FrequencyVector::from_rationals(&v).unwrap())
}

/// `omega` scaled by the lcm of its denominators.
fn cleared(v: &[(i64, i64)]) -> Vec<i64> {
    let l = v.iter().fold(1i64, |l, &(_, q)| num::integer::lcm(l, q));
    v.iter().map(|&(p, q)| p * (l / q)).collect()
}

/// Two-coordinate numbers `p + q sqrt2` with small integer `p, q`.
fn mixed_omega() -> impl Strategy<Value = FrequencyVector> {
    prop::collection::vec((-4i64..=4, -4i64..=4), 1..=4)
        .prop_filter("nonzero", |v| v.iter().any(|&(p, q)| p != 0 || q != 0))
        .prop_map(|v| {
            FrequencyVector::new(
                v.iter()
                    .map(|&(p, q)| BasisNumber::parse(&[p.to_string(), q.to_string()]).unwrap())
                    .collect(),
            )
            .unwrap()
        })
}

fn box_points(n: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-r..=r).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Rank over Q by fraction-free elimination in i128.
fn elimination_rank(rows: &[Vec<i64>]) -> usize {
    let mut basis: Vec<(usize, Vec<i128>)> = Vec::new();
    for r in rows {
        let mut v: Vec<i128> = r.iter().map(|&x| x as i128).collect();
        for (p, b) in &basis {
            if v[*p] != 0 {
                let (a, c) = (b[*p], v[*p]);
                v = v.iter().zip(b).map(|(&x, &y)| a * x - c * y).collect();
                let g = v.iter().fold(0i128, |g, &x| num::integer::gcd(g, x));
                if g > 1 {
                    v.iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        if let Some(p) = v.iter().position(|&x| x != 0) {
            basis.push((p, v));
        }
    }
    basis.len()
}

fn int_matrix(rows: usize, cols: usize) -> impl Strategy<Value = IntMatrix> {
    prop::collection::vec(prop::collection::vec(-9i64..=9, cols), rows)
        .prop_map(|r| IntMatrix::from_rows(&r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn hnf_is_idempotent_and_factors(a in (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| int_matrix(r, c))) {
        let (h, u) = hermite_normal_form(&a).unwrap();
        prop_assert!(u.is_unimodular());
        prop_assert_eq!(&a.checked_mul(&u).unwrap(), &h);
        let (h2, _) = hermite_normal_form(&h).unwrap();
        prop_assert_eq!(h2, h);
    }

    #[test]
    fn relations_match_brute_force(pairs in rational_pairs(3)) {
        let omega = FrequencyVector::from_rationals(&pairs).unwrap();
        let ints = cleared(&pairs);
        let lat = relation_lattice(&omega).unwrap();
        for g in lat.generators() {
            prop_assert!(omega.dot(g).is_zero());
        }
        let mut enumerated = Vec::new();
        for a in box_points(omega.n(), 6) {
            if a.iter().zip(&ints).map(|(x, y)| x * y).sum::<i64>() == 0 {
                prop_assert!(lat.spans_rationally(&a).unwrap());
                prop_assert!(lat.contains(&a).unwrap());
                enumerated.push(a);
            }
        }
        // a nonzero rational vector has exactly n - 1 independent relations
        prop_assert_eq!(lat.rank(), omega.n() - 1);
        // short relations can only witness part of the lattice, unless the
        // lattice basis itself is short
        let rank = elimination_rank(&enumerated);
        prop_assert!(rank <= lat.rank());
        if lat.generators().iter().all(|g| g.iter().all(|x| x.abs() <= 6)) {
            prop_assert_eq!(rank, lat.rank());
        }
    }

    #[test]
    fn splitting_invariants(omega in prop_oneof![rational_omega(5), mixed_omega()]) {
        let s = split_frequencies(&omega).unwrap();
        prop_assert!(s.matrix().is_unimodular());
        let n = omega.n();
        // M^-1 w, all coordinates exact
        for i in 0..n {
            let row = s.inverse().row(i);
            let v = int_dot(&row, omega.entries());
            if i >= s.k() {
                prop_assert!(v.is_zero());
            } else {
                prop_assert_eq!(&v, &s.omega_tilde()[i]);
            }
        }
        let tilde = FrequencyVector::new(s.omega_tilde().to_vec()).unwrap();
        prop_assert_eq!(relation_lattice(&tilde).unwrap().rank(), 0);
        // first k columns span the saturated orbit lattice
        let orbit = s.orbit_lattice().unwrap();
        prop_assert_eq!(orbit.rank(), s.k());
    }

    #[test]
    fn resonant_mode_is_recovered(omega in prop_oneof![rational_omega(4), mixed_omega()], seed in prop::collection::vec(-30i64..=30, 5)) {
        let s = split_frequencies(&omega).unwrap();
        let alpha: Vec<i64> = seed[..s.k()].to_vec();
        let c = -&int_dot(&alpha, s.omega_tilde());
        let found = find_resonant_mode(s.omega_tilde(), &c, 10_000).unwrap();
        prop_assert_eq!(found, Some(alpha));
    }

    #[test]
    fn off_lattice_constants_have_no_mode(omega in rational_omega(3), den in 2i64..=7) {
        let s = split_frequencies(&omega).unwrap();
        // c shifted by 1/(den * D) with D the common denominator of w~ is never hit
        let mut d = num::BigInt::from(1);
        for w in s.omega_tilde() {
            for q in w.coeffs() {
                d = num::integer::lcm(d, q.denom().clone());
            }
        }
        let shift = BigRational::new(num::BigInt::from(1), d * num::BigInt::from(den));
        let c = BasisNumber::new(vec![shift]).unwrap();
        prop_assert_eq!(find_resonant_mode(s.omega_tilde(), &c, 10_000).unwrap(), None);
    }

    #[test]
    fn number_parse_round_trip(p in -1000i64..1000, q in 1i64..1000) {
        let x = BasisNumber::rational(p, q, 1);
        let back = BasisNumber::parse(&x.to_strings()).unwrap();
        prop_assert_eq!(back, x);
    }
}
