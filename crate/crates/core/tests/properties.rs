use num_bigint::BigInt;
use proptest::prelude::*;
use qprism::base_prism::BaseRing;
use qprism::divided_powers::{legendre_unit, vp_rational};
use qprism::envelope::EnvRing;
use qprism::expr::{eval_str, EnvVars, NoVars};
use qprism::homalg::{invariant_factors_z, smith_normal_form, zmat_from_i64, zmat_mul, ChainComplex, ZMat};
use qprism::ring::{delta_power_formula, witt2_hom_check, DeltaRing, Ring};
use qprism::sample;

fn elementary(n: usize, ops: &[(usize, usize, i64)]) -> ZMat {
    let mut m: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
    for &(i, j, c) in ops {
        let (i, j) = (i % n, j % n);
        if i != j {
            for k in 0..n {
                m[i][k] += c * m[j][k];
            }
        }
    }
    zmat_from_i64(&m)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-6i64..=6, cols), rows)
}

fn two_term(p: u32) -> impl Strategy<Value = ChainComplex> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(a, b)| (prop::collection::vec(1u32..=3, a), prop::collection::vec(1u32..=3, b), matrix(b, a)))
        .prop_map(move |(e0, e1, mut d)| {
            for (k, row) in d.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    if e1[k] > e0[j] {
                        *x *= (p as i64).pow(e1[k] - e0[j]);
                    }
                }
            }
            ChainComplex::new(p, vec![e0, e1], vec![d]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snf_invariant_under_unimodular(a in matrix(3, 4), ru in prop::collection::vec((0usize..3, 0usize..3, -3i64..=3), 0..6),
                                      rv in prop::collection::vec((0usize..4, 0usize..4, -3i64..=3), 0..6)) {
        let a = zmat_from_i64(&a);
        let b = zmat_mul(&zmat_mul(&elementary(3, &ru), &a), &elementary(4, &rv));
        prop_assert_eq!(invariant_factors_z(&a), invariant_factors_z(&b));
        let s = smith_normal_form(&a);
        prop_assert_eq!(zmat_mul(&zmat_mul(&s.u, &a), &s.v), s.s.clone());
        for i in 1..s.s.len().min(4) {
            let (x, y) = (&s.s[i - 1][i - 1], &s.s[i][i]);
            prop_assert!(x == &BigInt::from(0) && y == &BigInt::from(0) || (y % x) == BigInt::from(0));
        }
    }

    #[test]
    fn cohomology_routes_agree(c in two_term(2)) {
        for q in 0..2 {
            let local = c.cohomology(q).unwrap();
            let z = c.cohomology_via_z(q).unwrap();
            prop_assert_eq!(&local.factors, &z.factors);
            if let Some(n) = c.brute_force_log_order(q) {
                prop_assert_eq!(local.log_order(), n);
            }
        }
    }

    #[test]
    fn cohomology_routes_agree_p3(c in two_term(3)) {
        for q in 0..2 {
            prop_assert_eq!(c.cohomology(q).unwrap().factors, c.cohomology_via_z(q).unwrap().factors);
        }
    }

    #[test]
    fn base_delta_axioms(seed in any::<u64>(), pi in 0usize..3) {
        let (p, n) = [(2, 3), (3, 2), (5, 1)][pi];
        let b = BaseRing::q(p, n).unwrap();
        let mut r = sample::rng(seed);
        let x = sample::base_elt(&mut r, &b, n);
        let y = sample::base_elt(&mut r, &b, n);
        prop_assert!(witt2_hom_check(&b, &x, &y).unwrap());
        let direct = b.delta(&b.pow(&x, 3).unwrap()).unwrap();
        prop_assert!(b.equal(&direct, &delta_power_formula(&b, &x, 3).unwrap()));
        prop_assert!(b.equal(&b.phi(&b.delta(&x).unwrap()).unwrap(), &b.delta(&b.phi(&x).unwrap()).unwrap()));
    }

    #[test]
    fn base_expr_roundtrip(seed in any::<u64>(), p in prop::sample::select(vec![2u32, 3, 5])) {
        let b = BaseRing::q(p, 2).unwrap();
        let mut r = sample::rng(seed);
        let x = sample::base_elt(&mut r, &b, 2);
        let y = eval_str(&b, &b.render(&x), &NoVars).unwrap();
        prop_assert!(b.equal(&x, &y));
    }

    #[test]
    fn env_expr_roundtrip(seed in any::<u64>()) {
        let b = BaseRing::q(3, 1).unwrap();
        let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(1), b.from_int(2)], 1, 9).unwrap();
        let mut r = sample::rng(seed);
        let x = sample::env_elt(&mut r, &e, 4, 9);
        let y = eval_str(&e, &e.render(&x), &EnvVars).unwrap();
        prop_assert!(e.equal(&x, &y));
    }

    #[test]
    fn envelope_delta_routes(seed in any::<u64>(), p in prop::sample::select(vec![2u32, 3])) {
        let b = BaseRing::q(p, 2).unwrap();
        let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(1)], 2, p * p).unwrap();
        let mut r = sample::rng(seed);
        let x = sample::env_elt(&mut r, &e, 3, p);
        prop_assert!(e.equal(&e.delta(&x).unwrap(), &e.delta_via_phi(&x).unwrap()));
    }

    #[test]
    fn legendre_units_are_units(p in prop::sample::select(vec![2u32, 3, 5, 7]), n in 0u64..200) {
        prop_assert_eq!(vp_rational(p, &legendre_unit(p, n)), 0);
    }
}
