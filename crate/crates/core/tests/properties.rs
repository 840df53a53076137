use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use cfdim_core::arith::{cmp_scaled_pow, ceil_scaled_pow, floor_scaled_pow, int, ratio, Rational};
use cfdim_core::cantor::{sample_point, CantorSchedule, Construction, LevelTree};
use cfdim_core::cf::{cassels_check, cf_expand_full, dirichlet_solve, reversed_value, word_value, CfWord};
use cfdim_core::classify::{big_psi_to_psi, psi_to_big_psi_spec, Poly, RationalFn};
use cfdim_core::geometry::{child_layout, cylinder};
use cfdim_core::pressure::{assign_measure, normalization_audit, pressure_sum, solve_s};
use cfdim_core::stats::compensated_sum;

fn quotients(max_len: usize, cap: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1..=cap, 1..=max_len)
}

fn unit_rational() -> impl Strategy<Value = Rational> {
    (2i64..=1_000_000).prop_flat_map(|d| (0..d).prop_map(move |n| Rational::new(n.into(), d.into())))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expansion_inverts_word_value(mut w in quotients(12, 50)) {
        let last = w.len() - 1;
        w[last] = w[last].max(2);
        let word = CfWord::new(&w).unwrap();
        let back = cf_expand_full(&word_value(&word)).unwrap();
        prop_assert_eq!(back.quotients(), &w[..]);
    }

    #[test]
    fn reversed_word_is_continuant_ratio(w in quotients(12, 50)) {
        let word = CfWord::new(&w).unwrap();
        for n in 1..=w.len() {
            let expected = Rational::new(word.q(n as isize - 1).clone(), word.q(n as isize).clone());
            prop_assert_eq!(reversed_value(&word, n).unwrap(), expected);
        }
    }

    #[test]
    fn determinant_and_growth(w in quotients(20, 1000)) {
        let word = CfWord::new(&w).unwrap();
        for n in 1..=w.len() as isize {
            let det = word.p(n - 1) * word.q(n) - word.p(n) * word.q(n - 1);
            let sign = if n % 2 == 0 { 1 } else { -1 };
            prop_assert_eq!(det, BigInt::from(sign));
            let q = word.q(n);
            prop_assert!(q * q * BigInt::from(2) >= BigInt::one() << (n as usize));
        }
    }

    #[test]
    fn cassels_residual_vanishes(x in unit_rational()) {
        let len = cf_expand_full(&x).unwrap().len();
        for n in 1..len {
            let r = cassels_check(&x, n).unwrap();
            prop_assert!(r.residual.is_zero());
        }
    }

    #[test]
    fn dirichlet_pair_is_valid(x in unit_rational(), t_num in 2i64..100_000, t_den in 1i64..50) {
        let t = Rational::new(t_num.into(), t_den.into());
        prop_assume!(t > int(1));
        let (p, q) = dirichlet_solve(&x, &t).unwrap();
        let q_r = Rational::from_integer(q.clone());
        prop_assert!(q >= BigInt::one());
        prop_assert!(q_r < t);
        let err = (&q_r * &x - Rational::from_integer(p)).abs();
        prop_assert!(err <= Rational::one() / &t);
    }

    #[test]
    fn children_tile_left_to_right(w in quotients(6, 20), lo in 1u64..10, span in 0u64..10) {
        let word = CfWord::new(&w).unwrap();
        let kids = child_layout(&word, lo, lo + span).unwrap();
        let parent = cylinder(&word).interval;
        for pair in kids.windows(2) {
            prop_assert_eq!(&pair[0].interval.right, &pair[1].interval.left);
            prop_assert!(pair[0].interval.is_disjoint(&pair[1].interval));
        }
        // Rational endpoints have two expansions, so the open/closed flags can disagree
        // between parent and child at a shared endpoint.
        for k in &kids {
            prop_assert!(parent.closure_contains(&k.interval));
        }
    }

    #[test]
    fn scaled_power_floor_and_ceil_bracket(a in 1u64..1_000_000, c_num in 1i64..20, c_den in 1i64..20,
                                          e_num in 0i64..12, e_den in 1i64..6) {
        let base = BigUint::from(a);
        let c = Rational::new(c_num.into(), c_den.into());
        let e = Rational::new(e_num.into(), e_den.into());
        let fl = floor_scaled_pow(&c, &base, &e);
        let ce = ceil_scaled_pow(&c, &base, &e);
        prop_assert_ne!(cmp_scaled_pow(&fl, &c, &base, &e), Ordering::Greater);
        prop_assert_ne!(cmp_scaled_pow(&(&fl + 1u32), &c, &base, &e), Ordering::Less);
        prop_assert_ne!(cmp_scaled_pow(&ce, &c, &base, &e), Ordering::Less);
        prop_assert!(&ce - &fl <= BigUint::one());
    }

    #[test]
    fn psi_relation_round_trips(t in 1i64..10_000, num in 1i64..1000) {
        // ψ(t) = num / (t (num + 1000)) keeps tψ < 1.
        let t = Rational::from_integer(t.into());
        let psi = Rational::new(num.into(), 1.into()) / (&t * int(num + 1000));
        let big_psi = int(1) / (int(1) - &t * &psi) - int(1);
        prop_assert!(big_psi.is_positive());
        prop_assert_eq!(big_psi_to_psi(&big_psi, &t), psi);
    }

    #[test]
    fn pressure_sum_decreases_in_s(m in 2u64..8, s in 0.05f64..0.95) {
        let tau = ratio(1, 2);
        let lo = pressure_sum(2, m, &tau, s).unwrap();
        let hi = pressure_sum(2, m, &tau, s + 0.04).unwrap();
        prop_assert!(hi < lo);
    }

    #[test]
    fn compensated_sum_matches_exact(xs in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let exact: Rational = xs.iter().map(|&x| Rational::from_float(x).unwrap()).sum();
        let approx = compensated_sum(xs.iter().copied());
        let tol = 1e-9 * xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((approx - cfdim_core::arith::to_f64(&exact)).abs() <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn samples_are_members_and_nest(m in 2u64..6, seed in any::<u64>(), depth in 1usize..10) {
        let s = CantorSchedule::new(m, 2, int(1), vec![1, 1]).unwrap();
        let word = sample_point(&s, depth, seed).unwrap();
        prop_assert!(s.is_member(&word).unwrap());
        let mut outer: Option<cfdim_core::Interval> = None;
        for n in 1..=depth {
            let prefix = word.prefix(n);
            let rule = s.child_rule(&prefix).unwrap();
            let hull = cfdim_core::geometry::hull_for_rule(&prefix, &rule).unwrap();
            if let Some(o) = &outer {
                prop_assert!(o.closure_contains(&hull));
            }
            outer = Some(hull);
        }
    }

    #[test]
    fn measure_is_conserved(m in 2u64..5, l in 2usize..4) {
        let s = CantorSchedule::new(m, l, int(1), vec![1]).unwrap();
        let sol = solve_s(l, m, &int(1), 1e-10).unwrap();
        let depth = (s.windows()[0] + 1).min(7);
        let measure = assign_measure(&s, &sol, depth, 500_000).unwrap();
        for n in 0..=depth {
            let r = normalization_audit(&measure, n);
            prop_assert!(r.passed, "{:?}", r);
        }
    }

    #[test]
    fn tree_levels_are_sorted_and_disjoint(m in 2u64..5) {
        let s = CantorSchedule::new(m, 2, int(1), vec![1]).unwrap();
        let tree = LevelTree::build(&s, 5, 200_000).unwrap();
        for n in 1..=5 {
            for pair in tree.level(n).windows(2) {
                prop_assert!(pair[0].interval.right < pair[1].interval.left);
            }
        }
    }
}

#[test]
fn derived_psi_needs_t_psi_below_one() {
    // ψ(t) = 1/t sits on the boundary tψ = 1.
    let psi = RationalFn::new(Poly::new(vec![int(1)]), Poly::new(vec![int(0), int(1)])).unwrap();
    assert!(psi_to_big_psi_spec(psi).is_err());
}
