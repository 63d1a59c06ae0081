use std::collections::BTreeMap;

use fuchs_core::bb::{formal_solve, resonances, BbSystem};
use fuchs_core::jet::Exponent;
use fuchs_core::serial::{jet_from_json, jet_to_json};
use fuchs_core::{vars, Coeff, GaussRat, Jet};
use proptest::prelude::*;

type Q = GaussRat;

fn q() -> impl Strategy<Value = Q> {
    (-9i64..=9, 1i64..=5, -4i64..=4, 1i64..=3).prop_map(|(a, b, c, d)| Q::from_parts(a, b, c, d))
}

fn term(n: usize) -> impl Strategy<Value = (Vec<u16>, Q)> {
    (prop::collection::vec(0u16..=3, n), q())
}

/// `x·y′ = diag·y + b(x, y)` with nonlinear `b`; components may be empty.
fn system() -> impl Strategy<Value = (usize, Vec<Vec<(Vec<u16>, Q)>>)> {
    (1usize..=3).prop_flat_map(|n| {
        let comp = (q(), prop::collection::vec(term(n + 1), 0..4));
        (Just(n), prop::collection::vec(comp, n)).prop_map(|(n, comps)| {
            let terms = comps
                .into_iter()
                .enumerate()
                .map(|(i, (d, rest))| {
                    let mut e = vec![0u16; n + 1];
                    e[i + 1] = 1;
                    let mut t = vec![(e, d)];
                    t.extend(rest.into_iter().filter(|(e, _)| e.iter().sum::<u16>() >= 2));
                    t
                })
                .collect();
            (n, terms)
        })
    })
}

const ORDER: u32 = 8;

fn x_order(j: &Jet<Q>) -> Option<u32> {
    j.terms().map(|(e, _)| e[0] as u32).min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn formal_solutions_solve_the_system((n, terms) in system()) {
        let sys = BbSystem::from_terms(n, ORDER, terms).unwrap();
        let sol = formal_solve(&sys, ORDER, &BTreeMap::new()).unwrap();
        prop_assume!(sol.is_complete());
        for r in sys.residual(&sol.series()).unwrap() {
            prop_assert!(x_order(&r).map_or(true, |k| k > ORDER), "residual {}", r);
        }
    }

    #[test]
    fn relabelling_permutes_the_solution((n, terms) in system(), rot in 0usize..3) {
        let sys = BbSystem::from_terms(n, ORDER, terms.clone()).unwrap();
        prop_assume!(!resonances(&sys.a, ORDER).unwrap().is_resonant());
        // y_i -> y_{(i + rot) mod n}
        let p = |i: usize| (i + rot) % n;
        let mut moved = vec![Vec::new(); n];
        for (i, comp) in terms.into_iter().enumerate() {
            moved[p(i)] = comp
                .into_iter()
                .map(|(e, c)| {
                    let mut f = e.clone();
                    for j in 0..n {
                        f[p(j) + 1] = e[j + 1];
                    }
                    (f, c)
                })
                .collect();
        }
        let other = BbSystem::from_terms(n, ORDER, moved).unwrap();
        let a = formal_solve(&sys, ORDER, &BTreeMap::new()).unwrap();
        let b = formal_solve(&other, ORDER, &BTreeMap::new()).unwrap();
        prop_assert!(a.is_complete() && b.is_complete());
        for (ka, kb) in a.coeffs.iter().zip(&b.coeffs) {
            for i in 0..n {
                prop_assert_eq!(&ka[i], &kb[p(i)]);
            }
        }
    }

    #[test]
    fn linear_forcing_has_the_closed_form(lam in q(), c in q(), j in 1u16..=6) {
        let lam_int = (1..=ORDER as i64).any(|k| lam == Q::from_int(k));
        prop_assume!(!lam_int);
        let sys = BbSystem::from_terms(1, ORDER, vec![vec![(vec![0, 1], lam.clone()), (vec![j, 0], c.clone())]]).unwrap();
        let sol = formal_solve(&sys, ORDER, &BTreeMap::new()).unwrap();
        for (k, a) in sol.coeffs.iter().enumerate() {
            let want = if k + 1 == j as usize {
                c.mul(&Q::from_int(j as i64).sub(&lam).inv().unwrap())
            } else {
                Q::zero()
            };
            prop_assert_eq!(&a[0], &want);
        }
    }

    #[test]
    fn jets_survive_serialization(ts in prop::collection::vec(term(3), 0..10), caps in prop::collection::vec(0u32..6, 3), total in 0u32..9) {
        let mut j = Jet::zero(vars(&["a", "b", "c"]), caps, total);
        for (e, c) in ts {
            let e = Exponent::from_slice(&e);
            if j.is_known(&e) {
                j.add_term(e, c);
            }
        }
        let back: Jet<Q> = jet_from_json(&jet_to_json(&j)).unwrap();
        prop_assert_eq!(back, j);
    }

    #[test]
    fn reciprocal_inverts_units(ts in prop::collection::vec(term(2), 0..6), c0 in q(), total in 0u32..7) {
        prop_assume!(!c0.is_zero());
        let mut j = Jet::zero_total(vars(&["s", "t"]), total);
        for (e, c) in ts {
            j.add_term(Exponent::from_slice(&e), c);
        }
        j.add_term(Exponent::from_slice(&[0, 0]), c0.sub(&j.constant_term()));
        let r = j.reciprocal().unwrap();
        let one = j.mul(&r).unwrap();
        prop_assert!(one.agrees_with(&j.one_like()));
    }
}
