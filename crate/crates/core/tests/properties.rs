use ballmaps_core::aut::Automorphism;
use ballmaps_core::expr::Expr;
use ballmaps_core::hermitian::{form_eval, membership, Matrix};
use ballmaps_core::jet::{Jet, Monomial, Var};
use ballmaps_core::map::BoundaryPoint;
use ballmaps_core::sampling::{halton_point, random_automorphism};
use ballmaps_core::scalar::Scalar;
use num_complex::Complex64;
use proptest::prelude::*;

const ORDER: u32 = 4;

fn gauss() -> impl Strategy<Value = Scalar> {
    (-4i64..=4, -4i64..=4, 1i64..=3)
        .prop_map(|(a, b, d)| &Scalar::gauss(a, b) * &Scalar::ratio(1, d))
}

fn monomial(n: usize) -> impl Strategy<Value = Monomial> {
    (
        prop::collection::vec(0u32..=2, n),
        prop::collection::vec(0u32..=2, n),
        0u32..=2,
    )
        .prop_map(|(z, zbar, u)| Monomial { z, zbar, u })
}

fn jet(n: usize) -> impl Strategy<Value = Jet> {
    prop::collection::vec((monomial(n), gauss()), 0..6)
        .prop_map(move |terms| Jet::from_terms(n, ORDER, terms))
}

fn holomorphic_jet(n: usize) -> impl Strategy<Value = Jet> {
    prop::collection::vec(
        (prop::collection::vec(0u32..=2, n), 0u32..=1, gauss()),
        0..5,
    )
    .prop_map(move |terms| {
        Jet::from_terms(
            n,
            ORDER,
            terms.into_iter().map(|(z, u, c)| {
                (
                    Monomial {
                        z,
                        zbar: vec![0; n],
                        u,
                    },
                    c,
                )
            }),
        )
    })
}

/// A jet with no constant term, suitable as a substitution argument.
fn vanishing_jet(n: usize) -> impl Strategy<Value = Jet> {
    holomorphic_jet(n).prop_map(|j| {
        let c = j.constant_term();
        j.add_scalar(&-c)
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<Scalar>> {
    prop::collection::vec(gauss(), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jet_ring_axioms(a in jet(2), b in jet(2), c in jet(2)) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.add(&b).mul(&c), a.mul(&c).add(&b.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert_eq!(a.mul(&Jet::constant(2, ORDER, Scalar::one())), a.clone());
    }

    #[test]
    fn truncation_is_a_ring_map(a in jet(2), b in jet(2), k in 0u32..ORDER) {
        prop_assert_eq!(a.mul(&b).truncate(k), a.truncate(k).mul(&b.truncate(k)));
        prop_assert_eq!(a.add(&b).truncate(k), a.truncate(k).add(&b.truncate(k)));
    }

    #[test]
    fn conjugation_is_an_involutive_ring_map(a in jet(2), b in jet(2)) {
        prop_assert_eq!(a.conj().conj(), a.clone());
        prop_assert_eq!(a.mul(&b).conj(), a.conj().mul(&b.conj()));
        prop_assert!(a.add(&a.conj()).sub(&a.real_part().scale(&Scalar::int(2))).is_zero());
    }

    #[test]
    fn partial_derivatives_commute(a in jet(2)) {
        let vars = Var::cobasis(2);
        for &x in &vars {
            for &y in &vars {
                prop_assert_eq!(a.differentiate(x).differentiate(y), a.differentiate(y).differentiate(x));
            }
        }
    }

    #[test]
    fn leibniz_rule_up_to_truncation(a in jet(1), b in jet(1)) {
        for var in Var::cobasis(1) {
            let k = ORDER - var.weight();
            let lhs = a.mul(&b).differentiate(var).truncate(k);
            let rhs = a.differentiate(var).mul(&b).add(&a.mul(&b.differentiate(var))).truncate(k);
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn composition_respects_truncation(f in holomorphic_jet(2), g0 in vanishing_jet(2), g1 in vanishing_jet(2), k in 1u32..ORDER) {
        let zero = Jet::zero(2, ORDER);
        let args = [g0, g1, zero.clone(), zero, Jet::zero(2, ORDER)];
        let wide = f.compose(&args, ORDER).unwrap().truncate(k);
        let narrow = f.compose(&args, k).unwrap();
        prop_assert_eq!(wide, narrow);
    }

    #[test]
    fn identity_substitution_is_trivial(f in holomorphic_jet(2)) {
        let args = [
            Jet::var(2, ORDER, Var::Z(0)),
            Jet::var(2, ORDER, Var::Z(1)),
            Jet::var(2, ORDER, Var::ZBar(0)),
            Jet::var(2, ORDER, Var::ZBar(1)),
            Jet::var(2, ORDER, Var::U),
        ];
        prop_assert_eq!(f.compose(&args, ORDER).unwrap(), f);
    }

    #[test]
    fn exact_and_float_evaluation_agree(c in prop::collection::vec(gauss(), 5), x in point(3)) {
        // (c0 z0 + c1 z1² + w) / (3 + c2 z0 w) − c3 w + c4
        let num = Expr::add(
            Expr::add(Expr::mul(Expr::c(c[0].clone()), Expr::var(0)), Expr::mul(Expr::c(c[1].clone()), Expr::pow(Expr::var(1), 2))),
            Expr::var(2),
        );
        let den = Expr::add(Expr::int(3), Expr::mul(Expr::c(c[2].clone()), Expr::mul(Expr::var(0), Expr::var(2))));
        let e = Expr::add(Expr::sub(Expr::div(num, den), Expr::mul(Expr::c(c[3].clone()), Expr::var(2))), Expr::c(c[4].clone()));
        let xf: Vec<Complex64> = x.iter().map(Scalar::to_c64).collect();
        match (e.eval_scalar(&x), e.eval(&xf)) {
            (Ok(exact), Ok(float)) => {
                prop_assert!(exact.is_exact());
                prop_assert!((exact.to_c64() - float).norm() <= 1e-9 * (1.0 + float.norm()));
            }
            (Err(_), _) => {}
            (Ok(exact), Err(_)) => prop_assert!(false, "float pole missed exact value {exact}"),
        }
    }

    #[test]
    fn form_is_hermitian(z in point(4), zp in point(4), s in gauss()) {
        let lhs = form_eval(&z, &zp).unwrap();
        let rhs = form_eval(&zp, &z).unwrap().conj();
        prop_assert_eq!(lhs.clone(), rhs);
        let scaled: Vec<Scalar> = z.iter().map(|x| x * &s).collect();
        prop_assert_eq!(form_eval(&scaled, &zp).unwrap(), &s * &lhs);
    }

    #[test]
    fn automorphisms_are_closed_under_products(s1 in 0u64..500, s2 in 0u64..500) {
        let (a, b) = (random_automorphism(2, s1), random_automorphism(2, s2));
        let ab = a.compose(&b).unwrap();
        let m = membership(&ab.matrix, 1e-12).unwrap();
        prop_assert!(m.exact && m.is_su);
        let inv = a.inverse().unwrap();
        prop_assert_eq!(inv.matrix.mul(&a.matrix), Matrix::identity(4));
    }

    #[test]
    fn dilations_multiply(l1 in 1i64..6, l2 in 1i64..6, k in 0u64..20) {
        let dil = |l: Scalar| Automorphism::isotropy(l, Scalar::zero(), vec![Scalar::zero(); 2], Matrix::identity(2)).unwrap();
        let m1 = membership(&dil(Scalar::ratio(l1, 3)).matrix, 1e-12).unwrap();
        prop_assert!(m1.is_glq);
        prop_assert_eq!(m1.is_su, l1 == 3);
        let p = halton_point(2, 7, k);
        let mut pt = p.z0.clone();
        pt.push(p.w0());
        let product = dil(Scalar::ratio(l1, 3)).compose(&dil(Scalar::ratio(l2, 3))).unwrap();
        let direct = dil(Scalar::ratio(l1 * l2, 9));
        prop_assert_eq!(product.apply(&pt).unwrap(), direct.apply(&pt).unwrap());
    }

    #[test]
    fn automorphisms_preserve_the_hypersurface(seed in 0u64..500, k in 0u64..50) {
        let a = random_automorphism(2, seed);
        let p = halton_point(2, 3, k);
        let mut pt = p.z0.clone();
        pt.push(p.w0());
        if let Ok(image) = a.apply(&pt) {
            let q = BoundaryPoint::from_zw(image[..2].to_vec(), image[2].clone(), 0.0);
            prop_assert!(q.is_ok(), "image left the hypersurface");
            prop_assert_eq!(a.apply_rational(&pt).unwrap(), image);
        }
    }

    #[test]
    fn mobius_action_composes(s1 in 0u64..500, s2 in 0u64..500, k in 0u64..50) {
        let (a, b) = (random_automorphism(1, s1), random_automorphism(1, s2));
        let p = halton_point(1, 5, k);
        let pt = vec![p.z0[0].clone(), p.w0()];
        if let (Ok(inner), Ok(direct)) = (b.apply(&pt), a.compose(&b).unwrap().apply(&pt)) {
            if let Ok(outer) = a.apply(&inner) {
                prop_assert_eq!(outer, direct);
            }
        }
    }
}
