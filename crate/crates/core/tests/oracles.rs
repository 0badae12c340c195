//! Jet-free cross-checks of the jet engine and the rank computation.

mod common;

use ballmaps_core::aut::Automorphism;
use ballmaps_core::hermitian::mobius_c64;
use ballmaps_core::map::fixtures;
use ballmaps_core::normalize::{geometric_rank, hmono, RANK_TOL};
use ballmaps_core::sampling::{boundary_points, regular_points};
use common::{oracle_a, oracle_rank, Torus};
use nalgebra::DMatrix;

#[test]
fn dft_coefficients_match_translated_jets() {
    let f = fixtures::whitney();
    for p in boundary_points(1, 3, 11) {
        let jets = f.jets_at(&p, 4).unwrap().holomorphic;
        let sigma = Automorphism::sigma0(&p).matrix.to_c64();
        let tau = Automorphism::tau_f(&f, &p).unwrap().matrix.to_c64();
        let torus = Torus::sample(1, |x| {
            let y = mobius_c64(&sigma, x).unwrap();
            let v = f.eval(&y[..1], y[1]).unwrap();
            mobius_c64(&tau, &v).unwrap()
        });
        for c in 0..3 {
            for (zj, wk) in [
                (0, 0),
                (1, 0),
                (0, 1),
                (2, 0),
                (1, 1),
                (3, 0),
                (0, 2),
                (2, 1),
                (4, 0),
            ] {
                let jet = jets.entries[c].coeff(&hmono(1, &[(0, zj)], wk)).to_c64();
                let dft = torus.coeff(c, &[zj], wk);
                assert!(
                    (jet - dft).norm() < 1e-8 * (1.0 + jet.norm()),
                    "c={c} z^{zj} w^{wk}: {jet} vs {dft}"
                );
            }
        }
    }
}

#[test]
fn whitney_rank_matches_dense_oracle() {
    let f = fixtures::whitney();
    for p in regular_points(&f, 5, 0).unwrap() {
        let oracle = oracle_a(&f, &p);
        let report = geometric_rank(&f, &p, RANK_TOL).unwrap();
        assert_eq!(oracle_rank(&oracle), 1);
        assert_eq!(report.rank, 1);
        let lib = DMatrix::from_fn(1, 1, |j, l| report.matrix[j][l]);
        assert!(
            (lib - &oracle).norm() < 1e-7 * (1.0 + oracle.norm()),
            "{:?} vs {oracle}",
            report.matrix
        );
    }
}

#[test]
fn generalized_whitney_rank_matches_dense_oracle() {
    let f = fixtures::whitney2();
    for p in regular_points(&f, 2, 0).unwrap() {
        let oracle = oracle_a(&f, &p);
        let report = geometric_rank(&f, &p, RANK_TOL).unwrap();
        assert_eq!(oracle_rank(&oracle), 1);
        assert_eq!(report.rank, 1);
        let lib = DMatrix::from_fn(2, 2, |j, l| report.matrix[j][l]);
        assert!(
            (lib - &oracle).norm() < 1e-6 * (1.0 + oracle.norm()),
            "{:?} vs {oracle}",
            report.matrix
        );
    }
}

#[test]
fn linear_rank_oracle_is_zero() {
    let f = fixtures::linear(2, 3);
    for p in boundary_points(2, 3, 2) {
        let oracle = oracle_a(&f, &p);
        assert_eq!(oracle_rank(&oracle), 0);
        assert!(oracle.norm() < 1e-9);
    }
}

#[test]
fn boundary_values_satisfy_the_target_equation() {
    for f in [
        fixtures::linear(1, 2),
        fixtures::whitney(),
        fixtures::whitney2(),
        fixtures::whitney_normalized(),
    ] {
        let f = f.to_siegel().unwrap();
        for p in boundary_points(f.n, 10, 4) {
            let (z, w) = p.to_c64();
            let Ok(v) = f.eval(&z, w) else { continue };
            let (g, rest) = v.split_last().unwrap();
            let defect = g.im - rest.iter().map(|x| x.norm_sqr()).sum::<f64>();
            assert!(
                defect.abs() < 1e-10 * (1.0 + g.norm()),
                "{:?} at {:?}: {defect:e}",
                f.name,
                p.to_c64()
            );
        }
    }
    let bad = fixtures::non_proper();
    let p = boundary_points(1, 1, 4).remove(0);
    let (z, w) = p.to_c64();
    let v = bad.eval(&z, w).unwrap();
    assert!((v[2].im - v[0].norm_sqr()).abs() > 1e-3);
}
