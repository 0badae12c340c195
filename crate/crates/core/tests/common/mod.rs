//! Oracles that avoid the jet engine: Taylor coefficients come from pointwise
//! evaluation on a small polydisc (Cauchy integrals as a DFT), and the
//! partial normalization is redone on those numbers.
#![allow(dead_code)]

use std::f64::consts::PI;

use ballmaps_core::aut::Automorphism;
use ballmaps_core::hermitian::{mobius_c64, singular_values, Matrix};
use ballmaps_core::map::{BoundaryPoint, MapSpec};
use ballmaps_core::normalize::RANK_TOL;
use ballmaps_core::scalar::Scalar;
use nalgebra::DMatrix;
use num_complex::Complex64;

const GRID: usize = 16;
const RADIUS: f64 = 0.05;

/// Values of a map on the torus `|z_k| = |w| = RADIUS`.
pub struct Torus {
    pub n: usize,
    pub values: Vec<(Vec<usize>, Vec<Complex64>)>,
}

impl Torus {
    pub fn sample(n: usize, map: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Torus {
        let dims = n + 1;
        let total = GRID.pow(dims as u32);
        let values = (0..total)
            .map(|mut flat| {
                let idx: Vec<usize> = (0..dims)
                    .map(|_| {
                        let k = flat % GRID;
                        flat /= GRID;
                        k
                    })
                    .collect();
                let pt: Vec<Complex64> = idx
                    .iter()
                    .map(|&k| Complex64::from_polar(RADIUS, 2.0 * PI * k as f64 / GRID as f64))
                    .collect();
                (idx, map(&pt))
            })
            .collect();
        Torus { n, values }
    }

    /// Coefficient of `z^e w^k` in component `c`.
    pub fn coeff(&self, c: usize, e: &[u32], k: u32) -> Complex64 {
        let exps: Vec<u32> = e.iter().copied().chain(std::iter::once(k)).collect();
        let degree: u32 = exps.iter().sum();
        let sum: Complex64 = self
            .values
            .iter()
            .map(|(idx, v)| {
                let phase: f64 = idx
                    .iter()
                    .zip(&exps)
                    .map(|(&a, &m)| (a as u64 * m as u64) as f64)
                    .sum();
                v[c] * Complex64::from_polar(1.0, -2.0 * PI * phase / GRID as f64)
            })
            .sum();
        sum / (self.values.len() as f64 * RADIUS.powi(degree as i32))
    }

    pub fn unit(&self, j: usize) -> Vec<u32> {
        (0..self.n).map(|k| u32::from(k == j)).collect()
    }
}

fn float_iso(lambda: f64, r: f64, a: Vec<Complex64>, u: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let a = a.into_iter().map(Scalar::from_c64).collect();
    Automorphism::isotropy(
        Scalar::float(lambda, 0.0),
        Scalar::float(r, 0.0),
        a,
        Matrix::from_c64(&u),
    )
    .unwrap()
    .matrix
    .to_c64()
}

/// `𝒜` recomputed from pointwise values of `T ∘ τ ∘ F ∘ σ⁰_p`.
pub fn oracle_a(f: &MapSpec, p: &BoundaryPoint) -> DMatrix<Complex64> {
    let f = f.to_siegel().unwrap();
    let (n, big_n) = (f.n, f.big_n);
    let sigma = Automorphism::sigma0(p).matrix.to_c64();
    let tau = Automorphism::tau_f(&f, p).unwrap().matrix.to_c64();
    let composite = |t: &DMatrix<Complex64>| {
        Torus::sample(n, |x| {
            let y = mobius_c64(&sigma, x).unwrap();
            let v = f.eval(&y[..n], y[n]).unwrap();
            mobius_c64(t, &v).unwrap()
        })
    };

    // weight 1: B = ∂f/∂z(0), g_w(0) = σ
    let torus = composite(&tau);
    let s = torus.coeff(big_n, &vec![0; n], 1).re;
    let lambda = 1.0 / s.sqrt();
    let b = DMatrix::from_fn(big_n, n, |a, j| torus.coeff(a, &torus.unit(j), 0));
    let mut rows = DMatrix::<Complex64>::zeros(big_n, big_n);
    for j in 0..n {
        for a in 0..big_n {
            rows[(j, a)] = b[(a, j)].conj() * lambda;
        }
    }
    // complete the first n rows to a unitary matrix by Gram-Schmidt on e_k
    let mut filled = n;
    for k in 0..big_n {
        if filled == big_n {
            break;
        }
        let mut v = DMatrix::<Complex64>::zeros(1, big_n);
        v[(0, k)] = Complex64::new(1.0, 0.0);
        for r in 0..filled {
            let dot: Complex64 = (0..big_n).map(|c| v[(0, c)] * rows[(r, c)].conj()).sum();
            for c in 0..big_n {
                v[(0, c)] -= dot * rows[(r, c)];
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            for c in 0..big_n {
                rows[(filled, c)] = v[(0, c)] / norm;
            }
            filled += 1;
        }
    }
    let t1 = float_iso(lambda, 0.0, vec![Complex64::new(0.0, 0.0); big_n], rows) * &tau;

    // weight 2: w-linear terms of (f, φ)
    let torus = composite(&t1);
    let a: Vec<Complex64> = (0..big_n)
        .map(|c| -torus.coeff(c, &vec![0; n], 1))
        .collect();
    let t2 = float_iso(1.0, 0.0, a, DMatrix::identity(big_n, big_n)) * &t1;

    // weight 4: w² term of g
    let torus = composite(&t2);
    let e = torus.coeff(big_n, &vec![0; n], 2).re;
    let t3 = float_iso(
        1.0,
        -e,
        vec![Complex64::new(0.0, 0.0); big_n],
        DMatrix::identity(big_n, big_n),
    ) * &t2;

    let torus = composite(&t3);
    DMatrix::from_fn(n, n, |j, l| {
        Complex64::new(0.0, -2.0) * torus.coeff(l, &torus.unit(j), 1)
    })
}

pub fn oracle_rank(a: &DMatrix<Complex64>) -> usize {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0).max(1.0);
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// `τ ∘ F ∘ σ` for random exact automorphisms indexed by `seed`.
pub fn conjugate(f: &MapSpec, seed: u64) -> MapSpec {
    let f = f.to_siegel().unwrap();
    let sigma = ballmaps_core::sampling::random_automorphism(f.n, 100 + seed);
    let tau = ballmaps_core::sampling::random_automorphism(f.big_n, 200 + seed);
    f.precompose(&sigma.rational, f.n)
        .unwrap()
        .postcompose(&tau.rational)
        .unwrap()
}
