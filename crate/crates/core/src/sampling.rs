//! Deterministic sample points and random automorphisms.
//!
//! Boundary points come from a Halton sequence: point `k` of stream `seed`
//! uses index `1 + 4099·seed + k` and the first `2n+1` primes as bases, so
//! every coordinate is an exact dyadic-like rational. `z_j = (2h − 1) +
//! i(2h' − 1)` and `u = 2h'' − 1`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aut::Automorphism;
use crate::error::Result;
use crate::hermitian::Matrix;
use crate::map::{BoundaryPoint, MapSpec};
use crate::scalar::{Gq, Scalar};

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];
const STREAM_STRIDE: u64 = 4099;

/// Radical inverse of `index` in `base`, as `(numerator, denominator)`.
pub fn radical_inverse(mut index: u64, base: u64) -> (u64, u64) {
    let (mut num, mut den) = (0u64, 1u64);
    while index > 0 {
        num = num * base + index % base;
        den *= base;
        index /= base;
    }
    (num, den)
}

fn centered(index: u64, base: u64) -> BigRational {
    let (num, den) = radical_inverse(index, base);
    BigRational::new(
        BigInt::from(2 * num as i128 - den as i128),
        BigInt::from(den),
    )
}

fn real(r: BigRational) -> Scalar {
    Scalar::Exact(Gq::new(r, BigRational::from_integer(0.into())))
}

/// The `k`-th Halton boundary point of a stream.
pub fn halton_point(n: usize, seed: u64, k: u64) -> BoundaryPoint {
    assert!(
        2 * n < PRIMES.len(),
        "dimension too large for the Halton table"
    );
    let index = 1 + STREAM_STRIDE * seed + k;
    let z0 = (0..n)
        .map(|j| {
            Scalar::Exact(Gq::new(
                centered(index, PRIMES[2 * j]),
                centered(index, PRIMES[2 * j + 1]),
            ))
        })
        .collect();
    let u0 = real(centered(index, PRIMES[2 * n]));
    BoundaryPoint::new(z0, u0).expect("real u0")
}

pub fn boundary_points(n: usize, count: usize, seed: u64) -> Vec<BoundaryPoint> {
    (0..count as u64)
        .map(|k| halton_point(n, seed, k))
        .collect()
}

/// Halton points where the Siegel form of `f` is finite and moderate. Points
/// with a vanishing `z`-coordinate are skipped; they sit on the thin sets
/// where ranks of the standard fixtures drop.
pub fn regular_points(f: &MapSpec, count: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
    let f = f.to_siegel()?;
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count && k < 64 * count as u64 + 64 {
        let p = halton_point(f.n, seed, k);
        k += 1;
        if p.z0.iter().any(|z| z.re().is_zero() || z.im().is_zero()) {
            continue;
        }
        let (z, w) = p.to_c64();
        let ok = f
            .eval(&z, w)
            .is_ok_and(|v| v.iter().all(|x| x.is_finite() && x.norm() < 1e4));
        if ok {
            out.push(p);
        }
    }
    Ok(out)
}

fn small_rational(rng: &mut ChaCha8Rng, range: i64, den: i64) -> Scalar {
    Scalar::ratio(rng.gen_range(-range..=range), den)
}

/// `(1 − t² + 2it)/(1 + t²)`, an exact unit complex number.
fn unit_phase(t: &Scalar) -> Scalar {
    let t2 = t * t;
    let den = (Scalar::one() + t2.clone()).inv().expect("1 + t^2 > 0");
    &(&(Scalar::one() - t2) + &(Scalar::gauss(0, 2) * t.clone())) * &den
}

/// Exact special unitary `m × m` matrix from Givens rotations and paired
/// phases with rational entries.
pub fn random_special_unitary(m: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut u = Matrix::identity(m);
    for k in 0..m.saturating_sub(1) {
        let t = small_rational(rng, 8, 8);
        let t2 = &t * &t;
        let den = (Scalar::one() + t2.clone()).inv().expect("positive");
        let c = &(Scalar::one() - t2) * &den;
        let s = &(Scalar::int(2) * t) * &den;
        let mut g = Matrix::identity(m);
        g[(k, k)] = c.clone();
        g[(k + 1, k + 1)] = c;
        g[(k, k + 1)] = -&s;
        g[(k + 1, k)] = s;
        let e = unit_phase(&small_rational(rng, 8, 8));
        let mut d = Matrix::identity(m);
        d[(k, k)] = e.clone();
        d[(k + 1, k + 1)] = e.conj();
        u = u.mul(&g).mul(&d);
    }
    u
}

/// A random exact element of `SU(m+1, 1)` acting on `∂ℍ^{m+1}`: a unimodular
/// isotropy followed by a translation `σ⁰_p`.
pub fn random_automorphism(m: usize, seed: u64) -> Automorphism {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_special_unitary(m, &mut rng);
    let a: Vec<Scalar> = (0..m)
        .map(|_| &small_rational(&mut rng, 4, 8) + &(Scalar::i() * small_rational(&mut rng, 4, 8)))
        .collect();
    let r = small_rational(&mut rng, 4, 8);
    let iso = Automorphism::isotropy(Scalar::one(), r, a, u).expect("valid isotropy parameters");
    let z0 = (0..m)
        .map(|_| &small_rational(&mut rng, 4, 8) + &(Scalar::i() * small_rational(&mut rng, 4, 8)))
        .collect();
    let p = BoundaryPoint::new(z0, small_rational(&mut rng, 4, 8)).expect("real u0");
    Automorphism::sigma0(&p)
        .compose(&iso)
        .expect("matching sizes")
}

/// Floating-point evaluation points in the Siegel domain (`Im w ≥ |z|²`).
pub fn domain_points(n: usize, count: usize, seed: u64) -> Vec<(Vec<Complex64>, Complex64)> {
    boundary_points(n, count, seed)
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let (z, w) = p.to_c64();
            let lift = 0.25 * (k % 3) as f64;
            (z, w + Complex64::new(0.0, lift))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::membership;

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), (1, 2));
        assert_eq!(radical_inverse(6, 2), (3, 8));
        assert_eq!(radical_inverse(5, 3), (7, 9));
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        assert_eq!(boundary_points(2, 5, 0), boundary_points(2, 5, 0));
        assert_ne!(boundary_points(1, 3, 0), boundary_points(1, 3, 1));
        assert!(boundary_points(2, 5, 3).iter().all(BoundaryPoint::is_exact));
    }

    #[test]
    fn random_automorphisms_are_exactly_special() {
        for seed in 0..5 {
            let a = random_automorphism(2, seed);
            let m = membership(&a.matrix, 1e-12).unwrap();
            assert!(m.exact && m.is_su, "{m:?}");
        }
    }
}
