//! Coefficient field: Gaussian rationals with automatic demotion to `Complex64`.
//!
//! Exact arithmetic is closed. The first time an irrational quantity is needed
//! (a square root that is not a perfect square, a float literal) the result is
//! a [`Scalar::Float`], and every value computed from it stays float.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A Gaussian rational `re + i·im`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gq {
    pub re: BigRational,
    pub im: BigRational,
}

impl Gq {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Gq { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Gq::new(
            BigRational::from_integer(re.into()),
            BigRational::from_integer(im.into()),
        )
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Gq::new(
            BigRational::new(num.into(), den.into()),
            BigRational::zero(),
        )
    }

    pub fn zero() -> Self {
        Gq::from_ints(0, 0)
    }

    pub fn one() -> Self {
        Gq::from_ints(1, 0)
    }

    pub fn i() -> Self {
        Gq::from_ints(0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Gq::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let d = self.norm_sqr();
        Some(Gq::new(&self.re / &d, -(&self.im / &d)))
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Direct conversion overflows for large numerators; scale first.
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

fn isqrt_exact(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    (&s * &s == *n).then_some(s)
}

/// Exact square root of a non-negative rational when it is a perfect square.
pub fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    let n = isqrt_exact(r.numer())?;
    let d = isqrt_exact(r.denom())?;
    Some(BigRational::new(n, d))
}

/// A coefficient, exact or floating point.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(Gq),
    Float(Complex64),
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Gq::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(Gq::one())
    }

    pub fn i() -> Self {
        Scalar::Exact(Gq::i())
    }

    pub fn int(v: i64) -> Self {
        Scalar::Exact(Gq::from_ints(v, 0))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(Gq::from_ratio(num, den))
    }

    pub fn gauss(re: i64, im: i64) -> Self {
        Scalar::Exact(Gq::from_ints(re, im))
    }

    pub fn float(re: f64, im: f64) -> Self {
        Scalar::Float(Complex64::new(re, im))
    }

    pub fn from_c64(c: Complex64) -> Self {
        Scalar::Float(c)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    /// Structural zero: exact zero, or a float that is identically `0.0`.
    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(g) => g.is_zero(),
            Scalar::Float(c) => c.re == 0.0 && c.im == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Exact(g) => g.re.is_one() && g.im.is_zero(),
            Scalar::Float(c) => c.re == 1.0 && c.im == 0.0,
        }
    }

    /// Zero test with an explicit tolerance; exact values ignore `tol`.
    pub fn approx_zero(&self, tol: f64) -> bool {
        match self {
            Scalar::Exact(g) => g.is_zero(),
            Scalar::Float(c) => c.norm() <= tol,
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Scalar::Exact(g) => g.to_c64(),
            Scalar::Float(c) => *c,
        }
    }

    pub fn to_float(&self) -> Scalar {
        Scalar::Float(self.to_c64())
    }

    pub fn abs(&self) -> f64 {
        self.to_c64().norm()
    }

    pub fn conj(&self) -> Self {
        match self {
            Scalar::Exact(g) => Scalar::Exact(g.conj()),
            Scalar::Float(c) => Scalar::Float(c.conj()),
        }
    }

    pub fn re(&self) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(Gq::new(g.re.clone(), BigRational::zero())),
            Scalar::Float(c) => Scalar::float(c.re, 0.0),
        }
    }

    pub fn im(&self) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(Gq::new(g.im.clone(), BigRational::zero())),
            Scalar::Float(c) => Scalar::float(c.im, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(Gq::new(g.norm_sqr(), BigRational::zero())),
            Scalar::Float(c) => Scalar::float(c.norm_sqr(), 0.0),
        }
    }

    pub fn inv(&self) -> Option<Self> {
        match self {
            Scalar::Exact(g) => g.inv().map(Scalar::Exact),
            Scalar::Float(c) => {
                if c.norm() == 0.0 {
                    None
                } else {
                    Some(Scalar::Float(c.inv()))
                }
            }
        }
    }

    /// Principal square root. Stays exact for perfect squares of
    /// non-negative rationals.
    pub fn sqrt(&self) -> Scalar {
        if let Scalar::Exact(g) = self {
            if g.im.is_zero() && !g.re.is_negative() {
                if let Some(r) = rational_sqrt(&g.re) {
                    return Scalar::Exact(Gq::new(r, BigRational::zero()));
                }
            }
        }
        Scalar::Float(self.to_c64().sqrt())
    }

    pub fn pow(&self, k: u32) -> Scalar {
        let mut acc = Scalar::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Real value if this scalar is real (exactly, or within `tol` for floats).
    pub fn as_real(&self, tol: f64) -> Option<f64> {
        match self {
            Scalar::Exact(g) => g.im.is_zero().then(|| ratio_to_f64(&g.re)),
            Scalar::Float(c) => (c.im.abs() <= tol).then_some(c.re),
        }
    }

    pub fn exact(&self) -> Option<&Gq> {
        match self {
            Scalar::Exact(g) => Some(g),
            Scalar::Float(_) => None,
        }
    }

    /// Exact equality for exact pairs, otherwise `|a-b| <= tol`.
    pub fn close(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => (self.to_c64() - other.to_c64()).norm() <= tol,
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => self.to_c64() == other.to_c64(),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $exact:expr, $float:expr) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact($exact(a, b)),
                    _ => Scalar::Float($float(self.to_c64(), rhs.to_c64())),
                }
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}

binop!(
    Add,
    add,
    |a: &Gq, b: &Gq| Gq::new(&a.re + &b.re, &a.im + &b.im),
    |a: Complex64, b: Complex64| a + b
);
binop!(
    Sub,
    sub,
    |a: &Gq, b: &Gq| Gq::new(&a.re - &b.re, &a.im - &b.im),
    |a: Complex64, b: Complex64| a - b
);
binop!(
    Mul,
    mul,
    |a: &Gq, b: &Gq| Gq::new(&a.re * &b.re - &a.im * &b.im, &a.re * &b.im + &a.im * &b.re),
    |a: Complex64, b: Complex64| a * b
);

/// Division panics on exact division by zero; callers check with [`Scalar::inv`].
impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        match rhs.inv() {
            Some(r) => self * &r,
            None => match (self, rhs) {
                (Scalar::Exact(_), Scalar::Exact(_)) => panic!("exact division by zero"),
                _ => Scalar::Float(self.to_c64() / rhs.to_c64()),
            },
        }
    }
}

impl Div<Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(g) => Scalar::Exact(Gq::new(-g.re.clone(), -g.im.clone())),
            Scalar::Float(c) => Scalar::Float(-c),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::int(v)
    }
}

impl From<Complex64> for Scalar {
    fn from(c: Complex64) -> Self {
        Scalar::Float(c)
    }
}

impl From<Gq> for Scalar {
    fn from(g: Gq) -> Self {
        Scalar::Exact(g)
    }
}

fn fmt_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Gq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_ratio(&self.re)),
            (true, false) => write!(f, "{}*i", fmt_ratio(&self.im)),
            (false, false) => {
                let sign = if self.im.is_negative() { "-" } else { "+" };
                write!(
                    f,
                    "{}{}{}*i",
                    fmt_ratio(&self.re),
                    sign,
                    fmt_ratio(&self.im.abs())
                )
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(g) => write!(f, "{g}"),
            Scalar::Float(c) => write!(f, "{:e}{:+e}i", c.re, c.im),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_is_closed() {
        let a = Scalar::gauss(1, 2);
        let b = Scalar::ratio(1, 3);
        let c = &(&a * &b) / &a;
        assert!(c.is_exact());
        assert_eq!(c, b);
    }

    #[test]
    fn sqrt_demotes_only_when_irrational() {
        assert!(Scalar::ratio(9, 4).sqrt().is_exact());
        assert_eq!(Scalar::ratio(9, 4).sqrt(), Scalar::ratio(3, 2));
        let s = Scalar::int(2).sqrt();
        assert!(!s.is_exact());
        assert!((s.to_c64().re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mixing_modes_gives_float() {
        let x = &Scalar::int(1) + &Scalar::float(0.5, 0.0);
        assert!(!x.is_exact());
        assert!(x.close(&Scalar::float(1.5, 0.0), 0.0));
    }

    #[test]
    fn display_is_stable() {
        assert_eq!(Scalar::gauss(1, -2).to_string(), "1-2*i");
        assert_eq!(Scalar::ratio(-1, 2).to_string(), "-1/2");
        assert_eq!(Scalar::i().to_string(), "1*i");
    }
}
