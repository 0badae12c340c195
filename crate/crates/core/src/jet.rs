//! Weighted truncated polynomials ("jets") in `z, z̄, u`.
//!
//! `z_j` and `z̄_j` carry weight 1 and `u` weight 2. A jet of truncation order
//! `m` stores every term of weight `<= m` and represents its function up to
//! `o_wt(m)`. Holomorphic jets in `(z, w)` reuse the same storage with the
//! `u` slot standing for `w` (see [`Chart`]).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Truncation order used for exact polynomials that must never be truncated.
pub const UNBOUNDED: u32 = u32::MAX / 4;

/// Default truncation order: the largest weight in the normal forms.
pub const DEFAULT_ORDER: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub z: Vec<u32>,
    pub zbar: Vec<u32>,
    pub u: u32,
}

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial {
            z: vec![0; n],
            zbar: vec![0; n],
            u: 0,
        }
    }

    pub fn arity(&self) -> usize {
        self.z.len()
    }

    pub fn weight(&self) -> u32 {
        self.z.iter().sum::<u32>() + self.zbar.iter().sum::<u32>() + 2 * self.u
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            z: self.z.iter().zip(&other.z).map(|(a, b)| a + b).collect(),
            zbar: self
                .zbar
                .iter()
                .zip(&other.zbar)
                .map(|(a, b)| a + b)
                .collect(),
            u: self.u + other.u,
        }
    }

    pub fn conj(&self) -> Monomial {
        Monomial {
            z: self.zbar.clone(),
            zbar: self.z.clone(),
            u: self.u,
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        self.zbar.iter().all(|&e| e == 0)
    }

    fn exponent(&self, var: Var) -> u32 {
        match var {
            Var::Z(i) => self.z[i],
            Var::ZBar(i) => self.zbar[i],
            Var::U => self.u,
        }
    }

    fn exponent_mut(&mut self, var: Var) -> &mut u32 {
        match var {
            Var::Z(i) => &mut self.z[i],
            Var::ZBar(i) => &mut self.zbar[i],
            Var::U => &mut self.u,
        }
    }
}

/// Graded lexicographic order by `(weight, z, zbar, u)`.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.z.cmp(&other.z))
            .then_with(|| self.zbar.cmp(&other.zbar))
            .then_with(|| self.u.cmp(&other.u))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A chart variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    ZBar(usize),
    U,
}

impl Var {
    pub fn weight(self) -> u32 {
        match self {
            Var::U => 2,
            _ => 1,
        }
    }

    /// The `2n+1` chart variables in cobasis order `z_1..z_n, z̄_1..z̄_n, u`.
    pub fn cobasis(n: usize) -> Vec<Var> {
        (0..n)
            .map(Var::Z)
            .chain((0..n).map(Var::ZBar))
            .chain(std::iter::once(Var::U))
            .collect()
    }
}

/// Which coordinates a jet is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// Holomorphic `(z, w)`; the `u` slot holds `w`.
    Holomorphic,
    /// Real chart `(z, z̄, u)` of the Heisenberg hypersurface.
    Heisenberg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    arity: usize,
    order: u32,
    terms: BTreeMap<Monomial, Scalar>,
}

impl Jet {
    pub fn zero(arity: usize, order: u32) -> Self {
        Jet {
            arity,
            order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, order: u32, c: Scalar) -> Self {
        let mut j = Jet::zero(arity, order);
        j.add_term(Monomial::one(arity), c);
        j
    }

    pub fn var(arity: usize, order: u32, var: Var) -> Self {
        Jet::monomial(arity, order, var_monomial(arity, var), Scalar::one())
    }

    pub fn monomial(arity: usize, order: u32, m: Monomial, c: Scalar) -> Self {
        assert_eq!(m.arity(), arity, "monomial arity");
        let mut j = Jet::zero(arity, order);
        j.add_term(m, c);
        j
    }

    pub fn from_terms(
        arity: usize,
        order: u32,
        terms: impl IntoIterator<Item = (Monomial, Scalar)>,
    ) -> Self {
        let mut j = Jet::zero(arity, order);
        for (m, c) in terms {
            assert_eq!(m.arity(), arity, "monomial arity");
            j.add_term(m, c);
        }
        j
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Scalar::is_exact)
    }

    pub fn is_holomorphic(&self) -> bool {
        self.terms.keys().all(Monomial::is_holomorphic)
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&Monomial::one(self.arity))
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(Scalar::abs).fold(0.0, f64::max)
    }

    /// Every coefficient vanishes (exactly for exact coefficients).
    pub fn approx_zero(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.approx_zero(tol))
    }

    fn add_term(&mut self, m: Monomial, c: Scalar) {
        if m.weight() > self.order || c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get() + &c;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    fn check(&self, other: &Jet) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::Structural(format!(
                "jet arity mismatch: {} vs {}",
                self.arity, other.arity
            )));
        }
        Ok(())
    }

    pub fn truncate(&self, order: u32) -> Jet {
        let mut j = Jet::zero(self.arity, order.min(self.order));
        for (m, c) in &self.terms {
            if m.weight() <= j.order {
                j.terms.insert(m.clone(), c.clone());
            }
        }
        j
    }

    /// Raise the nominal truncation order without adding terms. Only
    /// meaningful for jets that are exact polynomials.
    pub fn with_order(mut self, order: u32) -> Jet {
        if order < self.order {
            return self.truncate(order);
        }
        self.order = order;
        self
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        let mut out = self.truncate(self.order.min(other.order));
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        let order = self.order.min(other.order);
        let mut out = Jet::zero(self.arity, order);
        for (ma, ca) in &self.terms {
            let wa = ma.weight();
            if wa > order {
                continue;
            }
            for (mb, cb) in &other.terms {
                if wa + mb.weight() > order {
                    // Terms are sorted by weight.
                    break;
                }
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// Product with a factor `a` that vanishes at the origin: the result is
    /// known to order `min(a.order, self.order + w)`, where `w >= 1` is the
    /// weighted order of `a`.
    pub fn mul_vanishing(&self, a: &Jet) -> Result<Jet> {
        self.check(a)?;
        let w = match a.weighted_order() {
            None => return Ok(Jet::zero(self.arity, a.order.max(self.order))),
            Some(0) => {
                return Err(Error::Structural(
                    "mul_vanishing needs a factor without constant term".into(),
                ))
            }
            Some(w) => w,
        };
        let order = a.order.min(self.order.saturating_add(w));
        Ok(self
            .clone()
            .with_order(order)
            .mul(&a.clone().with_order(order)))
    }

    /// Panicking variant of [`Jet::try_add`] for internal use where arities are known to agree.
    pub fn add(&self, other: &Jet) -> Jet {
        self.try_add(other).expect("jet arity")
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.try_sub(other).expect("jet arity")
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        self.try_mul(other).expect("jet arity")
    }

    pub fn neg(&self) -> Jet {
        self.scale(&Scalar::int(-1))
    }

    pub fn scale(&self, s: &Scalar) -> Jet {
        let mut out = Jet::zero(self.arity, self.order);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn add_scalar(&self, s: &Scalar) -> Jet {
        self.add(&Jet::constant(self.arity, self.order, s.clone()))
    }

    /// Swap `z ↔ z̄` and conjugate coefficients.
    pub fn conj(&self) -> Jet {
        let mut out = Jet::zero(self.arity, self.order);
        for (m, c) in &self.terms {
            out.terms.insert(m.conj(), c.conj());
        }
        out
    }

    /// Real part `(a + ā)/2` as a jet.
    pub fn real_part(&self) -> Jet {
        self.add(&self.conj()).scale(&Scalar::ratio(1, 2))
    }

    pub fn to_float(&self) -> Jet {
        let mut out = Jet::zero(self.arity, self.order);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.to_float());
        }
        out
    }

    /// Drop float coefficients of modulus `<= tol`.
    pub fn chop(&self, tol: f64) -> Jet {
        let mut out = Jet::zero(self.arity, self.order);
        for (m, c) in &self.terms {
            if !c.approx_zero(tol) {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// Smallest weight of a nonzero term; `None` stands for infinity.
    pub fn weighted_order(&self) -> Option<u32> {
        self.terms.keys().next().map(Monomial::weight)
    }

    pub fn homogeneous_part(&self, weight: u32) -> Jet {
        let mut out = Jet::zero(self.arity, self.order);
        for (m, c) in &self.terms {
            if m.weight() == weight {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// Formal partial derivative; the truncation order drops by the variable's weight.
    pub fn differentiate(&self, var: Var) -> Jet {
        let order = self.order.saturating_sub(var.weight());
        let mut out = Jet::zero(self.arity, order);
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            *dm.exponent_mut(var) -= 1;
            out.add_term(dm, c * &Scalar::int(e as i64));
        }
        out
    }

    /// Evaluate at a point of the real chart with `z̄ = conj(z)`.
    pub fn eval(&self, z: &[Complex64], u: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut v = c.to_c64();
                for (k, zk) in z.iter().enumerate() {
                    v *= zk.powu(m.z[k]) * zk.conj().powu(m.zbar[k]);
                }
                v * u.powu(m.u)
            })
            .sum()
    }

    /// Evaluate with independent values for every chart variable.
    pub fn eval_scalar(&self, z: &[Scalar], zbar: &[Scalar], u: &Scalar) -> Scalar {
        let mut acc = Scalar::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for k in 0..self.arity {
                v = &v * &z[k].pow(m.z[k]);
                v = &v * &zbar[k].pow(m.zbar[k]);
            }
            v = &v * &u.pow(m.u);
            acc += &v;
        }
        acc
    }

    /// Multiplicative inverse by geometric series; needs a nonzero constant term.
    pub fn recip(&self) -> Result<Jet> {
        let c0 = self.constant_term();
        let inv0 = c0.inv().ok_or_else(|| {
            Error::SingularSubstitution("denominator has zero constant term".into())
        })?;
        // 1/(c0 + x) = c0^{-1} Σ (-x/c0)^k
        let x = self
            .sub(&Jet::constant(self.arity, self.order, c0))
            .scale(&-&inv0);
        Ok(geometric_sum(&x, |_| Scalar::one()).scale(&inv0))
    }

    /// Principal square root by binomial series; needs a nonzero constant term.
    pub fn sqrt(&self) -> Result<Jet> {
        let c0 = self.constant_term();
        let inv0 = c0.inv().ok_or_else(|| {
            Error::SingularSubstitution("square root of a jet vanishing at 0".into())
        })?;
        let x = self
            .sub(&Jet::constant(self.arity, self.order, c0.clone()))
            .scale(&inv0);
        // binom(1/2, k) is rational, so exactness only depends on sqrt(c0).
        let series = geometric_sum(&x, binom_half);
        Ok(series.scale(&c0.sqrt()))
    }

    pub fn powi(&self, k: i64) -> Result<Jet> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut acc = Jet::constant(self.arity, self.order, Scalar::one());
        let mut p = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&p);
            }
            e >>= 1;
            if e > 0 {
                p = p.mul(&p);
            }
        }
        Ok(acc)
    }

    /// Substitute jets for the chart variables. `args` lists `z_1..z_n`, then
    /// `z̄_1..z̄_n`, then `u` (length `2n+1`) and all share an arity. Arguments
    /// without constant term keep the truncation coherent; the result is
    /// truncated to `order`.
    pub fn compose(&self, args: &[Jet], order: u32) -> Result<Jet> {
        Ok(Jet::compose_many(std::slice::from_ref(self), args, order)?.remove(0))
    }

    /// [`Jet::compose`] for several jets of the same arity, sharing the
    /// substituted monomials.
    pub fn compose_many(jets: &[Jet], args: &[Jet], order: u32) -> Result<Vec<Jet>> {
        let arity = jets.first().map_or(0, |j| j.arity);
        if jets.iter().any(|j| j.arity != arity) {
            return Err(Error::Structural("composed jets disagree in arity".into()));
        }
        if args.len() != 2 * arity + 1 {
            return Err(Error::Structural(format!(
                "compose expects {} arguments, got {}",
                2 * arity + 1,
                args.len()
            )));
        }
        let out_arity = args[0].arity;
        if args.iter().any(|a| a.arity != out_arity) {
            return Err(Error::Structural(
                "compose arguments disagree in arity".into(),
            ));
        }
        let order = args.iter().map(|a| a.order).fold(order, u32::min);
        let args: Vec<Jet> = args.iter().map(|a| a.truncate(order)).collect();
        let mut cache: HashMap<Monomial, Jet> = HashMap::new();
        cache.insert(
            Monomial::one(arity),
            Jet::constant(out_arity, order, Scalar::one()),
        );
        jets.iter()
            .map(|j| {
                let mut out = Jet::zero(out_arity, order);
                for (m, c) in &j.terms {
                    let p = substituted_monomial(m, &args, &mut cache);
                    if !p.is_zero() {
                        out = out.add(&p.scale(c));
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// Replace `w` (stored in the `u` slot) by `u + i Σ z_j z̄_j`.
    pub fn restrict_to_heisenberg(&self) -> Result<Jet> {
        if !self.is_holomorphic() {
            return Err(Error::Structural(
                "restriction expects a holomorphic jet".into(),
            ));
        }
        let n = self.arity;
        let o = self.order;
        let mut args: Vec<Jet> = (0..n).map(|k| Jet::var(n, o, Var::Z(k))).collect();
        args.extend((0..n).map(|k| Jet::var(n, o, Var::ZBar(k))));
        args.push(heisenberg_w(n, o));
        self.compose(&args, o)
    }
}

/// The jet `u + i|z|^2`, i.e. `w` on the Heisenberg hypersurface.
pub fn heisenberg_w(n: usize, order: u32) -> Jet {
    let mut w = Jet::var(n, order, Var::U);
    for k in 0..n {
        let zz = Jet::var(n, order, Var::Z(k)).mul(&Jet::var(n, order, Var::ZBar(k)));
        w = w.add(&zz.scale(&Scalar::i()));
    }
    w
}

fn var_monomial(arity: usize, var: Var) -> Monomial {
    let mut m = Monomial::one(arity);
    *m.exponent_mut(var) += 1;
    m
}

fn binom_half(k: u32) -> Scalar {
    // binom(1/2, k) = Π_{j<k} (1/2 - j) / k!
    let mut num = Scalar::one();
    for j in 0..k {
        num = &num * &(&Scalar::ratio(1, 2) - &Scalar::int(j as i64));
        num = &num / &Scalar::int(j as i64 + 1);
    }
    num
}

/// `Σ_k coef(k) x^k` for `x` without constant term, summed until truncation kills the powers.
/// `args^m`, built from a smaller cached monomial.
fn substituted_monomial(m: &Monomial, args: &[Jet], cache: &mut HashMap<Monomial, Jet>) -> Jet {
    if let Some(j) = cache.get(m) {
        return j.clone();
    }
    let n = m.arity();
    let slot = (0..2 * n + 1)
        .find(|&k| {
            let e = if k < n {
                m.z[k]
            } else if k < 2 * n {
                m.zbar[k - n]
            } else {
                m.u
            };
            e > 0
        })
        .expect("non-constant monomial");
    let mut smaller = m.clone();
    if slot < n {
        smaller.z[slot] -= 1;
    } else if slot < 2 * n {
        smaller.zbar[slot - n] -= 1;
    } else {
        smaller.u -= 1;
    }
    let base = substituted_monomial(&smaller, args, cache);
    let out = base.mul(&args[slot]);
    cache.insert(m.clone(), out.clone());
    out
}

fn geometric_sum(x: &Jet, coef: impl Fn(u32) -> Scalar) -> Jet {
    let mut acc = Jet::constant(x.arity, x.order, coef(0));
    let mut p = Jet::constant(x.arity, x.order, Scalar::one());
    let mut k = 0;
    loop {
        k += 1;
        p = p.mul(x);
        if p.is_zero() {
            break;
        }
        acc = acc.add(&p.scale(&coef(k)));
        if k > 2 * x.order.min(4096) + 2 {
            break;
        }
    }
    acc
}

impl Jet {
    /// Display with the `u` slot named after the chart (`w` when holomorphic).
    pub fn display(&self, chart: Chart) -> JetDisplay<'_> {
        JetDisplay { jet: self, chart }
    }
}

pub struct JetDisplay<'a> {
    jet: &'a Jet,
    chart: Chart,
}

fn power(f: &mut fmt::Formatter<'_>, name: &str, e: u32) -> fmt::Result {
    match e {
        0 => Ok(()),
        1 => write!(f, "*{name}"),
        _ => write!(f, "*{name}^{e}"),
    }
}

impl fmt::Display for JetDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.jet.terms.is_empty() {
            return write!(f, "0");
        }
        let u = match self.chart {
            Chart::Holomorphic => "w",
            Chart::Heisenberg => "u",
        };
        for (k, (m, c)) in self.jet.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (j, e) in m.z.iter().enumerate() {
                power(f, &format!("z{}", j + 1), *e)?;
            }
            for (j, e) in m.zbar.iter().enumerate() {
                power(f, &format!("zb{}", j + 1), *e)?;
            }
            power(f, u, m.u)?;
        }
        Ok(())
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display(Chart::Heisenberg).fmt(f)
    }
}

/// Fixed-length sequence of jets sharing arity and truncation order.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVector {
    pub chart: Chart,
    pub entries: Vec<Jet>,
}

impl JetVector {
    pub fn new(chart: Chart, entries: Vec<Jet>) -> Result<Self> {
        if let Some(first) = entries.first() {
            if entries.iter().any(|e| e.arity() != first.arity()) {
                return Err(Error::Structural(
                    "jet vector entries disagree in arity".into(),
                ));
            }
        }
        Ok(JetVector { chart, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.entries.first().map(Jet::arity).unwrap_or(0)
    }

    pub fn order(&self) -> u32 {
        self.entries.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(Jet::is_exact)
    }

    pub fn restrict_to_heisenberg(&self) -> Result<JetVector> {
        if self.chart != Chart::Holomorphic {
            return Err(Error::Structural(
                "jet vector is already in the Heisenberg chart".into(),
            ));
        }
        let entries = self
            .entries
            .iter()
            .map(Jet::restrict_to_heisenberg)
            .collect::<Result<Vec<_>>>()?;
        JetVector::new(Chart::Heisenberg, entries)
    }

    pub fn truncate(&self, order: u32) -> JetVector {
        JetVector {
            chart: self.chart,
            entries: self.entries.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    pub fn constant_terms(&self) -> Vec<Scalar> {
        self.entries.iter().map(Jet::constant_term).collect()
    }

    pub fn to_float(&self) -> JetVector {
        JetVector {
            chart: self.chart,
            entries: self.entries.iter().map(Jet::to_float).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(n: usize, o: u32, k: usize) -> Jet {
        Jet::var(n, o, Var::Z(k))
    }

    #[test]
    fn product_weight() {
        let p = z(1, 4, 0).mul(&Jet::var(1, 4, Var::ZBar(0)));
        assert_eq!(p.weighted_order(), Some(2));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn conj_of_i_z() {
        let a = z(1, 4, 0).scale(&Scalar::i());
        let b = Jet::var(1, 4, Var::ZBar(0)).scale(&-Scalar::i());
        assert_eq!(a.conj(), b);
    }

    #[test]
    fn truncation_drops_heavy_terms() {
        let u = Jet::var(1, 3, Var::U);
        assert!(u.mul(&u).is_zero());
    }

    #[test]
    fn weighted_orders() {
        let n = 2;
        let a = z(n, 6, 0)
            .mul(&z(n, 6, 0))
            .mul(&Jet::var(n, 6, Var::ZBar(1)));
        assert_eq!(a.weighted_order(), Some(3));
        assert_eq!(Jet::zero(n, 6).weighted_order(), None);
        let b = Jet::var(n, 6, Var::U).add(&z(n, 6, 0).powi(3).unwrap());
        assert_eq!(b.weighted_order(), Some(2));
    }

    #[test]
    fn derivatives() {
        let u = Jet::var(1, 6, Var::U);
        assert_eq!(
            u.mul(&u).differentiate(Var::U),
            u.scale(&Scalar::int(2)).truncate(4)
        );
        let zz = z(1, 6, 0).mul(&Jet::var(1, 6, Var::ZBar(0)));
        assert_eq!(zz.differentiate(Var::Z(0)), Jet::var(1, 5, Var::ZBar(0)));
        let z1sq = z(2, 6, 0).mul(&z(2, 6, 0));
        assert!(z1sq.differentiate(Var::ZBar(1)).is_zero());
    }

    #[test]
    fn geometric_series_substitution() {
        // 1/(1-w) with w = u + i z z̄ at order 2.
        let w = heisenberg_w(1, 2);
        let one = Jet::constant(1, 2, Scalar::one());
        let r = one.sub(&w).recip().unwrap();
        let expected = one.add(&w);
        assert_eq!(r, expected);
    }

    #[test]
    fn restriction_of_w_squared() {
        let w = Jet::var(1, 4, Var::U);
        let r = w.mul(&w).restrict_to_heisenberg().unwrap();
        let u = Jet::var(1, 4, Var::U);
        let zz = z(1, 4, 0).mul(&Jet::var(1, 4, Var::ZBar(0)));
        let expected = u
            .mul(&u)
            .add(&u.mul(&zz).scale(&Scalar::gauss(0, 2)))
            .sub(&zz.mul(&zz));
        assert_eq!(r, expected);
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Jet::constant(1, 5, Scalar::int(4))
            .add(&z(1, 5, 0))
            .add(&Jet::var(1, 5, Var::U));
        let s = x.sqrt().unwrap();
        assert!(s.is_exact());
        assert_eq!(s.mul(&s), x);
    }

    #[test]
    fn recip_requires_unit() {
        assert!(z(1, 3, 0).recip().is_err());
    }

    #[test]
    fn arity_mismatch_is_structural() {
        assert!(matches!(
            z(1, 3, 0).try_add(&z(2, 3, 0)),
            Err(Error::Structural(_))
        ));
    }
}
