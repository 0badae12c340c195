//! Expression trees for polynomial fractions in `z_1..z_n, w` and their parser.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | 'i' | 'z'k | 'w' | '(' expr ')'
//! ```
//!
//! Numbers are integers or finite decimals and are read exactly.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::jet::{Jet, Monomial, Var, UNBOUNDED};
use crate::scalar::{Gq, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Scalar),
    /// Variable index: `0..n` are `z_1..z_n`, `n` is `w`.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i64),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn c(s: Scalar) -> Expr {
        Expr::Const(s)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Scalar::int(v))
    }

    pub fn var(k: usize) -> Expr {
        Expr::Var(k)
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    fn as_const(&self) -> Option<&Scalar> {
        match self {
            Expr::Const(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_zero)
    }

    fn is_one(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_one)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y.inv().is_some() => Expr::Const(x / y),
            _ if b.is_one() => a,
            _ if a.is_zero() => Expr::zero(),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(s) => Expr::Const(-s),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, k: i64) -> Expr {
        match k {
            0 => Expr::one(),
            1 => a,
            _ => Expr::Pow(Box::new(a), k),
        }
    }

    /// Linear combination `c + Σ coeffs[k] * var_k`.
    pub fn affine(c: Scalar, coeffs: &[Scalar]) -> Expr {
        coeffs.iter().enumerate().fold(Expr::c(c), |acc, (k, a)| {
            Expr::add(acc, Expr::mul(Expr::c(a.clone()), Expr::var(k)))
        })
    }

    /// Largest variable index used plus one.
    pub fn var_bound(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => k + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.var_bound().max(b.var_bound())
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.var_bound(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => 1 + a.node_count(),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            Expr::Const(s) => s.is_exact(),
            Expr::Var(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_exact() && b.is_exact()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_exact(),
        }
    }

    /// Replace every variable `k` by `args[k]`.
    pub fn substitute(&self, args: &[Expr]) -> Expr {
        match self {
            Expr::Const(s) => Expr::Const(s.clone()),
            Expr::Var(k) => args[*k].clone(),
            Expr::Add(a, b) => Expr::add(a.substitute(args), b.substitute(args)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(args), b.substitute(args)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(args), b.substitute(args)),
            Expr::Div(a, b) => Expr::div(a.substitute(args), b.substitute(args)),
            Expr::Neg(a) => Expr::neg(a.substitute(args)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(args), *k),
        }
    }

    /// Float evaluation. A denominator that evaluates to exactly zero is a pole.
    pub fn eval(&self, x: &[Complex64]) -> Result<Complex64> {
        Ok(match self {
            Expr::Const(s) => s.to_c64(),
            Expr::Var(k) => x[*k],
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d.norm() == 0.0 {
                    return Err(Error::Pole("denominator vanishes".into()));
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Pow(a, k) => {
                let v = a.eval(x)?;
                if *k < 0 && v.norm() == 0.0 {
                    return Err(Error::Pole("negative power of zero".into()));
                }
                v.powi(*k as i32)
            }
        })
    }

    /// Evaluation in the coefficient field (exact when inputs are exact).
    pub fn eval_scalar(&self, x: &[Scalar]) -> Result<Scalar> {
        Ok(match self {
            Expr::Const(s) => s.clone(),
            Expr::Var(k) => x[*k].clone(),
            Expr::Add(a, b) => a.eval_scalar(x)? + b.eval_scalar(x)?,
            Expr::Sub(a, b) => a.eval_scalar(x)? - b.eval_scalar(x)?,
            Expr::Mul(a, b) => a.eval_scalar(x)? * b.eval_scalar(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_scalar(x)?;
                let inv = d
                    .inv()
                    .ok_or_else(|| Error::Pole("denominator vanishes".into()))?;
                a.eval_scalar(x)? * inv
            }
            Expr::Neg(a) => -a.eval_scalar(x)?,
            Expr::Pow(a, k) => {
                let v = a.eval_scalar(x)?;
                let base = if *k < 0 {
                    v.inv()
                        .ok_or_else(|| Error::Pole("negative power of zero".into()))?
                } else {
                    v
                };
                base.pow(k.unsigned_abs() as u32)
            }
        })
    }

    /// Substitute jets for the variables; quotients are expanded by geometric series.
    pub fn to_jet(&self, args: &[Jet]) -> Result<Jet> {
        let first = args
            .first()
            .ok_or_else(|| Error::Structural("substitution needs at least one argument".into()))?;
        let (n, o) = (
            first.arity(),
            args.iter().map(Jet::order).min().unwrap_or(0),
        );
        Ok(match self {
            Expr::Const(s) => Jet::constant(n, o, s.clone()),
            Expr::Var(k) => args
                .get(*k)
                .ok_or_else(|| Error::Structural(format!("no argument for variable {k}")))?
                .clone(),
            Expr::Add(a, b) => a.to_jet(args)?.try_add(&b.to_jet(args)?)?,
            Expr::Sub(a, b) => a.to_jet(args)?.try_sub(&b.to_jet(args)?)?,
            Expr::Mul(a, b) => a.to_jet(args)?.try_mul(&b.to_jet(args)?)?,
            Expr::Div(a, b) => a.to_jet(args)?.try_mul(&b.to_jet(args)?.recip()?)?,
            Expr::Neg(a) => a.to_jet(args)?.neg(),
            Expr::Pow(a, k) => a.to_jet(args)?.powi(*k)?,
        })
    }

    /// Numerator and denominator as exact polynomials in `z_1..z_n, w`
    /// (holomorphic jets of unbounded order; `w` sits in the `u` slot).
    pub fn to_fraction(&self, n: usize) -> (Jet, Jet) {
        let one = || Jet::constant(n, UNBOUNDED, Scalar::one());
        match self {
            Expr::Const(s) => (Jet::constant(n, UNBOUNDED, s.clone()), one()),
            Expr::Var(k) => {
                let var = if *k < n { Var::Z(*k) } else { Var::U };
                (Jet::var(n, UNBOUNDED, var), one())
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (na, da) = a.to_fraction(n);
                let (nb, db) = b.to_fraction(n);
                let (l, r) = (na.mul(&db), nb.mul(&da));
                let num = if matches!(self, Expr::Add(..)) {
                    l.add(&r)
                } else {
                    l.sub(&r)
                };
                (num, da.mul(&db))
            }
            Expr::Mul(a, b) => {
                let (na, da) = a.to_fraction(n);
                let (nb, db) = b.to_fraction(n);
                (na.mul(&nb), da.mul(&db))
            }
            Expr::Div(a, b) => {
                let (na, da) = a.to_fraction(n);
                let (nb, db) = b.to_fraction(n);
                (na.mul(&db), da.mul(&nb))
            }
            Expr::Neg(a) => {
                let (na, da) = a.to_fraction(n);
                (na.neg(), da)
            }
            Expr::Pow(a, k) => {
                let (na, da) = a.to_fraction(n);
                let e = k.unsigned_abs() as i64;
                let (p, q) = (na.powi(e).unwrap(), da.powi(e).unwrap());
                if *k < 0 {
                    (q, p)
                } else {
                    (p, q)
                }
            }
        }
    }

    /// Identity of rational functions by cross multiplication, exact.
    pub fn same_rational_function(&self, other: &Expr, n: usize) -> bool {
        let (na, da) = self.to_fraction(n);
        let (nb, db) = other.to_fraction(n);
        !da.is_zero() && !db.is_zero() && na.mul(&db) == nb.mul(&da)
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8, n: usize) -> fmt::Result {
        // prec: 0 sum, 1 product, 2 unary/power base
        let open = match self {
            Expr::Add(..) | Expr::Sub(..) => prec > 0,
            Expr::Mul(..) | Expr::Div(..) | Expr::Neg(_) => prec > 1,
            _ => false,
        };
        if open {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(s) => match s {
                Scalar::Exact(g)
                    if g.im.is_zero() && g.re.denom().is_one() && g.re >= BigRational::zero() =>
                {
                    write!(f, "{}", g.re.numer())?
                }
                Scalar::Exact(g) => write!(f, "({g})")?,
                Scalar::Float(c) => write!(f, "({:?}+{:?}*i)", c.re, c.im)?,
            },
            Expr::Var(k) if *k < n => write!(f, "z{}", k + 1)?,
            Expr::Var(_) => write!(f, "w")?,
            Expr::Add(a, b) => {
                a.fmt_prec(f, 0, n)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 1, n)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 0, n)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 1, n)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 1, n)?;
                write!(f, "*")?;
                b.fmt_prec(f, 2, n)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 1, n)?;
                write!(f, "/")?;
                b.fmt_prec(f, 2, n)?;
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 2, n)?;
            }
            Expr::Pow(a, k) => {
                a.fmt_prec(f, 3, n)?;
                write!(f, "^{k}")?;
            }
        }
        if open {
            write!(f, ")")?;
        }
        Ok(())
    }

    /// Printable form that [`parse_expr`] reads back for exact trees.
    pub fn display(&self, n: usize) -> ExprDisplay<'_> {
        ExprDisplay { expr: self, n }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    n: usize,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt_prec(f, 0, self.n)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

const TRANSCENDENTAL: &[&str] = &[
    "sqrt", "exp", "log", "ln", "sin", "cos", "tan", "sinh", "cosh", "tanh", "pi", "abs", "conj",
];

fn lex(src: &str) -> Result<Lexer> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let start = k;
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || c == '.' {
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                k += 1;
            }
            let text: String = chars[start..k].iter().collect();
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                return Err(Error::NonRational(format!(
                    "exponent notation in '{text}…'"
                )));
            }
            toks.push((Tok::Num(parse_decimal(&text, start)?), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            toks.push((Tok::Ident(chars[start..k].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            toks.push((Tok::Op(c), start));
            k += 1;
        } else {
            return Err(syntax(start, format!("unexpected character '{c}'")));
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

fn syntax(offset: usize, message: String) -> Error {
    Error::Syntax {
        line: 1,
        column: offset + 1,
        message,
    }
}

fn parse_decimal(text: &str, offset: usize) -> Result<BigRational> {
    let mut parts = text.split('.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    if parts.next().is_some() || (int.is_empty() && frac.is_none_or(str::is_empty)) {
        return Err(syntax(offset, format!("malformed number '{text}'")));
    }
    let frac = frac.unwrap_or("");
    let digits = format!("{int}{frac}");
    let num: BigInt = digits
        .parse()
        .map_err(|_| syntax(offset, format!("malformed number '{text}'")))?;
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    Ok(BigRational::new(num, den))
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> Error {
        match self.peek() {
            Tok::End => syntax(self.offset(), "unexpected end of input".into()),
            t => syntax(self.offset(), format!("unexpected token {t:?}")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != &Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let negative = if self.peek() == &Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        let at = self.offset();
        match self.bump() {
            Tok::Num(r) if r.denom().is_one() => {
                let e: i64 = r
                    .numer()
                    .try_into()
                    .map_err(|_| syntax(at, "exponent too large".into()))?;
                Ok(Expr::Pow(Box::new(base), if negative { -e } else { e }))
            }
            Tok::Num(_) => Err(Error::NonRational("fractional exponent".into())),
            Tok::End => Err(syntax(at, "unexpected end of input".into())),
            t => Err(syntax(
                at,
                format!("expected integer exponent, found {t:?}"),
            )),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Expr::Const(Scalar::Exact(Gq::new(r, BigRational::zero()))))
            }
            Tok::Ident(name) => {
                self.bump();
                self.ident(&name, at)
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                if self.peek() != &Tok::Op(')') {
                    return Err(match self.peek() {
                        Tok::End => syntax(
                            self.offset(),
                            "unexpected end of input, expected ')'".into(),
                        ),
                        t => syntax(self.offset(), format!("expected ')', found {t:?}")),
                    });
                }
                self.bump();
                Ok(e)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn ident(&self, name: &str, at: usize) -> Result<Expr> {
        if name == "i" {
            return Ok(Expr::Const(Scalar::i()));
        }
        if name == "w" {
            return Ok(Expr::Var(self.n));
        }
        if let Some(idx) = name.strip_prefix('z') {
            if let Ok(k) = idx.parse::<usize>() {
                if (1..=self.n).contains(&k) {
                    return Ok(Expr::Var(k - 1));
                }
                return Err(Error::Dimension(format!(
                    "variable {name} outside z1..z{}",
                    self.n
                )));
            }
        }
        if TRANSCENDENTAL.contains(&name) {
            return Err(Error::NonRational(format!(
                "'{name}' is not a rational operation"
            )));
        }
        Err(syntax(at, format!("unknown identifier '{name}'")))
    }
}

/// Parse a component expression over `z1..zn, w`.
pub fn parse_expr(src: &str, n: usize) -> Result<Expr> {
    let lexer = lex(src)?;
    let mut p = Parser {
        toks: &lexer.toks,
        pos: 0,
        n,
    };
    let e = p.expr()?;
    if p.peek() != &Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}

/// Parse a scalar constant such as `3/5 + 4/5*i`.
pub fn parse_scalar(src: &str) -> Result<Scalar> {
    let e = parse_expr(src, 0)?;
    if e.var_bound() > 0 {
        return Err(Error::Document(format!("'{src}' is not a constant")));
    }
    e.eval_scalar(&[])
}

/// Monomials of the holomorphic polynomial ring, as used by [`Expr::to_fraction`].
pub fn holomorphic_monomial(z: &[u32], w: u32) -> Monomial {
    Monomial {
        z: z.to_vec(),
        zbar: vec![0; z.len()],
        u: w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_quotient_exactly() {
        let e = parse_expr("(2*z1)/(1 - i*w)", 1).unwrap();
        assert!(matches!(e, Expr::Div(..)));
        assert!(e.is_exact());
        let v = e.eval_scalar(&[Scalar::int(1), Scalar::i()]).unwrap();
        assert_eq!(v, Scalar::int(1));
    }

    #[test]
    fn reports_end_of_input() {
        match parse_expr("z1 + ", 1) {
            Err(Error::Syntax {
                column, message, ..
            }) => {
                assert_eq!(column, 6);
                assert!(message.contains("end of input"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_transcendental_and_exponent_notation() {
        assert!(matches!(
            parse_expr("sqrt(2)*z1", 1),
            Err(Error::NonRational(_))
        ));
        assert!(matches!(
            parse_expr("1e-3*z1", 1),
            Err(Error::NonRational(_))
        ));
        assert!(matches!(parse_expr("z3", 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_scalar("0.25").unwrap(), Scalar::ratio(1, 4));
        assert_eq!(
            parse_scalar("3/5+4/5*i").unwrap(),
            Scalar::Exact(Gq::new(
                BigRational::new(3.into(), 5.into()),
                BigRational::new(4.into(), 5.into())
            ))
        );
    }

    #[test]
    fn display_round_trips() {
        let src = "z1*(1 + i*w)/(1 - i*w)^2 - (1/3)*w^-1";
        let e = parse_expr(src, 1).unwrap();
        let again = parse_expr(&e.display(1).to_string(), 1).unwrap();
        assert!(e.same_rational_function(&again, 1));
    }

    #[test]
    fn fraction_identity() {
        let a = parse_expr("1/(1-w) - 1", 1).unwrap();
        let b = parse_expr("w/(1-w)", 1).unwrap();
        assert!(a.same_rational_function(&b, 1));
    }
}
