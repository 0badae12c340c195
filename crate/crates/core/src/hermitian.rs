//! The signature-(N+1,1) Hermitian form, Q-frames, group membership and the
//! projective action of matrices.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::scalar::Scalar;

/// Default float tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Dense matrix over [`Scalar`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = Scalar::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_columns(cols: &[Vec<Scalar>]) -> Result<Self> {
        let m = Matrix::from_rows(cols.to_vec())?;
        Ok(m.transpose())
    }

    pub fn from_c64(m: &DMatrix<Complex64>) -> Self {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out[(r, c)] = Scalar::from_c64(m[(r, c)]);
            }
        }
        out
    }

    pub fn diagonal(entries: &[Scalar]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (k, e) in entries.iter().enumerate() {
            m[(k, k)] = e.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> Vec<Scalar> {
        self.data[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    pub fn column(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[Scalar]) {
        for (r, x) in v.iter().enumerate() {
            self[(r, c)] = x.clone();
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|r| self.row(r)).collect()
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)].to_c64())
    }

    pub fn to_float(&self) -> Matrix {
        self.map(Scalar::to_float)
    }

    pub fn is_exact(&self) -> bool {
        self.data.iter().all(Scalar::is_exact)
    }

    fn map(&self, f: impl Fn(&Scalar) -> Scalar) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].clone();
            }
        }
        out
    }

    pub fn conj(&self) -> Matrix {
        self.map(Scalar::conj)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        self.transpose().conj()
    }

    pub fn scale(&self, s: &Scalar) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shapes"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(&Scalar::int(-1)))
    }

    pub fn try_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = &other[(k, c)];
                    if !b.is_zero() {
                        out[(r, c)] += &(a * b);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        self.try_mul(other).expect("matrix shapes")
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len(), "matrix-vector shapes");
        (0..self.rows)
            .map(|r| {
                let mut acc = Scalar::zero();
                for (c, x) in v.iter().enumerate() {
                    let a = &self[(r, c)];
                    if !a.is_zero() && !x.is_zero() {
                        acc += &(a * x);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(Scalar::abs).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.sub(other).max_abs()
    }

    /// Row echelon elimination shared by `det` and `inverse`. Exact entries
    /// pivot on the first nonzero, float entries on the largest modulus.
    fn eliminate(&self, rhs: Option<Matrix>) -> Result<(Scalar, Option<Matrix>)> {
        if !self.is_square() {
            return Err(Error::Dimension("square matrix required".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs;
        let mut det = Scalar::one();
        for col in 0..n {
            let pivot = if a.is_exact() {
                (col..n).find(|&r| !a[(r, col)].is_zero())
            } else {
                (col..n)
                    .filter(|&r| a[(r, col)].abs() > 0.0)
                    .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            };
            let Some(p) = pivot else {
                return Ok((Scalar::zero(), None));
            };
            if p != col {
                a.swap_rows(p, col);
                if let Some(b) = b.as_mut() {
                    b.swap_rows(p, col);
                }
                det = -det;
            }
            let piv = a[(col, col)].clone();
            det = &det * &piv;
            let inv = piv.inv().expect("nonzero pivot");
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let factor = &a[(r, col)] * &inv;
                for c in col..n {
                    let v = &a[(col, c)] * &factor;
                    a[(r, c)] -= &v;
                }
                if let Some(b) = b.as_mut() {
                    for c in 0..b.cols {
                        let v = &b[(col, c)] * &factor;
                        b[(r, c)] -= &v;
                    }
                }
            }
            for c in col..n {
                a[(col, c)] = &a[(col, c)] * &inv;
            }
            if let Some(b) = b.as_mut() {
                for c in 0..b.cols {
                    b[(col, c)] = &b[(col, c)] * &inv;
                }
            }
        }
        Ok((det, b))
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    pub fn det(&self) -> Result<Scalar> {
        Ok(self.eliminate(None)?.0)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        match self.eliminate(Some(Matrix::identity(self.rows)))? {
            (_, Some(inv)) => Ok(inv),
            _ => Err(Error::SingularMatrix("matrix is not invertible".into())),
        }
    }

    /// Numerical rank from singular values.
    pub fn rank(&self, tol: f64) -> usize {
        let sv = singular_values(&self.to_c64());
        let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
        sv.iter().filter(|&&s| s > tol * scale).count()
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

impl Index<(usize, usize)> for Matrix {
    type Output = Scalar;
    fn index(&self, (r, c): (usize, usize)) -> &Scalar {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Scalar {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(ToString::to_string).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Gram matrix `J` with `⟨Z, Z'⟩ = Z'^† J Z` on `C^{dim}`.
pub fn gram(dim: usize) -> Matrix {
    let mut j = Matrix::identity(dim);
    let last = dim - 1;
    j[(0, 0)] = Scalar::zero();
    j[(last, last)] = Scalar::zero();
    j[(0, last)] = Scalar::i() * Scalar::ratio(1, 2);
    j[(last, 0)] = Scalar::i() * Scalar::ratio(-1, 2);
    j
}

/// `⟨Z, Z'⟩ = Σ_A Z^A conj(Z'^A) + (i/2)(Z^{N+1} conj(Z'^0) − Z^0 conj(Z'^{N+1}))`.
pub fn form_eval(z: &[Scalar], zp: &[Scalar]) -> Result<Scalar> {
    if z.len() != zp.len() || z.len() < 2 {
        return Err(Error::Dimension(format!(
            "form needs equal dimensions >= 2, got {} and {}",
            z.len(),
            zp.len()
        )));
    }
    let last = z.len() - 1;
    let mut acc = Scalar::zero();
    for a in 1..last {
        acc += &(&z[a] * &zp[a].conj());
    }
    let cross = &(&z[last] * &zp[0].conj()) - &(&z[0] * &zp[last].conj());
    Ok(acc + Scalar::i() * Scalar::ratio(1, 2) * cross)
}

/// `Ẑ = ((i/2)Z^{N+1}, Z^A, −(i/2)Z^0)`, so that `⟨Z, Z'⟩ = ⟨Ẑ, Z'⟩₀`.
pub fn hat(z: &[Scalar]) -> Vec<Scalar> {
    let last = z.len() - 1;
    let half_i = Scalar::i() * Scalar::ratio(1, 2);
    let mut out = z.to_vec();
    out[0] = &half_i * &z[last];
    out[last] = -(&half_i * &z[0]);
    out
}

/// The usual Hermitian product `Σ Z^k conj(Z'^k)`.
pub fn euclidean(z: &[Scalar], zp: &[Scalar]) -> Scalar {
    let mut acc = Scalar::zero();
    for (a, b) in z.iter().zip(zp) {
        acc += &(a * &b.conj());
    }
    acc
}

/// The same forms on jet-valued vectors.
pub fn form_eval_jets(z: &[Jet], zp: &[Jet]) -> Jet {
    let last = z.len() - 1;
    let mut acc = z[last]
        .mul(&zp[0].conj())
        .sub(&z[0].mul(&zp[last].conj()))
        .scale(&(Scalar::i() * Scalar::ratio(1, 2)));
    for a in 1..last {
        acc = acc.add(&z[a].mul(&zp[a].conj()));
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub is_su: bool,
    pub is_glq: bool,
    /// The `c` in `A^† J A = c J` (taken from the `(0, N+1)` slot).
    pub scale: Complex64,
    /// `max |A^† J A − c J|`.
    pub form_residual: f64,
    /// `max |A^† J A − J|`.
    pub unitary_residual: f64,
    pub det: Complex64,
    pub det_residual: f64,
    pub exact: bool,
    pub tolerance: f64,
}

/// Decide membership in `SU(N+1,1)` and `GL^Q`. Exact matrices are decided by
/// exact equality, float matrices within `tol`.
pub fn membership(a: &Matrix, tol: f64) -> Result<Membership> {
    if !a.is_square() || a.rows() < 2 {
        return Err(Error::Dimension(
            "membership needs a square matrix of size >= 2".into(),
        ));
    }
    let det = a.det()?;
    if det.is_zero() || (!det.is_exact() && det.abs() <= tol) {
        return Err(Error::SingularMatrix("matrix is singular".into()));
    }
    let dim = a.rows();
    let j = gram(dim);
    let pulled = a.adjoint().mul(&j).mul(a);
    let c = &pulled[(0, dim - 1)] / &j[(0, dim - 1)];
    let scaled = pulled.sub(&j.scale(&c));
    let unit = pulled.sub(&j);
    let exact = a.is_exact();
    let det_defect = &det - &Scalar::one();
    let (is_glq, is_su) = if exact {
        let c_ok = c.im().is_zero() && c.re().to_c64().re > 0.0;
        let glq = c_ok && scaled.data.iter().all(Scalar::is_zero);
        (
            glq,
            unit.data.iter().all(Scalar::is_zero) && det_defect.is_zero(),
        )
    } else {
        let cc = c.to_c64();
        let glq = cc.im.abs() <= tol && cc.re > tol && scaled.max_abs() <= tol;
        (glq, unit.max_abs() <= tol && det_defect.abs() <= tol)
    };
    Ok(Membership {
        is_su,
        is_glq,
        scale: c.to_c64(),
        form_residual: scaled.max_abs(),
        unitary_residual: unit.max_abs(),
        det: det.to_c64(),
        det_residual: det_defect.abs(),
        exact,
        tolerance: if exact { 0.0 } else { tol },
    })
}

/// Named deviations of a frame's columns from the Q-frame products.
pub fn frame_residuals(e: &Matrix) -> Vec<(String, f64)> {
    let dim = e.rows();
    let last = dim - 1;
    let cols: Vec<Vec<Scalar>> = (0..dim).map(|c| e.column(c)).collect();
    let prod = |a: usize, b: usize| form_eval(&cols[a], &cols[b]).expect("same dimension");
    let half_i = Scalar::i() * Scalar::ratio(1, 2);
    let mut out = Vec::new();
    let mut worst = |name: &str, pairs: Vec<(usize, usize, Scalar)>| {
        let r = pairs
            .into_iter()
            .map(|(a, b, want)| (&prod(a, b) - &want).abs())
            .fold(0.0, f64::max);
        out.push((name.to_string(), r));
    };
    worst("<E0,E0>", vec![(0, 0, Scalar::zero())]);
    worst("<EN+1,EN+1>", vec![(last, last, Scalar::zero())]);
    worst("<E0,EN+1>", vec![(0, last, -&half_i)]);
    worst("<EN+1,E0>", vec![(last, 0, half_i.clone())]);
    let mid: Vec<usize> = (1..last).collect();
    worst(
        "<E0,EA>",
        mid.iter().map(|&a| (0, a, Scalar::zero())).collect(),
    );
    worst(
        "<EA,EN+1>",
        mid.iter().map(|&a| (a, last, Scalar::zero())).collect(),
    );
    let mut ab = Vec::new();
    for &a in &mid {
        for &b in &mid {
            ab.push((
                a,
                b,
                if a == b {
                    Scalar::one()
                } else {
                    Scalar::zero()
                },
            ));
        }
    }
    worst("<EA,EB>", ab);
    let det = e.det().unwrap_or_else(|_| Scalar::zero());
    out.push(("det".to_string(), (&det - &Scalar::one()).abs()));
    out
}

/// Projective action on an affine point `(z_1..z_{dim-1})`.
pub fn mobius(a: &Matrix, pt: &[Scalar]) -> Result<Vec<Scalar>> {
    if pt.len() + 1 != a.cols() {
        return Err(Error::Dimension("point does not match matrix size".into()));
    }
    let mut v = vec![Scalar::one()];
    v.extend_from_slice(pt);
    let image = a.mul_vec(&v);
    let inv = image[0]
        .inv()
        .filter(|_| image[0].is_exact() || image[0].abs() > 1e-300)
        .ok_or_else(|| Error::Pole("image is at infinity".into()))?;
    Ok(image[1..].iter().map(|x| x * &inv).collect())
}

pub fn mobius_c64(a: &DMatrix<Complex64>, pt: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut v = vec![Complex64::new(1.0, 0.0)];
    v.extend_from_slice(pt);
    let image = a * nalgebra::DVector::from_vec(v);
    if image[0].norm() == 0.0 {
        return Err(Error::Pole("image is at infinity".into()));
    }
    Ok(image.iter().skip(1).map(|x| x / image[0]).collect())
}

/// The rational map `A*` as expressions in `cols - 1` variables.
pub fn mobius_exprs(a: &Matrix) -> Vec<Expr> {
    let m = a.cols() - 1;
    let lin: Vec<Expr> = (0..a.rows())
        .map(|r| {
            let coeffs: Vec<Scalar> = (1..=m).map(|c| a[(r, c)].clone()).collect();
            Expr::affine(a[(r, 0)].clone(), &coeffs)
        })
        .collect();
    let den = lin[0].clone();
    lin[1..]
        .iter()
        .map(|num| Expr::div(num.clone(), den.clone()))
        .collect()
}

/// `A*` applied to jet-valued affine coordinates.
pub fn mobius_jets(a: &Matrix, pt: &[Jet]) -> Result<Vec<Jet>> {
    if pt.len() + 1 != a.cols() {
        return Err(Error::Dimension(
            "jet point does not match matrix size".into(),
        ));
    }
    let (arity, order) = (pt[0].arity(), pt.iter().map(Jet::order).min().unwrap_or(0));
    let lin: Vec<Jet> = (0..a.rows())
        .map(|r| {
            let mut acc = Jet::constant(arity, order, a[(r, 0)].clone());
            for (c, x) in pt.iter().enumerate() {
                let coeff = &a[(r, c + 1)];
                if !coeff.is_zero() {
                    acc = acc.add(&x.scale(coeff));
                }
            }
            acc
        })
        .collect();
    let inv = lin[0]
        .recip()
        .map_err(|_| Error::Pole("image is at infinity at the base point".into()))?;
    Ok(lin[1..].iter().map(|x| x.mul(&inv)).collect())
}
