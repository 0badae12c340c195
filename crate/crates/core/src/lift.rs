//! First-order adapted lifts of `M = F(∂ℍ^{n+1})` into `SU(N+1,1)` and the
//! pulled-back Maurer–Cartan form.
//!
//! Frames are matrices of jets in a chart `(x, x̄, t)` around a base point;
//! the columns are `E_0, E_1..E_n, E_{n+1}..E_N, E_{N+1}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{form_eval_jets, frame_residuals, Matrix};
use crate::jet::{Jet, JetVector, Var};
use crate::map::{BoundaryPoint, MapSpec};
use crate::scalar::Scalar;

pub const FRAME_ORDER: u32 = 5;
pub const FRAME_TOL: f64 = 1e-10;
pub const MC_TOL: f64 = 1e-9;
/// Truncation order kept for the Maurer–Cartan form: enough for its value
/// and first derivatives at the base point.
const MC_ORDER: u32 = 2;

/// Dense matrix of jets sharing arity.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Jet>,
}

impl JetMatrix {
    pub fn from_columns(cols: &[Vec<Jet>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("ragged frame columns".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in 0..r {
            for col in cols {
                data.push(col[row].clone());
            }
        }
        Ok(JetMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn constant(m: &Matrix, arity: usize, order: u32) -> Self {
        let mut data = Vec::with_capacity(m.rows() * m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                data.push(Jet::constant(arity, order, m[(r, c)].clone()));
            }
        }
        JetMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Jet {
        &self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<Jet> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn arity(&self) -> usize {
        self.data[0].arity()
    }

    pub fn order(&self) -> u32 {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn is_exact(&self) -> bool {
        self.data.iter().all(Jet::is_exact)
    }

    fn map(&self, f: impl Fn(&Jet) -> Jet) -> JetMatrix {
        JetMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn truncate(&self, order: u32) -> JetMatrix {
        self.map(|j| j.truncate(order))
    }

    /// Values at the base point.
    pub fn at_base(&self) -> Matrix {
        let rows = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| self.get(r, c).constant_term())
                    .collect()
            })
            .collect();
        Matrix::from_rows(rows).expect("rectangular")
    }

    pub fn differentiate(&self, var: Var) -> JetMatrix {
        self.map(|j| j.differentiate(var))
    }

    pub fn sub(&self, other: &JetMatrix) -> JetMatrix {
        JetMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn mul(&self, other: &JetMatrix) -> JetMatrix {
        assert_eq!(self.cols, other.rows, "jet matrix shapes");
        let (arity, order) = (self.arity(), self.order().min(other.order()));
        let mut data = Vec::with_capacity(self.rows * other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = Jet::zero(arity, order);
                for k in 0..self.cols {
                    let (a, b) = (self.get(r, k), other.get(k, c));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                data.push(acc);
            }
        }
        JetMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    /// `M · self` for a constant matrix `M`.
    pub fn left_mul(&self, m: &Matrix) -> JetMatrix {
        let (arity, order) = (self.arity(), self.order());
        let mut data = Vec::with_capacity(m.rows() * self.cols);
        for r in 0..m.rows() {
            for c in 0..self.cols {
                let mut acc = Jet::zero(arity, order);
                for k in 0..m.cols() {
                    if !m[(r, k)].is_zero() {
                        acc = acc.add(&self.get(k, c).scale(&m[(r, k)]));
                    }
                }
                data.push(acc);
            }
        }
        JetMatrix {
            rows: m.rows(),
            cols: self.cols,
            data,
        }
    }

    /// Inverse by the Neumann series around the base value, to `order`.
    pub fn inverse(&self, order: u32) -> Result<JetMatrix> {
        let e0 = self.at_base();
        let inv0 = e0
            .inverse()
            .map_err(|_| Error::SingularMatrix("frame is singular at the base point".into()))?;
        let arity = self.arity();
        let base = self.truncate(order);
        let x = base.sub(&JetMatrix::constant(&e0, arity, order));
        let step = x.left_mul(&inv0.scale(&Scalar::int(-1)));
        let inv0_j = JetMatrix::constant(&inv0, arity, order);
        let mut acc = inv0_j.clone();
        let mut term = inv0_j;
        for _ in 0..order {
            term = step.mul(&term);
            if term.data.iter().all(Jet::is_zero) {
                break;
            }
            acc = JetMatrix {
                rows: acc.rows,
                cols: acc.cols,
                data: acc
                    .data
                    .iter()
                    .zip(&term.data)
                    .map(|(a, b)| a.add(b))
                    .collect(),
            };
        }
        Ok(acc)
    }

    /// Determinant by elimination, pivoting on the largest base value.
    #[allow(clippy::needless_range_loop)]
    pub fn det(&self) -> Result<Jet> {
        let n = self.rows;
        let mut a: Vec<Vec<Jet>> = (0..n)
            .map(|r| (0..n).map(|c| self.get(r, c).clone()).collect())
            .collect();
        let mut det = Jet::constant(self.arity(), self.order(), Scalar::one());
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| {
                    a[x][col]
                        .constant_term()
                        .abs()
                        .total_cmp(&a[y][col].constant_term().abs())
                })
                .expect("nonempty");
            if a[p][col].constant_term().is_zero() {
                return Err(Error::SingularMatrix(
                    "frame is singular at the base point".into(),
                ));
            }
            if p != col {
                a.swap(p, col);
                det = det.neg();
            }
            let inv = a[col][col].recip()?;
            det = det.mul(&a[col][col]);
            for r in col + 1..n {
                let factor = a[r][col].mul(&inv);
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    let v = a[col][c].mul(&factor);
                    a[r][c] = a[r][c].sub(&v);
                }
            }
        }
        Ok(det)
    }

    fn set_column(&mut self, c: usize, v: &[Jet]) {
        for (r, x) in v.iter().enumerate() {
            self.data[r * self.cols + c] = x.clone();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftKind {
    General,
    Spherical,
}

/// A first-order adapted lift around a base point.
#[derive(Clone, Debug)]
pub struct LiftFrame {
    pub kind: LiftKind,
    pub frame: JetMatrix,
    /// Source dimension `n` and target dimension `N`.
    pub n: usize,
    pub big_n: usize,
    /// Frame products at the base point (named, as in [`frame_residuals`]).
    pub residuals: Vec<(String, f64)>,
    /// Spherical lifts: whether the normalized `L_α`-derivatives were
    /// already orthonormal before Gram–Schmidt.
    pub direct_orthonormal: Option<bool>,
    /// `|Im A|` coefficient used for `E_{N+1}` at the base point.
    pub reeb_pairing: Complex64,
}

impl LiftFrame {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn at_base(&self) -> Matrix {
        self.frame.at_base()
    }

    /// `A · self` for a constant matrix (lift of `A⁻¹`-image data).
    pub fn transport(&self, a: &Matrix) -> Result<LiftFrame> {
        if a.rows() != self.frame.rows() || !a.is_square() {
            return Err(Error::Dimension(
                "transport matrix does not match the frame".into(),
            ));
        }
        let frame = self.frame.left_mul(a);
        Ok(LiftFrame {
            residuals: frame_residuals(&frame.at_base()),
            frame,
            ..self.clone()
        })
    }
}

/// `Σ_A x_A conj(y_A) + (i/2)(x_{N+1} conj y_0 − x_0 conj y_{N+1})` on jets.
fn ip(x: &[Jet], y: &[Jet]) -> Jet {
    form_eval_jets(x, y)
}

fn lin(vs: &[(&Jet, &[Jet])]) -> Vec<Jet> {
    let len = vs[0].1.len();
    (0..len)
        .map(|k| {
            vs.iter()
                .map(|(c, v)| v[k].mul(c))
                .reduce(|a, b| a.add(&b))
                .expect("nonempty")
        })
        .collect()
}

fn scale_vec(v: &[Jet], c: &Jet) -> Vec<Jet> {
    v.iter().map(|x| x.mul(c)).collect()
}

fn sub_vec(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Orthonormalize vectors whose form is positive definite at the base point.
fn gram_schmidt(vs: Vec<Vec<Jet>>) -> Result<Vec<Vec<Jet>>> {
    let mut out: Vec<Vec<Jet>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v;
        for e in &out {
            let c = ip(&w, e);
            w = sub_vec(&w, &scale_vec(e, &c));
        }
        let nrm = ip(&w, &w);
        if nrm.constant_term().to_c64().re <= 1e-14 {
            return Err(Error::NonEmbedding(
                "tangent vectors are dependent at the base point".into(),
            ));
        }
        let inv = nrm.real_part().sqrt()?.recip()?;
        out.push(scale_vec(&w, &inv));
    }
    Ok(out)
}

/// Build the frame from `E_0`, the tangent vectors `Ẽ_α` and a transverse
/// vector `Ẽ_{N+1}`.
fn complete_frame(
    e0: Vec<Jet>,
    e_alpha: Vec<Vec<Jet>>,
    tilde_reeb: Vec<Jet>,
) -> Result<(JetMatrix, Complex64)> {
    let dim = e0.len();
    let n = e_alpha.len();
    let (arity, order) = (e0[0].arity(), e0.iter().map(Jet::order).min().unwrap_or(0));
    let pair = ip(&tilde_reeb, &e0);
    let pair0 = pair.constant_term();
    if pair0.abs() <= 1e-12 {
        return Err(Error::DegenerateReeb(format!(
            "<E~_(N+1), E_0> = {pair0} at the base point"
        )));
    }
    let half_i = Jet::constant(arity, order, Scalar::i() * Scalar::ratio(1, 2));
    let c = half_i.mul(&pair.recip()?);
    let b: Vec<Jet> = e_alpha
        .iter()
        .map(|ea| ip(&tilde_reeb, ea).mul(&c).neg())
        .collect();
    let mut im_a = ip(&tilde_reeb, &tilde_reeb).mul(&c.mul(&c.conj())).neg();
    for bj in &b {
        im_a = im_a.add(&bj.mul(&bj.conj()));
    }
    let a = im_a.real_part().scale(&Scalar::i());
    let mut terms: Vec<(&Jet, &[Jet])> = vec![(&a, &e0), (&c, &tilde_reeb)];
    for (bj, ea) in b.iter().zip(&e_alpha) {
        terms.push((bj, ea));
    }
    let e_last = lin(&terms);

    // E_μ: project standard basis vectors onto the complement and orthonormalize.
    let two_i = Scalar::gauss(0, 2);
    let mut normals: Vec<Vec<Jet>> = Vec::new();
    let mut used = vec![false; dim];
    for _ in n..dim - 2 {
        let mut best: Option<(f64, usize, Vec<Jet>)> = None;
        for (k, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let v: Vec<Jet> = (0..dim)
                .map(|j| {
                    Jet::constant(
                        arity,
                        order,
                        if j == k {
                            Scalar::one()
                        } else {
                            Scalar::zero()
                        },
                    )
                })
                .collect();
            let ca = ip(&v, &e_last).scale(&two_i);
            let cc = ip(&v, &e0).scale(&-&two_i);
            let mut p = sub_vec(&v, &scale_vec(&e0, &ca));
            p = sub_vec(&p, &scale_vec(&e_last, &cc));
            for ea in e_alpha.iter().chain(&normals) {
                let cb = ip(&v, ea);
                p = sub_vec(&p, &scale_vec(ea, &cb));
            }
            let size = ip(&p, &p).constant_term().to_c64().re;
            if best.as_ref().is_none_or(|(s, _, _)| size > *s + 1e-12) {
                best = Some((size, k, p));
            }
        }
        let (size, k, p) = best.expect("candidates remain");
        if size <= 1e-12 {
            return Err(Error::NonEmbedding("cannot complete the frame".into()));
        }
        used[k] = true;
        normals.extend(gram_schmidt(vec![p])?);
    }
    let mut cols = vec![e0];
    cols.extend(e_alpha);
    cols.extend(normals);
    cols.push(e_last);
    let mut frame = JetMatrix::from_columns(&cols)?;
    let det = frame.det()?;
    let fix = if dim - 2 > n { dim - 2 } else { 1 };
    let corrected = scale_vec(&frame.column(fix), &det.recip()?);
    frame.set_column(fix, &corrected);
    Ok((frame, c.constant_term().to_c64()))
}

/// `L_β = ∂_{z_β} + i z̄_β ∂_u` on restricted jets.
pub fn cr_field(h: &Jet, beta: usize) -> Result<Jet> {
    let n = h.arity();
    let zb = Jet::var(n, h.order() + 1, Var::ZBar(beta)).scale(&Scalar::i());
    let du = h.differentiate(Var::U);
    h.differentiate(Var::Z(beta))
        .try_add(&du.mul_vanishing(&zb)?)
}

/// General lift from restricted jets `H` of `F ∘ σ⁰_p` (any target gauge).
pub fn general_lift_from_jets(h: &JetVector) -> Result<LiftFrame> {
    let n = h.arity();
    let big_n = h.len() - 1;
    let order = h.order();
    let one = Jet::constant(n, order, Scalar::one());
    let mut e0 = vec![one];
    e0.extend(h.entries.iter().cloned());
    let tilde: Vec<Vec<Jet>> = (0..n)
        .map(|b| {
            let mut v = vec![Jet::zero(n, order)];
            for x in &h.entries {
                v.push(cr_field(x, b)?);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let e_alpha = gram_schmidt(tilde)?;
    let mut reeb = vec![Jet::zero(n, order)];
    reeb.extend(h.entries.iter().map(|x| x.differentiate(Var::U)));
    let (frame, c) = complete_frame(e0, e_alpha, reeb)?;
    Ok(LiftFrame {
        kind: LiftKind::General,
        residuals: frame_residuals(&frame.at_base()),
        frame,
        n,
        big_n,
        direct_orthonormal: None,
        reeb_pairing: c,
    })
}

/// Exact arithmetic is kept at the origin only; elsewhere coefficient
/// heights grow too fast to be worth it.
pub fn lift_point(p: &BoundaryPoint) -> BoundaryPoint {
    if p.is_origin() {
        p.clone()
    } else {
        p.to_float()
    }
}

/// General lift of `M` at `F(p)`, in the source chart `(z, z̄, u)` around `p`.
pub fn build_general_lift(f: &MapSpec, p: &BoundaryPoint, order: u32) -> Result<LiftFrame> {
    let f = f.to_siegel()?;
    let h = f
        .source_jets(&lift_point(p), order)?
        .restrict_to_heisenberg()?;
    general_lift_from_jets(&h)
}

/// Weighted inverse of `t ↦ (f(t), conj f(t), Re g(t))` around 0, returned as
/// `2n+1` jets in the chart `(ẑ, conj ẑ, û)`.
fn chart_inverse(f: &[Jet], re_g: &Jet) -> Result<Vec<Jet>> {
    let n = f.len();
    let order = f
        .iter()
        .map(Jet::order)
        .chain([re_g.order()])
        .min()
        .unwrap_or(0);
    let b = Matrix::from_rows(
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|j| f[a].coeff(&crate::normalize::hmono(n, &[(j, 1)], 0)))
                    .collect()
            })
            .collect(),
    )?;
    let det = b.det()?;
    if det.abs() <= 1e-10 {
        return Err(Error::Chart(
            "(f, g) is not a local chart: the f-block of the differential is singular".into(),
        ));
    }
    let sigma = re_g.coeff(&crate::normalize::hmono(n, &[], 1));
    if sigma.abs() <= 1e-10 {
        return Err(Error::Chart(
            "(f, g) is not a local chart: Re g has no u-term".into(),
        ));
    }
    let binv = b.inverse()?;
    let sinv = sigma.inv().expect("nonzero");
    let phi: Vec<Jet> = f
        .iter()
        .cloned()
        .chain(f.iter().map(Jet::conj))
        .chain([re_g.clone()])
        .collect();
    // Φ = Λ + N with Λ the weight-homogeneous linear part
    let lin_part = |t: &[Jet]| -> Vec<Jet> {
        let mut out = Vec::with_capacity(2 * n + 1);
        for a in 0..n {
            out.push(
                (0..n).fold(Jet::zero(t[0].arity(), t[0].order()), |acc, j| {
                    acc.add(&t[j].scale(&b[(a, j)]))
                }),
            );
        }
        for a in 0..n {
            out.push(
                (0..n).fold(Jet::zero(t[0].arity(), t[0].order()), |acc, j| {
                    acc.add(&t[n + j].scale(&b[(a, j)].conj()))
                }),
            );
        }
        out.push(t[2 * n].scale(&sigma));
        out
    };
    let lin_inv = |s: &[Jet]| -> Vec<Jet> {
        let mut out = Vec::with_capacity(2 * n + 1);
        for a in 0..n {
            out.push(
                (0..n).fold(Jet::zero(s[0].arity(), s[0].order()), |acc, j| {
                    acc.add(&s[j].scale(&binv[(a, j)]))
                }),
            );
        }
        for a in 0..n {
            out.push(
                (0..n).fold(Jet::zero(s[0].arity(), s[0].order()), |acc, j| {
                    acc.add(&s[n + j].scale(&binv[(a, j)].conj()))
                }),
            );
        }
        out.push(s[2 * n].scale(&sinv));
        out
    };
    let ident: Vec<Jet> = Var::cobasis(n)
        .into_iter()
        .map(|v| Jet::var(n, order, v))
        .collect();
    let higher: Vec<Jet> = sub_vec(&phi, &lin_part(&ident));
    let mut t = lin_inv(&ident);
    for _ in 0..=order {
        let nt = Jet::compose_many(&higher, &t, order)?;
        let next = lin_inv(&sub_vec(&ident, &nt));
        if next == t {
            break;
        }
        t = next;
    }
    Ok(t)
}

/// Spherical lift of `M` at `F(p)`: built for `τ^F_p(M)` in the chart
/// `(ẑ, conj ẑ, û = Re ĝ)` given by `(f, g)` and transported back by `τ⁻¹`.
pub fn build_spherical_lift(f: &MapSpec, p: &BoundaryPoint, order: u32) -> Result<LiftFrame> {
    let f = f.to_siegel()?;
    let jets = f.jets_at(&lift_point(p), order)?;
    let tau = crate::aut::Automorphism::tau_for_image(&jets.image)?;
    let lift = spherical_lift_from_jets(&jets.restricted)?;
    lift.transport(&tau.matrix.inverse()?)
}

/// Spherical lift of the image of restricted jets with `H(0) = 0`.
pub fn spherical_lift_from_jets(h: &JetVector) -> Result<LiftFrame> {
    let n = h.arity();
    let big_n = h.len() - 1;
    let order = h.order();
    let re_g = h.entries[big_n].real_part();
    let t = chart_inverse(&h.entries[..n], &re_g)?;
    let hat = Jet::compose_many(&h.entries, &t, order)?;
    let phi = &hat[n..big_n];
    // c_α = i(conj ẑ_α + Σ ∂_α φ̂ conj φ̂) / (1 − i Σ ∂_û φ̂ conj φ̂)
    let mut den = Jet::constant(n, order, Scalar::one());
    for ph in phi {
        den = den.sub(&ph.differentiate(Var::U).mul(&ph.conj()).scale(&Scalar::i()));
    }
    let den_inv = den.recip()?;
    let cs: Vec<Jet> = (0..n)
        .map(|a| {
            let mut num = Jet::var(n, order, Var::ZBar(a));
            for ph in phi {
                num = num.add(&ph.differentiate(Var::Z(a)).mul(&ph.conj()));
            }
            num.scale(&Scalar::i()).mul(&den_inv)
        })
        .collect();
    let field = |x: &Jet, a: usize| -> Result<Jet> {
        x.differentiate(Var::Z(a))
            .try_add(&x.differentiate(Var::U).mul_vanishing(&cs[a])?)
    };
    let mut e0 = vec![Jet::constant(n, order, Scalar::one())];
    e0.extend(hat.iter().cloned());
    let tilde: Vec<Vec<Jet>> = (0..n)
        .map(|a| {
            let mut v = vec![Jet::zero(n, order)];
            for x in &hat {
                v.push(field(x, a)?);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let direct: Vec<Vec<Jet>> = tilde
        .iter()
        .map(|v| {
            let inv = ip(v, v).real_part().sqrt()?.recip()?;
            Ok(scale_vec(v, &inv))
        })
        .collect::<Result<_>>()?;
    let mut defect: f64 = 0.0;
    for (a, va) in direct.iter().enumerate() {
        for vb in direct.iter().skip(a + 1) {
            defect = defect.max(ip(va, vb).max_abs());
        }
    }
    let e_alpha = gram_schmidt(direct)?;
    let mut reeb = vec![Jet::zero(n, order)];
    reeb.extend(hat.iter().map(|x| x.differentiate(Var::U)));
    let (frame, c) = complete_frame(e0, e_alpha, reeb)?;
    Ok(LiftFrame {
        kind: LiftKind::Spherical,
        residuals: frame_residuals(&frame.at_base()),
        frame,
        n,
        big_n,
        direct_orthonormal: Some(defect <= FRAME_TOL),
        reeb_pairing: c,
    })
}

/// `ω = e⁻¹ de`: one matrix of coefficient jets per chart cobasis element
/// `(dx_1..dx_n, dx̄_1..dx̄_n, dt)`.
#[derive(Clone, Debug)]
pub struct McForm {
    pub n: usize,
    pub omega: Vec<JetMatrix>,
}

pub fn pullback_mc(lift: &LiftFrame) -> Result<McForm> {
    let e = &lift.frame;
    let inv = e.inverse(MC_ORDER)?;
    let omega = Var::cobasis(lift.n)
        .into_iter()
        .map(|v| inv.mul(&e.differentiate(v).truncate(MC_ORDER)))
        .collect();
    Ok(McForm { n: lift.n, omega })
}

/// Coefficients at the base point of one entry, over the cobasis.
pub type FormValue = Vec<Complex64>;

impl McForm {
    pub fn dim(&self) -> usize {
        self.omega[0].rows()
    }

    /// `ω^r_c` at the base point.
    pub fn entry(&self, r: usize, c: usize) -> FormValue {
        self.omega
            .iter()
            .map(|m| m.get(r, c).constant_term().to_c64())
            .collect()
    }

    /// Conjugate 1-form: swap the `dx`/`dx̄` blocks and conjugate.
    pub fn conj_form(&self, v: &FormValue) -> FormValue {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        for k in 0..n {
            out[k] = v[n + k].conj();
            out[n + k] = v[k].conj();
        }
        out[2 * n] = v[2 * n].conj();
        out
    }

    /// Residuals of the structure relations of `su(N+1,1)` at the base point.
    pub fn relations(&self) -> Vec<(String, f64)> {
        let d = self.dim();
        let last = d - 1;
        let n = self.n;
        let diff = |a: &FormValue, b: &FormValue, sb: Complex64| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x + sb * y).norm())
                .fold(0.0, f64::max)
        };
        let one = Complex64::new(1.0, 0.0);
        let two_i = Complex64::new(0.0, 2.0);
        let half_i = Complex64::new(0.0, 0.5);
        let mut out = Vec::new();
        out.push((
            "w00+conj(wN+1N+1)".into(),
            diff(
                &self.entry(0, 0),
                &self.conj_form(&self.entry(last, last)),
                one,
            ),
        ));
        let theta = self.entry(last, 0);
        out.push((
            "wN+1_0 real".into(),
            diff(&theta, &self.conj_form(&theta), -one),
        ));
        let t2 = self.entry(0, last);
        out.push(("w0_N+1 real".into(), diff(&t2, &self.conj_form(&t2), -one)));
        let (mut r4, mut r5, mut r6, mut r8): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for a in 1..last {
            r4 = r4.max(diff(
                &self.entry(last, a),
                &self.conj_form(&self.entry(a, 0)),
                -two_i,
            ));
            r5 = r5.max(diff(
                &self.entry(a, last),
                &self.conj_form(&self.entry(0, a)),
                half_i,
            ));
            for b in 1..last {
                r6 = r6.max(diff(
                    &self.entry(a, b),
                    &self.conj_form(&self.entry(b, a)),
                    one,
                ));
            }
            if a > n {
                r8 = r8.max(
                    self.entry(a, 0)
                        .iter()
                        .map(|x| x.norm())
                        .fold(0.0, f64::max),
                );
            }
        }
        out.push(("wN+1_A=2i conj(wA_0)".into(), r4));
        out.push(("wA_N+1=-(i/2)conj(w0_A)".into(), r5));
        out.push(("wA_B+conj(wB_A)".into(), r6));
        let mut trace = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        for k in 0..d {
            for (t, v) in trace.iter_mut().zip(self.entry(k, k)) {
                *t += v;
            }
        }
        out.push((
            "trace".into(),
            trace.iter().map(|x| x.norm()).fold(0.0, f64::max),
        ));
        out.push(("wmu_0".into(), r8));
        out
    }

    pub fn max_relation_residual(&self) -> f64 {
        self.relations().iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    /// `max |∂_k ω_l − ∂_l ω_k + [ω_k, ω_l]|` at the base point.
    pub fn structure_residual(&self) -> f64 {
        let vars = Var::cobasis(self.n);
        let base: Vec<Matrix> = self.omega.iter().map(JetMatrix::at_base).collect();
        let mut worst: f64 = 0.0;
        for k in 0..vars.len() {
            for l in k + 1..vars.len() {
                let dkl = self.omega[l].differentiate(vars[k]).at_base();
                let dlk = self.omega[k].differentiate(vars[l]).at_base();
                let comm = base[k].mul(&base[l]).sub(&base[l].mul(&base[k]));
                worst = worst.max(dkl.sub(&dlk).add(&comm).max_abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::fixtures;

    #[test]
    fn linear_lift_is_constant_in_normal_block() {
        let f = fixtures::linear(1, 2);
        let l = build_general_lift(&f, &BoundaryPoint::origin(1), FRAME_ORDER).unwrap();
        assert_eq!(l.at_base(), Matrix::identity(4));
        assert_eq!(l.max_residual(), 0.0);
        for r in 0..4 {
            assert!(l.frame.get(r, 2).weighted_order().is_none_or(|w| w == 0));
            assert_eq!(l.frame.get(r, 2).len(), usize::from(r == 2));
        }
        let mc = pullback_mc(&l).unwrap();
        assert!(mc.max_relation_residual() == 0.0);
    }

    #[test]
    fn normalized_whitney_frame_is_identity_at_origin() {
        let f = fixtures::whitney_normalized();
        for build in [build_general_lift, build_spherical_lift] {
            let l = build(&f, &BoundaryPoint::origin(1), FRAME_ORDER).unwrap();
            assert!(l.frame.is_exact());
            assert_eq!(l.at_base(), Matrix::identity(4));
            let mc = pullback_mc(&l).unwrap();
            assert_eq!(mc.max_relation_residual(), 0.0);
            assert_eq!(mc.structure_residual(), 0.0);
        }
    }

    #[test]
    fn whitney_frames_at_a_point() {
        let f = fixtures::whitney();
        let p = BoundaryPoint::new(vec![Scalar::ratio(1, 3)], Scalar::ratio(-2, 7)).unwrap();
        for build in [build_general_lift, build_spherical_lift] {
            let l = build(&f, &p, FRAME_ORDER).unwrap();
            assert!(l.max_residual() <= FRAME_TOL, "{:?}", l.residuals);
            let mc = pullback_mc(&l).unwrap();
            assert!(mc.max_relation_residual() <= MC_TOL, "{:?}", mc.relations());
            assert!(mc.structure_residual() <= 1e-8);
        }
    }
}
