//! Partial and full normal forms of translated maps, the matrix `𝒜(p)` and
//! the geometric rank.
//!
//! Jets here are holomorphic in `(z, w)` with `w` stored in the `u` slot.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::aut::Automorphism;
use crate::error::{Error, Result};
use crate::hermitian::{mobius_jets, singular_values, Matrix};
use crate::jet::{Chart, Jet, JetVector, Monomial, Var};
use crate::map::{BoundaryPoint, MapSpec};
use crate::scalar::Scalar;

pub const RANK_TOL: f64 = 1e-6;
/// Minimum relative singular-value gap for a confident rank.
pub const GAP_MIN: f64 = 1e-3;
pub const NORMAL_ORDER: u32 = 4;
/// Tolerance for the structural checks that properness guarantees.
const STRUCT_TOL: f64 = 1e-7;

/// Holomorphic monomial `z^α w^k`.
pub fn hmono(n: usize, z: &[(usize, u32)], w: u32) -> Monomial {
    let mut m = Monomial::one(n);
    for &(k, e) in z {
        m.z[k] += e;
    }
    m.u = w;
    m
}

fn zero_pt(n: usize) -> Vec<Scalar> {
    vec![Scalar::zero(); n]
}

/// Identity coordinates `(z_1..z_m, w)` as holomorphic jets.
pub fn coordinate_jets(m: usize, order: u32) -> Vec<Jet> {
    let mut v: Vec<Jet> = (0..m).map(|k| Jet::var(m, order, Var::Z(k))).collect();
    v.push(Jet::var(m, order, Var::U));
    v
}

/// `A* ∘ jets` for a target matrix `A`.
pub fn apply_target(a: &Matrix, jets: &JetVector) -> Result<JetVector> {
    JetVector::new(Chart::Holomorphic, mobius_jets(a, &jets.entries)?)
}

/// `jets ∘ G*` for a source matrix `G` fixing the origin.
pub fn apply_source(jets: &JetVector, g: &Matrix) -> Result<JetVector> {
    let n = jets.arity();
    let order = jets.order();
    let mut args = mobius_jets(g, &coordinate_jets(n, order))?;
    if args.iter().any(|a| !a.constant_term().approx_zero(1e-12)) {
        return Err(Error::Structural(
            "source transformation must fix the origin".into(),
        ));
    }
    let w = args.pop().expect("w component");
    let mut full = args;
    full.extend((0..n).map(|_| Jet::zero(n, order)));
    full.push(w);
    let entries = jets
        .entries
        .iter()
        .map(|e| e.compose(&full, order))
        .collect::<Result<Vec<_>>>()?;
    JetVector::new(Chart::Holomorphic, entries)
}

/// Holomorphic jets of `T* ∘ τ^F_p ∘ F ∘ σ⁰_p ∘ G*` at 0.
pub fn transformed_jets(
    f: &MapSpec,
    p: &BoundaryPoint,
    source: &Matrix,
    target: &Matrix,
    order: u32,
) -> Result<JetVector> {
    let f = f.to_siegel()?;
    let s = Automorphism::sigma0(p).matrix.mul(source);
    let args = mobius_jets(&s, &coordinate_jets(f.n, order))?;
    let comps = f.compose_jets(&args, order)?;
    let tau = Automorphism::tau_f(&f, p)?;
    JetVector::new(
        Chart::Holomorphic,
        mobius_jets(&target.mul(&tau.matrix), &comps)?,
    )
}

/// Complete orthonormal rows (Hermitian product) to a `dim × dim` unitary
/// matrix with Gram–Schmidt over the standard basis. Stays exact when every
/// norm that occurs is a rational square.
pub fn complete_unitary(rows: Vec<Vec<Scalar>>, dim: usize) -> Result<Matrix> {
    let mut basis = rows;
    while basis.len() < dim {
        let mut best: Option<(f64, Vec<Scalar>, Scalar)> = None;
        for k in 0..dim {
            let mut v: Vec<Scalar> = (0..dim)
                .map(|j| {
                    if j == k {
                        Scalar::one()
                    } else {
                        Scalar::zero()
                    }
                })
                .collect();
            for b in &basis {
                let proj = v
                    .iter()
                    .zip(b)
                    .fold(Scalar::zero(), |acc, (x, y)| acc + x * &y.conj());
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= &(&proj * y);
                }
            }
            let nrm = v.iter().fold(Scalar::zero(), |acc, x| acc + x.norm_sqr());
            let size = nrm.abs();
            if best.as_ref().is_none_or(|(s, _, _)| size > *s + 1e-12) {
                best = Some((size, v, nrm));
            }
        }
        let (size, v, nrm) = best.expect("dim > 0");
        if size < 1e-6 {
            return Err(Error::Inconsistency("rows are not orthonormal".into()));
        }
        let inv = nrm.sqrt().inv().expect("positive norm");
        basis.push(v.iter().map(|x| x * &inv).collect());
    }
    Matrix::from_rows(basis)
}

fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, k) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(m + k, m + k);
    for r in 0..m {
        for c in 0..m {
            out[(r, c)] = a[(r, c)].clone();
        }
    }
    for r in 0..k {
        for c in 0..k {
            out[(m + r, m + c)] = b[(r, c)].clone();
        }
    }
    out
}

fn isotropy_matrix(lambda: Scalar, r: Scalar, a: Vec<Scalar>, u: Matrix) -> Result<Matrix> {
    Ok(Automorphism::isotropy(lambda, r, a, u)?.matrix)
}

/// Residuals of the partial normal form.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Star2Residuals {
    /// `f − z − (i/2)A z w` through weight 3.
    pub f: f64,
    /// Terms of `φ` of weight `<= 2` other than `z`-quadratic ones.
    pub phi: f64,
    /// `g − w` through weight 4.
    pub g: f64,
    /// `(z^† A z)|z|² − |φ⁽²⁾(z)|²`, coefficientwise.
    pub identity: f64,
    /// `max |A − A^†|`.
    pub hermitian: f64,
}

impl Star2Residuals {
    pub fn max(&self) -> f64 {
        [self.f, self.phi, self.g, self.identity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Result of the partial normalization of translated jets.
#[derive(Clone, Debug)]
pub struct Star2 {
    pub jets: JetVector,
    /// Accumulated target isotropy.
    pub target: Matrix,
    /// `A` with `∂²f_l/∂z_j∂w(0) = (i/2) A_{lj}`.
    pub a: Matrix,
    pub residuals: Star2Residuals,
}

fn coeff_real(c: &Scalar, scale: f64, what: &str, weight: u32) -> Result<Scalar> {
    if c.is_exact() {
        if !c.im().is_zero() {
            return Err(Error::Normalization {
                weight,
                message: format!("{what} is not real: {c}"),
            });
        }
    } else if c.im().abs() > STRUCT_TOL * scale.max(1.0) {
        return Err(Error::Normalization {
            weight,
            message: format!("{what} is not real: {c}"),
        });
    }
    Ok(c.re())
}

/// Huang's partial normalization of jets with `F_p(0) = 0`.
pub fn normalize_star2(jets: &JetVector) -> Result<Star2> {
    let n = jets.arity();
    let big_n = jets.len() - 1;
    if jets.order() < NORMAL_ORDER {
        return Err(Error::Structural(format!(
            "normalization needs truncation order >= {NORMAL_ORDER}"
        )));
    }
    if jets.constant_terms().iter().any(|c| !c.approx_zero(1e-10)) {
        return Err(Error::Structural("normalization expects F_p(0) = 0".into()));
    }
    let g = &jets.entries[big_n];
    let sigma = g.coeff(&hmono(n, &[], 1));
    let sigma = coeff_real(&sigma, sigma.abs(), "g_w(0)", 2)?;
    if sigma.to_c64().re <= STRUCT_TOL {
        return Err(Error::NonEmbedding(format!(
            "g_w(0) = {sigma} is not positive"
        )));
    }
    let b = Matrix::from_rows(
        (0..big_n)
            .map(|a| {
                (0..n)
                    .map(|j| jets.entries[a].coeff(&hmono(n, &[(j, 1)], 0)))
                    .collect()
            })
            .collect(),
    )?;
    let gram = b.adjoint().mul(&b).sub(&Matrix::identity(n).scale(&sigma));
    if gram.max_abs() > STRUCT_TOL * sigma.abs().max(1.0) {
        return Err(Error::NonEmbedding(format!(
            "rows of the differential are not orthogonal with common norm (defect {:e})",
            gram.max_abs()
        )));
    }

    // weight 1: λ and U
    let root = sigma.sqrt();
    let lambda = root.inv().expect("positive");
    let rows: Vec<Vec<Scalar>> = (0..n)
        .map(|j| (0..big_n).map(|a| &b[(a, j)].conj() * &lambda).collect())
        .collect();
    let u = complete_unitary(rows, big_n)?;
    let t1 = isotropy_matrix(lambda, Scalar::zero(), zero_pt(big_n), u)?;
    let jets = apply_target(&t1, jets)?;

    // weight 2: cancel the w-linear terms of (f, φ)
    let bw: Vec<Scalar> = (0..big_n)
        .map(|a| -jets.entries[a].coeff(&hmono(n, &[], 1)))
        .collect();
    let t2 = isotropy_matrix(Scalar::one(), Scalar::zero(), bw, Matrix::identity(big_n))?;
    let jets = apply_target(&t2, &jets)?;

    // weight 4: cancel the w² term of g
    let e = jets.entries[big_n].coeff(&hmono(n, &[], 2));
    let e = coeff_real(&e, 1.0, "w² coefficient of g", 4)?;
    let t3 = isotropy_matrix(Scalar::one(), -e, zero_pt(big_n), Matrix::identity(big_n))?;
    let jets = apply_target(&t3, &jets)?;

    let target = t3.mul(&t2).mul(&t1);
    let a = read_a(&jets);
    let residuals = star2_residuals(&jets, &a);
    Ok(Star2 {
        jets,
        target,
        a,
        residuals,
    })
}

/// `A_{lj} = −2i ∂²f_l/∂z_j∂w(0)`.
pub fn read_a(jets: &JetVector) -> Matrix {
    let n = jets.arity();
    let m2i = Scalar::gauss(0, -2);
    let mut a = Matrix::zeros(n, n);
    for l in 0..n {
        for j in 0..n {
            a[(l, j)] = &jets.entries[l].coeff(&hmono(n, &[(j, 1)], 1)) * &m2i;
        }
    }
    a
}

/// Quadratic part `φ⁽²⁾` of each `φ` component.
fn phi_quadratic(jets: &JetVector) -> Vec<Jet> {
    let n = jets.arity();
    let big_n = jets.len() - 1;
    (n..big_n)
        .map(|mu| {
            let h = jets.entries[mu].homogeneous_part(2);
            Jet::from_terms(
                n,
                4,
                h.terms()
                    .filter(|(m, _)| m.u == 0)
                    .map(|(m, c)| (m.clone(), c.clone())),
            )
        })
        .collect()
}

/// Validate the partial normal form against `A`.
pub fn star2_residuals(jets: &JetVector, a: &Matrix) -> Star2Residuals {
    let n = jets.arity();
    let big_n = jets.len() - 1;
    let mut res = Star2Residuals::default();
    for l in 0..n {
        for (m, c) in jets.entries[l].terms() {
            if m.weight() > 3 {
                continue;
            }
            let dev = if *m == hmono(n, &[(l, 1)], 0) {
                (c - &Scalar::one()).abs()
            } else if m.u == 1 && m.z.iter().sum::<u32>() == 1 {
                0.0
            } else {
                c.abs()
            };
            res.f = res.f.max(dev);
        }
    }
    for mu in n..big_n {
        for (m, c) in jets.entries[mu].terms() {
            if m.weight() <= 2 && !(m.weight() == 2 && m.u == 0) {
                res.phi = res.phi.max(c.abs());
            }
        }
    }
    for (m, c) in jets.entries[big_n].terms() {
        if m.weight() > 4 {
            continue;
        }
        let dev = if *m == hmono(n, &[], 1) {
            (c - &Scalar::one()).abs()
        } else {
            c.abs()
        };
        res.g = res.g.max(dev);
    }
    // (z^† A z)|z|² against Σ|φ⁽²⁾|²
    let z = |k| Jet::var(n, 4, Var::Z(k));
    let zb = |k| Jet::var(n, 4, Var::ZBar(k));
    let mut lhs = Jet::zero(n, 4);
    for l in 0..n {
        for j in 0..n {
            lhs = lhs.add(&zb(l).mul(&z(j)).scale(&a[(l, j)]));
        }
    }
    let r2 = (0..n).fold(Jet::zero(n, 4), |acc, k| acc.add(&z(k).mul(&zb(k))));
    lhs = lhs.mul(&r2);
    let rhs = phi_quadratic(jets)
        .iter()
        .fold(Jet::zero(n, 4), |acc, p| acc.add(&p.mul(&p.conj())));
    res.identity = lhs.sub(&rhs).max_abs();
    res.hermitian = a.sub(&a.adjoint()).max_abs();
    res
}

/// Geometric rank data at one point.
#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    /// `𝒜_{jl} = −2i ∂²f_l/∂z_j∂w(0)`, row-major.
    pub matrix: Vec<Vec<Complex64>>,
    pub singular_values: Vec<f64>,
    /// Eigenvalues of the Hermitian part, descending.
    pub eigenvalues: Vec<f64>,
    pub anti_hermitian_residual: f64,
    /// Rank counted from singular values because `𝒜` is not Hermitian.
    pub svd_fallback: bool,
    pub rank: usize,
    /// `(s_κ − s_{κ+1}) / max(s_1, 1)`.
    pub gap: f64,
    pub tolerance: f64,
    pub exact: bool,
    pub star2: Star2Residuals,
}

/// Hermitian eigen-decomposition with eigenvalues descending and each
/// eigenvector's largest entry made real positive.
pub fn hermitian_eigen(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = h.nrows();
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let big = (0..n)
            .max_by(|&x, &y| col[x].norm().total_cmp(&col[y].norm()))
            .unwrap_or(0);
        let phase = if col[big].norm() > 0.0 {
            col[big].conj() / col[big].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..n {
            vecs[(r, c)] = col[r] * phase;
        }
    }
    (order.iter().map(|&k| eig.eigenvalues[k]).collect(), vecs)
}

pub fn rank_from_a(a: &Matrix, tol: f64, star2: &Star2Residuals) -> RankReport {
    let script_a = a.transpose();
    let m = script_a.to_c64();
    let sv = singular_values(&m);
    let (eigs, _) = hermitian_eigen(&m);
    let anti = (&m - m.adjoint())
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
        / 2.0;
    let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
    let fallback = anti > tol * scale;
    let values: Vec<f64> = if fallback {
        sv.clone()
    } else {
        eigs.iter().map(|x| x.abs()).collect()
    };
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rank = sorted.iter().filter(|&&s| s > tol * scale).count();
    let kept = if rank == 0 { scale } else { sorted[rank - 1] };
    let next = sorted.get(rank).copied().unwrap_or(0.0);
    RankReport {
        matrix: script_a
            .to_rows()
            .iter()
            .map(|r| r.iter().map(Scalar::to_c64).collect())
            .collect(),
        singular_values: sv,
        eigenvalues: eigs,
        anti_hermitian_residual: anti,
        svd_fallback: fallback,
        rank,
        gap: (kept - next) / scale,
        tolerance: tol,
        exact: a.is_exact(),
        star2: star2.clone(),
    }
}

/// `Rk_F(p)`.
pub fn geometric_rank(f: &MapSpec, p: &BoundaryPoint, tol: f64) -> Result<RankReport> {
    let f = f.to_siegel()?;
    let jets = f.jets_at(&f.working_point(p), NORMAL_ORDER)?;
    let st = normalize_star2(&jets.holomorphic)?;
    Ok(rank_from_a(&st.a, tol, &st.residuals))
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaReport {
    pub kappa0: usize,
    pub ranks: Vec<Option<usize>>,
    pub skipped: Vec<(usize, String)>,
    pub sampling: String,
}

/// `κ₀` as the maximum rank over the sample points; points where the
/// normalization fails are skipped and listed.
pub fn kappa0(f: &MapSpec, points: &[BoundaryPoint], tol: f64) -> Result<KappaReport> {
    if points.is_empty() {
        return Err(Error::InvalidParameters(
            "at least one sample point is required".into(),
        ));
    }
    let mut ranks = Vec::with_capacity(points.len());
    let mut skipped = Vec::new();
    for (k, p) in points.iter().enumerate() {
        match geometric_rank(f, p, tol) {
            Ok(r) => ranks.push(Some(r.rank)),
            Err(e) => {
                ranks.push(None);
                skipped.push((k, e.to_string()));
            }
        }
    }
    let kappa0 = ranks
        .iter()
        .flatten()
        .copied()
        .max()
        .ok_or_else(|| Error::Normalization {
            weight: 0,
            message: "normalization failed at every sample point".into(),
        })?;
    Ok(KappaReport {
        kappa0,
        ranks,
        skipped,
        sampling: format!("{} given points", points.len()),
    })
}

/// `P(n, κ₀) = κ₀(2n − κ₀ + 1)/2`, the number of pairs `j ≤ l` with `j ≤ κ₀`.
pub fn p_bound(n: usize, kappa0: usize) -> usize {
    kappa0 * (2 * n + 1 - kappa0) / 2
}

/// The index set `S₀ = {(j, l) : j < κ₀, j ≤ l < n}` (zero-based).
pub fn s0_pairs(n: usize, kappa0: usize) -> Vec<(usize, usize)> {
    (0..kappa0)
        .flat_map(|j| (j..n).map(move |l| (j, l)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MuData {
    pub kappa0: usize,
    pub mu: Vec<Complex64>,
    pub pairs: Vec<(usize, usize)>,
    pub mu_jl: Vec<Complex64>,
    pub p_bound: usize,
    pub bound_holds: bool,
}

fn mu_jl(mu: &[Scalar], kappa0: usize, j: usize, l: usize) -> Scalar {
    if j < kappa0 && l < kappa0 && j != l {
        (&mu[j] + &mu[l]).sqrt()
    } else if j < kappa0 {
        mu[j].sqrt()
    } else {
        Scalar::zero()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Star3Residuals {
    /// Off-diagonal part of the diagonalized `A`.
    pub diagonal: f64,
    /// `φ` quadratic coefficients against `μ_jl z_j z_l`.
    pub phi: f64,
    /// `∂²f_j/∂w²(0)` for `j ≤ κ₀`.
    pub f_ww: f64,
    /// Star2 validator on the output.
    pub star2: Star2Residuals,
}

/// The full normal form at a point.
#[derive(Clone, Debug)]
pub struct Star3 {
    pub point: BoundaryPoint,
    pub jets: JetVector,
    /// Source transformation `G` (after `σ⁰_p`), fixing 0.
    pub source: Matrix,
    /// Target transformation `H` (after `τ^F_p`), fixing 0.
    pub target: Matrix,
    pub a: Matrix,
    pub mu: MuData,
    pub residuals: Star3Residuals,
    pub hermitian_fallback: bool,
    pub newton_steps: usize,
}

struct Stage {
    jets: JetVector,
    source: Matrix,
    target: Matrix,
    a: Matrix,
    mu: Vec<Scalar>,
    diag_residual: f64,
    fallback: bool,
}

fn is_sorted_diagonal(a: &Matrix) -> bool {
    let n = a.rows();
    let off_zero = (0..n).all(|r| (0..n).all(|c| r == c || a[(r, c)].is_zero()));
    let real = (0..n).all(|k| a[(k, k)].im().is_zero());
    let sorted = (1..n).all(|k| a[(k - 1, k - 1)].to_c64().re >= a[(k, k)].to_c64().re);
    a.is_exact() && off_zero && real && sorted
}

fn run_stage(fp: &JetVector, shift: &[Complex64], kappa0: usize, tol: f64) -> Result<Stage> {
    let n = fp.arity();
    let big_n = fp.len() - 1;
    let s_a = if shift.iter().all(|x| x.norm() == 0.0) {
        Matrix::identity(n + 2)
    } else {
        isotropy_matrix(
            Scalar::one(),
            Scalar::zero(),
            shift.iter().map(|&x| Scalar::from_c64(x)).collect(),
            Matrix::identity(n),
        )?
    };
    let jets = if s_a == Matrix::identity(n + 2) {
        fp.clone()
    } else {
        apply_source(fp, &s_a)?
    };
    let st2 = normalize_star2(&jets)?;
    let scale = st2.a.max_abs().max(1.0);
    let fallback = st2.residuals.hermitian > tol * scale;

    let (v, mu) = if is_sorted_diagonal(&st2.a) {
        (
            Matrix::identity(n),
            (0..n).map(|k| st2.a[(k, k)].clone()).collect::<Vec<_>>(),
        )
    } else {
        let (eigs, vecs) = hermitian_eigen(&st2.a.to_c64());
        (
            Matrix::from_c64(&vecs),
            eigs.iter().map(|&x| Scalar::float(x, 0.0)).collect(),
        )
    };
    let (jets, rot_src, rot_tgt) = if v == Matrix::identity(n) {
        (
            st2.jets.clone(),
            Matrix::identity(n + 2),
            Matrix::identity(big_n + 2),
        )
    } else {
        let rs = isotropy_matrix(Scalar::one(), Scalar::zero(), zero_pt(n), v.clone())?;
        let tv = block_diag(&v.adjoint(), &Matrix::identity(big_n - n));
        let rt = isotropy_matrix(Scalar::one(), Scalar::zero(), zero_pt(big_n), tv)?;
        (apply_target(&rt, &apply_source(&st2.jets, &rs)?)?, rs, rt)
    };
    let a = read_a(&jets);
    let diag_residual = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|(r, c)| r != c)
        .map(|(r, c)| a[(r, c)].abs())
        .fold(0.0, f64::max);

    // rotate the φ block so that φ_{jl} = μ_jl z_j z_l
    let pairs = s0_pairs(n, kappa0);
    if pairs.len() > big_n - n {
        return Err(Error::Normalization {
            weight: 2,
            message: format!(
                "rank {kappa0} needs N >= {}, but N = {big_n}",
                n + pairs.len()
            ),
        });
    }
    let w_rows: Vec<Vec<Scalar>> = pairs
        .iter()
        .map(|&(j, l)| {
            let m = hmono(n, &[(j, 1), (l, 1)], 0);
            let inv = mu_jl(&mu, kappa0, j, l)
                .inv()
                .ok_or_else(|| Error::Normalization {
                    weight: 2,
                    message: format!("μ_{}{} vanishes inside S₀", j + 1, l + 1),
                })?;
            Ok((n..big_n)
                .map(|k| &jets.entries[k].coeff(&m).conj() * &inv)
                .collect())
        })
        .collect::<Result<_>>()?;
    let w = complete_unitary(w_rows, big_n - n)?;
    let (jets, w_tgt) = if w == Matrix::identity(big_n - n) {
        (jets, Matrix::identity(big_n + 2))
    } else {
        let tw = isotropy_matrix(
            Scalar::one(),
            Scalar::zero(),
            zero_pt(big_n),
            block_diag(&Matrix::identity(n), &w),
        )?;
        (apply_target(&tw, &jets)?, tw)
    };
    Ok(Stage {
        jets,
        source: s_a.mul(&rot_src),
        target: w_tgt.mul(&rot_tgt).mul(&st2.target),
        a,
        mu,
        diag_residual,
        fallback,
    })
}

fn f_ww(jets: &JetVector, kappa0: usize) -> Vec<Scalar> {
    let n = jets.arity();
    (0..kappa0)
        .map(|j| jets.entries[j].coeff(&hmono(n, &[], 2)))
        .collect()
}

/// Full normalization at `p`. `kappa0` defaults to the rank at `p`.
pub fn normalize_star3(
    f: &MapSpec,
    p: &BoundaryPoint,
    kappa0: Option<usize>,
    tol: f64,
) -> Result<Star3> {
    let f = f.to_siegel()?;
    let fp = f.jets_at(&f.working_point(p), NORMAL_ORDER)?.holomorphic;
    let n = f.n;
    let kappa0 = match kappa0 {
        Some(k) => k,
        None => {
            let st = normalize_star2(&fp)?;
            rank_from_a(&st.a, tol, &st.residuals).rank
        }
    };
    let mut shift = vec![Complex64::new(0.0, 0.0); n];
    let mut stage = run_stage(&fp, &shift, kappa0, tol)?;
    let resid = |s: &Stage| -> Vec<f64> {
        f_ww(&s.jets, kappa0)
            .iter()
            .flat_map(|c| {
                let z = c.to_c64();
                [z.re, z.im]
            })
            .collect()
    };
    let mut r = resid(&stage);
    let norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut steps = 0;
    // Newton on the real and imaginary parts of the source shift a_j, j < κ₀
    while norm(&r) > 1e-13 && steps < 30 {
        steps += 1;
        let dim = 2 * kappa0;
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for c in 0..dim {
            let mut s2 = shift.clone();
            if c % 2 == 0 {
                s2[c / 2].re += h;
            } else {
                s2[c / 2].im += h;
            }
            let rc = resid(&run_stage(&fp, &s2, kappa0, tol)?);
            for row in 0..dim {
                jac[(row, c)] = (rc[row] - r[row]) / h;
            }
        }
        let rhs = nalgebra::DVector::from_vec(r.iter().map(|x| -x).collect());
        let delta = jac.lu().solve(&rhs).ok_or_else(|| Error::Normalization {
            weight: 4,
            message: "singular Jacobian while removing ∂²f/∂w²(0)".into(),
        })?;
        for k in 0..kappa0 {
            shift[k] += Complex64::new(delta[2 * k], delta[2 * k + 1]);
        }
        stage = run_stage(&fp, &shift, kappa0, tol)?;
        r = resid(&stage);
    }
    if norm(&r) > 1e-10 {
        return Err(Error::Normalization {
            weight: 4,
            message: format!("could not remove ∂²f/∂w²(0) (residual {:e})", norm(&r)),
        });
    }

    let pairs = s0_pairs(n, kappa0);
    let mu_jl_vals: Vec<Scalar> = pairs
        .iter()
        .map(|&(j, l)| mu_jl(&stage.mu, kappa0, j, l))
        .collect();
    let mut phi_res: f64 = 0.0;
    for mu_idx in n..f.big_n {
        for j in 0..n {
            for l in j..n {
                let c = stage.jets.entries[mu_idx].coeff(&hmono(n, &[(j, 1), (l, 1)], 0));
                let want = pairs
                    .iter()
                    .position(|&pr| pr == (j, l))
                    .filter(|&k| k + n == mu_idx)
                    .map_or(Scalar::zero(), |k| mu_jl_vals[k].clone());
                phi_res = phi_res.max((&c - &want).abs());
            }
        }
    }
    let star2 = star2_residuals(&stage.jets, &stage.a);
    let p_b = p_bound(n, kappa0);
    Ok(Star3 {
        point: p.clone(),
        residuals: Star3Residuals {
            diagonal: stage.diag_residual,
            phi: phi_res,
            f_ww: norm(&r),
            star2,
        },
        jets: stage.jets,
        source: stage.source,
        target: stage.target,
        a: stage.a,
        mu: MuData {
            kappa0,
            mu: stage.mu.iter().take(kappa0).map(Scalar::to_c64).collect(),
            pairs,
            mu_jl: mu_jl_vals.iter().map(Scalar::to_c64).collect(),
            p_bound: p_b,
            bound_holds: f.big_n >= n + p_b,
        },
        hermitian_fallback: stage.fallback,
        newton_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::fixtures;

    fn pt(z: &[(i64, i64)], u: (i64, i64)) -> BoundaryPoint {
        BoundaryPoint::new(
            z.iter().map(|&(a, b)| Scalar::ratio(a, b)).collect(),
            Scalar::ratio(u.0, u.1),
        )
        .unwrap()
    }

    #[test]
    fn p_bound_counts_s0() {
        for n in 1..5 {
            for k in 0..=n {
                assert_eq!(p_bound(n, k), s0_pairs(n, k).len());
            }
        }
        assert_eq!(p_bound(1, 1), 1);
        assert_eq!(p_bound(2, 1), 2);
    }

    #[test]
    fn linear_is_already_normal() {
        let f = fixtures::linear(2, 3);
        let j = f.jets_at(&BoundaryPoint::origin(2), 4).unwrap();
        let st = normalize_star2(&j.holomorphic).unwrap();
        assert_eq!(st.target, Matrix::identity(5));
        assert_eq!(st.a, Matrix::zeros(2, 2));
        assert_eq!(st.residuals.max(), 0.0);
    }

    #[test]
    fn whitney_normalized_values() {
        let f = fixtures::whitney_normalized();
        let st = normalize_star3(&f, &BoundaryPoint::origin(1), None, RANK_TOL).unwrap();
        assert_eq!(st.mu.kappa0, 1);
        assert_eq!(st.a, Matrix::diagonal(&[Scalar::int(4)]));
        assert_eq!(st.mu.mu_jl, vec![Complex64::new(2.0, 0.0)]);
        assert_eq!(st.source, Matrix::identity(3));
        assert_eq!(st.target, Matrix::identity(4));
        assert!(st.jets.is_exact());
    }

    #[test]
    fn whitney_rank_one_with_identity() {
        let f = fixtures::whitney();
        for p in [pt(&[(1, 3)], (-2, 7)), pt(&[(-1, 2)], (1, 5))] {
            let r = geometric_rank(&f, &p, RANK_TOL).unwrap();
            assert_eq!(r.rank, 1);
            assert!(r.gap >= GAP_MIN);
            assert!(r.star2.max() < 1e-9, "{:?}", r.star2);
        }
    }

    #[test]
    fn whitney_star3() {
        let f = fixtures::whitney();
        let st = normalize_star3(&f, &pt(&[(1, 3)], (-2, 7)), None, RANK_TOL).unwrap();
        assert_eq!(st.mu.kappa0, 1);
        assert!(
            st.residuals.phi < 1e-9 && st.residuals.f_ww < 1e-10,
            "{:?}",
            st.residuals
        );
        assert!(st.residuals.star2.max() < 1e-9);
        assert!(st.mu.bound_holds);
    }

    #[test]
    fn complete_unitary_exact() {
        let rows = vec![vec![
            Scalar::ratio(3, 5),
            Scalar::ratio(4, 5),
            Scalar::zero(),
        ]];
        let u = complete_unitary(rows, 3).unwrap();
        assert!(u.is_exact());
        assert_eq!(u.mul(&u.adjoint()), Matrix::identity(3));
    }
}
