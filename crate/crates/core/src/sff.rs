//! The CR second fundamental form: from the Maurer–Cartan form of an adapted
//! lift, and extrinsically from the spans of `∂̄ρ̃ ∘ F` and its derivatives.
//! Also the vanishing comparison and the flatness verdict with a witness.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::aut::Automorphism;
use crate::error::{Error, Result};
use crate::hermitian::{mobius_c64, singular_values, Matrix};
use crate::jet::{Jet, Var};
use crate::lift::{
    build_general_lift, build_spherical_lift, cr_field, general_lift_from_jets, lift_point,
    pullback_mc, LiftFrame, LiftKind, FRAME_ORDER,
};
use crate::map::{BoundaryPoint, MapSpec, PointRecord};
use crate::normalize::{hmono, kappa0, normalize_star3, transformed_jets, NORMAL_ORDER};
use crate::scalar::Scalar;

pub const VANISH_TOL: f64 = 1e-8;
/// Relative singular-value threshold for ranks of the bilinear forms.
pub const FORM_RANK_TOL: f64 = 1e-6;

/// `q^μ_{αβ}` at a base point, indexed `[μ − n − 1][α − 1][β − 1]`.
#[derive(Clone, Debug, Serialize)]
pub struct SffTensor {
    pub point: PointRecord,
    pub lift: LiftKind,
    pub q: Vec<Vec<Vec<Complex64>>>,
    #[serde(skip)]
    pub values: Vec<Vec<Vec<Scalar>>>,
    /// Residual of the solve `ω^μ_β = q^μ_{αβ} ω^α_0 + c ω^{N+1}_0`.
    pub residual: f64,
    pub symmetry_defect: f64,
    pub norm: f64,
    pub rank: usize,
    pub exact: bool,
    pub frame_residual: f64,
    pub mc_residual: f64,
}

/// Rank of a `rows × n²` reshaping with vanishing decided by `vanish`.
fn form_rank(m: &DMatrix<Complex64>, vanish: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= vanish {
        return 0;
    }
    sv.iter().filter(|&&s| s > FORM_RANK_TOL * top).count()
}

fn reshape(q: &[Vec<Vec<Complex64>>], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(q.len(), n * n, |r, c| q[r][c / n][c % n])
}

/// Extract `q` from an adapted lift.
pub fn sff_from_lift(lift: &LiftFrame, point: &BoundaryPoint) -> Result<SffTensor> {
    let mc = pullback_mc(lift)?;
    let (n, big_n) = (lift.n, lift.big_n);
    let last = big_n + 1;
    let coeffs = |r: usize, c: usize| -> Vec<Scalar> {
        mc.omega
            .iter()
            .map(|m| m.get(r, c).constant_term())
            .collect()
    };
    let mut cols: Vec<Vec<Scalar>> = (1..=n).map(|a| coeffs(a, 0)).collect();
    cols.push(coeffs(last, 0));
    let b = Matrix::from_columns(&cols)?;
    let bh = b.adjoint();
    let gram = bh.mul(&b);
    let gram_inv = gram.inverse().map_err(|_| {
        Error::Chart("the forms ω^α_0, ω^(N+1)_0 are dependent at the base point".into())
    })?;
    let solver = gram_inv.mul(&bh);
    let mut values = Vec::with_capacity(big_n - n);
    let mut residual: f64 = 0.0;
    for mu in n + 1..=big_n {
        let mut rows = Vec::with_capacity(n);
        for beta in 1..=n {
            let y = coeffs(mu, beta);
            let x = solver.mul_vec(&y);
            let fit = b.mul_vec(&x);
            for (f, t) in fit.iter().zip(&y) {
                residual = residual.max((f - t).abs());
            }
            rows.push(x[..n].to_vec());
        }
        // rows[β][α] → q[α][β]
        values.push(
            (0..n)
                .map(|a| (0..n).map(|bb| rows[bb][a].clone()).collect())
                .collect::<Vec<Vec<Scalar>>>(),
        );
    }
    let q: Vec<Vec<Vec<Complex64>>> = values
        .iter()
        .map(|m| {
            m.iter()
                .map(|r| r.iter().map(Scalar::to_c64).collect())
                .collect()
        })
        .collect();
    let mut symmetry_defect: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for m in &q {
        for (a, row) in m.iter().enumerate() {
            for (bb, v) in row.iter().enumerate() {
                symmetry_defect = symmetry_defect.max((v - m[bb][a]).norm());
                norm = norm.max(v.norm());
            }
        }
    }
    let exact = values.iter().flatten().flatten().all(Scalar::is_exact);
    Ok(SffTensor {
        point: point.record(),
        lift: lift.kind,
        rank: form_rank(&reshape(&q, n), VANISH_TOL),
        q,
        values,
        residual,
        symmetry_defect,
        norm,
        exact,
        frame_residual: lift.max_residual(),
        mc_residual: mc.max_relation_residual(),
    })
}

/// Frame definition of `q` at `F(p)`.
pub fn sff_frame(f: &MapSpec, p: &BoundaryPoint, kind: LiftKind) -> Result<SffTensor> {
    let lift = match kind {
        LiftKind::General => build_general_lift(f, p, FRAME_ORDER)?,
        LiftKind::Spherical => build_spherical_lift(f, p, FRAME_ORDER)?,
    };
    sff_from_lift(&lift, p)
}

/// `q` at the origin of the fully normalized map, next to the Hessian of
/// its `φ` block.
#[derive(Clone, Debug, Serialize)]
pub struct NormalizedSff {
    pub sff: SffTensor,
    pub hessian: Vec<Vec<Vec<Complex64>>>,
    pub hessian_residual: f64,
    /// Both sides are exact and coincide.
    pub exact_match: bool,
    /// `max |E(0) − Id|`.
    pub identity_residual: f64,
}

pub fn sff_normalized(f: &MapSpec, p: &BoundaryPoint, rank_tol: f64) -> Result<NormalizedSff> {
    let f = f.to_siegel()?;
    let star = normalize_star3(&f, p, None, rank_tol)?;
    let q = lift_point(p);
    let hol = transformed_jets(&f, &q, &star.source, &star.target, FRAME_ORDER)?;
    let lift = general_lift_from_jets(&hol.restrict_to_heisenberg()?)?;
    let identity_residual = lift.at_base().max_abs_diff(&Matrix::identity(f.big_n + 2));
    let sff = sff_from_lift(&lift, p)?;
    let n = f.n;
    let mut hessian_exact = Vec::with_capacity(f.big_n - n);
    for mu in n..f.big_n {
        let phi = &hol.entries[mu];
        hessian_exact.push(
            (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| {
                            let c = phi.coeff(&hmono(n, &[(a, 1), (b, 1)], 0));
                            if a == b {
                                &c * &Scalar::int(2)
                            } else {
                                c
                            }
                        })
                        .collect::<Vec<Scalar>>()
                })
                .collect::<Vec<_>>(),
        );
    }
    let mut residual: f64 = 0.0;
    let mut exact_match = sff.exact;
    for (qm, hm) in sff.values.iter().zip(&hessian_exact) {
        for (qr, hr) in qm.iter().zip(hm) {
            for (x, y) in qr.iter().zip(hr) {
                residual = residual.max((x - y).abs());
                exact_match &= x.is_exact() && y.is_exact() && x == y;
            }
        }
    }
    let hessian = hessian_exact
        .iter()
        .map(|m| {
            m.iter()
                .map(|r| r.iter().map(Scalar::to_c64).collect())
                .collect()
        })
        .collect();
    Ok(NormalizedSff {
        sff,
        hessian,
        hessian_residual: residual,
        exact_match,
        identity_residual,
    })
}

/// `E_k(p)` for the extrinsic construction.
#[derive(Clone, Debug, Serialize)]
pub struct SpanReport {
    pub k: usize,
    pub dimension: usize,
    pub basis: Vec<Vec<Complex64>>,
}

/// The quotient-valued form `L_α L_β (∂̄ρ̃ ∘ F)(p) mod E_1(p)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtrinsicReport {
    pub point: PointRecord,
    pub spans: Vec<SpanReport>,
    /// Projections onto `E_1(p)^⊥`, one column per pair `(α, β)` in
    /// row-major order.
    pub form: Vec<Vec<Complex64>>,
    pub norm: f64,
    pub rank: usize,
    pub symmetry_defect: f64,
}

fn c64_rank(m: &DMatrix<Complex64>) -> usize {
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0).max(1.0);
    sv.iter().filter(|&&s| s > 1e-9 * top).count()
}

pub fn sff_extrinsic(f: &MapSpec, p: &BoundaryPoint) -> Result<ExtrinsicReport> {
    let f = f.to_siegel()?;
    let (n, big_n) = (f.n, f.big_n);
    let h = f.source_jets(&lift_point(p), 3)?.restrict_to_heisenberg()?;
    let value = |j: &Jet| j.constant_term().to_c64();
    let zero = Complex64::new(0.0, 0.0);
    // ∂̄ρ̃ = Σ Z'_A dZ̄'_A − (i/2) dw̄'
    let mut e0: Vec<Complex64> = h.entries[..big_n].iter().map(value).collect();
    e0.push(Complex64::new(0.0, -0.5));
    let first: Vec<Vec<Jet>> = (0..n)
        .map(|b| {
            h.entries[..big_n]
                .iter()
                .map(|x| cr_field(x, b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut e1 = vec![e0.clone()];
    for col in &first {
        let mut v: Vec<Complex64> = col.iter().map(value).collect();
        v.push(zero);
        e1.push(v);
    }
    let e1m = DMatrix::from_fn(big_n + 1, n + 1, |r, c| e1[c][r]);
    let dim1 = c64_rank(&e1m);
    if dim1 < n + 1 {
        return Err(Error::NonEmbedding(format!(
            "dim E_1(p) = {dim1} < {}",
            n + 1
        )));
    }
    let q = e1m.clone().qr().q();
    let mut second = DMatrix::<Complex64>::zeros(big_n + 1, n * n);
    for a in 0..n {
        for b in 0..n {
            for (r, x) in first[b].iter().enumerate() {
                second[(r, a * n + b)] = value(&cr_field(x, a)?);
            }
        }
    }
    let proj = &second - &q * (q.adjoint() * &second);
    let norm = proj.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut symmetry_defect: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for r in 0..=big_n {
                symmetry_defect =
                    symmetry_defect.max((proj[(r, a * n + b)] - proj[(r, b * n + a)]).norm());
            }
        }
    }
    let spans = vec![
        SpanReport {
            k: 0,
            dimension: 1,
            basis: vec![e0],
        },
        SpanReport {
            k: 1,
            dimension: dim1,
            basis: e1,
        },
    ];
    Ok(ExtrinsicReport {
        point: p.record(),
        spans,
        form: (0..proj.ncols())
            .map(|c| proj.column(c).iter().copied().collect())
            .collect(),
        norm,
        rank: form_rank(&proj, VANISH_TOL),
        symmetry_defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub point: PointRecord,
    pub frame_norm: f64,
    pub extrinsic_norm: f64,
    pub frame_rank: usize,
    pub extrinsic_rank: usize,
    pub frame_vanishes: bool,
    pub extrinsic_vanishes: bool,
    pub agree: bool,
    pub tolerance: f64,
}

/// Compare the vanishing and rank of the two definitions at `p`.
pub fn check_equivalence(f: &MapSpec, p: &BoundaryPoint, tol: f64) -> Result<EquivalenceReport> {
    let frame = sff_frame(f, p, LiftKind::General)?;
    let ext = sff_extrinsic(f, p)?;
    Ok(compare_definitions(&frame, &ext, tol))
}

pub fn compare_definitions(
    frame: &SffTensor,
    ext: &ExtrinsicReport,
    tol: f64,
) -> EquivalenceReport {
    let frame_vanishes = frame.norm <= tol;
    let extrinsic_vanishes = ext.norm <= tol;
    EquivalenceReport {
        point: frame.point.clone(),
        frame_norm: frame.norm,
        extrinsic_norm: ext.norm,
        frame_rank: frame.rank,
        extrinsic_rank: ext.rank,
        frame_vanishes,
        extrinsic_vanishes,
        agree: frame_vanishes == extrinsic_vanishes && frame.rank == ext.rank,
        tolerance: tol,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Flat,
    NonFlat,
    Inconclusive,
}

/// `F = W*` on the sample set, with `W = (T τ)⁻¹ · L · (σ⁰_p G)⁻¹`.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub base_point: PointRecord,
    /// Source gauge `σ⁰_p G`.
    pub source: Vec<Vec<Complex64>>,
    /// Target gauge `T τ^F_p`.
    pub target: Vec<Vec<Complex64>>,
    /// The composite `W`.
    pub matrix: Vec<Vec<Complex64>>,
    /// Deviation of the normalized jets from `(z, 0, w)`.
    pub linearity_residual: f64,
    /// `max |F(x) − W*(x)| / (1 + |F(x)|)` over fresh points.
    pub residual: f64,
    pub residual_points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessVerdict {
    pub samples: Vec<PointRecord>,
    pub sff_norms: Vec<Option<f64>>,
    pub max_sff_norm: f64,
    pub kappa0: Option<usize>,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub reasons: Vec<String>,
    pub tolerance: f64,
}

fn rows(m: &Matrix) -> Vec<Vec<Complex64>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(Scalar::to_c64).collect())
        .collect()
}

/// Matrix of the standard embedding `(z, w) ↦ (z, 0, w)`.
pub fn standard_embedding(n: usize, big_n: usize) -> Matrix {
    let mut l = Matrix::zeros(big_n + 2, n + 2);
    for k in 0..=n {
        l[(k, k)] = Scalar::one();
    }
    l[(big_n + 1, n + 1)] = Scalar::one();
    l
}

fn build_witness(
    f: &MapSpec,
    p: &BoundaryPoint,
    fresh: &[(Vec<Complex64>, Complex64)],
    rank_tol: f64,
) -> Result<Witness> {
    let star = normalize_star3(f, p, Some(0), rank_tol)?;
    let (n, big_n) = (f.n, f.big_n);
    let mut lin: f64 = 0.0;
    for (k, e) in star.jets.entries.iter().enumerate() {
        let target = if k < n {
            Jet::var(n, NORMAL_ORDER, Var::Z(k))
        } else if k == big_n {
            Jet::var(n, NORMAL_ORDER, Var::U)
        } else {
            Jet::zero(n, NORMAL_ORDER)
        };
        lin = lin.max(e.sub(&target).max_abs());
    }
    let source = Automorphism::sigma0(p).matrix.mul(&star.source);
    let target = star.target.mul(&Automorphism::tau_f(f, p)?.matrix);
    let w = target
        .inverse()?
        .mul(&standard_embedding(n, big_n))
        .mul(&source.inverse()?);
    let wc = w.to_c64();
    let mut residual: f64 = 0.0;
    let mut used = 0;
    for (z, wv) in fresh {
        let Ok(fx) = f.eval(z, *wv) else { continue };
        if fx.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let mut pt = z.clone();
        pt.push(*wv);
        let Ok(gx) = mobius_c64(&wc, &pt) else {
            continue;
        };
        let scale = 1.0 + fx.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let d = fx
            .iter()
            .zip(&gx)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        residual = residual.max(d / scale);
        used += 1;
    }
    Ok(Witness {
        base_point: p.record(),
        source: rows(&source),
        target: rows(&target),
        matrix: rows(&w),
        linearity_residual: lin,
        residual,
        residual_points: used,
    })
}

/// Decide flatness from `q` at the samples; a flat verdict needs `κ₀ = 0`
/// and a witness matching `F` at the fresh points.
pub fn flatness_verdict(
    f: &MapSpec,
    samples: &[BoundaryPoint],
    fresh: &[(Vec<Complex64>, Complex64)],
    tol: f64,
    rank_tol: f64,
) -> Result<FlatnessVerdict> {
    if samples.is_empty() {
        return Err(Error::InvalidParameters(
            "at least one sample point is required".into(),
        ));
    }
    let f = f.to_siegel()?;
    let mut reasons = Vec::new();
    let mut norms = Vec::with_capacity(samples.len());
    for (k, p) in samples.iter().enumerate() {
        match sff_frame(&f, p, LiftKind::General) {
            Ok(s) => norms.push(Some(s.norm)),
            Err(e) => {
                reasons.push(format!("sample {k}: {e}"));
                norms.push(None);
            }
        }
    }
    let max_norm = norms.iter().flatten().copied().fold(0.0, f64::max);
    let kappa = match kappa0(&f, samples, rank_tol) {
        Ok(r) => Some(r.kappa0),
        Err(e) => {
            reasons.push(format!("geometric rank: {e}"));
            None
        }
    };
    let computed = norms.iter().flatten().count();
    let mut witness = None;
    let verdict = if computed == 0 {
        reasons.push("no sample point admitted a lift".into());
        Verdict::Inconclusive
    } else if max_norm > tol {
        Verdict::NonFlat
    } else if kappa != Some(0) {
        reasons.push(format!(
            "second fundamental form vanishes but geometric rank is {kappa:?}"
        ));
        Verdict::Inconclusive
    } else {
        let base = samples
            .iter()
            .zip(&norms)
            .find(|(_, n)| n.is_some())
            .map(|(p, _)| p)
            .expect("computed > 0");
        match build_witness(&f, base, fresh, rank_tol) {
            Ok(w) => {
                let ok = w.residual <= tol && w.residual_points > 0;
                if !ok {
                    reasons.push(format!(
                        "witness residual {:e} over {} points exceeds tolerance",
                        w.residual, w.residual_points
                    ));
                }
                witness = Some(w);
                if ok {
                    Verdict::Flat
                } else {
                    Verdict::Inconclusive
                }
            }
            Err(e) => {
                reasons.push(format!("witness: {e}"));
                Verdict::Inconclusive
            }
        }
    };
    Ok(FlatnessVerdict {
        samples: samples.iter().map(BoundaryPoint::record).collect(),
        sff_norms: norms,
        max_sff_norm: max_norm,
        kappa0: kappa,
        verdict,
        witness,
        reasons,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::fixtures;
    use crate::normalize::RANK_TOL;
    use crate::sampling::{domain_points, regular_points};

    #[test]
    fn normalized_whitney_q_is_the_phi_hessian() {
        let f = fixtures::whitney_normalized();
        let r = sff_normalized(&f, &BoundaryPoint::origin(1), RANK_TOL).unwrap();
        assert!(r.exact_match, "{:?} vs {:?}", r.sff.q, r.hessian);
        assert_eq!(r.sff.values[0][0][0], Scalar::int(4));
        assert_eq!(r.identity_residual, 0.0);
    }

    #[test]
    fn linear_map_is_flat_and_whitney_is_not() {
        let lin = fixtures::linear(1, 2);
        let pts = regular_points(&lin, 3, 0).unwrap();
        let v =
            flatness_verdict(&lin, &pts, &domain_points(1, 20, 7), VANISH_TOL, RANK_TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Flat, "{:?}", v.reasons);
        let w = fixtures::whitney();
        let pts = regular_points(&w, 3, 0).unwrap();
        let v = flatness_verdict(&w, &pts, &domain_points(1, 20, 7), VANISH_TOL, RANK_TOL).unwrap();
        assert_eq!(v.verdict, Verdict::NonFlat);
    }

    #[test]
    fn definitions_agree_on_whitney() {
        let w = fixtures::whitney();
        for p in regular_points(&w, 3, 1).unwrap() {
            let e = check_equivalence(&w, &p, VANISH_TOL).unwrap();
            assert!(e.agree && !e.frame_vanishes && e.frame_rank == 1, "{e:?}");
            let s = sff_frame(&w, &p, LiftKind::Spherical).unwrap();
            assert!(s.symmetry_defect <= 1e-9 && s.residual <= 1e-9, "{s:?}");
        }
    }
}
