//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to see
//! the table; the test fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use ballmaps_core::aut::Automorphism;
use ballmaps_core::hermitian::{frame_residuals, membership, Matrix};
use ballmaps_core::lift::LiftKind;
use ballmaps_core::lift::{
    build_general_lift, build_spherical_lift, pullback_mc, LiftFrame, FRAME_ORDER, FRAME_TOL,
    MC_TOL,
};
use ballmaps_core::map::{fixtures, BoundaryPoint, MapSpec};
use ballmaps_core::normalize::{
    geometric_rank, kappa0, normalize_star2, normalize_star3, GAP_MIN, RANK_TOL,
};
use ballmaps_core::sampling::{
    boundary_points, domain_points, random_automorphism, regular_points,
};
use ballmaps_core::scalar::Scalar;
use ballmaps_core::sff::{
    check_equivalence, flatness_verdict, sff_frame, sff_from_lift, sff_normalized, Verdict,
    VANISH_TOL,
};
use common::{conjugate, oracle_a, oracle_rank};

const ALGEBRA_TOL: f64 = 1e-12;
const NORMAL_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-9;
const LAW_TOL: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures_all() -> Vec<MapSpec> {
    vec![
        fixtures::linear(1, 2),
        fixtures::linear(2, 3),
        fixtures::whitney(),
        fixtures::whitney2(),
        fixtures::whitney_normalized(),
    ]
}

fn name(f: &MapSpec) -> String {
    f.name.clone().unwrap_or_else(|| "map".into())
}

fn properness() -> Outcome {
    let start = Instant::now();
    let mut maps = vec![fixtures::linear(1, 2), fixtures::whitney()];
    for s in 0..10 {
        let base = if s % 2 == 0 {
            fixtures::linear(1, 2)
        } else {
            fixtures::whitney()
        };
        maps.push(conjugate(&base, s));
    }
    let mut failures = Vec::new();
    for (k, f) in maps.iter().enumerate() {
        match f.verify_proper(4) {
            Ok(r) if r.is_zero() && f.is_exact() => {}
            Ok(r) => failures.push(format!("map {k}: residual {:e}", r.max_abs())),
            Err(e) => failures.push(format!("map {k}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "{} maps exactly proper, {:.2?} (limit 5s) {:?}",
            maps.len() - failures.len(),
            elapsed,
            failures
        ),
    )
}

fn q_frame_algebra() -> Outcome {
    let id = Matrix::identity(5);
    let id_exact = frame_residuals(&id).iter().all(|(_, r)| *r == 0.0);
    let sigma_ok = boundary_points(2, 20, 1).iter().all(|p| {
        let m = membership(&Automorphism::sigma0(p).matrix, ALGEBRA_TOL).unwrap();
        m.is_su && m.exact
    });
    let mut lambdas = Vec::new();
    for (num, den) in [(1, 2), (1, 1), (2, 1)] {
        let a = Automorphism::isotropy(
            Scalar::ratio(num, den),
            Scalar::zero(),
            vec![Scalar::zero(); 2],
            Matrix::identity(2),
        )
        .unwrap();
        let m = membership(&a.matrix, ALGEBRA_TOL).unwrap();
        lambdas.push((num, den, m.is_su, m.is_glq));
    }
    let lambda_ok = lambdas
        .iter()
        .all(|&(num, den, su, glq)| glq && su == (num == den));
    outcome(
        id_exact && sigma_ok && lambda_ok,
        format!("identity exact {id_exact}, 20 sigma0 in SU {sigma_ok}, (lambda, isSU, isGLQ) {lambdas:?}"),
    )
}

fn normalization() -> Outcome {
    let f = fixtures::whitney();
    let mut worst_identity: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    let mut bounds = true;
    let mut errors = Vec::new();
    for p in regular_points(&f, 5, 0).unwrap() {
        let jets = f.jets_at(&f.working_point(&p), 4).unwrap();
        match normalize_star2(&jets.holomorphic) {
            Ok(s) => worst_identity = worst_identity.max(s.residuals.identity),
            Err(e) => errors.push(e.to_string()),
        }
        match normalize_star3(&f, &p, None, RANK_TOL) {
            Ok(s) => {
                let r = &s.residuals;
                worst_mu = worst_mu.max(r.phi).max(r.diagonal).max(r.f_ww);
                bounds &= s.mu.bound_holds && f.big_n >= f.n + s.mu.p_bound;
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let pass =
        errors.is_empty() && worst_identity <= NORMAL_TOL && worst_mu <= NORMAL_TOL && bounds;
    outcome(
        pass,
        format!("identity {worst_identity:.1e}, mu relations {worst_mu:.1e} (tol 1e-9), codimension bound {bounds} {errors:?}"),
    )
}

fn geometric_rank_check() -> Outcome {
    let lin = fixtures::linear(2, 3);
    let linear_ok = boundary_points(2, 20, 0).iter().all(|p| {
        let r = geometric_rank(&lin, p, RANK_TOL).unwrap();
        r.exact
            && r.rank == 0
            && r.matrix
                .iter()
                .flatten()
                .all(|c| *c == num_complex::Complex64::new(0.0, 0.0))
    });
    let w = fixtures::whitney();
    let mut details = Vec::new();
    let mut whitney_ok = true;
    for p in regular_points(&w, 5, 0).unwrap() {
        let r = geometric_rank(&w, &p, RANK_TOL).unwrap();
        let oracle = oracle_rank(&oracle_a(&w, &p));
        whitney_ok &= r.rank == 1 && oracle == 1 && r.gap >= 1e3 * RANK_TOL && r.gap >= GAP_MIN;
        details.push(format!("{}/{}/{:.2e}", r.rank, oracle, r.gap));
    }
    outcome(
        linear_ok && whitney_ok,
        format!(
            "linear exact zeros at 20 points {linear_ok}; whitney rank/oracle/gap {}",
            details.join(" ")
        ),
    )
}

fn lift_checks(
    f: &MapSpec,
    p: &BoundaryPoint,
    build: fn(&MapSpec, &BoundaryPoint, u32) -> ballmaps_core::Result<LiftFrame>,
) -> Result<(f64, f64), String> {
    let lift = build(f, p, FRAME_ORDER).map_err(|e| e.to_string())?;
    let mc = pullback_mc(&lift).map_err(|e| e.to_string())?;
    Ok((lift.max_residual(), mc.max_relation_residual()))
}

fn lifts() -> Outcome {
    let mut worst_frame: f64 = 0.0;
    let mut worst_mc: f64 = 0.0;
    let mut errors = Vec::new();
    for f in fixtures_all() {
        for p in regular_points(&f, 5, 0).unwrap() {
            for build in [
                build_general_lift as fn(&MapSpec, &BoundaryPoint, u32) -> _,
                build_spherical_lift,
            ] {
                match lift_checks(&f, &p, build) {
                    Ok((frame, mc)) => {
                        worst_frame = worst_frame.max(frame);
                        worst_mc = worst_mc.max(mc);
                    }
                    Err(e) => errors.push(format!("{}: {e}", name(&f))),
                }
            }
        }
    }
    let f = fixtures::whitney_normalized();
    let origin = BoundaryPoint::origin(1);
    let identity = Matrix::identity(4);
    let base_ok = [
        build_general_lift(&f, &origin, FRAME_ORDER),
        build_spherical_lift(&f, &origin, FRAME_ORDER),
    ]
    .into_iter()
    .all(|l| l.is_ok_and(|l| l.frame.is_exact() && l.at_base() == identity));
    let pass = errors.is_empty() && worst_frame <= FRAME_TOL && worst_mc <= MC_TOL && base_ok;
    outcome(
        pass,
        format!("frame {worst_frame:.1e} (tol 1e-10), Maurer-Cartan {worst_mc:.1e} (tol 1e-9), E(0) = Id exactly {base_ok} {errors:?}"),
    )
}

fn second_fundamental_form() -> Outcome {
    let mut worst_symmetry: f64 = 0.0;
    let mut errors = Vec::new();
    for f in fixtures_all() {
        for p in regular_points(&f, 2, 0).unwrap() {
            for kind in [LiftKind::General, LiftKind::Spherical] {
                match sff_frame(&f, &p, kind) {
                    Ok(s) => worst_symmetry = worst_symmetry.max(s.symmetry_defect),
                    Err(e) => errors.push(format!("{}: {e}", name(&f))),
                }
            }
        }
    }
    let hessian = sff_normalized(
        &fixtures::whitney_normalized(),
        &BoundaryPoint::origin(1),
        RANK_TOL,
    );
    let hessian_ok = hessian.as_ref().is_ok_and(|h| h.exact_match && h.sff.exact);

    let mut checked = 0;
    let mut disagreements = Vec::new();
    let mut subjects: Vec<(String, MapSpec, usize)> = fixtures_all()
        .into_iter()
        .map(|f| (name(&f), f, 3))
        .collect();
    for s in 0..20 {
        let base = if s % 2 == 0 {
            fixtures::linear(1, 2)
        } else {
            fixtures::whitney()
        };
        subjects.push((format!("conjugate {s}"), conjugate(&base, s), 1));
    }
    for (label, f, count) in &subjects {
        for p in regular_points(f, *count, 0).unwrap() {
            match check_equivalence(f, &p, VANISH_TOL) {
                Ok(r) => {
                    checked += 1;
                    if !r.agree {
                        disagreements
                            .push(format!("{label}: {} vs {}", r.frame_norm, r.extrinsic_norm));
                    }
                }
                Err(e) => errors.push(format!("{label}: {e}")),
            }
        }
    }
    let pass = errors.is_empty()
        && worst_symmetry <= SYMMETRY_TOL
        && hessian_ok
        && disagreements.is_empty();
    outcome(
        pass,
        format!(
            "(a) symmetry {worst_symmetry:.1e} (tol 1e-9); (b) Hessian identity exact {hessian_ok}; (c) {} disagreements in {checked} checks {errors:?} {disagreements:?}",
            disagreements.len()
        ),
    )
}

fn end_to_end() -> Outcome {
    let fresh = domain_points(1, 20, 9);
    let mut details = Vec::new();
    let mut pass = true;
    for s in 0..3 {
        let g = conjugate(&fixtures::linear(1, 2), 40 + s);
        let pts = regular_points(&g, 3, 0).unwrap();
        let v = flatness_verdict(&g, &pts, &fresh, VANISH_TOL, RANK_TOL).unwrap();
        let residual = v.witness.as_ref().map(|w| (w.residual, w.residual_points));
        let ok = v.verdict == Verdict::Flat && residual.is_some_and(|(r, k)| r <= 1e-8 && k == 20);
        pass &= ok;
        details.push(format!(
            "linear conjugate {s}: {:?} witness {:.1e}",
            v.verdict,
            residual.map_or(f64::NAN, |r| r.0)
        ));
    }
    let w = fixtures::whitney();
    let v = flatness_verdict(
        &w,
        &regular_points(&w, 3, 0).unwrap(),
        &fresh,
        VANISH_TOL,
        RANK_TOL,
    )
    .unwrap();
    pass &= v.verdict == Verdict::NonFlat;
    details.push(format!("whitney: {:?}", v.verdict));

    // vanishing q at every sample if and only if κ₀ = 0
    for f in fixtures_all() {
        let pts = regular_points(&f, 3, 0).unwrap();
        let vanishes = pts
            .iter()
            .all(|p| sff_frame(&f, p, LiftKind::General).is_ok_and(|s| s.norm <= VANISH_TOL));
        let flat_rank = kappa0(&f, &pts, RANK_TOL).is_ok_and(|k| k.kappa0 == 0);
        pass &= vanishes == flat_rank;
        details.push(format!("{}: q=0 {vanishes} rank0 {flat_rank}", name(&f)));
    }
    outcome(pass, details.join("; "))
}

fn transformation_law() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    let cases = [(fixtures::whitney(), 2usize), (fixtures::whitney2(), 4)];
    for s in 0..5u64 {
        let (f, big_n) = &cases[(s % 2) as usize];
        let f = f.to_siegel().unwrap();
        let p = regular_points(&f, 1, s).unwrap().remove(0);
        let a = random_automorphism(*big_n, 300 + s);
        let run = || -> ballmaps_core::Result<f64> {
            let moved = f.postcompose(&a.rational)?;
            let lift = build_general_lift(&moved, &p, FRAME_ORDER)?;
            let q_moved = sff_from_lift(&lift, &p)?;
            let back = lift.transport(&a.matrix.inverse()?)?;
            let q_back = sff_from_lift(&back, &p)?;
            let diff = q_moved
                .q
                .iter()
                .flatten()
                .flatten()
                .zip(q_back.q.iter().flatten().flatten())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            Ok(if back.max_residual() <= FRAME_TOL {
                diff
            } else {
                f64::INFINITY
            })
        };
        match run() {
            Ok(d) => worst = worst.max(d),
            Err(e) => errors.push(e.to_string()),
        }
    }
    outcome(
        errors.is_empty() && worst <= LAW_TOL,
        format!("max entrywise difference {worst:.1e} over 5 automorphisms (tol 1e-8) {errors:?}"),
    )
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [Criterion; 8] = [
        ("properness oracle", properness),
        ("Q-frame algebra", q_frame_algebra),
        ("normalization", normalization),
        ("geometric rank", geometric_rank_check),
        ("lift construction", lifts),
        ("second fundamental form", second_fundamental_form),
        ("flatness end to end", end_to_end),
        ("transformation law", transformation_law),
    ];
    let mut failed = Vec::new();
    for (k, (label, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {} {label} [{:.2?}]: {}",
            k + 1,
            t.elapsed(),
            o.detail
        );
        if !o.pass {
            failed.push(k + 1);
        }
    }
    let total = start.elapsed();
    let in_budget = total < Duration::from_secs(120);
    println!(
        "{} suite runtime {total:.2?} (limit 120s)",
        if in_budget { "PASS" } else { "FAIL" }
    );
    assert!(
        failed.is_empty() && in_budget,
        "failed criteria: {failed:?}"
    );
}
