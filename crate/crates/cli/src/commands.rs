//! One function per subcommand. Each returns the report and its exit code;
//! errors that stop the whole run are returned as `Err`.

use std::fs;
use std::path::Path;

use ballmaps_core::aut::parse_automorphism;
use ballmaps_core::expr::parse_scalar;
use ballmaps_core::hermitian::{membership, Matrix};
use ballmaps_core::lift::LiftKind;
use ballmaps_core::lift::{build_general_lift, build_spherical_lift, pullback_mc, MC_TOL};
use ballmaps_core::map::{BoundaryPoint, MapSpec};
use ballmaps_core::normalize::{
    geometric_rank, kappa0, normalize_star2, normalize_star3, NORMAL_ORDER,
};
use ballmaps_core::sampling::{domain_points, regular_points};
use ballmaps_core::sff::{
    compare_definitions, flatness_verdict, sff_extrinsic, sff_frame, Verdict,
};
use ballmaps_core::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::report::{mode, InputRecord, PointResult, RunReport, Settings};
use crate::{Common, LiftChoice};

/// Residual bound for the normal-form identities.
const NORMAL_TOL: f64 = 1e-9;
/// Float coefficients below this are omitted from displayed jets.
const CHOP_TOL: f64 = 1e-12;
/// Fresh points used to test a flatness witness.
const WITNESS_POINTS: usize = 20;

fn read(path: &Path) -> Result<(String, String)> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
    Ok((text, digest))
}

fn load_map(path: &Path) -> Result<(MapSpec, InputRecord)> {
    let (text, sha256) = read(path)?;
    let f = MapSpec::parse(&text)?;
    let input = InputRecord {
        path: path.display().to_string(),
        kind: "map",
        sha256,
        name: f.name.clone(),
        exact: f.is_exact(),
    };
    Ok((f, input))
}

fn settings(c: &Common, n: usize) -> Settings {
    let sampling = if c.points.is_empty() {
        format!(
            "Halton stream {} in dimension {}: index 1 + 4099*seed + k, skipping points with a zero coordinate part or a pole",
            c.seed,
            2 * n + 1
        )
    } else {
        "explicit points".into()
    };
    Settings {
        samples: c.samples,
        seed: c.seed,
        sampling,
        rank_tol: c.rank_tol,
        vanish_tol: c.vanish_tol,
        frame_tol: c.frame_tol,
        order: None,
        lift: None,
    }
}

fn parse_point(src: &str, n: usize) -> Result<BoundaryPoint> {
    let parts: Vec<&str> = src.split(',').map(str::trim).collect();
    if parts.len() != n + 1 {
        return Err(Error::Dimension(format!(
            "point '{src}' needs {} comma-separated values",
            n + 1
        )));
    }
    let values = parts
        .iter()
        .map(|s| parse_scalar(s))
        .collect::<Result<Vec<_>>>()?;
    let (u, z) = values.split_last().expect("n + 1 >= 1");
    BoundaryPoint::new(z.to_vec(), u.clone())
}

fn sample_points(f: &MapSpec, c: &Common) -> Result<Vec<BoundaryPoint>> {
    if c.points.is_empty() {
        regular_points(f, c.samples, c.seed)
    } else {
        c.points.iter().map(|s| parse_point(s, f.n)).collect()
    }
}

fn label(p: &BoundaryPoint) -> String {
    let z: Vec<String> = p.z0.iter().map(ToString::to_string).collect();
    format!("z0 = ({}), u0 = {}", z.join(", "), p.u0)
}

fn complex_rows(m: &Matrix) -> Vec<Vec<Complex64>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|s| s.to_c64()).collect())
        .collect()
}

fn fmt_c(c: Complex64) -> String {
    format!("{:e}{:+e}i", c.re, c.im)
}

fn point_result(
    index: usize,
    p: &BoundaryPoint,
    exact: bool,
    summary: String,
    result: impl Serialize,
) -> PointResult {
    PointResult {
        index,
        point: Some(p.record()),
        label: label(p),
        mode: mode(exact),
        summary,
        result: serde_json::to_value(result).expect("results serialize"),
        error: None,
    }
}

fn point_error(index: usize, p: &BoundaryPoint, e: &Error) -> PointResult {
    PointResult {
        index,
        point: Some(p.record()),
        label: label(p),
        mode: mode(p.is_exact()),
        summary: String::new(),
        result: serde_json::Value::Null,
        error: Some(e.to_string()),
    }
}

/// Exit code when every point failed: the first failure's code.
fn all_failed(errors: &[Error], total: usize) -> Option<i32> {
    (total > 0 && errors.len() == total).then(|| errors[0].exit_code())
}

fn no_points() -> Error {
    Error::Pole("no sample point where the map is regular".into())
}

pub fn rank(path: &Path, c: &Common) -> Result<(RunReport, i32)> {
    let (f, input) = load_map(path)?;
    let f = f.to_siegel()?;
    let points = sample_points(&f, c)?;
    if points.is_empty() {
        return Err(no_points());
    }
    let mut report = RunReport::new("rank", input, settings(c, f.n));
    let mut errors = Vec::new();
    for (k, p) in points.iter().enumerate() {
        match geometric_rank(&f, p, c.rank_tol) {
            Ok(r) => {
                let sv: Vec<String> = r.singular_values.iter().map(|s| format!("{s:e}")).collect();
                let summary = format!(
                    "rank {}  gap {:e}  singular values [{}]",
                    r.rank,
                    r.gap,
                    sv.join(", ")
                );
                report.residual(Some(k), "star2", r.star2.max(), NORMAL_TOL);
                report.points.push(point_result(k, p, r.exact, summary, &r));
            }
            Err(e) => {
                report.points.push(point_error(k, p, &e));
                errors.push(e);
            }
        }
    }
    match kappa0(&f, &points, c.rank_tol) {
        Ok(k) => report.verdict("kappa0", k.kappa0),
        Err(e) => report.verdict("kappa0", e.to_string()),
    }
    let code = all_failed(&errors, points.len()).unwrap_or(0);
    Ok((report, code))
}

#[derive(Serialize)]
struct NormalizeResult {
    star2_target: Vec<Vec<Complex64>>,
    star2_a: Vec<Vec<Complex64>>,
    star2_jets: Vec<String>,
    star3_source: Vec<Vec<Complex64>>,
    star3_target: Vec<Vec<Complex64>>,
    star3_a: Vec<Vec<Complex64>>,
    star3_jets: Vec<String>,
    mu: ballmaps_core::normalize::MuData,
    newton_steps: usize,
    hermitian_fallback: bool,
}

pub fn normalize(path: &Path, c: &Common) -> Result<(RunReport, i32)> {
    let (f, input) = load_map(path)?;
    let f = f.to_siegel()?;
    let mut c = c.clone();
    if c.points.is_empty() {
        c.samples = c.samples.min(1);
    }
    let points = sample_points(&f, &c)?;
    let p = points.first().ok_or_else(no_points)?;
    let mut report = RunReport::new("normalize", input, settings(&c, f.n));
    let jets = f.jets_at(&f.working_point(p), NORMAL_ORDER)?;
    let star2 = normalize_star2(&jets.holomorphic)?;
    let star3 = normalize_star3(&f, p, None, c.rank_tol)?;
    let names = |k: usize, big_n: usize| {
        if k < f.n {
            format!("f{}", k + 1)
        } else if k < big_n {
            format!("phi{}", k + 1 - f.n)
        } else {
            "g".to_string()
        }
    };
    let show = |jets: &ballmaps_core::jet::JetVector| -> Vec<String> {
        jets.entries
            .iter()
            .enumerate()
            .map(|(k, j)| {
                format!(
                    "{} = {}",
                    names(k, f.big_n),
                    j.chop(CHOP_TOL).display(jets.chart)
                )
            })
            .collect()
    };
    let r2 = &star2.residuals;
    for (name, v) in [
        ("star2.f", r2.f),
        ("star2.phi", r2.phi),
        ("star2.g", r2.g),
        ("star2.identity", r2.identity),
        ("star3.diagonal", star3.residuals.diagonal),
        ("star3.phi", star3.residuals.phi),
        ("star3.f_ww", star3.residuals.f_ww),
        ("star3.star2", star3.residuals.star2.max()),
    ] {
        report.residual(Some(0), name, v, NORMAL_TOL);
    }
    let mu: Vec<String> = star3.mu.mu.iter().map(|m| fmt_c(*m)).collect();
    let mut summary = format!(
        "kappa0 {}  mu [{}]  P(n, kappa0) {}  N >= n + P {}\nnormalized jets:",
        star3.mu.kappa0,
        mu.join(", "),
        star3.mu.p_bound,
        star3.mu.bound_holds
    );
    let star3_jets = show(&star3.jets);
    for line in &star3_jets {
        summary.push_str("\n  ");
        summary.push_str(line);
    }
    let exact = star3.jets.is_exact();
    report.verdict("kappa0", star3.mu.kappa0);
    report.verdict("codimension_bound", star3.mu.bound_holds);
    let result = NormalizeResult {
        star2_target: complex_rows(&star2.target),
        star2_a: complex_rows(&star2.a),
        star2_jets: show(&star2.jets),
        star3_source: complex_rows(&star3.source),
        star3_target: complex_rows(&star3.target),
        star3_a: complex_rows(&star3.a),
        star3_jets,
        mu: star3.mu.clone(),
        newton_steps: star3.newton_steps,
        hermitian_fallback: star3.hermitian_fallback,
    };
    report
        .points
        .push(point_result(0, p, exact, summary, result));
    Ok((report, 0))
}

#[derive(Serialize)]
struct SffResult {
    frame: ballmaps_core::sff::SffTensor,
    extrinsic: ballmaps_core::sff::ExtrinsicReport,
    equivalence: ballmaps_core::sff::EquivalenceReport,
}

pub fn sff(path: &Path, c: &Common) -> Result<(RunReport, i32)> {
    let (f, input) = load_map(path)?;
    let f = f.to_siegel()?;
    let points = sample_points(&f, c)?;
    if points.is_empty() {
        return Err(no_points());
    }
    let mut report = RunReport::new("sff", input, settings(c, f.n));
    let mut errors = Vec::new();
    let mut disagreements = 0;
    for (k, p) in points.iter().enumerate() {
        let run = || -> Result<SffResult> {
            let frame = sff_frame(&f, p, LiftKind::General)?;
            let extrinsic = sff_extrinsic(&f, p)?;
            let equivalence = compare_definitions(&frame, &extrinsic, c.vanish_tol);
            Ok(SffResult {
                frame,
                extrinsic,
                equivalence,
            })
        };
        match run() {
            Ok(r) => {
                let eq = &r.equivalence;
                if !eq.agree {
                    disagreements += 1;
                }
                let summary = format!(
                    "frame |q| {:e} rank {}  extrinsic |II| {:e} rank {}  agree {}",
                    eq.frame_norm, eq.frame_rank, eq.extrinsic_norm, eq.extrinsic_rank, eq.agree
                );
                report.residual(Some(k), "q symmetry", r.frame.symmetry_defect, c.vanish_tol);
                report.residual(Some(k), "q least squares", r.frame.residual, c.vanish_tol);
                report.residual(Some(k), "frame", r.frame.frame_residual, c.frame_tol);
                report.residual(Some(k), "maurer-cartan", r.frame.mc_residual, MC_TOL);
                report.residual(
                    Some(k),
                    "extrinsic symmetry",
                    r.extrinsic.symmetry_defect,
                    c.vanish_tol,
                );
                report
                    .points
                    .push(point_result(k, p, r.frame.exact, summary, &r));
            }
            Err(e) => {
                report.points.push(point_error(k, p, &e));
                errors.push(e);
            }
        }
    }
    report.verdict("disagreements", disagreements);
    let code = if disagreements > 0 {
        Error::Inconsistency(String::new()).exit_code()
    } else {
        all_failed(&errors, points.len()).unwrap_or(0)
    };
    Ok((report, code))
}

pub fn flat(path: &Path, c: &Common) -> Result<(RunReport, i32)> {
    let (f, input) = load_map(path)?;
    let f = f.to_siegel()?;
    let points = sample_points(&f, c)?;
    if points.is_empty() {
        return Err(no_points());
    }
    let fresh = domain_points(f.n, WITNESS_POINTS, c.seed + 1);
    let v = flatness_verdict(&f, &points, &fresh, c.vanish_tol, c.rank_tol)?;
    let mut report = RunReport::new("flat", input, settings(c, f.n));
    for (k, (p, norm)) in points.iter().zip(&v.sff_norms).enumerate() {
        let summary = match norm {
            Some(x) => format!("|q| {x:e}"),
            None => "no lift at this point".to_string(),
        };
        report
            .points
            .push(point_result(k, p, p.is_exact(), summary, norm));
    }
    if let Some(w) = &v.witness {
        report.residual(None, "witness", w.residual, c.vanish_tol);
        report.residual(
            None,
            "witness linearity",
            w.linearity_residual,
            c.vanish_tol,
        );
    }
    report.verdict("verdict", v.verdict);
    report.verdict("kappa0", v.kappa0);
    report.verdict("max_sff_norm", v.max_sff_norm);
    if let Some(w) = &v.witness {
        report.verdict("witness_points", w.residual_points);
    }
    for reason in &v.reasons {
        report.verdict("reason", reason);
    }
    report.details = serde_json::to_value(&v).expect("verdicts serialize");
    let code = match v.verdict {
        Verdict::Inconclusive if v.sff_norms.iter().all(Option::is_none) => 3,
        _ => 0,
    };
    Ok((report, code))
}

#[derive(Serialize)]
struct FrameResult {
    kind: LiftKind,
    base_frame: Vec<Vec<Complex64>>,
    exact: bool,
    frame_residuals: Vec<(String, f64)>,
    relations: Vec<(String, f64)>,
    structure_residual: f64,
    direct_orthonormal: Option<bool>,
}

pub fn frame(path: &Path, lift: LiftChoice, order: u32, c: &Common) -> Result<(RunReport, i32)> {
    let (f, input) = load_map(path)?;
    let f = f.to_siegel()?;
    let points = sample_points(&f, c)?;
    if points.is_empty() {
        return Err(no_points());
    }
    let kind = match lift {
        LiftChoice::General => LiftKind::General,
        LiftChoice::Spherical => LiftKind::Spherical,
    };
    let mut s = settings(c, f.n);
    s.order = Some(order);
    s.lift = Some(match kind {
        LiftKind::General => "general",
        LiftKind::Spherical => "spherical",
    });
    let mut report = RunReport::new("frame", input, s);
    let mut errors = Vec::new();
    let mut exceeded = false;
    for (k, p) in points.iter().enumerate() {
        let run = || -> Result<FrameResult> {
            let l = match kind {
                LiftKind::General => build_general_lift(&f, p, order)?,
                LiftKind::Spherical => build_spherical_lift(&f, p, order)?,
            };
            let mc = pullback_mc(&l)?;
            Ok(FrameResult {
                kind,
                base_frame: complex_rows(&l.at_base()),
                exact: l.frame.is_exact(),
                frame_residuals: l.residuals.clone(),
                relations: mc.relations(),
                structure_residual: mc.structure_residual(),
                direct_orthonormal: l.direct_orthonormal,
            })
        };
        match run() {
            Ok(r) => {
                for (name, v) in &r.frame_residuals {
                    report.residual(Some(k), name.clone(), *v, c.frame_tol);
                }
                for (name, v) in &r.relations {
                    report.residual(Some(k), format!("mc {name}"), *v, MC_TOL);
                }
                let worst_frame = r.frame_residuals.iter().map(|x| x.1).fold(0.0, f64::max);
                let worst_mc = r.relations.iter().map(|x| x.1).fold(0.0, f64::max);
                exceeded |= worst_frame > c.frame_tol || worst_mc > MC_TOL;
                let summary = format!(
                    "max frame residual {worst_frame:e}  max Maurer-Cartan residual {worst_mc:e}  structure {:e}",
                    r.structure_residual
                );
                report.points.push(point_result(k, p, r.exact, summary, &r));
            }
            Err(e) => {
                report.points.push(point_error(k, p, &e));
                errors.push(e);
            }
        }
    }
    report.verdict("within_tolerance", !exceeded);
    let code = if exceeded {
        4
    } else {
        all_failed(&errors, points.len()).unwrap_or(0)
    };
    Ok((report, code))
}

pub fn check_aut(path: &Path, c: &Common) -> Result<(RunReport, i32)> {
    let (text, sha256) = read(path)?;
    let a = parse_automorphism(&text)?;
    let input = InputRecord {
        path: path.display().to_string(),
        kind: "automorphism",
        sha256,
        name: Some(a.params.kind().to_string()),
        exact: a.matrix.is_exact(),
    };
    let m = membership(&a.matrix, c.frame_tol)?;
    let mut report = RunReport::new("check-aut", input, settings(c, a.m()));
    report.residual(None, "A^+ J A - cJ", m.form_residual, c.frame_tol);
    report.residual(None, "A^+ J A - J", m.unitary_residual, c.frame_tol);
    report.residual(None, "det A - 1", m.det_residual, c.frame_tol);
    report.verdict("isSU", m.is_su);
    report.verdict("isGLQ", m.is_glq);
    report.verdict("scale", fmt_c(m.scale));
    report.details = serde_json::to_value(&m).expect("membership serializes");
    Ok((report, 0))
}
