//! Rational maps between the ball and Siegel models, boundary points, and
//! translated jets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::jet::{Chart, Jet, JetVector, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ball,
    Siegel,
}

/// A rational map with `N+1` components in the variables `z_1..z_n, w`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub model: Model,
    pub n: usize,
    pub big_n: usize,
    pub components: Vec<Expr>,
    pub name: Option<String>,
}

/// Maps whose expression trees have at most this many nodes in total are
/// normalized in exact arithmetic at any exact point.
const EXACT_SIZE_LIMIT: usize = 400;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDocument {
    model: Model,
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    components: Vec<String>,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Serialize)]
struct MapDocumentOut<'a> {
    model: Model,
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    components: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: &'a Option<String>,
}

/// Position (1-based line and column) of byte `offset` in `text`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.chars().count(), |k| before[k + 1..].chars().count())
        + 1;
    (line, column)
}

impl MapSpec {
    pub fn new(model: Model, n: usize, big_n: usize, components: Vec<Expr>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension(
                "source CR dimension must be positive".into(),
            ));
        }
        if big_n < n {
            return Err(Error::Dimension(format!(
                "target dimension N={big_n} is smaller than n={n}"
            )));
        }
        if components.len() != big_n + 1 {
            return Err(Error::Dimension(format!(
                "expected N+1 = {} components, found {}",
                big_n + 1,
                components.len()
            )));
        }
        if let Some(c) = components.iter().find(|c| c.var_bound() > n + 1) {
            return Err(Error::Dimension(format!(
                "component uses a variable beyond z1..z{n}, w: {}",
                c.display(n)
            )));
        }
        Ok(MapSpec {
            model,
            n,
            big_n,
            components,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Parse a map-spec document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof => {
                Error::Syntax {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                }
            }
            _ => Error::Document(e.to_string()),
        })?;
        let mut search_from = 0;
        let mut components = Vec::with_capacity(doc.components.len());
        for src in &doc.components {
            let quoted = serde_json::to_string(src).unwrap_or_default();
            let start = text[search_from..].find(&quoted).map(|k| k + search_from);
            if let Some(s) = start {
                search_from = s + quoted.len();
            }
            let e = parse_expr(src, doc.n).map_err(|err| match err {
                Error::Syntax {
                    column, message, ..
                } => {
                    let (line, col) = match start {
                        Some(s) => line_col(text, s + 1 + column - 1),
                        None => (1, column),
                    };
                    Error::Syntax {
                        line,
                        column: col,
                        message: format!("in component \"{src}\": {message}"),
                    }
                }
                other => other,
            })?;
            components.push(e);
        }
        let mut spec = MapSpec::new(doc.model, doc.n, doc.big_n, components)?;
        spec.name = doc.name;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let doc = MapDocumentOut {
            model: self.model,
            n: self.n,
            big_n: self.big_n,
            components: self
                .components
                .iter()
                .map(|c| c.display(self.n).to_string())
                .collect(),
            name: &self.name,
        };
        serde_json::to_string_pretty(&doc).expect("map documents serialize")
    }

    pub fn is_exact(&self) -> bool {
        self.components.iter().all(Expr::is_exact)
    }

    /// Float evaluation at `(z, w)`.
    pub fn eval(&self, z: &[Complex64], w: Complex64) -> Result<Vec<Complex64>> {
        let mut x = z.to_vec();
        x.push(w);
        self.components.iter().map(|c| c.eval(&x)).collect()
    }

    /// Evaluation in the coefficient field.
    pub fn eval_scalar(&self, z: &[Scalar], w: &Scalar) -> Result<Vec<Scalar>> {
        let mut x = z.to_vec();
        x.push(w.clone());
        self.components.iter().map(|c| c.eval_scalar(&x)).collect()
    }

    /// `self ∘ inner`, where `inner` has `n+1` components in `m` source variables.
    pub fn precompose(&self, inner: &[Expr], m: usize) -> Result<MapSpec> {
        if inner.len() != self.n + 1 {
            return Err(Error::Dimension(
                "inner map has the wrong number of components".into(),
            ));
        }
        let comps = self
            .components
            .iter()
            .map(|c| c.substitute(inner))
            .collect();
        MapSpec::new(self.model, m, self.big_n, comps).map(|s| self.keep_name(s))
    }

    /// `outer ∘ self`, where `outer` has `k` components in the `N+1` target variables.
    pub fn postcompose(&self, outer: &[Expr]) -> Result<MapSpec> {
        if outer.is_empty() {
            return Err(Error::Dimension("outer map has no components".into()));
        }
        let comps = outer
            .iter()
            .map(|c| c.substitute(&self.components))
            .collect();
        MapSpec::new(self.model, self.n, outer.len() - 1, comps).map(|s| self.keep_name(s))
    }

    fn keep_name(&self, mut s: MapSpec) -> MapSpec {
        s.name = self.name.clone();
        s
    }

    /// Switch models: Siegel maps become `ρ_N ∘ F ∘ ρ_n⁻¹`, ball maps `ρ_N⁻¹ ∘ F ∘ ρ_n`.
    pub fn cayley(&self) -> Result<MapSpec> {
        let (inner, outer, model) = match self.model {
            Model::Siegel => (cayley_inverse(self.n), cayley(self.big_n), Model::Ball),
            Model::Ball => (cayley(self.n), cayley_inverse(self.big_n), Model::Siegel),
        };
        let mut out = self.precompose(&inner, self.n)?.postcompose(&outer)?;
        out.model = model;
        if !out.has_regular_point() {
            return Err(Error::InvalidModel(
                "Cayley conjugate has a vanishing denominator at every test point".into(),
            ));
        }
        Ok(out)
    }

    pub fn to_siegel(&self) -> Result<MapSpec> {
        match self.model {
            Model::Siegel => Ok(self.clone()),
            Model::Ball => self.cayley(),
        }
    }

    fn has_regular_point(&self) -> bool {
        let probes = [(0.13, 0.21), (-0.37, 0.05), (0.29, -0.41), (0.011, 0.47)];
        probes.iter().any(|&(a, b)| {
            let z: Vec<Complex64> = (0..self.n)
                .map(|k| Complex64::new(a + 0.01 * k as f64, b))
                .collect();
            let w = Complex64::new(b, a.abs());
            self.eval(&z, w)
                .is_ok_and(|v| v.iter().all(|x| x.is_finite()))
        })
    }

    fn require_siegel(&self) -> Result<()> {
        match self.model {
            Model::Siegel => Ok(()),
            Model::Ball => Err(Error::InvalidModel(
                "operation expects a Siegel-model map".into(),
            )),
        }
    }

    /// The point at which normalizations are computed: `p` itself when
    /// exact arithmetic stays cheap, a float copy otherwise.
    pub fn working_point(&self, p: &BoundaryPoint) -> BoundaryPoint {
        let size: usize = self.components.iter().map(Expr::node_count).sum();
        if p.is_origin() || size <= EXACT_SIZE_LIMIT {
            p.clone()
        } else {
            p.to_float()
        }
    }

    /// Substitute holomorphic jets `(z_1..z_n, w)` into the components.
    pub fn compose_jets(&self, args: &[Jet], order: u32) -> Result<Vec<Jet>> {
        if args.len() != self.n + 1 {
            return Err(Error::Dimension(format!(
                "expected {} arguments, got {}",
                self.n + 1,
                args.len()
            )));
        }
        let args: Vec<Jet> = args.iter().map(|a| a.truncate(order)).collect();
        self.components
            .iter()
            .map(|c| {
                c.to_jet(&args).map_err(|e| match e {
                    Error::SingularSubstitution(m) => {
                        Error::Pole(format!("map has a pole at the base point ({m})"))
                    }
                    other => other,
                })
            })
            .collect()
    }

    /// Holomorphic jets of `F ∘ σ⁰_p` at 0 (the `u` slot stands for `w`).
    pub fn source_jets(&self, p: &BoundaryPoint, order: u32) -> Result<JetVector> {
        self.require_siegel()?;
        p.check_dim(self.n)?;
        let n = self.n;
        let w0 = p.w0();
        let mut args: Vec<Jet> = (0..n)
            .map(|k| Jet::var(n, order, Var::Z(k)).add_scalar(&p.z0[k]))
            .collect();
        let mut w = Jet::var(n, order, Var::U).add_scalar(&w0);
        for k in 0..n {
            let coeff = Scalar::i() * Scalar::int(2) * p.z0[k].conj();
            w = w.add(&Jet::var(n, order, Var::Z(k)).scale(&coeff));
        }
        args.push(w);
        let entries = self.compose_jets(&args, order)?;
        JetVector::new(Chart::Holomorphic, entries)
    }

    /// Jets of `F_p = τ^F_p ∘ F ∘ σ⁰_p` at 0, holomorphic and restricted.
    pub fn jets_at(&self, p: &BoundaryPoint, order: u32) -> Result<TranslatedJets> {
        let raw = self.source_jets(p, order)?;
        let image = raw.constant_terms();
        let holomorphic = translate_target(&raw, &image)?;
        let restricted = holomorphic.restrict_to_heisenberg()?;
        Ok(TranslatedJets {
            point: p.clone(),
            image,
            holomorphic,
            restricted,
        })
    }

    /// Restricted jet at `p` of `Σ|f|² + Σ|φ|² + (i/2)(g − ḡ)`; zero certifies
    /// properness to the truncation order.
    pub fn proper_residual_at(&self, p: &BoundaryPoint, order: u32) -> Result<Jet> {
        let raw = self.source_jets(p, order)?.restrict_to_heisenberg()?;
        Ok(boundary_defining(&raw.entries))
    }

    pub fn verify_proper(&self, order: u32) -> Result<Jet> {
        self.to_siegel()?
            .proper_residual_at(&BoundaryPoint::origin(self.n), order)
    }
}

/// `Σ_{A≤N} |Z_A|² + (i/2)(Z_{N+1} − conj Z_{N+1})` on jet components.
pub fn boundary_defining(entries: &[Jet]) -> Jet {
    let (last, rest) = entries.split_last().expect("at least one component");
    let mut acc = last
        .sub(&last.conj())
        .scale(&(Scalar::i() * Scalar::ratio(1, 2)));
    for e in rest {
        acc = acc.add(&e.mul(&e.conj()));
    }
    acc
}

/// Apply `τ` for the image point `(f̃0, g0)` to holomorphic jets.
pub fn translate_target(raw: &JetVector, image: &[Scalar]) -> Result<JetVector> {
    let (g0, f0) = image
        .split_last()
        .ok_or_else(|| Error::Dimension("empty map".into()))?;
    let (g, f) = raw.entries.split_last().expect("nonempty");
    let mut gt = g.add_scalar(&-g0.conj());
    for (fa, fa0) in f.iter().zip(f0) {
        gt = gt.sub(&fa.scale(&(Scalar::i() * Scalar::int(2) * fa0.conj())));
    }
    let mut entries: Vec<Jet> = f
        .iter()
        .zip(f0)
        .map(|(fa, fa0)| fa.add_scalar(&-fa0))
        .collect();
    entries.push(gt);
    JetVector::new(raw.chart, entries)
}

/// Jets of `τ^F_p ∘ F ∘ σ⁰_p` around 0.
#[derive(Clone, Debug)]
pub struct TranslatedJets {
    pub point: BoundaryPoint,
    /// `F(p)`.
    pub image: Vec<Scalar>,
    pub holomorphic: JetVector,
    pub restricted: JetVector,
}

/// Serializable form of a [`BoundaryPoint`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointRecord {
    pub z0: Vec<Complex64>,
    pub u0: f64,
    pub exact: bool,
}

/// A point of the Heisenberg hypersurface, `w0 = u0 + i|z0|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub z0: Vec<Scalar>,
    pub u0: Scalar,
}

impl BoundaryPoint {
    pub fn new(z0: Vec<Scalar>, u0: Scalar) -> Result<Self> {
        let real = if u0.is_exact() {
            u0.im().is_zero()
        } else {
            u0.im().abs() <= 1e-14
        };
        if !real {
            return Err(Error::OffHypersurface("u0 must be real".into()));
        }
        Ok(BoundaryPoint { z0, u0: u0.re() })
    }

    pub fn origin(n: usize) -> Self {
        BoundaryPoint {
            z0: vec![Scalar::zero(); n],
            u0: Scalar::zero(),
        }
    }

    /// The boundary point through `(z0, w0)`; fails unless `Im w0 = |z0|²`.
    pub fn from_zw(z0: Vec<Scalar>, w0: Scalar, tol: f64) -> Result<Self> {
        let p = BoundaryPoint { u0: w0.re(), z0 };
        let defect = &w0 - &p.w0();
        let ok = if defect.is_exact() {
            defect.is_zero()
        } else {
            defect.abs() <= tol
        };
        if !ok {
            return Err(Error::OffHypersurface(format!(
                "Im w0 - |z0|^2 = {}",
                defect.im()
            )));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.z0.len()
    }

    pub fn w0(&self) -> Scalar {
        let mut nrm = Scalar::zero();
        for z in &self.z0 {
            nrm += &z.norm_sqr();
        }
        &self.u0 + &(Scalar::i() * nrm)
    }

    pub fn to_float(&self) -> BoundaryPoint {
        BoundaryPoint {
            z0: self.z0.iter().map(Scalar::to_float).collect(),
            u0: self.u0.to_float(),
        }
    }

    pub fn is_origin(&self) -> bool {
        self.u0.is_zero() && self.z0.iter().all(Scalar::is_zero)
    }

    pub fn is_exact(&self) -> bool {
        self.u0.is_exact() && self.z0.iter().all(Scalar::is_exact)
    }

    pub fn record(&self) -> PointRecord {
        PointRecord {
            z0: self.z0.iter().map(Scalar::to_c64).collect(),
            u0: self.u0.to_c64().re,
            exact: self.is_exact(),
        }
    }

    pub fn to_c64(&self) -> (Vec<Complex64>, Complex64) {
        (
            self.z0.iter().map(Scalar::to_c64).collect(),
            self.w0().to_c64(),
        )
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::Dimension(format!(
                "point has {} z-coordinates, map has n={n}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// `ρ_n(z, w) = (2z/(1 − iw), (1 + iw)/(1 − iw))` as expressions.
pub fn cayley(n: usize) -> Vec<Expr> {
    let iw = Expr::mul(Expr::c(Scalar::i()), Expr::var(n));
    let den = Expr::sub(Expr::one(), iw.clone());
    let mut out: Vec<Expr> = (0..n)
        .map(|k| Expr::div(Expr::mul(Expr::int(2), Expr::var(k)), den.clone()))
        .collect();
    out.push(Expr::div(Expr::add(Expr::one(), iw), den));
    out
}

/// `ρ_n⁻¹(ζ, ω) = (ζ/(1 + ω), i(1 − ω)/(1 + ω))`.
pub fn cayley_inverse(n: usize) -> Vec<Expr> {
    let den = Expr::add(Expr::one(), Expr::var(n));
    let mut out: Vec<Expr> = (0..n)
        .map(|k| Expr::div(Expr::var(k), den.clone()))
        .collect();
    out.push(Expr::div(
        Expr::mul(Expr::c(Scalar::i()), Expr::sub(Expr::one(), Expr::var(n))),
        den,
    ));
    out
}

/// Apply `ρ_n` to a point.
pub fn cayley_point(z: &[Scalar], w: &Scalar) -> Result<(Vec<Scalar>, Scalar)> {
    let mut x = z.to_vec();
    x.push(w.clone());
    let vals = cayley(z.len())
        .iter()
        .map(|e| e.eval_scalar(&x))
        .collect::<Result<Vec<_>>>()?;
    let (last, rest) = vals.split_last().expect("nonempty");
    Ok((rest.to_vec(), last.clone()))
}

/// Standard maps used throughout the tests and examples.
pub mod fixtures {
    use super::*;

    fn parse_all(srcs: &[&str], n: usize) -> Vec<Expr> {
        srcs.iter()
            .map(|s| parse_expr(s, n).expect("fixture parses"))
            .collect()
    }

    /// `(z, 0, w)` from `∂ℍ^{n+1}` into `∂ℍ^{N+1}`.
    pub fn linear(n: usize, big_n: usize) -> MapSpec {
        let mut comps: Vec<Expr> = (0..n).map(Expr::var).collect();
        comps.extend((n..big_n).map(|_| Expr::zero()));
        comps.push(Expr::var(n));
        MapSpec::new(Model::Siegel, n, big_n, comps)
            .unwrap()
            .with_name("linear")
    }

    /// The Whitney map `(Z, ZW, W²)` of the balls `B² → B³`.
    pub fn whitney_ball() -> MapSpec {
        MapSpec::new(Model::Ball, 1, 2, parse_all(&["z1", "z1*w", "w^2"], 1))
            .unwrap()
            .with_name("whitney")
    }

    /// The Whitney map in the Siegel model.
    pub fn whitney() -> MapSpec {
        whitney_ball().cayley().expect("Whitney map converts")
    }

    /// `(Z1, Z2, W Z1, W Z2, W²)` of the balls `B³ → B⁵`, in the Siegel model.
    pub fn whitney2() -> MapSpec {
        MapSpec::new(
            Model::Ball,
            2,
            4,
            parse_all(&["z1", "z2", "w*z1", "w*z2", "w^2"], 2),
        )
        .unwrap()
        .with_name("whitney2")
        .cayley()
        .expect("Whitney map converts")
    }

    /// A Whitney-type map already in full normal form at 0:
    /// `f = z + 2i z w + …`, `φ = 2z² + …`, `g = w`.
    pub fn whitney_normalized() -> MapSpec {
        MapSpec::new(
            Model::Siegel,
            1,
            2,
            parse_all(&["z1*(1 + i*w)/(1 - i*w)", "2*z1^2/(1 - i*w)", "w"], 1),
        )
        .unwrap()
        .with_name("whitney-normalized")
    }

    /// `(z, 0, w + z1²)`, which is not proper.
    pub fn non_proper() -> MapSpec {
        MapSpec::new(Model::Siegel, 1, 2, parse_all(&["z1", "0", "w + z1^2"], 1))
            .unwrap()
            .with_name("non-proper")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Monomial;

    fn s(v: i64) -> Scalar {
        Scalar::int(v)
    }

    #[test]
    fn cayley_examples() {
        let (z, w) = cayley_point(&[s(0)], &s(0)).unwrap();
        assert_eq!((z, w), (vec![s(0)], s(1)));
        let (z, w) = cayley_point(&[s(1)], &Scalar::i()).unwrap();
        assert_eq!((z.clone(), w.clone()), (vec![s(1)], s(0)));
        assert_eq!(&z[0].norm_sqr() + &w.norm_sqr(), s(1));
    }

    #[test]
    fn cayley_round_trip_is_exact() {
        let ball = fixtures::whitney_ball();
        let back = ball.cayley().unwrap().cayley().unwrap();
        assert_eq!(back.model, Model::Ball);
        for (a, b) in ball.components.iter().zip(&back.components) {
            assert!(a.same_rational_function(b, 1));
        }
    }

    #[test]
    fn whitney_proper_and_g_jet() {
        let f = fixtures::whitney();
        for order in 2..=6 {
            assert!(f.verify_proper(order).unwrap().is_zero());
        }
        let jets = f.jets_at(&BoundaryPoint::origin(1), 4).unwrap();
        // g = 2w/(1 - w²) in this model, so g = 2w + o_wt(4).
        let g = &jets.holomorphic.entries[2];
        let w = Monomial {
            z: vec![0],
            zbar: vec![0],
            u: 1,
        };
        assert_eq!(g.coeff(&w), s(2));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn non_proper_residual_at_weight_two() {
        let r = fixtures::non_proper().verify_proper(4).unwrap();
        assert_eq!(r.weighted_order(), Some(2));
    }

    #[test]
    fn translated_jets_vanish_at_origin() {
        let f = fixtures::whitney();
        let p = BoundaryPoint::new(vec![Scalar::ratio(1, 3)], Scalar::ratio(-2, 7)).unwrap();
        let j = f.jets_at(&p, 4).unwrap();
        assert!(j.holomorphic.constant_terms().iter().all(Scalar::is_zero));
        assert!(j.holomorphic.is_exact());
        assert!(f.proper_residual_at(&p, 5).unwrap().is_zero());
    }

    #[test]
    fn linear_jets_at_origin_are_the_map() {
        let f = fixtures::linear(2, 3);
        let j = f.jets_at(&BoundaryPoint::origin(2), 4).unwrap();
        assert_eq!(j.holomorphic.entries[0], Jet::var(2, 4, Var::Z(0)));
        assert!(j.holomorphic.entries[2].is_zero());
        assert_eq!(j.holomorphic.entries[3], Jet::var(2, 4, Var::U));
    }

    #[test]
    fn parse_errors() {
        let bad = r#"{"model":"siegel","n":1,"N":2,"components":["z1","0"]}"#;
        assert!(matches!(MapSpec::parse(bad), Err(Error::Dimension(_))));
        let bad =
            "{\"model\":\"siegel\",\"n\":1,\"N\":2,\n \"components\":[\"z1 + \",\"0\",\"w\"]}";
        match MapSpec::parse(bad) {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 22)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            MapSpec::parse("{\"model\":"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let f = fixtures::whitney_normalized();
        let g = MapSpec::parse(&f.to_json()).unwrap();
        assert_eq!(g.name.as_deref(), Some("whitney-normalized"));
        for (a, b) in f.components.iter().zip(&g.components) {
            assert!(a.same_rational_function(b, 1));
        }
    }

    #[test]
    fn off_hypersurface_rejected() {
        assert!(BoundaryPoint::from_zw(vec![s(1)], Scalar::gauss(0, 2), 0.0).is_err());
        assert!(BoundaryPoint::from_zw(vec![s(1)], Scalar::gauss(3, 1), 0.0).is_ok());
    }
}
