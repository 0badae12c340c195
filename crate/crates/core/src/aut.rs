//! Automorphisms of the Heisenberg hypersurface: translations `σ⁰_p`, target
//! normalizers `τ^F_p` and the isotropy maps `F_{λ,r,a,U}`. Each carries its
//! matrix and an independently written rational form.

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::{parse_scalar, Expr};
use crate::hermitian::{mobius, mobius_c64, Matrix};
use crate::map::{BoundaryPoint, MapSpec, Model};
use crate::scalar::Scalar;

/// Float tolerance for unitarity of `U` and reality of parameters.
pub const PARAM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum AutParams {
    Sigma0 {
        point: BoundaryPoint,
    },
    /// `image` is `F(p) = (f̃0, g0)`.
    TauF {
        image: Vec<Scalar>,
    },
    Isotropy {
        lambda: Scalar,
        r: Scalar,
        a: Vec<Scalar>,
        u: Matrix,
    },
    /// Products, inverses and raw matrices.
    Matrix,
}

impl AutParams {
    pub fn kind(&self) -> &'static str {
        match self {
            AutParams::Sigma0 { .. } => "sigma0",
            AutParams::TauF { .. } => "tauF",
            AutParams::Isotropy { .. } => "isotropy",
            AutParams::Matrix => "matrix",
        }
    }
}

/// An automorphism of `∂ℍ^{m+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Automorphism {
    pub params: AutParams,
    pub matrix: Matrix,
    /// `m+1` components in `z_1..z_m, w`.
    pub rational: Vec<Expr>,
}

fn two_i() -> Scalar {
    Scalar::gauss(0, 2)
}

fn norm_sqr(v: &[Scalar]) -> Scalar {
    v.iter().fold(Scalar::zero(), |acc, x| acc + x.norm_sqr())
}

fn is_real(s: &Scalar) -> bool {
    if s.is_exact() {
        s.im().is_zero()
    } else {
        s.im().abs() <= PARAM_TOL
    }
}

impl Automorphism {
    /// Dimension `m` of `∂ℍ^{m+1}`.
    pub fn m(&self) -> usize {
        self.matrix.rows() - 2
    }

    pub fn identity(m: usize) -> Self {
        Automorphism {
            params: AutParams::Matrix,
            matrix: Matrix::identity(m + 2),
            rational: (0..=m).map(Expr::var).collect(),
        }
    }

    /// Wrap a raw matrix; the rational form is its projective action.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() < 3 {
            return Err(Error::Dimension(
                "automorphism matrices are square of size >= 3".into(),
            ));
        }
        Ok(Automorphism {
            params: AutParams::Matrix,
            rational: crate::hermitian::mobius_exprs(&matrix),
            matrix,
        })
    }

    /// `σ⁰_p(z, w) = (z + z0, w + w0 + 2i⟨z, conj z0⟩)`.
    pub fn sigma0(p: &BoundaryPoint) -> Self {
        let m = p.n();
        let w0 = p.w0();
        let mut a = Matrix::identity(m + 2);
        for k in 0..m {
            a[(k + 1, 0)] = p.z0[k].clone();
            a[(m + 1, k + 1)] = two_i() * p.z0[k].conj();
        }
        a[(m + 1, 0)] = w0.clone();
        let mut rational: Vec<Expr> = (0..m)
            .map(|k| Expr::add(Expr::var(k), Expr::c(p.z0[k].clone())))
            .collect();
        let lin: Vec<Scalar> = (0..m).map(|k| two_i() * p.z0[k].conj()).collect();
        rational.push(Expr::add(Expr::var(m), Expr::affine(w0, &lin)));
        Automorphism {
            params: AutParams::Sigma0 { point: p.clone() },
            matrix: a,
            rational,
        }
    }

    /// `τ(z', w') = (z' − f̃0, w' − conj g0 − 2i⟨z', conj f̃0⟩)` for an image
    /// point `(f̃0, g0)` on `∂ℍ^{N+1}`.
    pub fn tau_for_image(image: &[Scalar]) -> Result<Self> {
        let (g0, f0) = image
            .split_last()
            .ok_or_else(|| Error::Dimension("empty image point".into()))?;
        BoundaryPoint::from_zw(f0.to_vec(), g0.clone(), 1e-9)?;
        let m = f0.len();
        let mut a = Matrix::identity(m + 2);
        for k in 0..m {
            a[(k + 1, 0)] = -&f0[k];
            a[(m + 1, k + 1)] = -(two_i() * f0[k].conj());
        }
        a[(m + 1, 0)] = -g0.conj();
        let mut rational: Vec<Expr> = (0..m)
            .map(|k| Expr::sub(Expr::var(k), Expr::c(f0[k].clone())))
            .collect();
        let lin: Vec<Scalar> = (0..m).map(|k| -(two_i() * f0[k].conj())).collect();
        rational.push(Expr::add(Expr::var(m), Expr::affine(-g0.conj(), &lin)));
        Ok(Automorphism {
            params: AutParams::TauF {
                image: image.to_vec(),
            },
            matrix: a,
            rational,
        })
    }

    /// `τ^F_p`, which sends `F(p)` to 0.
    pub fn tau_f(f: &MapSpec, p: &BoundaryPoint) -> Result<Self> {
        let f = f.to_siegel()?;
        let image = f.eval_scalar(&p.z0, &p.w0())?;
        Self::tau_for_image(&image)
    }

    /// `F_{λ,r,a,U}(z, w) = (λU(z + a w), λ² w) / (1 − 2i⟨z, conj a⟩ − (r + i|a|²) w)`.
    pub fn isotropy(lambda: Scalar, r: Scalar, a: Vec<Scalar>, u: Matrix) -> Result<Self> {
        let m = a.len();
        if u.rows() != m || u.cols() != m {
            return Err(Error::Dimension(format!("U must be {m}x{m}")));
        }
        if !is_real(&lambda) || lambda.re().to_c64().re <= 0.0 {
            return Err(Error::InvalidParameters(
                "lambda must be a positive real".into(),
            ));
        }
        if !is_real(&r) {
            return Err(Error::InvalidParameters("r must be real".into()));
        }
        let defect = u.adjoint().mul(&u).sub(&Matrix::identity(m));
        let unitary = if defect.is_exact() {
            defect.max_abs() == 0.0
        } else {
            defect.max_abs() <= PARAM_TOL
        };
        if !unitary {
            return Err(Error::InvalidParameters(format!(
                "U is not unitary (defect {:e})",
                defect.max_abs()
            )));
        }
        let (lambda, r) = (lambda.re(), r.re());
        let c = &r + &(Scalar::i() * norm_sqr(&a));
        let ua = u.mul_vec(&a);
        let mut mat = Matrix::zeros(m + 2, m + 2);
        mat[(0, 0)] = Scalar::one();
        for k in 0..m {
            mat[(0, k + 1)] = -(two_i() * a[k].conj());
            for l in 0..m {
                mat[(k + 1, l + 1)] = &lambda * &u[(k, l)];
            }
            mat[(k + 1, m + 1)] = &lambda * &ua[k];
        }
        mat[(0, m + 1)] = -c.clone();
        mat[(m + 1, m + 1)] = &lambda * &lambda;

        let den_lin: Vec<Scalar> = (0..m).map(|k| -(two_i() * a[k].conj())).collect();
        let den = Expr::sub(
            Expr::affine(Scalar::one(), &den_lin),
            Expr::mul(Expr::c(c), Expr::var(m)),
        );
        let mut rational: Vec<Expr> = (0..m)
            .map(|k| {
                let row: Vec<Scalar> = (0..m).map(|l| &lambda * &u[(k, l)]).collect();
                let num = Expr::add(
                    Expr::affine(Scalar::zero(), &row),
                    Expr::mul(Expr::c(&lambda * &ua[k]), Expr::var(m)),
                );
                Expr::div(num, den.clone())
            })
            .collect();
        rational.push(Expr::div(
            Expr::mul(Expr::c(&lambda * &lambda), Expr::var(m)),
            den,
        ));
        Ok(Automorphism {
            params: AutParams::Isotropy { lambda, r, a, u },
            matrix: mat,
            rational,
        })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Automorphism) -> Result<Self> {
        if self.m() != other.m() {
            return Err(Error::Dimension(format!(
                "cannot compose automorphisms of dimensions {} and {}",
                self.m(),
                other.m()
            )));
        }
        Ok(Automorphism {
            params: AutParams::Matrix,
            matrix: self.matrix.mul(&other.matrix),
            rational: self
                .rational
                .iter()
                .map(|e| e.substitute(&other.rational))
                .collect(),
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        Automorphism::from_matrix(self.matrix.inverse()?)
    }

    /// Apply to an affine point `(z, w)` by the matrix action.
    pub fn apply(&self, pt: &[Scalar]) -> Result<Vec<Scalar>> {
        mobius(&self.matrix, pt)
    }

    pub fn apply_c64(&self, pt: &[Complex64]) -> Result<Vec<Complex64>> {
        mobius_c64(&self.matrix.to_c64(), pt)
    }

    /// Apply by the rational form.
    pub fn apply_rational(&self, pt: &[Scalar]) -> Result<Vec<Scalar>> {
        self.rational.iter().map(|e| e.eval_scalar(pt)).collect()
    }

    pub fn as_map(&self) -> MapSpec {
        let m = self.m();
        MapSpec::new(Model::Siegel, m, m, self.rational.clone()).expect("automorphism shapes")
    }

    /// Largest disagreement between matrix and rational actions at the points.
    pub fn consistency_residual(&self, points: &[Vec<Scalar>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for pt in points {
            let a = self.apply(pt)?;
            let b = self.apply_rational(pt)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }
}

/// The automorphism file format used by the CLI.
#[derive(Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum AutDocument {
    #[serde(rename = "sigma0")]
    Sigma0 { z0: Vec<String>, u0: String },
    #[serde(rename = "tauF")]
    TauF {
        map: Value,
        z0: Vec<String>,
        u0: String,
    },
    #[serde(rename = "isotropy")]
    Isotropy {
        lambda: String,
        r: String,
        a: Vec<String>,
        #[serde(rename = "U")]
        u: Vec<Vec<String>>,
    },
    #[serde(rename = "matrix")]
    Matrix { rows: Vec<Vec<String>> },
}

fn scalars(v: &[String]) -> Result<Vec<Scalar>> {
    v.iter()
        .map(|s| parse_scalar(s).map_err(param_error))
        .collect()
}

fn param_error(e: Error) -> Error {
    match e {
        Error::Syntax {
            column, message, ..
        } => Error::Document(format!("parameter column {column}: {message}")),
        other => other,
    }
}

fn scalar_matrix(rows: &[Vec<String>]) -> Result<Matrix> {
    Matrix::from_rows(
        rows.iter()
            .map(|r| scalars(r))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Parse an automorphism document into an [`Automorphism`].
pub fn parse_automorphism(text: &str) -> Result<Automorphism> {
    let doc: AutDocument = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Syntax | serde_json::error::Category::Eof => Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
        _ => Error::Document(e.to_string()),
    })?;
    match doc {
        AutDocument::Sigma0 { z0, u0 } => {
            let p = BoundaryPoint::new(scalars(&z0)?, parse_scalar(&u0).map_err(param_error)?)?;
            Ok(Automorphism::sigma0(&p))
        }
        AutDocument::TauF { map, z0, u0 } => {
            let f = MapSpec::parse(&map.to_string())?;
            let p = BoundaryPoint::new(scalars(&z0)?, parse_scalar(&u0).map_err(param_error)?)?;
            Automorphism::tau_f(&f, &p)
        }
        AutDocument::Isotropy { lambda, r, a, u } => Automorphism::isotropy(
            parse_scalar(&lambda).map_err(param_error)?,
            parse_scalar(&r).map_err(param_error)?,
            scalars(&a)?,
            scalar_matrix(&u)?,
        ),
        AutDocument::Matrix { rows } => Automorphism::from_matrix(scalar_matrix(&rows)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::membership;

    fn q(a: i64, b: i64) -> Scalar {
        Scalar::ratio(a, b)
    }

    #[test]
    fn sigma0_example_matrix() {
        let p = BoundaryPoint::from_zw(vec![Scalar::one()], Scalar::i(), 0.0).unwrap();
        let s = Automorphism::sigma0(&p);
        let want = Matrix::from_rows(vec![
            vec![Scalar::int(1), Scalar::int(0), Scalar::int(0)],
            vec![Scalar::int(1), Scalar::int(1), Scalar::int(0)],
            vec![Scalar::i(), Scalar::gauss(0, 2), Scalar::int(1)],
        ])
        .unwrap();
        assert_eq!(s.matrix, want);
        assert!(membership(&s.matrix, 0.0).unwrap().is_su);
        let img = s.apply(&[q(1, 2), Scalar::gauss(3, 1)]).unwrap();
        assert_eq!(
            img,
            vec![q(3, 2), Scalar::gauss(3, 1) + Scalar::i() + Scalar::i()]
        );
    }

    #[test]
    fn isotropy_decomposition_and_membership() {
        let u = Matrix::identity(1);
        let direct = Automorphism::isotropy(
            Scalar::int(2),
            Scalar::int(1),
            vec![Scalar::int(1)],
            u.clone(),
        )
        .unwrap();
        let lam = Automorphism::isotropy(
            Scalar::int(2),
            Scalar::zero(),
            vec![Scalar::zero()],
            u.clone(),
        )
        .unwrap();
        let rot = Automorphism::isotropy(
            Scalar::one(),
            Scalar::zero(),
            vec![Scalar::zero()],
            u.clone(),
        )
        .unwrap();
        let ra =
            Automorphism::isotropy(Scalar::one(), Scalar::int(1), vec![Scalar::int(1)], u).unwrap();
        assert_eq!(lam.matrix.mul(&rot.matrix).mul(&ra.matrix), direct.matrix);
        let m = membership(&direct.matrix, 0.0).unwrap();
        assert!(m.is_glq && !m.is_su);
        assert_eq!(m.scale, Complex64::new(4.0, 0.0));
        assert!(membership(&ra.matrix, 0.0).unwrap().is_su);
    }

    #[test]
    fn isotropy_rejects_bad_parameters() {
        let u = Matrix::diagonal(&[Scalar::int(2)]);
        assert!(matches!(
            Automorphism::isotropy(Scalar::one(), Scalar::zero(), vec![Scalar::zero()], u),
            Err(Error::InvalidParameters(_))
        ));
        assert!(Automorphism::isotropy(
            Scalar::int(-1),
            Scalar::zero(),
            vec![Scalar::zero()],
            Matrix::identity(1)
        )
        .is_err());
    }

    #[test]
    fn matrix_and_rational_forms_agree() {
        let u = Matrix::from_rows(vec![
            vec![q(3, 5), Scalar::i() * q(4, 5)],
            vec![Scalar::i() * q(4, 5), q(3, 5)],
        ])
        .unwrap();
        let iso = Automorphism::isotropy(q(3, 2), q(-1, 3), vec![Scalar::gauss(1, -1), q(1, 2)], u)
            .unwrap();
        let p = BoundaryPoint::new(vec![q(1, 2), Scalar::gauss(0, 1)], q(2, 3)).unwrap();
        let s = Automorphism::sigma0(&p);
        let pts = vec![
            vec![q(1, 3), q(-1, 5), Scalar::gauss(1, 1)],
            vec![Scalar::gauss(2, -1), q(1, 7), Scalar::gauss(-3, 2)],
        ];
        for a in [&iso, &s, &iso.compose(&s).unwrap()] {
            assert_eq!(a.consistency_residual(&pts).unwrap(), 0.0);
        }
        let back = s.inverse().unwrap().compose(&s).unwrap();
        assert_eq!(back.matrix, Matrix::identity(4));
    }

    #[test]
    fn parses_files() {
        let a =
            parse_automorphism(r#"{"kind":"isotropy","lambda":"2","r":"0","a":["0"],"U":[["1"]]}"#)
                .unwrap();
        assert_eq!(a.m(), 1);
        let s = parse_automorphism(r#"{"kind":"sigma0","z0":["1/2"],"u0":"3"}"#).unwrap();
        assert_eq!(s.params.kind(), "sigma0");
        assert!(matches!(
            parse_automorphism(r#"{"kind":"bogus"}"#),
            Err(Error::Document(_))
        ));
    }
}
