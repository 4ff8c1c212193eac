//! Metric catalog: the Randers and Riemannian families with their reference
//! closed forms (c(x), flag curvature, 1 - |beta|^2, ...).
//!
//! Every family is written once over a generic [`Scalar`], so the same
//! definition serves plain evaluation and jet differentiation. All signs that
//! appear coupled in a family's defining formulas are driven by a single
//! sign parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::{dot, dot_const, norm2, Scalar};

/// Default margin keeping evaluation away from domain boundaries, where the
/// square roots in the metric definitions degenerate.
pub const DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// User-facing family tags.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Flat Euclidean metric |y| (alias of SpaceForm with mu = 0).
    Euclidean,
    /// Constant-sectional-curvature metric in projective coordinates.
    SpaceForm { mu: i32 },
    /// Generalized Funk metric on the unit ball; K = -1/4.
    Funk { a: Vec<f64>, sign: Sign },
    /// Hyperbolic-based family (mu = -1).
    B1 { lambda: f64, a: Vec<f64>, sign: Sign },
    /// Flat-based family (mu = 0).
    B2 { k: f64, a: Vec<f64>, sign: Sign },
    /// Sphere-based family (mu = +1).
    B3 { eps: f64, a: Vec<f64> },
    /// Explicit 2D metric with non-constant isotropy factor c(x).
    Example31 { eps: f64 },
    /// Complete negatively curved metric on the ball; B1 with a = 0.
    Example41 { lambda: f64 },
    /// Positively complete metric on the whole space; B2 with k = 1, a = 0.
    Example42,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::SpaceForm { .. } => "space_form",
            Family::Funk { .. } => "funk",
            Family::B1 { .. } => "b1",
            Family::B2 { .. } => "b2",
            Family::B3 { .. } => "b3",
            Family::Example31 { .. } => "example31",
            Family::Example41 { .. } => "example41",
            Family::Example42 => "example42",
        }
    }
}

/// Canonical computational form a family reduces to.
#[derive(Clone, Debug)]
enum Core {
    SpaceForm { mu: f64 },
    Funk { a: Vec<f64>, s: f64 },
    B1 { lambda: f64, a: Vec<f64>, s: f64 },
    B2 { k: f64, a: Vec<f64>, s: f64 },
    B3 { eps: f64, a: Vec<f64> },
    Example31 { eps: f64 },
}

/// A catalog metric: family tag, dimension, and the canonicalized definition.
#[derive(Clone, Debug)]
pub struct Metric {
    family: Family,
    core: Core,
    n: usize,
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

fn norm2_f(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

impl Metric {
    pub fn new(family: Family, n: usize) -> Result<Metric> {
        require(
            (2..=4).contains(&n),
            || format!("dimension n = {n} outside supported range 2..=4"),
        )?;
        let check_a = |a: &[f64]| {
            require(a.len() == n, || {
                format!("vector parameter a has {} entries, expected n = {n}", a.len())
            })
        };
        let core = match &family {
            Family::Euclidean => Core::SpaceForm { mu: 0.0 },
            Family::SpaceForm { mu } => {
                require(matches!(mu, -1 | 0 | 1), || {
                    format!("mu = {mu} outside {{-1, 0, +1}}")
                })?;
                Core::SpaceForm { mu: *mu as f64 }
            }
            Family::Funk { a, sign } => {
                check_a(a)?;
                require(norm2_f(a) < 1.0, || {
                    format!("|a| < 1 violated: |a| = {}", norm2_f(a).sqrt())
                })?;
                Core::Funk {
                    a: a.clone(),
                    s: sign.factor(),
                }
            }
            Family::B1 { lambda, a, sign } => {
                check_a(a)?;
                let s = sign.factor();
                require(norm2_f(a) < lambda * lambda + s, || {
                    format!(
                        "|a|^2 < lambda^2 {sign} 1 violated: |a|^2 = {}, lambda^2 {sign} 1 = {}",
                        norm2_f(a),
                        lambda * lambda + s
                    )
                })?;
                Core::B1 {
                    lambda: *lambda,
                    a: a.clone(),
                    s,
                }
            }
            Family::B2 { k, a, sign } => {
                check_a(a)?;
                require(*k > 0.0, || format!("k > 0 violated: k = {k}"))?;
                require(norm2_f(a) < *k, || {
                    format!("|a|^2 < k violated: |a|^2 = {}, k = {k}", norm2_f(a))
                })?;
                Core::B2 {
                    k: *k,
                    a: a.clone(),
                    s: sign.factor(),
                }
            }
            Family::B3 { eps, a } => {
                check_a(a)?;
                require(eps * eps + norm2_f(a) < 1.0, || {
                    format!(
                        "eps^2 + |a|^2 < 1 violated: eps^2 + |a|^2 = {}",
                        eps * eps + norm2_f(a)
                    )
                })?;
                Core::B3 {
                    eps: *eps,
                    a: a.clone(),
                }
            }
            Family::Example31 { eps } => {
                require(n == 2, || {
                    format!("example31 is two-dimensional, got n = {n}")
                })?;
                require(*eps > 0.0 && *eps <= 1.0, || {
                    format!("0 < eps <= 1 violated: eps = {eps}")
                })?;
                Core::Example31 { eps: *eps }
            }
            Family::Example41 { lambda } => Core::B1 {
                lambda: *lambda,
                a: vec![0.0; n],
                s: 1.0,
            },
            Family::Example42 => Core::B2 {
                k: 1.0,
                a: vec![0.0; n],
                s: 1.0,
            },
        };
        Ok(Metric { family, core, n })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Constant sectional curvature of the underlying Riemannian metric, when
    /// it is one of the standard projective forms.
    pub fn mu(&self) -> Option<f64> {
        match &self.core {
            Core::SpaceForm { mu } => Some(*mu),
            Core::Funk { .. } | Core::B1 { .. } => Some(-1.0),
            Core::B2 { .. } => Some(0.0),
            Core::B3 { .. } => Some(1.0),
            Core::Example31 { .. } => None,
        }
    }

    pub fn is_riemannian(&self) -> bool {
        match &self.core {
            Core::SpaceForm { .. } => true,
            Core::Example31 { eps } => *eps == 1.0,
            _ => false,
        }
    }

    /// Whether geodesics are straight lines in these coordinates.
    pub fn is_projectively_flat(&self) -> bool {
        !matches!(self.core, Core::Example31 { .. })
    }

    /// c(x) in the isotropy relations is constant for these families.
    pub fn has_constant_c(&self) -> bool {
        matches!(self.core, Core::SpaceForm { .. } | Core::Funk { .. })
    }

    /// Radius bounding the chart (unit ball families), if any.
    pub fn domain_radius(&self) -> Option<f64> {
        match &self.core {
            Core::SpaceForm { mu } if *mu == -1.0 => Some(1.0),
            Core::Funk { .. } | Core::B1 { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Radius used when drawing sample base points; 0.8 of the boundary for
    /// bounded charts.
    pub fn sample_radius(&self) -> f64 {
        match self.domain_radius() {
            Some(r) => 0.8 * r,
            None => 1.25,
        }
    }

    pub fn admissible(&self, x: &[f64]) -> bool {
        self.admissible_with_margin(x, DOMAIN_MARGIN)
    }

    pub fn admissible_with_margin(&self, x: &[f64], margin: f64) -> bool {
        if x.len() != self.n {
            return false;
        }
        let p = norm2_f(x);
        match &self.core {
            Core::SpaceForm { mu } => *mu != -1.0 || p < 1.0 - margin,
            Core::Funk { a, .. } => {
                p < 1.0 - margin && 1.0 + dot_f(a, x) > margin
            }
            Core::B1 { lambda, a, s } => {
                p < 1.0 - margin && sq(lambda + dot_f(a, x)) + s * (1.0 - p) > margin
            }
            Core::B2 { k, a, .. } => k + 2.0 * dot_f(a, x) + p > margin,
            Core::B3 { eps, a } => 1.0 + p - sq(eps + dot_f(a, x)) > margin,
            Core::Example31 { eps } => eps + p > margin,
        }
    }

    pub fn check_admissible(&self, x: &[f64]) -> Result<()> {
        if self.admissible(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!(
                "x = {x:?} violates the admissible domain of family {}",
                self.family.name()
            )))
        }
    }

    /// Riemannian coefficient matrix a_ij(x).
    pub fn a_matrix<S: Scalar>(&self, x: &[S]) -> SquareMatrix<S> {
        let n = self.n;
        let p = norm2(x);
        match &self.core {
            Core::SpaceForm { mu } => space_form_matrix(*mu, x, &p),
            Core::Funk { .. } | Core::B1 { .. } => space_form_matrix(-1.0, x, &p),
            Core::B2 { .. } => space_form_matrix(0.0, x, &p),
            Core::B3 { .. } => space_form_matrix(1.0, x, &p),
            Core::Example31 { eps } => {
                // a_ij = [(1 - eps^2) x_i x_j + eps q delta_ij] / q^2, q = 1 + eps p
                let q = p.clone().scale(*eps).shift(1.0);
                let q2 = q.clone() * q.clone();
                SquareMatrix::from_fn(n, |i, j| {
                    let mut t = (x[i].clone() * x[j].clone()).scale(1.0 - eps * eps);
                    if i == j {
                        t = t + q.clone().scale(*eps);
                    }
                    t / q2.clone()
                })
            }
        }
    }

    /// One-form coefficients b_i(x); all catalog one-forms are closed.
    pub fn b_form<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n;
        let p = norm2(x);
        match &self.core {
            Core::SpaceForm { .. } => (0..n).map(|i| x[i].lift(0.0)).collect(),
            Core::Funk { a, s } => {
                let one_minus = (-p).shift(1.0);
                let denom_a = dot_const(a, x).shift(1.0);
                (0..n)
                    .map(|i| {
                        (x[i].clone() / one_minus.clone()
                            + x[i].lift(a[i]) / denom_a.clone())
                        .scale(*s)
                    })
                    .collect()
            }
            Core::B1 { lambda, a, s } => {
                let one_minus = (-p.clone()).shift(1.0);
                let t = dot_const(a, x).shift(*lambda);
                let root = (t.clone() * t.clone() + one_minus.clone().scale(*s)).sqrt();
                (0..n)
                    .map(|i| {
                        (t.clone() * x[i].clone() + one_minus.clone().scale(a[i]))
                            / (one_minus.clone() * root.clone())
                    })
                    .collect()
            }
            Core::B2 { k, a, s } => {
                let root = (dot_const(a, x).scale(2.0) + p.clone().shift(*k)).sqrt();
                (0..n)
                    .map(|i| (x[i].clone().shift(a[i]) / root.clone()).scale(*s))
                    .collect()
            }
            Core::B3 { eps, a } => {
                let one_plus = p.clone().shift(1.0);
                let t = dot_const(a, x).shift(*eps);
                let root = (one_plus.clone() - t.clone() * t.clone()).sqrt();
                (0..n)
                    .map(|i| {
                        (t.clone() * x[i].clone() - one_plus.clone().scale(a[i]))
                            / (one_plus.clone() * root.clone())
                    })
                    .collect()
            }
            Core::Example31 { eps } => {
                let q = p.clone().scale(*eps).shift(1.0);
                (0..n)
                    .map(|i| x[i].clone().scale((1.0 - eps * eps).sqrt()) / q.clone())
                    .collect()
            }
        }
    }

    /// alpha(x, y) = sqrt(a_ij y^i y^j) assembled from the coefficient matrix.
    pub fn alpha<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        let a = self.a_matrix(x);
        dot(&a.mul_vec(y), y).sqrt()
    }

    /// beta(x, y) = b_i y^i.
    pub fn beta<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        dot(&self.b_form(x), y)
    }

    /// F = alpha + beta assembled from (a_ij, b_i).
    pub fn f_assembled<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        self.alpha(x, y) + self.beta(x, y)
    }

    /// F from the family's printed closed form. Agrees with
    /// [`Metric::f_assembled`] to machine precision; this is the evaluation
    /// route used by the derivative pipeline.
    pub fn f<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        let p = norm2(x);
        let yy = norm2(y);
        let xy = dot(x, y);
        match &self.core {
            Core::SpaceForm { mu } => space_form_norm(*mu, &p, &yy, &xy),
            Core::Funk { a, s } => {
                let one_minus = (-p.clone()).shift(1.0);
                let root =
                    (yy.clone() - (p.clone() * yy.clone() - xy.clone() * xy.clone())).sqrt();
                (root + xy.clone().scale(*s)) / one_minus
                    + (dot_const(a, y) / dot_const(a, x).shift(1.0)).scale(*s)
            }
            Core::B1 { lambda, a, s } => {
                let one_minus = (-p.clone()).shift(1.0);
                let t = dot_const(a, x).shift(*lambda);
                let root = (t.clone() * t.clone() + one_minus.clone().scale(*s)).sqrt();
                let alpha = space_form_norm(-1.0, &p, &yy, &xy);
                alpha
                    + (t * xy + one_minus.clone() * dot_const(a, y))
                        / (one_minus * root)
            }
            Core::B2 { k, a, s } => {
                let root = (dot_const(a, x).scale(2.0) + p.clone().shift(*k)).sqrt();
                yy.sqrt() + ((dot_const(a, y) + xy) / root).scale(*s)
            }
            Core::B3 { eps, a } => {
                let one_plus = p.clone().shift(1.0);
                let t = dot_const(a, x).shift(*eps);
                let root = (one_plus.clone() - t.clone() * t.clone()).sqrt();
                let alpha = space_form_norm(1.0, &p, &yy, &xy);
                alpha
                    + (t * xy - one_plus.clone() * dot_const(a, y))
                        / (one_plus * root)
            }
            Core::Example31 { eps } => {
                let q = p.clone().scale(*eps).shift(1.0);
                let alpha = ((xy.clone() * xy.clone()).scale(1.0 - eps * eps)
                    + (yy.clone() * q.clone()).scale(*eps))
                .sqrt()
                    / q.clone();
                let beta = xy.scale((1.0 - eps * eps).sqrt()) / q;
                alpha + beta
            }
        }
    }

    /// Plain-f64 shorthand for F.
    pub fn f_plain(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f(x, y)
    }

    /// Reference isotropy factor c(x), generic so jets can differentiate it.
    pub fn c_ref<S: Scalar>(&self, x: &[S]) -> Option<S> {
        let p = norm2(x);
        Some(match &self.core {
            Core::SpaceForm { .. } => x[0].lift(0.0),
            Core::Funk { s, .. } => x[0].lift(0.5 * s),
            Core::B1 { lambda, a, s } => {
                let t = dot_const(a, x).shift(*lambda);
                let root = (t.clone() * t.clone() + (-p).shift(1.0).scale(*s)).sqrt();
                t / root.scale(2.0)
            }
            Core::B2 { k, a, s } => {
                let denom = (dot_const(a, x).scale(2.0) + p.shift(*k))
                    .sqrt()
                    .scale(2.0 / s);
                denom.lift(1.0) / denom
            }
            Core::B3 { eps, a } => {
                let t = dot_const(a, x).shift(*eps);
                let root = (p.shift(1.0) - t.clone() * t.clone()).sqrt();
                t / root.scale(2.0)
            }
            Core::Example31 { eps } => {
                let denom = p.shift(*eps).scale(2.0 / (1.0 - eps * eps).sqrt());
                denom.lift(1.0) / denom.clone()
            }
        })
    }

    /// Reference flag curvature where the catalog has a printed formula.
    pub fn k_ref(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let p = norm2_f(x);
        let ratio = || {
            let ym: Vec<f64> = y.iter().map(|v| -v).collect();
            self.f_plain(x, &ym) / self.f_plain(x, y)
        };
        Some(match &self.core {
            Core::SpaceForm { mu } => *mu,
            Core::Funk { .. } => -0.25,
            Core::B1 { lambda, a, s } => {
                let d = sq(lambda + dot_f(a, x)) + s * (1.0 - p);
                -0.75 * s * (1.0 - p) / d * ratio() - 0.25
            }
            Core::B2 { k, a, .. } => {
                0.75 / (k + 2.0 * dot_f(a, x) + p) * ratio()
            }
            Core::B3 { eps, a } => {
                let d = 1.0 + p - sq(eps + dot_f(a, x));
                0.75 * (1.0 + p) / d * ratio() + 0.25
            }
            Core::Example31 { eps } => {
                let e = *eps;
                let xy = dot_f(x, y);
                let f = self.f_plain(x, y);
                -3.0 * (1.0 - e * e).sqrt() * xy / (sq(e + p) * f)
                    + self.sigma_ref(x).unwrap()
            }
        })
    }

    /// Reference sigma(x) for families where it is printed.
    pub fn sigma_ref(&self, x: &[f64]) -> Option<f64> {
        match &self.core {
            Core::Example31 { eps } => {
                let e = *eps;
                let w = e + norm2_f(x);
                Some(7.0 * (1.0 - e * e) / (4.0 * w * w) + 2.0 * e / w)
            }
            _ => None,
        }
    }

    /// Reference nu(x) for families where it is printed.
    pub fn nu_ref(&self, x: &[f64]) -> Option<f64> {
        match &self.core {
            Core::Example31 { eps } => Some(3.0 / (eps * (eps + norm2_f(x)))),
            _ => None,
        }
    }

    /// Printed closed form for 1 - |beta|^2_alpha where available.
    pub fn one_minus_beta_norm2_ref(&self, x: &[f64]) -> Option<f64> {
        let p = norm2_f(x);
        match &self.core {
            Core::B1 { lambda, a, s } => {
                let d = sq(lambda + dot_f(a, x)) + s * (1.0 - p);
                Some((1.0 - p) * (s - (norm2_f(a) - lambda * lambda)) / d)
            }
            Core::B2 { k, a, .. } => {
                Some((k - norm2_f(a)) / (k + 2.0 * dot_f(a, x) + p))
            }
            Core::B3 { eps, a } => {
                let d = 1.0 + p - sq(eps + dot_f(a, x));
                Some((1.0 + p) * (1.0 - eps * eps - norm2_f(a)) / d)
            }
            Core::Example31 { eps } => {
                Some(eps * (1.0 + eps * p) / (eps + p))
            }
            _ => None,
        }
    }

    /// |beta|^2_alpha assembled as a^{ij} b_i b_j over a generic scalar.
    pub fn beta_norm2<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let a = self.a_matrix(x);
        let b = self.b_form(x);
        let w = a.solve(&b)?;
        Ok(dot(&b, &w))
    }

    /// |beta|_alpha(x); errors when the Randers positivity bound fails.
    pub fn beta_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_admissible(x)?;
        let n2 = self.beta_norm2(x)?;
        if n2 >= 1.0 {
            return Err(Error::PositivityViolation(format!(
                "|beta|_alpha = {} >= 1 at x = {x:?}",
                n2.sqrt()
            )));
        }
        Ok(n2.sqrt())
    }

    /// ln sqrt(1 - |beta|^2), the scalar whose gradient enters the
    /// S-curvature formula.
    pub fn beta_log_norm<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let n2 = self.beta_norm2(x)?;
        Ok((-n2).shift(1.0).sqrt().ln())
    }

    /// Eigenfunction-style potential f = 2c / sqrt(1 + 4c^2) of the
    /// sphere-based family.
    pub fn eigenfunction<S: Scalar>(&self, x: &[S]) -> Option<S> {
        match &self.core {
            Core::B3 { eps, a } => {
                let t = dot_const(a, x).shift(*eps);
                Some(t / norm2(x).shift(1.0).sqrt())
            }
            _ => None,
        }
    }

    /// Conjectured constant value of delta = sqrt(|grad f|^2 + f^2) for the
    /// sphere-based family (equals delta at x = 0; constancy is verified by
    /// sampling).
    pub fn delta_ref(&self) -> Option<f64> {
        match &self.core {
            Core::B3 { eps, a } => Some((eps * eps + norm2_f(a)).sqrt()),
            _ => None,
        }
    }

    /// Length potential h(x) = arctan(2 c(x)) of the sphere-based family:
    /// F = alpha - dh along curves.
    pub fn length_potential(&self, x: &[f64]) -> Option<f64> {
        match &self.core {
            Core::B3 { .. } => {
                let c: f64 = self.c_ref(x).unwrap();
                Some((2.0 * c).atan())
            }
            _ => None,
        }
    }
}

fn dot_f(a: &[f64], x: &[impl Scalar]) -> f64 {
    a.iter().zip(x).map(|(ai, xi)| ai * xi.value()).sum()
}

/// a_ij of the standard constant-curvature metrics in projective coordinates.
fn space_form_matrix<S: Scalar>(mu: f64, x: &[S], p: &S) -> SquareMatrix<S> {
    let n = x.len();
    match mu as i32 {
        -1 => {
            let d = (-p.clone()).shift(1.0);
            let d2 = d.clone() * d.clone();
            SquareMatrix::from_fn(n, |i, j| {
                let mut t = x[i].clone() * x[j].clone() / d2.clone();
                if i == j {
                    t = t + x[0].lift(1.0) / d.clone();
                }
                t
            })
        }
        0 => SquareMatrix::from_fn(n, |i, j| x[0].lift(if i == j { 1.0 } else { 0.0 })),
        1 => {
            let d = p.clone().shift(1.0);
            let d2 = d.clone() * d.clone();
            SquareMatrix::from_fn(n, |i, j| {
                let mut t = -(x[i].clone() * x[j].clone()) / d2.clone();
                if i == j {
                    t = t + x[0].lift(1.0) / d.clone();
                }
                t
            })
        }
        _ => unreachable!("mu restricted to -1, 0, +1"),
    }
}

/// alpha_mu(x, y) from the printed projective closed forms.
fn space_form_norm<S: Scalar>(mu: f64, p: &S, yy: &S, xy: &S) -> S {
    match mu as i32 {
        -1 => {
            let disc = yy.clone() - (p.clone() * yy.clone() - xy.clone() * xy.clone());
            disc.sqrt() / (-p.clone()).shift(1.0)
        }
        0 => yy.clone().sqrt(),
        1 => {
            let disc = yy.clone() + (p.clone() * yy.clone() - xy.clone() * xy.clone());
            disc.sqrt() / p.clone().shift(1.0)
        }
        _ => unreachable!("mu restricted to -1, 0, +1"),
    }
}

/// Serialized metric specification: family tag, dimension, parameters, sign.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricSpec {
    pub family: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
}

impl MetricSpec {
    pub fn to_metric(&self) -> Result<Metric> {
        let bad = |msg: &str| Error::Malformed(format!("metric spec: {msg}"));
        let scalar = |key: &str| -> Result<f64> {
            self.params
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| bad(&format!("missing or non-numeric param \"{key}\"")))
        };
        let vector = |key: &str| -> Result<Vec<f64>> {
            match self.params.get(key) {
                None => Ok(vec![0.0; self.n]),
                Some(serde_json::Value::Array(items)) => items
                    .iter()
                    .map(|v| {
                        v.as_f64()
                            .ok_or_else(|| bad(&format!("non-numeric entry in \"{key}\"")))
                    })
                    .collect(),
                Some(_) => Err(bad(&format!("param \"{key}\" must be an array"))),
            }
        };
        let sign = self.sign.unwrap_or(Sign::Plus);
        let family = match self.family.as_str() {
            "euclidean" => Family::Euclidean,
            "space_form" => Family::SpaceForm {
                mu: scalar("mu")? as i32,
            },
            "funk" => Family::Funk {
                a: vector("a")?,
                sign,
            },
            "b1" => Family::B1 {
                lambda: scalar("lambda")?,
                a: vector("a")?,
                sign,
            },
            "b2" => Family::B2 {
                k: scalar("k")?,
                a: vector("a")?,
                sign,
            },
            "b3" => Family::B3 {
                eps: scalar("eps")?,
                a: vector("a")?,
            },
            "example31" => Family::Example31 { eps: scalar("eps")? },
            "example41" => Family::Example41 {
                lambda: scalar("lambda")?,
            },
            "example42" => Family::Example42,
            other => return Err(bad(&format!("unknown family \"{other}\""))),
        };
        Metric::new(family, self.n)
    }

    /// Canonical spec for a metric: every parameter present, keys sorted.
    pub fn from_metric(metric: &Metric) -> MetricSpec {
        let mut params = serde_json::Map::new();
        let mut sign = None;
        let put = |params: &mut serde_json::Map<String, serde_json::Value>,
                   key: &str,
                   value: serde_json::Value| {
            params.insert(key.to_string(), value);
        };
        let vecjson = |a: &[f64]| serde_json::json!(a);
        match metric.family() {
            Family::Euclidean | Family::Example42 => {}
            Family::SpaceForm { mu } => put(&mut params, "mu", serde_json::json!(mu)),
            Family::Funk { a, sign: s } => {
                put(&mut params, "a", vecjson(a));
                sign = Some(*s);
            }
            Family::B1 { lambda, a, sign: s } => {
                put(&mut params, "lambda", serde_json::json!(lambda));
                put(&mut params, "a", vecjson(a));
                sign = Some(*s);
            }
            Family::B2 { k, a, sign: s } => {
                put(&mut params, "k", serde_json::json!(k));
                put(&mut params, "a", vecjson(a));
                sign = Some(*s);
            }
            Family::B3 { eps, a } => {
                put(&mut params, "eps", serde_json::json!(eps));
                put(&mut params, "a", vecjson(a));
            }
            Family::Example31 { eps } => put(&mut params, "eps", serde_json::json!(eps)),
            Family::Example41 { lambda } => {
                put(&mut params, "lambda", serde_json::json!(lambda))
            }
        }
        MetricSpec {
            family: metric.family().name().to_string(),
            n: metric.n(),
            params,
            sign,
        }
    }
}

/// All families with representative parameters, used by sampling-heavy tests
/// and the catalog listing.
pub fn representative_metrics(n: usize) -> Vec<Metric> {
    let a3 = |v: Vec<f64>| {
        let mut a = v;
        a.resize(n, 0.0);
        a
    };
    let mut out = vec![
        Metric::new(Family::SpaceForm { mu: -1 }, n).unwrap(),
        Metric::new(Family::SpaceForm { mu: 0 }, n).unwrap(),
        Metric::new(Family::SpaceForm { mu: 1 }, n).unwrap(),
        Metric::new(
            Family::Funk {
                a: a3(vec![0.0]),
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::Funk {
                a: a3(vec![0.3]),
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::B1 {
                lambda: 1.0,
                a: a3(vec![0.5]),
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::B2 {
                k: 1.0,
                a: a3(vec![0.0]),
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::B2 {
                k: 2.0,
                a: a3(vec![0.5]),
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::B3 {
                eps: 0.3,
                a: a3(vec![0.0]),
            },
            n,
        )
        .unwrap(),
        Metric::new(
            Family::B3 {
                eps: 0.2,
                a: a3(vec![0.3]),
            },
            n,
        )
        .unwrap(),
        Metric::new(Family::Example41 { lambda: 1.0 }, n).unwrap(),
        Metric::new(Family::Example42, n).unwrap(),
    ];
    if n == 2 {
        out.push(Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap());
        out.push(Metric::new(Family::Example31 { eps: 1.0 }, 2).unwrap());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0 + a.abs().max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    fn funk(n: usize) -> Metric {
        Metric::new(
            Family::Funk {
                a: vec![0.0; n],
                sign: Sign::Plus,
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn space_form_values() {
        let flat = Metric::new(Family::SpaceForm { mu: 0 }, 2).unwrap();
        close(flat.f_plain(&[0.7, -0.4], &[3.0, 4.0]), 5.0, 1e-15);

        let hyp = Metric::new(Family::SpaceForm { mu: -1 }, 2).unwrap();
        close(hyp.f_plain(&[0.0, 0.0], &[1.0, 0.0]), 1.0, 1e-15);

        let sph = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        close(
            sph.f_plain(&[1.0, 0.0], &[0.0, 1.0]),
            (2.0f64).sqrt() / 2.0,
            1e-15,
        );
    }

    #[test]
    fn funk_at_origin() {
        let m = funk(2);
        close(m.f_plain(&[0.0, 0.0], &[1.0, 0.0]), 1.0, 1e-15);
        close(m.c_ref(&[0.3, 0.1]).unwrap(), 0.5, 1e-15);
        close(m.k_ref(&[0.3, 0.1], &[1.0, 2.0]).unwrap(), -0.25, 1e-15);
    }

    #[test]
    fn b2_reference_values() {
        let m = Metric::new(
            Family::B2 {
                k: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        close(m.c_ref(&[0.0, 0.0]).unwrap(), 0.5, 1e-15);
        close(m.k_ref(&[0.0, 0.0], &[0.3, 1.1]).unwrap(), 0.75, 1e-15);
        // x = e1, y = e2 orthogonal: the reversibility ratio is 1.
        close(m.k_ref(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 3.0 / 8.0, 1e-15);
    }

    #[test]
    fn example31_spot_values_at_origin() {
        let m = Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap();
        let x = [0.0, 0.0];
        close(m.c_ref(&x).unwrap(), 3.0f64.sqrt() / 2.0, 1e-15);
        close(m.sigma_ref(&x).unwrap(), 7.25, 1e-15);
        close(m.nu_ref(&x).unwrap(), 12.0, 1e-15);
        close(m.one_minus_beta_norm2_ref(&x).unwrap(), 1.0, 1e-15);
        close(m.k_ref(&x, &[1.0, 0.0]).unwrap(), 7.25, 1e-15);

        let m1 = Metric::new(Family::Example31 { eps: 1.0 }, 2).unwrap();
        close(m1.sigma_ref(&x).unwrap(), 2.0, 1e-15);
        close(m1.nu_ref(&x).unwrap(), 3.0, 1e-15);
        close(m1.k_ref(&x, &[0.0, 1.0]).unwrap(), 2.0, 1e-15);
    }

    #[test]
    fn example31_beta_norm_closed_form() {
        let m = Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap();
        let x = [1.0, 0.0];
        close(m.one_minus_beta_norm2_ref(&x).unwrap(), 0.5, 1e-15);
        let assembled = m.beta_norm(&x).unwrap();
        close(assembled * assembled, 0.5, 1e-12);
    }

    #[test]
    fn beta_norm_vanishes_at_center() {
        for m in [
            funk(2),
            Metric::new(
                Family::B1 {
                    lambda: 1.0,
                    a: vec![0.0, 0.0],
                    sign: Sign::Plus,
                },
                2,
            )
            .unwrap(),
        ] {
            close(m.beta_norm(&[0.0, 0.0]).unwrap(), 0.0, 1e-15);
        }
    }

    #[test]
    fn parameter_validation_names_inequality() {
        let err = Metric::new(
            Family::B1 {
                lambda: 1.0,
                a: vec![2.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap_err();
        assert!(err.to_string().contains("lambda^2"), "{err}");

        assert!(Metric::new(
            Family::B2 {
                k: -1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus
            },
            2
        )
        .is_err());
        assert!(Metric::new(
            Family::B3 {
                eps: 0.9,
                a: vec![0.7, 0.0]
            },
            2
        )
        .is_err());
        assert!(Metric::new(Family::Example31 { eps: 1.5 }, 2).is_err());
        assert!(Metric::new(
            Family::Funk {
                a: vec![1.2, 0.0],
                sign: Sign::Plus
            },
            2
        )
        .is_err());
    }

    #[test]
    fn out_of_domain_detected() {
        let m = funk(2);
        assert!(!m.admissible(&[1.0, 0.2]));
        assert!(m.check_admissible(&[1.0, 0.2]).is_err());
        assert!(m.admissible(&[0.5, 0.2]));
    }

    #[test]
    fn b1_minus_sign_domain() {
        let m = Metric::new(
            Family::B1 {
                lambda: 2.0,
                a: vec![0.0, 0.0],
                sign: Sign::Minus,
            },
            2,
        )
        .unwrap();
        // (lambda)^2 - (1 - |x|^2) = 3 + |x|^2 > 0 on the whole ball.
        assert!(m.admissible(&[0.0, 0.0]));
        assert!(m.admissible(&[0.9, 0.0]));
        // Constraint requires |a|^2 < lambda^2 - 1.
        assert!(Metric::new(
            Family::B1 {
                lambda: 1.0,
                a: vec![0.5, 0.0],
                sign: Sign::Minus
            },
            2
        )
        .is_err());
    }

    #[test]
    fn closed_and_assembled_forms_agree() {
        for m in representative_metrics(2) {
            let x = [0.21, -0.13];
            let y = [0.8, 1.7];
            let closed = m.f_plain(&x, &y);
            let assembled: f64 = m.f_assembled(&x, &y);
            close(closed, assembled, 1e-12);
            assert!(closed > 0.0);
        }
    }

    #[test]
    fn example41_is_b1_special_case() {
        let e41 = Metric::new(Family::Example41 { lambda: 1.3 }, 2).unwrap();
        let b1 = Metric::new(
            Family::B1 {
                lambda: 1.3,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let (x, y) = ([0.4, 0.1], [1.0, -0.5]);
        close(e41.f_plain(&x, &y), b1.f_plain(&x, &y), 1e-15);
    }

    #[test]
    fn example42_is_b2_special_case() {
        let e42 = Metric::new(Family::Example42, 3).unwrap();
        let (x, y) = ([0.4, 0.1, -0.2], [1.0, -0.5, 0.3]);
        // F_0 = (|y| sqrt(1+|x|^2) + <x,y>) / sqrt(1+|x|^2)
        let p = 1.0 + norm2_f(&x);
        let expect = ((norm2_f(&y)).sqrt() * p.sqrt() + dot_f(&x, &y)) / p.sqrt();
        close(e42.f_plain(&x, &y), expect, 1e-14);
    }

    #[test]
    fn spec_round_trip() {
        let spec: MetricSpec = serde_json::from_str(
            r#"{"family": "b1", "n": 2, "params": {"lambda": 1.0, "a": [0.5, 0.0]}, "sign": "+"}"#,
        )
        .unwrap();
        let metric = spec.to_metric().unwrap();
        let normalized = MetricSpec::from_metric(&metric);
        assert_eq!(normalized.family, "b1");
        let metric2 = normalized.to_metric().unwrap();
        let (x, y) = ([0.1, 0.2], [1.0, 0.3]);
        close(metric.f_plain(&x, &y), metric2.f_plain(&x, &y), 1e-15);
    }

    #[test]
    fn spec_rejects_unknown_family() {
        let spec: MetricSpec =
            serde_json::from_str(r#"{"family": "nope", "n": 2}"#).unwrap();
        assert!(spec.to_metric().is_err());
    }
}
