//! Covariant calculus of the Randers data with respect to alpha: Christoffel
//! symbols, b_{i|j}, b_{i|j|k}, the derived tensors r, s, e, the gradient of
//! ln sqrt(1 - |beta|^2), and the residuals of the structure equations tying
//! them to c(x).

use crate::catalog::Metric;
use crate::error::{Error, Result};
use crate::geometry::{curvature_report, PointState};
use crate::jet::{seed_vars, Jet};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

/// States with |mu + 4 c^2| below this belong to the constant-curvature
/// branch where the c-equation degenerates.
pub const CONSTANT_CURVATURE_GUARD: f64 = 1e-8;

/// Christoffel symbols and alpha-covariant derivatives of the one-form at a
/// base point.
#[derive(Clone, Debug)]
pub struct CovariantData {
    /// gamma[k][i][j]
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// b_{i|j}
    pub b_cov1: Vec<Vec<f64>>,
    /// b_{i|j|k}
    pub b_cov2: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub s_anti: Vec<Vec<f64>>,
    /// s_j = b_i s^i_j
    pub s_lower: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    /// gradient of ln sqrt(1 - |beta|^2)
    pub rho: Vec<f64>,
    pub b: Vec<f64>,
    pub a: SquareMatrix<f64>,
    pub a_inv: SquareMatrix<f64>,
}

/// Phi = b_{i|j} y^i y^j and Psi = b_{i|j|k} y^i y^j y^k.
#[derive(Clone, Copy, Debug)]
pub struct PhiPsi {
    pub phi: f64,
    pub psi: f64,
}

/// Christoffel symbols of alpha from order-1 jets of a_ij;
/// gamma[k][i][j] = Gamma^k_ij.
pub fn christoffel(metric: &Metric, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    metric.check_admissible(x)?;
    let n = metric.n();
    let xj = seed_vars(x, 1)?;
    let am = metric.a_matrix(&xj);
    let ainv = am.inverse()?.values();
    let da = |i: usize, j: usize, k: usize| am.at(i, j).diff(k).value();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ainv.at(k, l) * (da(l, j, i) + da(l, i, j) - da(i, j, l));
                }
                gamma[k][i][j] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}

/// Christoffel symbols as order-1 jets (needed for second covariant
/// derivatives), from order-2 jets of a_ij.
fn christoffel_jets(metric: &Metric, xj: &[Jet]) -> Result<Vec<Vec<Vec<Jet>>>> {
    let n = metric.n();
    let am = metric.a_matrix(xj);
    let ainv = am.inverse()?;
    let mut gamma = Vec::with_capacity(n);
    for k in 0..n {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let mut acc = ainv.at(k, 0).clone()
                    * (am.at(0, j).diff(i) + am.at(0, i).diff(j) - am.at(i, j).diff(0));
                for l in 1..n {
                    acc = acc
                        + ainv.at(k, l).clone()
                            * (am.at(l, j).diff(i) + am.at(l, i).diff(j) - am.at(i, j).diff(l));
                }
                row.push(acc.scale(0.5));
            }
            rows.push(row);
        }
        gamma.push(rows);
    }
    Ok(gamma)
}

/// All alpha-covariant data of the one-form at `x`.
pub fn covariant_data(metric: &Metric, x: &[f64]) -> Result<CovariantData> {
    metric.check_admissible(x)?;
    let n = metric.n();
    let xj = seed_vars(x, 2)?;
    let gamma_jets = christoffel_jets(metric, &xj)?;
    let b_jets = metric.b_form(&xj);

    // b_{i|j} as order-1 jets.
    let b1: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = b_jets[i].diff(j);
                    for k in 0..n {
                        acc = acc - b_jets[k].clone() * gamma_jets[k][i][j].clone();
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let gamma: Vec<Vec<Vec<f64>>> = gamma_jets
        .iter()
        .map(|k| {
            k.iter()
                .map(|i| i.iter().map(|j| j.value()).collect())
                .collect()
        })
        .collect();
    let b_cov1: Vec<Vec<f64>> = b1
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();

    // Second covariant derivative of the one-form:
    // b_{i|j|k} = d_k b_{i|j} - b_{l|j} Gamma^l_ik - b_{i|l} Gamma^l_jk.
    let mut b_cov2 = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = b1[i][j].diff(k).value();
                for l in 0..n {
                    acc -= b_cov1[l][j] * gamma[l][i][k];
                    acc -= b_cov1[i][l] * gamma[l][j][k];
                }
                b_cov2[i][j][k] = acc;
            }
        }
    }

    let am = metric.a_matrix(x);
    let a_inv = am.inverse()?;
    let b: Vec<f64> = metric.b_form(x);

    let mut r = vec![vec![0.0; n]; n];
    let mut s_anti = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            r[i][j] = 0.5 * (b_cov1[i][j] + b_cov1[j][i]);
            s_anti[i][j] = 0.5 * (b_cov1[i][j] - b_cov1[j][i]);
        }
    }
    // s_j = b_i s^i_j with s^i_j = a^{ih} s_hj.
    let mut s_lower = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            for h in 0..n {
                s_lower[j] += b[i] * a_inv.at(i, h) * s_anti[h][j];
            }
        }
    }
    let mut e = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            e[i][j] = r[i][j] + b[i] * s_lower[j] + b[j] * s_lower[i];
        }
    }

    let rho_jet = metric.beta_log_norm(&xj)?;
    let rho: Vec<f64> = (0..n).map(|i| rho_jet.diff(i).value()).collect();

    Ok(CovariantData {
        gamma,
        b_cov1,
        b_cov2,
        r,
        s_anti,
        s_lower,
        e,
        rho,
        b,
        a: am,
        a_inv,
    })
}

impl CovariantData {
    pub fn phi_psi(&self, y: &[f64]) -> PhiPsi {
        let n = y.len();
        let mut phi = 0.0;
        let mut psi = 0.0;
        for i in 0..n {
            for j in 0..n {
                phi += self.b_cov1[i][j] * y[i] * y[j];
                for k in 0..n {
                    psi += self.b_cov2[i][j][k] * y[i] * y[j] * y[k];
                }
            }
        }
        PhiPsi { phi, psi }
    }

    pub fn e00(&self, y: &[f64]) -> f64 {
        let n = y.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.e[i][j] * y[i] * y[j];
            }
        }
        acc
    }

    pub fn s0(&self, y: &[f64]) -> f64 {
        self.s_lower.iter().zip(y).map(|(s, yi)| s * yi).sum()
    }

    pub fn rho0(&self, y: &[f64]) -> f64 {
        self.rho.iter().zip(y).map(|(r, yi)| r * yi).sum()
    }
}

/// Value, gradient and covariant Hessian of a scalar function of x.
fn covariant_hessian(
    metric: &Metric,
    x: &[f64],
    field: impl Fn(&[Jet]) -> Jet,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let n = metric.n();
    let xj = seed_vars(x, 2)?;
    let fj = field(&xj);
    let gamma = christoffel(metric, x)?;
    let value = fj.value();
    let grad: Vec<f64> = (0..n).map(|i| fj.diff(i).value()).collect();
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = fj.diff(i).diff(j).value();
            for k in 0..n {
                acc -= grad[k] * gamma[k][i][j];
            }
            hess[i][j] = acc;
        }
    }
    Ok((value, grad, hess))
}

/// Gradient of the reference c(x) by jets.
pub fn c_gradient(metric: &Metric, x: &[f64]) -> Result<Vec<f64>> {
    let n = metric.n();
    let xj = seed_vars(x, 1)?;
    let cj = metric
        .c_ref(&xj)
        .ok_or_else(|| Error::NotApplicable("no reference c(x) for this family".into()))?;
    Ok((0..n).map(|i| cj.diff(i).value()).collect())
}

/// Max relative deviation of e_ij from 2 c(x) (a_ij - b_i b_j).
pub fn isotropy_equation_residual(metric: &Metric, x: &[f64]) -> Result<f64> {
    let cov = covariant_data(metric, x)?;
    let c: f64 = metric
        .c_ref(x)
        .ok_or_else(|| Error::NotApplicable("no reference c(x) for this family".into()))?;
    let n = metric.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let rhs = 2.0 * c * (cov.a.at(i, j) - cov.b[i] * cov.b[j]);
            worst = worst.max((cov.e[i][j] - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    Ok(worst)
}

/// Residual of K F^2 = mu alpha^2 + 3 (Phi / 2F)^2 - Psi / 2F, using the
/// pipeline flag curvature on the left.
pub fn ric1_residual(metric: &Metric, at: &PointState) -> Result<f64> {
    let mu = metric
        .mu()
        .ok_or_else(|| Error::NotApplicable("alpha has no declared mu".into()))?;
    let report = curvature_report(metric, at)?;
    let cov = covariant_data(metric, &at.x)?;
    let PhiPsi { phi, psi } = cov.phi_psi(&at.y);
    let f = report.f;
    let alpha: f64 = metric.alpha(&at.x, &at.y);
    let lhs = report.k_scalar * f * f;
    let rhs = mu * alpha * alpha + 3.0 * (phi / (2.0 * f)).powi(2) - psi / (2.0 * f);
    Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
}

/// Residual of c_{i|j} = -c (mu + 4c^2) a_ij + 12 c c_i c_j / (mu + 4c^2).
pub fn c_equation_residual(metric: &Metric, x: &[f64]) -> Result<f64> {
    let mu = metric
        .mu()
        .ok_or_else(|| Error::NotApplicable("alpha has no declared mu".into()))?;
    let c: f64 = metric
        .c_ref(x)
        .ok_or_else(|| Error::NotApplicable("no reference c(x) for this family".into()))?;
    let denom = mu + 4.0 * c * c;
    if denom.abs() < CONSTANT_CURVATURE_GUARD {
        return Err(Error::SingularCase(format!(
            "mu + 4c^2 = {denom:.3e}; constant-curvature branch"
        )));
    }
    let (cv, grad, hess) =
        covariant_hessian(metric, x, |xj| metric.c_ref(xj).expect("c_ref checked"))?;
    let n = metric.n();
    let am = metric.a_matrix(x);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let rhs = -cv * denom * am.at(i, j) + 12.0 * cv * grad[i] * grad[j] / denom;
            worst = worst.max((hess[i][j] - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    Ok(worst)
}

/// Residual of b_i = -2 c_i / (mu + 4 c^2).
pub fn b_from_c_residual(metric: &Metric, x: &[f64]) -> Result<f64> {
    let mu = metric
        .mu()
        .ok_or_else(|| Error::NotApplicable("alpha has no declared mu".into()))?;
    let c: f64 = metric
        .c_ref(x)
        .ok_or_else(|| Error::NotApplicable("no reference c(x) for this family".into()))?;
    let denom = mu + 4.0 * c * c;
    if denom.abs() < CONSTANT_CURVATURE_GUARD {
        return Err(Error::SingularCase(format!(
            "mu + 4c^2 = {denom:.3e}; constant-curvature branch"
        )));
    }
    let grad = c_gradient(metric, x)?;
    let b: Vec<f64> = metric.b_form(x);
    let mut worst: f64 = 0.0;
    for i in 0..metric.n() {
        let rhs = -2.0 * grad[i] / denom;
        worst = worst.max((b[i] - rhs).abs() / (1.0 + rhs.abs()));
    }
    Ok(worst)
}

/// Residual of F = alpha - 2 c_{x^k} y^k / (mu + 4 c^2) at a state.
pub fn f_from_c_residual(metric: &Metric, at: &PointState) -> Result<f64> {
    let mu = metric
        .mu()
        .ok_or_else(|| Error::NotApplicable("alpha has no declared mu".into()))?;
    let c: f64 = metric
        .c_ref(&at.x)
        .ok_or_else(|| Error::NotApplicable("no reference c(x) for this family".into()))?;
    let denom = mu + 4.0 * c * c;
    if denom.abs() < CONSTANT_CURVATURE_GUARD {
        return Err(Error::SingularCase(format!(
            "mu + 4c^2 = {denom:.3e}; constant-curvature branch"
        )));
    }
    let grad = c_gradient(metric, &at.x)?;
    let dcy: f64 = grad.iter().zip(&at.y).map(|(g, y)| g * y).sum();
    let alpha: f64 = metric.alpha(&at.x, &at.y);
    let f = metric.f_plain(&at.x, &at.y);
    let rhs = alpha - 2.0 * dcy / denom;
    Ok((f - rhs).abs() / (1.0 + f.abs()))
}

/// Residual of f_{|i|j} = -f a_ij for the eigenfunction-style potential of
/// the sphere-based family.
pub fn eigenfunction_hessian_residual(metric: &Metric, x: &[f64]) -> Result<f64> {
    if metric.eigenfunction(x).is_none() {
        return Err(Error::NotApplicable(
            "eigenfunction potential only defined for the sphere-based family".into(),
        ));
    }
    let (fv, _, hess) = covariant_hessian(metric, x, |xj| {
        metric.eigenfunction(xj).expect("checked above")
    })?;
    let am = metric.a_matrix(x);
    let n = metric.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let rhs = -fv * am.at(i, j);
            worst = worst.max((hess[i][j] - rhs).abs() / (1.0 + rhs.abs()));
        }
    }
    Ok(worst)
}

/// delta(x) = sqrt(|grad f|^2_alpha + f^2) for the sphere-based family.
pub fn delta(metric: &Metric, x: &[f64]) -> Result<f64> {
    let n = metric.n();
    let xj = seed_vars(x, 1)?;
    let fj = metric.eigenfunction(&xj).ok_or_else(|| {
        Error::NotApplicable("delta only defined for the sphere-based family".into())
    })?;
    let grad: Vec<f64> = (0..n).map(|i| fj.diff(i).value()).collect();
    let am = metric.a_matrix(x);
    let ainv = am.inverse()?;
    let mut g2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            g2 += ainv.at(i, j) * grad[i] * grad[j];
        }
    }
    Ok((g2 + fj.value() * fj.value()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, Sign};

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0 + a.abs().max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    #[test]
    fn christoffel_closed_forms_for_space_forms() {
        let flat = Metric::new(Family::Euclidean, 2).unwrap();
        let g = christoffel(&flat, &[0.3, -0.8]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    close(g[k][i][j], 0.0, 1e-14);
                }
            }
        }

        // mu = -1: Gamma^k_ij = (x^i d^k_j + x^j d^k_i) / (1 - |x|^2)
        let hyp = Metric::new(Family::SpaceForm { mu: -1 }, 2).unwrap();
        let x = [0.5, 0.0];
        let g = christoffel(&hyp, &x).unwrap();
        close(g[0][0][0], 2.0 * 0.5 / 0.75, 1e-12);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let expect = (if k == j { x[i] } else { 0.0 } + if k == i { x[j] } else { 0.0 })
                        / 0.75;
                    close(g[k][i][j], expect, 1e-12);
                }
            }
        }

        // mu = +1: Gamma^k_ij = -(x^i d^k_j + x^j d^k_i) / (1 + |x|^2)
        let sph = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        let g = christoffel(&sph, &x).unwrap();
        close(g[0][0][0], -2.0 * 0.5 / 1.25, 1e-12);
    }

    #[test]
    fn christoffel_is_symmetric() {
        let m = Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap();
        let g = christoffel(&m, &[0.4, -0.7]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    close(g[k][i][j], g[k][j][i], 1e-13);
                }
            }
        }
    }

    #[test]
    fn b2_covariant_derivative_at_origin() {
        let m = Metric::new(
            Family::B2 {
                k: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let cov = covariant_data(&m, &[0.0, 0.0]).unwrap();
        // b_{i|j}(0) = delta_ij and matches 2c(a_ij - b_i b_j) with c = 1/2.
        for i in 0..2 {
            for j in 0..2 {
                close(cov.b_cov1[i][j], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
    }

    #[test]
    fn riemannian_covariant_data_vanishes() {
        let m = Metric::new(Family::SpaceForm { mu: -1 }, 2).unwrap();
        let cov = covariant_data(&m, &[0.2, 0.3]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                close(cov.b_cov1[i][j], 0.0, 1e-14);
                close(cov.e[i][j], 0.0, 1e-14);
            }
            close(cov.rho[i], 0.0, 1e-14);
        }
    }

    #[test]
    fn one_forms_are_closed() {
        for m in crate::catalog::representative_metrics(2) {
            let x = [0.31, -0.22];
            if !m.admissible(&x) {
                continue;
            }
            let cov = covariant_data(&m, &x).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        cov.s_anti[i][j].abs() < 1e-10,
                        "s_ij = {} for {:?}",
                        cov.s_anti[i][j],
                        m.family()
                    );
                }
                assert!(cov.s_lower[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn isotropy_equation_holds_for_catalog() {
        for m in crate::catalog::representative_metrics(2) {
            for x in [[0.25, 0.1], [-0.3, 0.42], [0.0, 0.0]] {
                let res = isotropy_equation_residual(&m, &x).unwrap();
                assert!(res < 1e-8, "family {:?}: residual {res}", m.family());
            }
        }
    }

    #[test]
    fn c_equation_residuals() {
        let configs: Vec<Metric> = vec![
            Metric::new(
                Family::B1 {
                    lambda: 1.0,
                    a: vec![0.0, 0.0],
                    sign: Sign::Plus,
                },
                2,
            )
            .unwrap(),
            Metric::new(
                Family::B2 {
                    k: 1.0,
                    a: vec![0.0, 0.0],
                    sign: Sign::Plus,
                },
                2,
            )
            .unwrap(),
            Metric::new(
                Family::B3 {
                    eps: 0.3,
                    a: vec![0.0, 0.0],
                },
                2,
            )
            .unwrap(),
        ];
        for m in &configs {
            for x in [[0.2, 0.15], [-0.4, 0.3]] {
                let res = c_equation_residual(m, &x).unwrap();
                assert!(res < 1e-8, "family {:?}: residual {res}", m.family());
                let res = b_from_c_residual(m, &x).unwrap();
                assert!(res < 1e-10, "family {:?}: b residual {res}", m.family());
            }
        }
    }

    #[test]
    fn funk_c_equation_is_singular() {
        let m = Metric::new(
            Family::Funk {
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        assert!(matches!(
            c_equation_residual(&m, &[0.1, 0.2]),
            Err(Error::SingularCase(_))
        ));
    }

    #[test]
    fn riemannian_c_equation_trivial() {
        // c = 0 for space forms: both sides vanish when mu != 0 allows division.
        let m = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        let res = c_equation_residual(&m, &[0.3, 0.1]).unwrap();
        close(res, 0.0, 1e-14);
    }

    #[test]
    fn eigenfunction_identity_for_sphere_family() {
        let m = Metric::new(
            Family::B3 {
                eps: 0.3,
                a: vec![0.0, 0.0],
            },
            2,
        )
        .unwrap();
        for x in [[0.0, 0.0], [0.5, -0.2], [1.0, 0.8]] {
            let res = eigenfunction_hessian_residual(&m, &x).unwrap();
            assert!(res < 1e-10, "residual {res}");
        }
        // delta is constant and equals sqrt(eps^2 + |a|^2).
        let d0 = delta(&m, &[0.0, 0.0]).unwrap();
        close(d0, 0.3, 1e-12);
        for x in [[0.7, -0.3], [1.2, 0.5]] {
            close(delta(&m, &x).unwrap(), d0, 1e-10);
        }
    }

    #[test]
    fn ric1_for_space_form_reduces_to_k_equals_mu() {
        let m = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        let at = PointState::new(vec![0.3, 0.1], vec![0.7, -0.4]);
        let res = ric1_residual(&m, &at).unwrap();
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn ric1_for_b_families() {
        let m = Metric::new(
            Family::B2 {
                k: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        for (x, y) in [
            ([0.2, 0.1], [1.0, 0.3]),
            ([-0.5, 0.4], [0.2, -1.1]),
        ] {
            let at = PointState::new(x.to_vec(), y.to_vec());
            let res = ric1_residual(&m, &at).unwrap();
            assert!(res < 1e-8, "residual {res}");
        }
    }
}
