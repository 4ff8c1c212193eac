//! Metric tensor, spray coefficients, Riemann curvature and flag curvature,
//! derived from one order-4 jet of F^2 per state.

use crate::catalog::Metric;
use crate::error::{Error, Result};
use crate::jet::{seed, Jet};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

/// Condition-number guard for the fundamental tensor.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Tolerance below which a state counts as "of scalar curvature".
pub const SCALAR_CURVATURE_TOL: f64 = 1e-6;

/// A base point with a nonzero tangent direction.
#[derive(Clone, Debug, PartialEq)]
pub struct PointState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PointState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> PointState {
        PointState { x, y }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Jet-level data shared by every curvature quantity at one state:
/// F and F^2 at order 4, the fundamental tensor and its inverse at order 2,
/// and the spray coefficients at order 2.
pub(crate) struct StateJets {
    pub n: usize,
    pub y: Vec<f64>,
    pub f: Jet,
    pub f2: Jet,
    pub g: SquareMatrix<Jet>,
    pub g_inv: SquareMatrix<Jet>,
    pub spray: Vec<Jet>,
}

impl StateJets {
    pub fn new(metric: &Metric, at: &PointState) -> Result<StateJets> {
        metric.check_admissible(&at.x)?;
        if at.y.len() != metric.n() || at.x.len() != metric.n() {
            return Err(Error::Malformed(format!(
                "state dimension {} does not match metric dimension {}",
                at.x.len(),
                metric.n()
            )));
        }
        let y_norm2: f64 = at.y.iter().map(|v| v * v).sum();
        if y_norm2 == 0.0 {
            return Err(Error::OutOfDomain(
                "tangent direction y must be nonzero".into(),
            ));
        }
        let n = metric.n();
        let seeds = seed(&at.x, &at.y, 4)?;
        let (xj, yj) = seeds.split_at(n);
        let f = metric.f(xj, yj);
        if !f.is_finite() {
            return Err(Error::OutOfDomain(format!(
                "metric evaluation non-finite at x = {:?}",
                at.x
            )));
        }
        if f.value() <= 0.0 {
            return Err(Error::PositivityViolation(format!(
                "F(x, y) = {} <= 0",
                f.value()
            )));
        }
        let f2 = f.clone() * f.clone();
        let g = SquareMatrix::from_fn(n, |i, j| f2.diff(n + i).diff(n + j).scale(0.5));
        let g_inv = g
            .inverse()
            .map_err(|_| Error::DegenerateMetric("fundamental tensor is singular".into()))?;
        let cond = g.values().condition(&g_inv.values());
        if !cond.is_finite() || cond > CONDITION_LIMIT {
            return Err(Error::DegenerateMetric(format!(
                "fundamental tensor condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}"
            )));
        }
        // G^i = 1/4 g^{il} { [F^2]_{x^k y^l} y^k - [F^2]_{x^l} }
        let mut rhs = Vec::with_capacity(n);
        for l in 0..n {
            let mut acc = f2.diff(0).diff(n + l) * yj[0].clone();
            for k in 1..n {
                acc = acc + f2.diff(k).diff(n + l) * yj[k].clone();
            }
            rhs.push(acc - f2.diff(l));
        }
        let spray = (0..n)
            .map(|i| {
                let mut acc = g_inv.at(i, 0).clone() * rhs[0].clone();
                for l in 1..n {
                    acc = acc + g_inv.at(i, l).clone() * rhs[l].clone();
                }
                acc.scale(0.25)
            })
            .collect();
        Ok(StateJets {
            n,
            y: at.y.clone(),
            f,
            f2,
            g,
            g_inv,
            spray,
        })
    }

    pub fn f_value(&self) -> f64 {
        self.f.value()
    }

    pub fn g_values(&self) -> SquareMatrix<f64> {
        self.g.values()
    }

    pub fn g_inv_values(&self) -> SquareMatrix<f64> {
        self.g_inv.values()
    }

    pub fn spray_values(&self) -> Vec<f64> {
        self.spray.iter().map(|g| g.value()).collect()
    }

    /// N^i_j = dG^i/dy^j.
    pub fn n_matrix(&self) -> SquareMatrix<f64> {
        SquareMatrix::from_fn(self.n, |i, j| self.spray[i].diff(self.n + j).value())
    }

    /// Riemann curvature K^i_k assembled from the spray jets.
    pub fn riemann_values(&self) -> SquareMatrix<f64> {
        let n = self.n;
        let gv = self.spray_values();
        let dgdy: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| self.spray[i].diff(n + j)).collect())
            .collect();
        SquareMatrix::from_fn(n, |i, k| {
            let mut v = 2.0 * self.spray[i].diff(k).value();
            for j in 0..n {
                v -= self.y[j] * self.spray[i].diff(j).diff(n + k).value();
                v += 2.0 * gv[j] * dgdy[i][j].diff(n + k).value();
                v -= dgdy[i][j].value() * dgdy[j][k].value();
            }
            v
        })
    }
}

/// Fundamental tensor g_ij = 1/2 [F^2]_{y^i y^j} and its inverse at a state.
#[derive(Clone, Debug)]
pub struct FundamentalTensor {
    pub g: SquareMatrix<f64>,
    pub g_inv: SquareMatrix<f64>,
    pub at: PointState,
}

/// Spray coefficients and their y-derivatives.
#[derive(Clone, Debug)]
pub struct SprayData {
    pub g: Vec<f64>,
    pub n_matrix: SquareMatrix<f64>,
    pub at: PointState,
}

/// The y-dependent curvature operator K^i_k.
#[derive(Clone, Debug)]
pub struct RiemannTensor {
    pub k: SquareMatrix<f64>,
    pub at: PointState,
}

/// Scalar flag curvature together with the deviation of K^i_k from the
/// isotropic form K F^2 h^i_k.
#[derive(Clone, Debug)]
pub struct FlagCurvatureValue {
    pub k_scalar: f64,
    pub residual: f64,
}

impl FlagCurvatureValue {
    /// Whether the state passes the isotropy residual bound.
    pub fn is_scalar_curvature(&self) -> bool {
        self.residual <= SCALAR_CURVATURE_TOL
    }
}

/// Everything the curvature pipeline produces at one state.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub at: PointState,
    pub f: f64,
    pub g: SquareMatrix<f64>,
    pub g_inv: SquareMatrix<f64>,
    pub spray: Vec<f64>,
    pub n_matrix: SquareMatrix<f64>,
    pub riemann: SquareMatrix<f64>,
    pub k_scalar: f64,
    pub scalar_residual: f64,
}

pub fn fundamental_tensor(metric: &Metric, at: &PointState) -> Result<FundamentalTensor> {
    let sj = StateJets::new(metric, at)?;
    let g = sj.g_values();
    // Positive definiteness via leading principal minors.
    for m in 1..=sj.n {
        let minor = SquareMatrix::from_fn(m, |i, j| *g.at(i, j)).det();
        if minor <= 0.0 {
            return Err(Error::DegenerateMetric(format!(
                "leading principal minor {m} is {minor} <= 0"
            )));
        }
    }
    Ok(FundamentalTensor {
        g,
        g_inv: sj.g_inv_values(),
        at: at.clone(),
    })
}

pub fn spray(metric: &Metric, at: &PointState) -> Result<SprayData> {
    let sj = StateJets::new(metric, at)?;
    Ok(SprayData {
        g: sj.spray_values(),
        n_matrix: sj.n_matrix(),
        at: at.clone(),
    })
}

pub fn riemann(metric: &Metric, at: &PointState) -> Result<RiemannTensor> {
    let sj = StateJets::new(metric, at)?;
    Ok(RiemannTensor {
        k: sj.riemann_values(),
        at: at.clone(),
    })
}

/// Full pipeline at one state: tensor, spray, curvature operator, scalar flag
/// curvature and its isotropy residual.
pub fn curvature_report(metric: &Metric, at: &PointState) -> Result<CurvatureReport> {
    let sj = StateJets::new(metric, at)?;
    report_from_jets(&sj, at)
}

pub(crate) fn report_from_jets(sj: &StateJets, at: &PointState) -> Result<CurvatureReport> {
    let n = sj.n;
    let f = sj.f_value();
    let g = sj.g_values();
    let g_inv = sj.g_inv_values();
    let riemann = sj.riemann_values();
    let f2 = f * f;
    let trace: f64 = (0..n).map(|m| *riemann.at(m, m)).sum();
    let k_scalar = trace / ((n as f64 - 1.0) * f2);
    // h^i_k = delta^i_k - y^i y_k / F^2 with y_k = g_kt y^t.
    let y_low: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|t| g.at(k, t) * at.y[t]).sum())
        .collect();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            let h = if i == k { 1.0 } else { 0.0 } - at.y[i] * y_low[k] / f2;
            let dev = (riemann.at(i, k) - k_scalar * f2 * h).abs();
            residual = residual.max(dev / (1.0 + k_scalar.abs() * f2));
        }
    }
    Ok(CurvatureReport {
        at: at.clone(),
        f,
        g,
        g_inv,
        spray: sj.spray_values(),
        n_matrix: sj.n_matrix(),
        riemann,
        k_scalar,
        scalar_residual: residual,
    })
}

impl CurvatureReport {
    pub fn n(&self) -> usize {
        self.at.n()
    }

    /// Flag curvature of the plane spanned by the flagpole y and `v`.
    pub fn flag_curvature(&self, v: &[f64]) -> Result<f64> {
        let n = self.n();
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.g.at(i, j) * a[i] * b[j];
                }
            }
            acc
        };
        let gyy = ip(&self.at.y, &self.at.y);
        let gvv = ip(v, v);
        let gyv = ip(&self.at.y, v);
        let gram = gyy * gvv - gyv * gyv;
        if gram <= 1e-12 * gyy * gvv {
            return Err(Error::DegenerateFlag(format!(
                "transverse edge {v:?} is parallel to the flagpole"
            )));
        }
        let kv: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| self.riemann.at(i, k) * v[k]).sum())
            .collect();
        Ok(ip(v, &kv) / gram)
    }

    pub fn flag_value(&self) -> FlagCurvatureValue {
        FlagCurvatureValue {
            k_scalar: self.k_scalar,
            residual: self.scalar_residual,
        }
    }
}

pub fn flag_curvature(metric: &Metric, at: &PointState, v: &[f64]) -> Result<f64> {
    curvature_report(metric, at)?.flag_curvature(v)
}

pub fn scalar_curvature(metric: &Metric, at: &PointState) -> Result<FlagCurvatureValue> {
    Ok(curvature_report(metric, at)?.flag_value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, Sign};
    use crate::fd::fd_partial;

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0 + a.abs().max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    fn euclidean() -> Metric {
        Metric::new(Family::Euclidean, 2).unwrap()
    }

    fn funk0() -> Metric {
        Metric::new(
            Family::Funk {
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap()
    }

    #[test]
    fn euclidean_tensor_is_identity() {
        let m = euclidean();
        let at = PointState::new(vec![0.4, -0.9], vec![0.7, 0.3]);
        let ft = fundamental_tensor(&m, &at).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                close(*ft.g.at(i, j), if i == j { 1.0 } else { 0.0 }, 1e-14);
            }
        }
    }

    #[test]
    fn funk_tensor_at_center_is_identity() {
        let m = funk0();
        let at = PointState::new(vec![0.0, 0.0], vec![0.6, -0.4]);
        let ft = fundamental_tensor(&m, &at).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                close(*ft.g.at(i, j), if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
    }

    #[test]
    fn b2_tensor_entry_matches_finite_differences() {
        let m = Metric::new(
            Family::B2 {
                k: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let at = PointState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let ft = fundamental_tensor(&m, &at).unwrap();
        close(*ft.g.at(0, 0), 1.0, 1e-12);
        // Cross-check one entry against the independent oracle.
        let f2 = |p: &[f64]| {
            let f = m.f_plain(&p[..2], &p[2..]);
            f * f
        };
        let fd = 0.5 * fd_partial(f2, &[0.0, 0.0, 1.0, 0.0], &[0, 0, 2, 0]);
        close(*ft.g.at(0, 0), fd, 1e-8);
    }

    #[test]
    fn euclidean_spray_and_riemann_vanish() {
        let m = euclidean();
        let at = PointState::new(vec![0.3, 0.1], vec![1.0, 2.0]);
        let sp = spray(&m, &at).unwrap();
        for v in &sp.g {
            close(*v, 0.0, 1e-14);
        }
        let rt = riemann(&m, &at).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                close(*rt.k.at(i, k), 0.0, 1e-13);
            }
        }
    }

    #[test]
    fn sphere_spray_vanishes_at_origin() {
        let m = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        let at = PointState::new(vec![0.0, 0.0], vec![0.4, 1.1]);
        let sp = spray(&m, &at).unwrap();
        for v in &sp.g {
            close(*v, 0.0, 1e-13);
        }
    }

    #[test]
    fn funk_spray_is_projective() {
        let m = funk0();
        // G^i y^j - G^j y^i = 0: the spray is proportional to y.
        for (x, y) in [
            (vec![0.1, 0.2], vec![1.0, 0.0]),
            (vec![-0.3, 0.4], vec![0.5, -1.2]),
            (vec![0.55, 0.0], vec![-0.2, 0.9]),
        ] {
            let at = PointState::new(x, y);
            let sp = spray(&m, &at).unwrap();
            let anti = sp.g[0] * at.y[1] - sp.g[1] * at.y[0];
            let scale = 1.0 + sp.g[0].abs().max(sp.g[1].abs());
            assert!(anti.abs() / scale < 1e-12, "antisymmetry {anti}");
        }
    }

    #[test]
    fn spray_is_homogeneous_of_degree_two() {
        let m = funk0();
        let x = vec![0.2, -0.1];
        let y = vec![0.9, 0.4];
        let base = spray(&m, &PointState::new(x.clone(), y.clone())).unwrap();
        for lambda in [0.5, 2.0, 3.0] {
            let scaled: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let sp = spray(&m, &PointState::new(x.clone(), scaled)).unwrap();
            for i in 0..2 {
                close(sp.g[i], lambda * lambda * base.g[i], 1e-10);
            }
            // N^i_j y^j = 2 G^i
            let ny: f64 = (0..2).map(|j| sp.n_matrix.at(0, j) * lambda * y[j]).sum();
            close(ny, 2.0 * sp.g[0], 1e-10);
        }
    }

    #[test]
    fn hyperbolic_riemann_at_center() {
        let m = Metric::new(Family::SpaceForm { mu: -1 }, 2).unwrap();
        let at = PointState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let rt = riemann(&m, &at).unwrap();
        // K^i_k = mu (F^2 delta^i_k - y^i y_k) with mu = -1, F(0, e1) = 1.
        close(*rt.k.at(1, 1), -1.0, 1e-12);
        close(*rt.k.at(0, 0), 0.0, 1e-12);
        close(*rt.k.at(0, 1), 0.0, 1e-12);
    }

    #[test]
    fn funk_riemann_is_isotropic() {
        let m = funk0();
        let at = PointState::new(vec![0.2, 0.0], vec![0.0, 1.0]);
        let report = curvature_report(&m, &at).unwrap();
        close(report.k_scalar, -0.25, 1e-9);
        assert!(report.scalar_residual < 1e-7, "{}", report.scalar_residual);
    }

    #[test]
    fn riemann_invariants() {
        let m = funk0();
        let at = PointState::new(vec![0.3, -0.2], vec![0.8, 0.7]);
        let report = curvature_report(&m, &at).unwrap();
        let n = 2;
        // K^i_k y^k = 0
        let knorm = report.riemann.norm_inf();
        for i in 0..n {
            let ky: f64 = (0..n).map(|k| report.riemann.at(i, k) * at.y[k]).sum();
            assert!(ky.abs() <= 1e-10 * (1.0 + knorm), "K y = {ky}");
        }
        // g_im K^m_k symmetric
        for i in 0..n {
            for k in 0..n {
                let lhs: f64 = (0..n).map(|mm| report.g.at(i, mm) * report.riemann.at(mm, k)).sum();
                let rhs: f64 = (0..n).map(|mm| report.g.at(k, mm) * report.riemann.at(mm, i)).sum();
                close(lhs, rhs, 1e-10);
            }
        }
    }

    #[test]
    fn flag_curvature_examples() {
        let e = euclidean();
        let at = PointState::new(vec![0.1, 0.9], vec![1.0, 0.4]);
        let k = flag_curvature(&e, &at, &[0.0, 1.0]).unwrap();
        close(k, 0.0, 1e-13);

        let m = funk0();
        let at = PointState::new(vec![0.3, 0.2], vec![0.5, -0.8]);
        let k = flag_curvature(&m, &at, &[1.0, 0.7]).unwrap();
        close(k, -0.25, 1e-8);

        let b2 = Metric::new(
            Family::B2 {
                k: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let at = PointState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let k = flag_curvature(&b2, &at, &[1.0, 0.0]).unwrap();
        close(k, 3.0 / 8.0, 1e-9);
    }

    #[test]
    fn degenerate_flag_is_rejected() {
        let m = funk0();
        let at = PointState::new(vec![0.1, 0.1], vec![1.0, 0.5]);
        assert!(matches!(
            flag_curvature(&m, &at, &[2.0, 1.0]),
            Err(Error::DegenerateFlag(_))
        ));
    }

    #[test]
    fn scalar_curvature_examples() {
        let b1 = Metric::new(
            Family::B1 {
                lambda: 1.0,
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let at = PointState::new(vec![0.0, 0.0], vec![0.3, 0.8]);
        let fv = scalar_curvature(&b1, &at).unwrap();
        close(fv.k_scalar, -0.625, 1e-10);
        assert!(fv.is_scalar_curvature());

        let e31 = Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap();
        let at = PointState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let fv = scalar_curvature(&e31, &at).unwrap();
        close(fv.k_scalar, 7.25, 1e-9);
    }

    #[test]
    fn scalar_curvature_is_y_homogeneous() {
        let m = funk0();
        let x = vec![0.25, -0.45];
        let y = vec![0.4, 1.3];
        let base = scalar_curvature(&m, &PointState::new(x.clone(), y.clone()))
            .unwrap()
            .k_scalar;
        for lambda in [0.5, 2.0, 3.0] {
            let scaled: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let k = scalar_curvature(&m, &PointState::new(x.clone(), scaled))
                .unwrap()
                .k_scalar;
            close(k, base, 1e-10);
        }
    }

    #[test]
    fn out_of_domain_and_zero_direction() {
        let m = funk0();
        assert!(matches!(
            curvature_report(&m, &PointState::new(vec![1.1, 0.0], vec![1.0, 0.0])),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(
            curvature_report(&m, &PointState::new(vec![0.1, 0.0], vec![0.0, 0.0])),
            Err(Error::OutOfDomain(_))
        ));
    }
}
