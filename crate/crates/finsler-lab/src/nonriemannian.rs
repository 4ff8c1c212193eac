//! Non-Riemannian quantities: Cartan torsion, mean Cartan torsion,
//! distortion (closed form and indicatrix quadrature), S-curvature by two
//! independent routes, and the mean Landsberg curvature.

use crate::catalog::Metric;
use crate::error::{Error, Result};
use crate::geometry::{PointState, StateJets};
use crate::jet::{seed, Jet};
use crate::quad::{adaptive_simpson, gauss_legendre};
use crate::randers::covariant_data;
use crate::scalar::Scalar;

/// Cartan torsion C_ijk = 1/4 [F^2]_{y^i y^j y^k} and its mean trace.
#[derive(Clone, Debug)]
pub struct TorsionData {
    pub c: Vec<Vec<Vec<f64>>>,
    pub i: Vec<f64>,
    pub at: PointState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistortionRoute {
    RandersClosedForm,
    IndicatrixQuadrature,
}

#[derive(Clone, Copy, Debug)]
pub struct DistortionValue {
    pub tau: f64,
    pub route: DistortionRoute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SCurvatureRoute {
    RandersFormula,
    TauHorizontalDerivative,
}

#[derive(Clone, Copy, Debug)]
pub struct SCurvatureValue {
    pub s: f64,
    pub route: SCurvatureRoute,
}

#[derive(Clone, Debug)]
pub struct MeanLandsbergValue {
    pub j: Vec<f64>,
}

pub fn cartan(metric: &Metric, at: &PointState) -> Result<TorsionData> {
    let sj = StateJets::new(metric, at)?;
    Ok(cartan_from_jets(&sj, at))
}

pub(crate) fn cartan_from_jets(sj: &StateJets, at: &PointState) -> TorsionData {
    let n = sj.n;
    let mut c = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[i][j][k] = 0.25 * sj.f2.diff(n + i).diff(n + j).diff(n + k).value();
            }
        }
    }
    let ginv = sj.g_inv_values();
    let mut mean = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                mean[i] += ginv.at(j, k) * c[i][j][k];
            }
        }
    }
    TorsionData {
        c,
        i: mean,
        at: at.clone(),
    }
}

/// Mean Cartan torsion as order-1 jets, I_i = 1/2 g^{jk} dg_jk/dy^i, for the
/// derivatives that enter the mean Landsberg curvature.
fn mean_cartan_jets(sj: &StateJets) -> Vec<Jet> {
    let n = sj.n;
    (0..n)
        .map(|i| {
            let mut acc = sj.g_inv.at(0, 0).clone() * sj.g.at(0, 0).diff(n + i);
            for j in 0..n {
                for k in 0..n {
                    if j == 0 && k == 0 {
                        continue;
                    }
                    acc = acc + sj.g_inv.at(j, k).clone() * sj.g.at(j, k).diff(n + i);
                }
            }
            acc.scale(0.5)
        })
        .collect()
}

/// Distortion of a Randers metric in closed form:
/// tau = (n+1)/2 [ln F - ln alpha - ln(1 - |beta|^2)].
pub fn distortion(metric: &Metric, at: &PointState) -> Result<DistortionValue> {
    metric.check_admissible(&at.x)?;
    let tau = distortion_field(metric, &at.x, &at.y)?;
    Ok(DistortionValue {
        tau,
        route: DistortionRoute::RandersClosedForm,
    })
}

/// The distortion as a generic scalar function of the state.
pub fn distortion_field<S: Scalar>(metric: &Metric, x: &[S], y: &[S]) -> Result<S> {
    let f = metric.f(x, y);
    let alpha = metric.alpha(x, y);
    let one_minus = (-metric.beta_norm2(x)?).shift(1.0);
    let v = (f.ln() - alpha.ln() - one_minus.ln()).scale((metric.n() as f64 + 1.0) / 2.0);
    if !v.value().is_finite() {
        return Err(Error::PositivityViolation(
            "distortion undefined: 1 - |beta|^2 <= 0 or F <= 0".into(),
        ));
    }
    Ok(v)
}

/// Distortion from its definition: log of det g normalized by the
/// indicatrix volume. Supported in dimensions 2 and 3.
pub fn distortion_quadrature(metric: &Metric, at: &PointState) -> Result<DistortionValue> {
    let n = metric.n();
    let sj = StateJets::new(metric, at)?;
    let det_g = sj.g_values().det();
    if det_g <= 0.0 {
        return Err(Error::DegenerateMetric(format!("det g = {det_g} <= 0")));
    }
    let x = &at.x;
    let volume = match n {
        2 => {
            // area of {F(x, .) < 1} in polar form: 1/2 int r(theta)^2 dtheta
            let area = adaptive_simpson(
                |theta: f64| {
                    let u = [theta.cos(), theta.sin()];
                    let f = metric.f_plain(x, &u);
                    0.5 / (f * f)
                },
                0.0,
                2.0 * std::f64::consts::PI,
                1e-9,
            );
            area / std::f64::consts::PI
        }
        3 => {
            // volume of {F(x, .) < 1}: 1/3 int_{S^2} r(u)^3 dOmega, with
            // Gauss-Legendre in cos(polar) and a uniform periodic rule in
            // azimuth.
            let (nodes, weights) = gauss_legendre(48);
            let m_phi = 96;
            let dphi = 2.0 * std::f64::consts::PI / m_phi as f64;
            let mut vol = 0.0;
            for (ct, w) in nodes.iter().zip(&weights) {
                let st = (1.0 - ct * ct).sqrt();
                for p in 0..m_phi {
                    let phi = p as f64 * dphi;
                    let u = [st * phi.cos(), st * phi.sin(), *ct];
                    let f = metric.f_plain(x, &u);
                    vol += w * dphi / (3.0 * f * f * f);
                }
            }
            vol / (4.0 * std::f64::consts::PI / 3.0)
        }
        _ => {
            return Err(Error::UnsupportedConfiguration(format!(
                "indicatrix quadrature supports n in {{2, 3}}, got n = {n}"
            )))
        }
    };
    Ok(DistortionValue {
        tau: (det_g.sqrt() * volume).ln(),
        route: DistortionRoute::IndicatrixQuadrature,
    })
}

/// S-curvature from the Randers structure data:
/// S = (n+1) { e_00 / 2F - (s_0 + rho_0) }.
pub fn s_curvature_randers(metric: &Metric, at: &PointState) -> Result<SCurvatureValue> {
    metric.check_admissible(&at.x)?;
    let cov = covariant_data(metric, &at.x)?;
    let f = metric.f_plain(&at.x, &at.y);
    if f <= 0.0 {
        return Err(Error::PositivityViolation(format!("F = {f} <= 0")));
    }
    let np1 = metric.n() as f64 + 1.0;
    let s = np1 * (cov.e00(&at.y) / (2.0 * f) - (cov.s0(&at.y) + cov.rho0(&at.y)));
    Ok(SCurvatureValue {
        s,
        route: SCurvatureRoute::RandersFormula,
    })
}

/// S-curvature as the horizontal derivative of the distortion along the
/// spray: S = y^m dtau/dx^m - 2 G^m dtau/dy^m.
pub fn s_curvature_tau(metric: &Metric, at: &PointState) -> Result<SCurvatureValue> {
    let sj = StateJets::new(metric, at)?;
    let n = metric.n();
    let seeds = seed(&at.x, &at.y, 1)?;
    let (xj, yj) = seeds.split_at(n);
    let tau = distortion_field(metric, xj, yj)?;
    let gv = sj.spray_values();
    let mut s = 0.0;
    for m in 0..n {
        s += at.y[m] * tau.diff(m).value();
        s -= 2.0 * gv[m] * tau.diff(n + m).value();
    }
    Ok(SCurvatureValue {
        s,
        route: SCurvatureRoute::TauHorizontalDerivative,
    })
}

pub fn mean_landsberg(metric: &Metric, at: &PointState) -> Result<MeanLandsbergValue> {
    let sj = StateJets::new(metric, at)?;
    Ok(mean_landsberg_from_jets(&sj, at))
}

/// J_i = y^m dI_i/dx^m - I_m dG^m/dy^i - 2 G^m dI_i/dy^m, with every
/// derivative read off one order-4 jet of F^2.
pub(crate) fn mean_landsberg_from_jets(sj: &StateJets, at: &PointState) -> MeanLandsbergValue {
    let n = sj.n;
    let ij = mean_cartan_jets(sj);
    let ivals: Vec<f64> = ij.iter().map(|j| j.value()).collect();
    let gv = sj.spray_values();
    let j = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for m in 0..n {
                acc += at.y[m] * ij[i].diff(m).value();
                acc -= ivals[m] * sj.spray[m].diff(n + i).value();
                acc -= 2.0 * gv[m] * ij[i].diff(n + m).value();
            }
            acc
        })
        .collect();
    MeanLandsbergValue { j }
}

/// Horizontal derivative of a scalar field on the slit tangent bundle:
/// phi_{|l} = dphi/dx^l - N^m_l dphi/dy^m.
pub fn horizontal_derivative(
    field: impl Fn(&[Jet], &[Jet]) -> Result<Jet>,
    metric: &Metric,
    at: &PointState,
) -> Result<Vec<f64>> {
    let sj = StateJets::new(metric, at)?;
    let n = metric.n();
    let seeds = seed(&at.x, &at.y, 1)?;
    let (xj, yj) = seeds.split_at(n);
    let phi = field(xj, yj)?;
    let nm = sj.n_matrix();
    Ok((0..n)
        .map(|l| {
            let mut acc = phi.diff(l).value();
            for m in 0..n {
                acc -= nm.at(m, l) * phi.diff(n + m).value();
            }
            acc
        })
        .collect())
}

/// Everything non-Riemannian at one state, sharing a single jet evaluation.
#[derive(Clone, Debug)]
pub struct NonRiemannianReport {
    pub torsion: TorsionData,
    pub mean_landsberg: MeanLandsbergValue,
    pub tau: f64,
    pub s_randers: f64,
    pub s_tau: f64,
}

pub fn non_riemannian_report(metric: &Metric, at: &PointState) -> Result<NonRiemannianReport> {
    let sj = StateJets::new(metric, at)?;
    let torsion = cartan_from_jets(&sj, at);
    let mean_landsberg = mean_landsberg_from_jets(&sj, at);
    let tau = distortion(metric, at)?.tau;
    let s_randers = s_curvature_randers(metric, at)?.s;
    let n = metric.n();
    let seeds = seed(&at.x, &at.y, 1)?;
    let (xj, yj) = seeds.split_at(n);
    let tau_jet = distortion_field(metric, xj, yj)?;
    let gv = sj.spray_values();
    let mut s_tau = 0.0;
    for m in 0..n {
        s_tau += at.y[m] * tau_jet.diff(m).value();
        s_tau -= 2.0 * gv[m] * tau_jet.diff(n + m).value();
    }
    Ok(NonRiemannianReport {
        torsion,
        mean_landsberg,
        tau,
        s_randers,
        s_tau,
    })
}
