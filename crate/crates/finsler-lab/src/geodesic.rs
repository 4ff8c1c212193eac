//! Geodesic flow: adaptive Dormand-Prince 5(4) integration of
//! x'' + 2 G(x, x') = 0, segment lengths by Gauss-Legendre quadrature over
//! cubic-Hermite dense output, and straightness diagnostics.

use crate::catalog::Metric;
use crate::error::{Error, Result};
use crate::geometry::{spray, PointState};
use crate::quad::gauss_legendre;

/// Boundary margin at which integration halts on bounded charts.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

/// Step cap keeping the dense output accurate enough for 1e-8 quadrature.
const MAX_STEP: f64 = 0.025;

/// One accepted node: time, position, velocity, acceleration.
#[derive(Clone, Debug)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    pub states: Vec<GeodesicSample>,
    pub metric_id: String,
    pub steps: usize,
    pub max_error_estimate: f64,
    /// Integration stopped at the domain boundary before reaching t_end.
    pub exited_domain: bool,
}

struct Rhs<'a> {
    metric: &'a Metric,
    n: usize,
}

impl Rhs<'_> {
    /// state = (x, v); returns (v, -2 G(x, v)).
    fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let (x, v) = state.split_at(self.n);
        let sp = spray(self.metric, &PointState::new(x.to_vec(), v.to_vec()))?;
        let mut out = Vec::with_capacity(2 * self.n);
        out.extend_from_slice(v);
        for g in &sp.g {
            out.push(-2.0 * g);
        }
        Ok(out)
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate the geodesic from (x0, y0) over [0, t_end] with per-step error
/// tolerance `tol` (absolute and relative).
pub fn integrate(
    metric: &Metric,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<GeodesicSegment> {
    metric.check_admissible(x0)?;
    let n = metric.n();
    let rhs = Rhs { metric, n };
    let mut state: Vec<f64> = x0.iter().chain(y0.iter()).copied().collect();
    let mut t = 0.0;
    let mut k1 = rhs.eval(&state)?;
    let mut states = vec![GeodesicSample {
        t,
        x: x0.to_vec(),
        v: y0.to_vec(),
        a: k1[n..].to_vec(),
    }];
    let mut h = (t_end / 100.0).min(MAX_STEP).max(1e-6);
    let mut steps = 0usize;
    let mut max_err: f64 = 0.0;
    let mut err_prev: f64 = 1.0;
    let mut exited = false;

    while t < t_end {
        if h < 1e-14 * t_end.max(1.0) {
            return Err(Error::Stiffness(format!(
                "step size underflow at t = {t}"
            )));
        }
        h = h.min(t_end - t).min(MAX_STEP);
        let mut k = vec![k1.clone()];
        let mut failed = false;
        for stage in 0..6 {
            let mut trial = state.clone();
            for (j, kj) in k.iter().enumerate() {
                let c = A[stage][j];
                if c != 0.0 {
                    for (tv, kv) in trial.iter_mut().zip(kj) {
                        *tv += h * c * kv;
                    }
                }
            }
            match rhs.eval(&trial) {
                Ok(kv) => k.push(kv),
                Err(Error::OutOfDomain(_)) | Err(Error::PositivityViolation(_)) => {
                    // A stage fell off the chart: shrink and retry.
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            h *= 0.5;
            if h < 1e-14 {
                exited = true;
                break;
            }
            continue;
        }
        let mut next = state.clone();
        let mut err: f64 = 0.0;
        let mut low = state.clone();
        for (j, kj) in k.iter().enumerate() {
            for i in 0..2 * n {
                next[i] += h * B5[j] * kj[i];
                low[i] += h * B4[j] * kj[i];
            }
        }
        for i in 0..2 * n {
            let scale = tol + tol * next[i].abs().max(state[i].abs());
            err = err.max((next[i] - low[i]).abs() / scale);
        }
        if err <= 1.0 {
            // Accept.
            t += h;
            state = next;
            let x_new = state[..n].to_vec();
            if !metric.admissible_with_margin(&x_new, BOUNDARY_MARGIN) {
                exited = true;
                states.push(GeodesicSample {
                    t,
                    x: x_new,
                    v: state[n..].to_vec(),
                    a: k.last().unwrap()[n..].to_vec(),
                });
                break;
            }
            k1 = rhs.eval(&state)?;
            states.push(GeodesicSample {
                t,
                x: x_new,
                v: state[n..].to_vec(),
                a: k1[n..].to_vec(),
            });
            steps += 1;
            max_err = max_err.max(err * tol);
            // PI controller.
            let factor = 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= factor.clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    Ok(GeodesicSegment {
        states,
        metric_id: metric.family().name().to_string(),
        steps,
        max_error_estimate: max_err,
        exited_domain: exited,
    })
}

impl GeodesicSegment {
    pub fn t_end(&self) -> f64 {
        self.states.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// The same curve traversed backwards (not in general a geodesic of F,
    /// but a valid curve for length integration).
    pub fn reversed(&self) -> GeodesicSegment {
        let t_end = self.t_end();
        let mut states: Vec<GeodesicSample> = self
            .states
            .iter()
            .rev()
            .map(|s| GeodesicSample {
                t: t_end - s.t,
                x: s.x.clone(),
                v: s.v.iter().map(|c| -c).collect(),
                a: s.a.clone(),
            })
            .collect();
        states.shrink_to_fit();
        GeodesicSegment {
            states,
            metric_id: self.metric_id.clone(),
            steps: self.steps,
            max_error_estimate: self.max_error_estimate,
            exited_domain: self.exited_domain,
        }
    }

    /// Max relative drift of F(x, x') along the segment.
    pub fn speed_drift(&self, metric: &Metric) -> f64 {
        let f0 = metric.f_plain(&self.states[0].x, &self.states[0].v);
        self.states
            .iter()
            .map(|s| (metric.f_plain(&s.x, &s.v) - f0).abs() / f0)
            .fold(0.0, f64::max)
    }

    /// Max distance of the sampled points from the total-least-squares line,
    /// relative to the segment's extent.
    pub fn collinearity_residual(&self) -> f64 {
        let n = self.states[0].x.len();
        let m = self.states.len() as f64;
        let mut centroid = vec![0.0; n];
        for s in &self.states {
            for (c, xi) in centroid.iter_mut().zip(&s.x) {
                *c += xi / m;
            }
        }
        // Principal direction by power iteration on the covariance matrix.
        let mut cov = vec![vec![0.0; n]; n];
        for s in &self.states {
            for i in 0..n {
                for j in 0..n {
                    cov[i][j] += (s.x[i] - centroid[i]) * (s.x[j] - centroid[j]);
                }
            }
        }
        let mut dir = vec![0.0; n];
        let first = &self.states[0].x;
        let last = &self.states[self.states.len() - 1].x;
        for i in 0..n {
            dir[i] = last[i] - first[i];
        }
        normalize(&mut dir);
        for _ in 0..50 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    next[i] += cov[i][j] * dir[j];
                }
            }
            normalize(&mut next);
            dir = next;
        }
        let extent: f64 = (0..n)
            .map(|i| (last[i] - first[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if extent == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for s in &self.states {
            let mut along = 0.0;
            for i in 0..n {
                along += (s.x[i] - centroid[i]) * dir[i];
            }
            let perp2: f64 = (0..n)
                .map(|i| {
                    let p = (s.x[i] - centroid[i]) - along * dir[i];
                    p * p
                })
                .sum();
            worst = worst.max(perp2.sqrt());
        }
        worst / extent
    }
}

fn normalize(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in v.iter_mut() {
            *c /= norm;
        }
    }
}

/// Hermite-interpolated position and velocity inside one accepted step.
fn hermite(s0: &GeodesicSample, s1: &GeodesicSample, t: f64) -> (Vec<f64>, Vec<f64>) {
    let h = s1.t - s0.t;
    let u = (t - s0.t) / h;
    let n = s0.x.len();
    let (u2, u3) = (u * u, u * u * u);
    // Position: cubic Hermite from (x0, v0, x1, v1).
    let (h00, h10, h01, h11) = (
        2.0 * u3 - 3.0 * u2 + 1.0,
        u3 - 2.0 * u2 + u,
        -2.0 * u3 + 3.0 * u2,
        u3 - u2,
    );
    // Velocity: cubic Hermite from (v0, a0, v1, a1).
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    for i in 0..n {
        x[i] = h00 * s0.x[i] + h10 * h * s0.v[i] + h01 * s1.x[i] + h11 * h * s1.v[i];
        v[i] = h00 * s0.v[i] + h10 * h * s0.a[i] + h01 * s1.v[i] + h11 * h * s1.a[i];
    }
    (x, v)
}

/// Length of the segment under `metric` by per-step Gauss-Legendre
/// quadrature over the dense output.
pub fn segment_length(metric: &Metric, segment: &GeodesicSegment) -> f64 {
    let (nodes, weights) = gauss_legendre(10);
    let mut total = 0.0;
    for w in segment.states.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let h = s1.t - s0.t;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (s0.t + s1.t);
        for (tn, wn) in nodes.iter().zip(&weights) {
            let t = mid + 0.5 * h * tn;
            let (x, v) = hermite(s0, s1, t);
            total += 0.5 * h * wn * metric.f_plain(&x, &v);
        }
    }
    total
}

/// Length of the same curve under the Riemannian part alpha alone.
pub fn segment_length_alpha(metric: &Metric, segment: &GeodesicSegment) -> f64 {
    let (nodes, weights) = gauss_legendre(10);
    let mut total = 0.0;
    for w in segment.states.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let h = s1.t - s0.t;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (s0.t + s1.t);
        for (tn, wn) in nodes.iter().zip(&weights) {
            let t = mid + 0.5 * h * tn;
            let (x, v) = hermite(s0, s1, t);
            let a: f64 = metric.alpha(&x, &v);
            total += 0.5 * h * wn * a;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Family, Metric, Sign};

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0 + a.abs().max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    #[test]
    fn euclidean_geodesics_are_exact_lines() {
        let m = Metric::new(Family::Euclidean, 2).unwrap();
        let seg = integrate(&m, &[0.1, -0.2], &[0.6, 0.8], 2.0, 1e-9).unwrap();
        assert!(!seg.exited_domain);
        for s in &seg.states {
            close(s.x[0], 0.1 + 0.6 * s.t, 1e-10);
            close(s.x[1], -0.2 + 0.8 * s.t, 1e-10);
        }
        assert!(seg.collinearity_residual() < 1e-12);
        // Unit speed, t in [0, 2]: length 2.
        close(segment_length(&m, &seg), 2.0, 1e-10);
    }

    #[test]
    fn funk_geodesics_are_straight() {
        let m = Metric::new(
            Family::Funk {
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        let seg = integrate(&m, &[0.1, 0.2], &[1.0, 0.0], 1.5, 1e-9).unwrap();
        assert!(seg.collinearity_residual() < 1e-6);
        assert!(seg.speed_drift(&m) < 1e-7);
        // Forward and reversed lengths differ for an asymmetric metric; the
        // outward ride is the long one here since beta ~ <x, x'> > 0.
        let fwd = segment_length(&m, &seg);
        let rev = segment_length(&m, &seg.reversed());
        assert!(fwd > rev + 1e-3, "fwd {fwd} rev {rev}");
        // The reversed length is the pointwise integral of F(x, -x').
        let pointwise: f64 = {
            let (nodes, weights) = crate::quad::gauss_legendre(10);
            let mut total = 0.0;
            for w in seg.states.windows(2) {
                let h = w[1].t - w[0].t;
                let mid = 0.5 * (w[0].t + w[1].t);
                for (tn, wn) in nodes.iter().zip(&weights) {
                    let t = mid + 0.5 * h * tn;
                    let (x, v) = super::hermite(&w[0], &w[1], t);
                    let vm: Vec<f64> = v.iter().map(|c| -c).collect();
                    total += 0.5 * h * wn * m.f_plain(&x, &vm);
                }
            }
            total
        };
        close(rev, pointwise, 1e-9);
    }

    #[test]
    fn sphere_geodesics_through_origin_are_straight() {
        let m = Metric::new(Family::SpaceForm { mu: 1 }, 2).unwrap();
        let seg = integrate(&m, &[0.0, 0.0], &[0.8, 0.6], 1.2, 1e-9).unwrap();
        assert!(seg.collinearity_residual() < 1e-7);
    }

    #[test]
    fn riemannian_lengths_are_reversible() {
        let m = Metric::new(Family::SpaceForm { mu: -1 }, 2).unwrap();
        let seg = integrate(&m, &[0.2, 0.1], &[0.5, -0.3], 1.0, 1e-10).unwrap();
        let fwd = segment_length(&m, &seg);
        let rev = segment_length(&m, &seg.reversed());
        close(fwd, rev, 1e-9);
    }

    #[test]
    fn funk_trajectory_stops_at_boundary() {
        let m = Metric::new(
            Family::Funk {
                a: vec![0.0, 0.0],
                sign: Sign::Plus,
            },
            2,
        )
        .unwrap();
        // The boundary is at Euclidean distance < 1; a long time span must
        // truncate rather than error.
        let seg = integrate(&m, &[0.0, 0.0], &[1.0, 0.0], 50.0, 1e-9).unwrap();
        let last = seg.states.last().unwrap();
        assert!(last.x[0] < 1.0);
        // Funk forward geodesics approach but never reach the rim; domain
        // exit may or may not trigger depending on the margin.
        assert!(last.x[0] > 0.9);
    }

    #[test]
    fn b3_length_potential_identity() {
        // F = alpha - dh: Length_F - Length_alpha = h(start) - h(end).
        let m = Metric::new(
            Family::B3 {
                eps: 0.3,
                a: vec![0.0, 0.0],
            },
            2,
        )
        .unwrap();
        let seg = integrate(&m, &[0.2, -0.1], &[0.7, 0.4], 1.0, 1e-10).unwrap();
        let lf = segment_length(&m, &seg);
        let la = segment_length_alpha(&m, &seg);
        let h0 = m.length_potential(&seg.states[0].x).unwrap();
        let h1 = m
            .length_potential(&seg.states.last().unwrap().x)
            .unwrap();
        close(lf - la, h0 - h1, 1e-7);
    }

    #[test]
    fn speed_is_conserved() {
        for m in [
            Metric::new(
                Family::B2 {
                    k: 1.0,
                    a: vec![0.0, 0.0],
                    sign: Sign::Plus,
                },
                2,
            )
            .unwrap(),
            Metric::new(Family::Example31 { eps: 0.5 }, 2).unwrap(),
        ] {
            let seg = integrate(&m, &[0.3, 0.2], &[0.5, -0.6], 1.0, 1e-9).unwrap();
            assert!(
                seg.speed_drift(&m) < 1e-7,
                "family {:?}: drift {}",
                m.family(),
                seg.speed_drift(&m)
            );
        }
    }
}
