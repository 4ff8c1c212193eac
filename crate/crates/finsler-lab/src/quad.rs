//! One-dimensional quadrature building blocks: adaptive Simpson and
//! Gauss-Legendre nodes.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

fn simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
}

fn simpson_rec(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let (left, flm) = simpson(f, a, fa, m, fm);
    let (right, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Split into a few initial panels so periodic integrands are resolved.
    let panels = 8;
    let mut total = 0.0;
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let pa = a + p as f64 * h;
        let pb = pa + h;
        let fa = f(pa);
        let fb = f(pb);
        let (whole, fm) = simpson(&mut f, pa, fa, pb, fb);
        total += simpson_rec(
            &mut f,
            pa,
            fa,
            pb,
            fb,
            0.5 * (pa + pb),
            fm,
            whole,
            tol / panels as f64,
            40,
        );
    }
    total
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per point count.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| compute_gauss_legendre(n))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x, by the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
pub fn gauss_legendre_integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_function() {
        let v = adaptive_simpson(|t: f64| t.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_integrates_periodic_square() {
        let v = adaptive_simpson(
            |t: f64| 1.0 / (2.0 + t.cos()),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-11,
        );
        // exact: 2 pi / sqrt(3)
        assert!((v - 2.0 * std::f64::consts::PI / 3.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        // GL-5 integrates degree <= 9 exactly.
        let v = gauss_legendre_integrate(|t| t * t * t * t * t * t, -1.0, 1.0, 5);
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
        let v = gauss_legendre_integrate(|t| (3.0 * t).exp(), 0.0, 1.0, 20);
        assert!((v - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-13);
    }
}
