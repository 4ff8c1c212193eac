//! Central finite differences with Richardson extrapolation.
//!
//! Independent derivative oracle for the jet engine, and the y-derivative
//! route for identities whose exact form would need order-5 jets.

/// Iterated central difference for a mixed partial, uniform step `h`.
fn iterated_central(
    f: &mut dyn FnMut(&[f64]) -> f64,
    point: &[f64],
    multi_index: &[usize],
    h: f64,
) -> f64 {
    match multi_index.iter().position(|&e| e > 0) {
        None => f(point),
        Some(v) => {
            let mut lower = multi_index.to_vec();
            lower[v] -= 1;
            let mut plus = point.to_vec();
            plus[v] += h;
            let mut minus = point.to_vec();
            minus[v] -= h;
            (iterated_central(f, &plus, &lower, h) - iterated_central(f, &minus, &lower, h))
                / (2.0 * h)
        }
    }
}

/// Mixed partial derivative of `f` at `point` by central differences with two
/// Richardson levels (leading error O(h^6)).
///
/// The base step grows with the total derivative order: the k-fold iterated
/// stencil divides by (2h)^k, so rounding noise scales like eps/h^k and a
/// step that is fine for gradients destroys fourth derivatives.
pub fn fd_partial(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    multi_index: &[usize],
) -> f64 {
    let total: usize = multi_index.iter().sum();
    let h = match total {
        0 => return f(point),
        1 => 1e-3,
        2 => 2e-3,
        3 => 1e-2,
        _ => 4e-2,
    };
    fd_partial_with_step(f, point, multi_index, h)
}

/// Same as [`fd_partial`] with an explicit base step.
pub fn fd_partial_with_step(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    multi_index: &[usize],
    h: f64,
) -> f64 {
    let e1 = iterated_central(&mut f, point, multi_index, h);
    let e2 = iterated_central(&mut f, point, multi_index, h / 2.0);
    let e3 = iterated_central(&mut f, point, multi_index, h / 4.0);
    let r1 = (4.0 * e2 - e1) / 3.0;
    let r2 = (4.0 * e3 - e2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Fourth-order central first derivative in direction `slot`, step `h`,
/// for scalar functions of a state vector.
pub fn fd_gradient_component(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    slot: usize,
    h: f64,
) -> f64 {
    let mut eval = |offset: f64| {
        let mut p = point.to_vec();
        p[slot] += offset;
        f(&p)
    };
    (-eval(2.0 * h) + 8.0 * eval(h) - 8.0 * eval(-h) + eval(-2.0 * h)) / (12.0 * h)
}
