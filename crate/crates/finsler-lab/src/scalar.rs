//! Generic scalar abstraction.
//!
//! Metric definitions are written once as functions over a [`Scalar`] and
//! evaluated either with plain `f64` (fast path, quadrature, plotting) or
//! with truncated Taylor jets (derivatives). Evaluating with an order-0 jet
//! performs exactly the same sequence of IEEE operations as the `f64` path,
//! so the two agree bit for bit.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Constant with the same shape (variable count, order) as `self`.
    fn lift(&self, value: f64) -> Self;

    /// Point value: the zeroth Taylor coefficient.
    fn value(&self) -> f64;

    /// Multiply by a plain constant.
    fn scale(self, k: f64) -> Self;

    /// Add a plain constant.
    fn shift(self, k: f64) -> Self;

    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;

    fn powi(self, n: u32) -> Self {
        match n {
            0 => self.lift(1.0),
            1 => self,
            _ => {
                let mut acc = self.clone();
                for _ in 1..n {
                    acc = acc * self.clone();
                }
                acc
            }
        }
    }
}

impl Scalar for f64 {
    fn lift(&self, value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn shift(self, k: f64) -> Self {
        self + k
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// Dot product of two scalar slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    debug_assert!(!a.is_empty());
    let mut acc = a[0].clone() * b[0].clone();
    for i in 1..a.len() {
        acc = acc + a[i].clone() * b[i].clone();
    }
    acc
}

/// Dot product of a constant vector with a scalar slice.
pub fn dot_const<S: Scalar>(k: &[f64], v: &[S]) -> S {
    debug_assert_eq!(k.len(), v.len());
    debug_assert!(!v.is_empty());
    let mut acc = v[0].clone().scale(k[0]);
    for i in 1..v.len() {
        acc = acc + v[i].clone().scale(k[i]);
    }
    acc
}

/// Squared Euclidean norm of a scalar slice.
pub fn norm2<S: Scalar>(v: &[S]) -> S {
    dot(v, v)
}

/// A scalar function of a tangent-bundle state `(x, y)` with an optional
/// declared homogeneity degree in `y`.
pub trait StateFunction {
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> S;

    /// Declared degree `d` with `f(x, t y) = t^d f(x, y)` for `t > 0`, if any.
    fn homogeneity_degree(&self) -> Option<i32> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_scalar_ops() {
        let x = 2.0f64;
        assert_eq!(x.lift(5.0), 5.0);
        assert_eq!(x.value(), 2.0);
        assert_eq!(x.scale(3.0), 6.0);
        assert_eq!(x.shift(1.0), 3.0);
        assert_eq!(4.0f64.powi(3), 64.0);
    }

    #[test]
    fn dot_products() {
        let a = [3.0, 4.0];
        let b = [1.0, 2.0];
        assert_eq!(dot(&a, &b), 11.0);
        assert_eq!(dot_const(&[2.0, 0.5], &b), 3.0);
        assert_eq!(norm2(&a), 25.0);
    }
}
