//! Small dense matrices over a generic scalar.
//!
//! Everything here targets n <= 4; pivoted Gaussian elimination is exact
//! enough and works unchanged over jets (pivoting compares value parts).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix of generic scalars.
#[derive(Clone, Debug)]
pub struct SquareMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> SquareMatrix<S> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    pub fn values(&self) -> SquareMatrix<f64> {
        SquareMatrix::from_fn(self.n, |i, j| self.at(i, j).value())
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = self.at(i, 0).clone() * v[0].clone();
                for j in 1..self.n {
                    acc = acc + self.at(i, j).clone() * v[j].clone();
                }
                acc
            })
            .collect()
    }

    /// Solve A X = B for several right-hand sides by Gaussian elimination
    /// with partial pivoting on value parts.
    fn solve_many(&self, rhs: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut b: Vec<Vec<S>> = rhs.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[perm[r] * n + col].value().abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_mag == 0.0 || !pivot_mag.is_finite() {
                return Err(Error::DegenerateMetric(
                    "singular matrix in linear solve".into(),
                ));
            }
            perm.swap(col, pivot_row);
            let prow = perm[col];
            for r in col + 1..n {
                let row = perm[r];
                let factor = a[row * n + col].clone() / a[prow * n + col].clone();
                for c in col + 1..n {
                    a[row * n + c] = a[row * n + c].clone()
                        - factor.clone() * a[prow * n + c].clone();
                }
                for rhs_col in &mut b {
                    rhs_col[row] =
                        rhs_col[row].clone() - factor.clone() * rhs_col[prow].clone();
                }
            }
        }
        let mut out = Vec::with_capacity(b.len());
        for rhs_col in &b {
            let mut x: Vec<S> = vec![rhs_col[0].lift(0.0); n];
            for col in (0..n).rev() {
                let row = perm[col];
                let mut acc = rhs_col[row].clone();
                for c in col + 1..n {
                    acc = acc - a[row * n + c].clone() * x[c].clone();
                }
                x[col] = acc / a[row * n + col].clone();
            }
            out.push(x);
        }
        Ok(out)
    }

    pub fn solve(&self, rhs: &[S]) -> Result<Vec<S>> {
        Ok(self.solve_many(&[rhs.to_vec()])?.pop().unwrap())
    }

    pub fn inverse(&self) -> Result<SquareMatrix<S>> {
        let n = self.n;
        let zero = self.at(0, 0).lift(0.0);
        let one = self.at(0, 0).lift(1.0);
        let rhs: Vec<Vec<S>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| if i == j { one.clone() } else { zero.clone() })
                    .collect()
            })
            .collect();
        let cols = self.solve_many(&rhs)?;
        Ok(SquareMatrix::from_fn(n, |i, j| cols[j][i].clone()))
    }

    pub fn det(&self) -> S {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = self.at(0, 0).lift(1.0);
        let mut sign = 1.0;
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[r * n + col].value().abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_mag == 0.0 {
                return self.at(0, 0).lift(0.0);
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot_row * n + c);
                }
                sign = -sign;
            }
            det = det * a[col * n + col].clone();
            for r in col + 1..n {
                let factor = a[r * n + col].clone() / a[col * n + col].clone();
                for c in col + 1..n {
                    a[r * n + c] =
                        a[r * n + c].clone() - factor.clone() * a[col * n + c].clone();
                }
            }
        }
        det.scale(sign)
    }
}

impl SquareMatrix<f64> {
    /// Infinity-norm condition number estimate from an explicit inverse.
    pub fn condition(&self, inverse: &SquareMatrix<f64>) -> f64 {
        self.norm_inf() * inverse.norm_inf()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.at(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix<f64>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::seed_vars;
    use crate::scalar::Scalar;

    #[test]
    fn inverse_of_known_matrix() {
        let m = SquareMatrix::from_fn(2, |i, j| [[4.0, 1.0], [2.0, 3.0]][i][j]);
        let inv = m.inverse().unwrap();
        let expect = [[0.3, -0.1], [-0.2, 0.4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv.at(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
        assert!((m.det() - 10.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = SquareMatrix::from_fn(2, |i, j| [[1.0, 2.0], [2.0, 4.0]][i][j]);
        assert!(m.inverse().is_err());
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = SquareMatrix::from_fn(3, |i, j| {
            [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]][i][j]
        });
        let x = m.solve(&[5.0, 3.0, 4.0]).unwrap();
        let back = m.mul_vec(&x);
        for (b, e) in back.iter().zip(&[5.0, 3.0, 4.0]) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn jet_matrix_inverse_carries_derivatives() {
        // A(t) = [[1 + t, 0], [0, 2]] has inverse [[1/(1+t), 0], [0, 1/2]];
        // d/dt of the (0,0) entry at t = 0 is -1.
        let t = &seed_vars(&[0.0], 2).unwrap()[0];
        let zero = t.lift(0.0);
        let m = SquareMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => t.clone().shift(1.0),
            (1, 1) => t.lift(2.0),
            _ => zero.clone(),
        });
        let inv = m.inverse().unwrap();
        assert!((inv.at(0, 0).value() - 1.0).abs() < 1e-15);
        assert!((inv.at(0, 0).partial(&[1]).unwrap() + 1.0).abs() < 1e-14);
        assert!((inv.at(1, 1).value() - 0.5).abs() < 1e-15);
    }
}
