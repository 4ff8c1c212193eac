//! Truncated multivariate Taylor arithmetic (jets).
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar expression in up to
//! 8 variables, truncated at total degree <= 4. Arithmetic on jets is exact
//! truncated-polynomial arithmetic, so the coefficients are the exact partial
//! derivatives of the represented expression at the expansion point, up to
//! IEEE rounding.
//!
//! The dense representation keeps every monomial of total degree <= order in
//! graded order (degree 0 first). Truncating a jet to a lower order is then a
//! prefix of the coefficient vector.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Highest supported total derivative order.
pub const MAX_ORDER: usize = 4;
/// Highest supported variable count (2n with n <= 4).
pub const MAX_VARS: usize = 8;

/// Shared per-variable-count lookup tables: monomial exponents, degrees,
/// prefix offsets per order, the product index table, and the multi-index
/// factorials used when converting coefficients to derivatives.
struct JetTables {
    num_vars: usize,
    /// Exponent vectors, graded order, degree 0..=MAX_ORDER.
    monomials: Vec<[u8; MAX_VARS]>,
    degree: Vec<u8>,
    /// offsets[d] = number of monomials of degree <= d.
    offsets: [usize; MAX_ORDER + 2],
    /// prod[i * len + j] = index of monomial_i + monomial_j (always valid when
    /// deg_i + deg_j <= MAX_ORDER; u32::MAX otherwise).
    prod: Vec<u32>,
    /// Index of the degree-1 monomial of each variable.
    var_mono: Vec<usize>,
    /// factorial[i] = product over variables of (exponent!).
    factorial: Vec<f64>,
}

fn enumerate_monomials(num_vars: usize) -> Vec<[u8; MAX_VARS]> {
    let mut out = Vec::new();
    let mut current = [0u8; MAX_VARS];
    for degree in 0..=MAX_ORDER {
        fill(&mut out, &mut current, 0, num_vars, degree as u8);
    }
    return out;

    fn fill(
        out: &mut Vec<[u8; MAX_VARS]>,
        current: &mut [u8; MAX_VARS],
        var: usize,
        num_vars: usize,
        remaining: u8,
    ) {
        if var == num_vars - 1 {
            current[var] = remaining;
            out.push(*current);
            current[var] = 0;
            return;
        }
        for e in (0..=remaining).rev() {
            current[var] = e;
            fill(out, current, var + 1, num_vars, remaining - e);
        }
        current[var] = 0;
    }
}

impl JetTables {
    fn build(num_vars: usize) -> Self {
        assert!((1..=MAX_VARS).contains(&num_vars));
        let monomials = enumerate_monomials(num_vars);
        let len = monomials.len();
        let degree: Vec<u8> = monomials
            .iter()
            .map(|m| m.iter().sum::<u8>())
            .collect();
        let mut offsets = [0usize; MAX_ORDER + 2];
        for d in 0..=MAX_ORDER {
            offsets[d + 1] = degree.iter().filter(|&&g| g as usize <= d).count();
        }
        let mut index_of: HashMap<[u8; MAX_VARS], u32> = HashMap::with_capacity(len);
        for (i, m) in monomials.iter().enumerate() {
            index_of.insert(*m, i as u32);
        }
        let mut prod = vec![u32::MAX; len * len];
        for i in 0..len {
            for j in 0..len {
                if (degree[i] + degree[j]) as usize > MAX_ORDER {
                    continue;
                }
                let mut sum = [0u8; MAX_VARS];
                for v in 0..num_vars {
                    sum[v] = monomials[i][v] + monomials[j][v];
                }
                prod[i * len + j] = index_of[&sum];
            }
        }
        let mut var_mono = vec![0usize; num_vars];
        for v in 0..num_vars {
            let mut e = [0u8; MAX_VARS];
            e[v] = 1;
            var_mono[v] = index_of[&e] as usize;
        }
        let factorial: Vec<f64> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| FACT[e as usize]).product())
            .collect();
        JetTables {
            num_vars,
            monomials,
            degree,
            offsets,
            prod,
            var_mono,
            factorial,
        }
    }
}

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

fn tables(num_vars: usize) -> Arc<JetTables> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(num_vars)
        .or_insert_with(|| Arc::new(JetTables::build(num_vars)))
        .clone()
}

/// Truncated Taylor expansion of a scalar at a point, the carrier for all
/// partial derivatives.
#[derive(Clone)]
pub struct Jet {
    tables: Arc<JetTables>,
    order: usize,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.tables.num_vars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars() == other.num_vars()
            && self.order == other.order
            && self.coeffs == other.coeffs
    }
}

impl Jet {
    /// Constant jet in `num_vars` variables at the given order.
    pub fn constant(num_vars: usize, order: usize, value: f64) -> Jet {
        let tables = tables(num_vars);
        let len = tables.offsets[order + 1];
        let mut coeffs = vec![0.0; len];
        coeffs[0] = value;
        Jet {
            tables,
            order,
            coeffs,
        }
    }

    /// Coordinate jet: value `value`, unit first-order coefficient in `slot`.
    pub fn variable(num_vars: usize, order: usize, slot: usize, value: f64) -> Jet {
        assert!(slot < num_vars);
        let mut jet = Jet::constant(num_vars, order, value);
        if order >= 1 {
            jet.coeffs[jet.tables.var_mono[slot]] = 1.0;
        }
        jet
    }

    pub fn num_vars(&self) -> usize {
        self.tables.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Partial derivative at the expansion point for a multi-index given as
    /// per-variable exponents.
    pub fn partial(&self, multi_index: &[usize]) -> Result<f64> {
        if multi_index.len() != self.num_vars() {
            return Err(Error::Malformed(format!(
                "multi-index has {} entries for a {}-variable jet",
                multi_index.len(),
                self.num_vars()
            )));
        }
        let total: usize = multi_index.iter().sum();
        if total > self.order {
            return Err(Error::OrderExceeded {
                requested: total,
                available: self.order,
            });
        }
        let mut idx = 0usize;
        for (v, &e) in multi_index.iter().enumerate() {
            for _ in 0..e {
                idx = self.tables.prod[idx * self.tables.monomials.len() + self.tables.var_mono[v]]
                    as usize;
            }
        }
        Ok(self.coeffs[idx] * self.tables.factorial[idx])
    }

    /// Partial derivative by a list of variable slots (repetition allowed),
    /// e.g. `[0, 3]` for d^2/dv0 dv3.
    pub fn partial_slots(&self, slots: &[usize]) -> Result<f64> {
        let mut multi = vec![0usize; self.num_vars()];
        for &s in slots {
            multi[s] += 1;
        }
        self.partial(&multi)
    }

    /// Truncated-polynomial derivative with respect to one variable.
    /// The result carries one order less.
    pub fn diff(&self, var: usize) -> Jet {
        assert!(
            self.order >= 1,
            "cannot differentiate an order-0 jet; raise the seed order"
        );
        assert!(var < self.num_vars());
        let order = self.order - 1;
        let len = self.tables.offsets[order + 1];
        let full = self.tables.monomials.len();
        let vm = self.tables.var_mono[var];
        let mut coeffs = vec![0.0; len];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let src = self.tables.prod[i * full + vm] as usize;
            *c = self.coeffs[src] * (self.tables.monomials[i][var] as f64 + 1.0);
        }
        Jet {
            tables: self.tables.clone(),
            order,
            coeffs,
        }
    }

    /// Truncate to a lower order (prefix of the graded coefficient vector).
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        Jet {
            tables: self.tables.clone(),
            order,
            coeffs: self.coeffs[..self.tables.offsets[order + 1]].to_vec(),
        }
    }

    fn binary_order(&self, other: &Jet) -> usize {
        assert_eq!(
            self.num_vars(),
            other.num_vars(),
            "jet variable counts differ"
        );
        self.order.min(other.order)
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        let order = self.binary_order(other);
        if order == 0 {
            return Jet::constant(self.num_vars(), 0, self.coeffs[0] * other.coeffs[0]);
        }
        let t = &self.tables;
        let len = t.offsets[order + 1];
        let full = t.monomials.len();
        let mut coeffs = vec![0.0; len];
        let a = &self.coeffs[..len.min(self.coeffs.len())];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let remaining = order - t.degree[i] as usize;
            let jmax = t.offsets[remaining + 1].min(other.coeffs.len());
            let row = &t.prod[i * full..i * full + jmax];
            for (j, &bj) in other.coeffs[..jmax].iter().enumerate() {
                if bj != 0.0 {
                    coeffs[row[j] as usize] += ai * bj;
                }
            }
        }
        Jet {
            tables: self.tables.clone(),
            order,
            coeffs,
        }
    }

    /// Compose with a univariate series: outer[0] + outer[1] u + ... where
    /// u = self - value(self). Used by division, sqrt, ln, exp.
    fn compose(&self, outer: &[f64; MAX_ORDER + 1]) -> Jet {
        if self.order == 0 {
            return Jet::constant(self.num_vars(), 0, outer[0]);
        }
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.num_vars(), self.order, outer[self.order]);
        for k in (0..self.order).rev() {
            acc = acc.mul_impl(&u);
            acc.coeffs[0] += outer[k];
        }
        acc
    }

    fn recip(&self) -> Jet {
        if self.order == 0 {
            return Jet::constant(self.num_vars(), 0, 1.0 / self.coeffs[0]);
        }
        let v = self.coeffs[0];
        let mut outer = [0.0; MAX_ORDER + 1];
        let mut p = 1.0 / v;
        for (k, o) in outer.iter_mut().enumerate() {
            *o = if k % 2 == 0 { p } else { -p };
            p /= v;
        }
        self.compose(&outer)
    }
}

impl Scalar for Jet {
    fn lift(&self, value: f64) -> Jet {
        Jet::constant(self.num_vars(), self.order, value)
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn scale(mut self, k: f64) -> Jet {
        for c in &mut self.coeffs {
            *c *= k;
        }
        self
    }

    fn shift(mut self, k: f64) -> Jet {
        self.coeffs[0] += k;
        self
    }

    /// Truncated series square root. The value part must be positive; the
    /// calling layer validates domains and reports non-finite results.
    fn sqrt(self) -> Jet {
        if self.order == 0 {
            return Jet::constant(self.num_vars(), 0, self.coeffs[0].sqrt());
        }
        let v = self.coeffs[0];
        let s = v.sqrt();
        let outer = [
            s,
            0.5 / s,
            -1.0 / (8.0 * s * v),
            1.0 / (16.0 * s * v * v),
            -5.0 / (128.0 * s * v * v * v),
        ];
        self.compose(&outer)
    }

    fn ln(self) -> Jet {
        if self.order == 0 {
            return Jet::constant(self.num_vars(), 0, self.coeffs[0].ln());
        }
        let v = self.coeffs[0];
        let outer = [
            v.ln(),
            1.0 / v,
            -1.0 / (2.0 * v * v),
            1.0 / (3.0 * v * v * v),
            -1.0 / (4.0 * v * v * v * v),
        ];
        self.compose(&outer)
    }

    fn exp(self) -> Jet {
        if self.order == 0 {
            return Jet::constant(self.num_vars(), 0, self.coeffs[0].exp());
        }
        let e = self.coeffs[0].exp();
        let outer = [e, e, e / 2.0, e / 6.0, e / 24.0];
        self.compose(&outer)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.binary_order(&rhs);
        let len = self.tables.offsets[order + 1];
        let mut coeffs = self.coeffs;
        coeffs.truncate(len);
        for (c, r) in coeffs.iter_mut().zip(&rhs.coeffs[..len]) {
            *c += r;
        }
        Jet {
            tables: self.tables,
            order,
            coeffs,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.binary_order(&rhs);
        let len = self.tables.offsets[order + 1];
        let mut coeffs = self.coeffs;
        coeffs.truncate(len);
        for (c, r) in coeffs.iter_mut().zip(&rhs.coeffs[..len]) {
            *c -= r;
        }
        Jet {
            tables: self.tables,
            order,
            coeffs,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_impl(&rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if self.order.min(rhs.order) == 0 {
            return Jet::constant(self.num_vars(), 0, self.coeffs[0] / rhs.coeffs[0]);
        }
        self.mul_impl(&rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for c in &mut self.coeffs {
            *c = -*c;
        }
        self
    }
}

/// Seed coordinate jets for a base point and tangent vector: the first `n`
/// jets are the x-coordinates, the last `n` the y-coordinates.
pub fn seed(x: &[f64], y: &[f64], order: usize) -> Result<Vec<Jet>> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Malformed(format!(
            "x has dimension {n} but y has dimension {}",
            y.len()
        )));
    }
    if n < 2 || 2 * n > MAX_VARS {
        return Err(Error::UnsupportedConfiguration(format!(
            "dimension n = {n} outside supported range 2..=4"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::UnsupportedConfiguration(format!(
            "jet order {order} exceeds maximum {MAX_ORDER}"
        )));
    }
    let m = 2 * n;
    let mut jets = Vec::with_capacity(m);
    for (slot, &v) in x.iter().chain(y.iter()).enumerate() {
        jets.push(Jet::variable(m, order, slot, v));
    }
    Ok(jets)
}

/// Seed coordinate jets over an arbitrary variable list (used for functions
/// of x alone, such as c(x) and the metric coefficients).
pub fn seed_vars(values: &[f64], order: usize) -> Result<Vec<Jet>> {
    let m = values.len();
    if m == 0 || m > MAX_VARS {
        return Err(Error::UnsupportedConfiguration(format!(
            "variable count {m} outside supported range 1..=8"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::UnsupportedConfiguration(format!(
            "jet order {order} exceeds maximum {MAX_ORDER}"
        )));
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(slot, &v)| Jet::variable(m, order, slot, v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm2;

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0 + a.abs().max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b}");
    }

    #[test]
    fn seed_identity_coordinates() {
        let jets = seed(&[0.0, 0.0], &[1.0, 0.0], 1).unwrap();
        // x^1 has constant 0 and unit linear coefficient in slot 0.
        assert_eq!(jets[0].value(), 0.0);
        assert_eq!(jets[0].partial(&[1, 0, 0, 0]).unwrap(), 1.0);
        assert_eq!(jets[0].partial(&[0, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(jets[2].value(), 1.0);
        assert_eq!(jets[2].partial(&[0, 0, 1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn seed_rejects_bad_configurations() {
        assert!(matches!(
            seed(&[0.0, 0.0], &[1.0, 0.0], 5),
            Err(Error::UnsupportedConfiguration(_))
        ));
        assert!(matches!(
            seed(&[0.0], &[1.0], 2),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn quadratic_form_partials() {
        let jets = seed(&[0.0, 0.0], &[1.0, 0.0], 2).unwrap();
        let f = norm2(&jets[2..4]);
        assert_eq!(f.partial(&[0, 0, 2, 0]).unwrap(), 2.0);
        assert_eq!(f.partial(&[1, 0, 1, 0]).unwrap(), 0.0);
        assert_eq!(f.partial(&[0, 1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn product_of_coordinates() {
        let jets = seed(&[0.3, -0.2], &[1.0, 2.0], 2).unwrap();
        let f = jets[2].clone() * jets[3].clone();
        assert_eq!(f.partial(&[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(f.value(), 2.0);
    }

    #[test]
    fn gradient_of_euclidean_norm() {
        let jets = seed(&[0.0, 0.0], &[3.0, 4.0], 1).unwrap();
        let f = norm2(&jets[2..4]).sqrt();
        close(f.value(), 5.0, 1e-15);
        close(f.partial(&[0, 0, 1, 0]).unwrap(), 3.0 / 5.0, 1e-15);
        close(f.partial(&[0, 0, 0, 1]).unwrap(), 4.0 / 5.0, 1e-15);
    }

    #[test]
    fn partial_order_exceeded() {
        let jets = seed(&[0.0, 0.0], &[1.0, 1.0], 2).unwrap();
        let f = norm2(&jets[2..4]);
        assert!(matches!(
            f.partial(&[0, 0, 2, 1]),
            Err(Error::OrderExceeded { .. })
        ));
    }

    #[test]
    fn order_zero_matches_plain_f64_bitwise() {
        let x = [0.37, -0.21];
        let y = [1.3, 0.7];
        let jets = seed_vars(&[x[0], x[1], y[0], y[1]], 0).unwrap();
        let jf = ((jets[2].clone() * jets[2].clone() + jets[3].clone() * jets[3].clone()).sqrt()
            + jets[0].clone() * jets[2].clone())
        .ln()
            / jets[1].clone().shift(2.0);
        let pf = ((y[0] * y[0] + y[1] * y[1]).sqrt() + x[0] * y[0]).ln() / (x[1] + 2.0);
        assert_eq!(jf.value().to_bits(), pf.to_bits());
    }

    #[test]
    fn division_times_divisor_restores_numerator() {
        let jets = seed_vars(&[0.4, 1.7, -0.3, 0.9], 4).unwrap();
        let p = jets[0].clone() * jets[1].clone() + jets[2].clone().shift(1.5)
            - jets[3].clone() * jets[3].clone() * jets[0].clone();
        let q = jets[1].clone() + jets[2].clone() * jets[3].clone() + jets[0].clone().shift(3.0);
        let ratio = p.clone() / q.clone();
        let back = ratio * q;
        for (a, b) in back.coeffs.iter().zip(&p.coeffs) {
            close(*a, *b, 1e-14);
        }
    }

    #[test]
    fn sqrt_squared_restores_argument() {
        let jets = seed_vars(&[0.9, 0.2, 0.5, -0.1], 4).unwrap();
        let p = norm2(&jets) + jets[0].clone().shift(2.0);
        let r = p.clone().sqrt();
        let back = r.clone() * r;
        for (a, b) in back.coeffs.iter().zip(&p.coeffs) {
            close(*a, *b, 1e-14);
        }
    }

    #[test]
    fn exp_ln_roundtrip() {
        let jets = seed_vars(&[0.3, 0.8], 4).unwrap();
        let p = jets[0].clone() * jets[1].clone() + jets[1].clone().shift(1.2);
        let back = p.clone().ln().exp();
        for (a, b) in back.coeffs.iter().zip(&p.coeffs) {
            close(*a, *b, 1e-14);
        }
    }

    #[test]
    fn diff_drops_one_order() {
        let jets = seed_vars(&[1.0, 2.0], 3).unwrap();
        // f = v0^2 v1, df/dv0 = 2 v0 v1, d2f/dv0 dv1 = 2 v0.
        let f = jets[0].clone() * jets[0].clone() * jets[1].clone();
        let d0 = f.diff(0);
        assert_eq!(d0.order(), 2);
        assert_eq!(d0.value(), 4.0);
        let d01 = d0.diff(1);
        assert_eq!(d01.value(), 2.0);
    }

    #[test]
    fn truncation_is_prefix() {
        let jets = seed_vars(&[0.5, 0.25], 4).unwrap();
        let f = (jets[0].clone() + jets[1].clone().shift(1.0)).powi(4);
        let t = f.truncate(2);
        assert_eq!(t.order(), 2);
        assert_eq!(&f.coeffs[..t.coeffs.len()], &t.coeffs[..]);
    }
}
