//! Truncated multivariate Taylor series ("jets") up to total order 3.
//!
//! A `Jet` stores the Taylor coefficients `∂^α f / α!` of a smooth function
//! at a point, for every multi-index `α` with `|α| <= order`. Arithmetic on
//! jets is exact through the stored order, so first, second and third
//! partial derivatives obtained from jet evaluation carry only rounding
//! error, never truncation error.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

/// Monomial bookkeeping for jets with `n` variables and total degree `<= order`.
///
/// Tables are cached globally per `(n, order)` pair; building one is cheap
/// but the product table is worth sharing between the many jets of a sweep.
#[derive(Debug)]
pub struct JetTable {
    pub n: usize,
    pub order: usize,
    /// Multi-indices sorted by (total degree, lexicographic index tuple).
    pub monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// prod[i * len + j] = position of monomials[i] + monomials[j], if within order.
    prod: Vec<Option<u32>>,
    /// α! per monomial, used to convert divided coefficients to raw partials.
    factorials: Vec<f64>,
}

impl JetTable {
    fn build(n: usize, order: usize) -> JetTable {
        let mut monomials: Vec<Vec<u8>> = vec![];
        let mut cur = vec![vec![0u8; n]];
        monomials.extend(cur.iter().cloned());
        for _ in 0..order {
            let mut next = vec![];
            for m in &cur {
                for v in 0..n {
                    let mut m2 = m.clone();
                    m2[v] += 1;
                    next.push(m2);
                }
            }
            next.sort();
            next.dedup();
            monomials.extend(next.iter().cloned());
            cur = next;
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let len = monomials.len();
        let mut prod = vec![None; len * len];
        for i in 0..len {
            for j in 0..len {
                let di: usize = monomials[i].iter().map(|&d| d as usize).sum();
                let dj: usize = monomials[j].iter().map(|&d| d as usize).sum();
                if di + dj <= order {
                    let sum: Vec<u8> = monomials[i]
                        .iter()
                        .zip(&monomials[j])
                        .map(|(a, b)| a + b)
                        .collect();
                    prod[i * len + j] = index.get(&sum).map(|&k| k as u32);
                }
            }
        }
        let factorials = monomials
            .iter()
            .map(|m| m.iter().map(|&d| (1..=d as u64).product::<u64>() as f64).product())
            .collect();
        JetTable {
            n,
            order,
            monomials,
            index,
            prod,
            factorials,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }
}

static TABLES: Lazy<Mutex<HashMap<(usize, usize), Arc<JetTable>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

pub fn table(n: usize, order: usize) -> Arc<JetTable> {
    assert!(order <= 3, "jets are only supported through order 3");
    let mut cache = TABLES.lock().unwrap();
    cache
        .entry((n, order))
        .or_insert_with(|| Arc::new(JetTable::build(n, order)))
        .clone()
}

/// Value plus all partial derivatives through the table's order,
/// stored in the divided (Taylor) convention `c_α = ∂^α f / α!`.
#[derive(Clone)]
#[derive(Debug)]
pub struct Jet {
    pub table: Arc<JetTable>,
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(table: &Arc<JetTable>, v: f64) -> Jet {
        let mut c = vec![0.0; table.len()];
        c[0] = v;
        Jet {
            table: table.clone(),
            c,
        }
    }

    /// The coordinate function `x_i` evaluated at `value`.
    pub fn variable(table: &Arc<JetTable>, i: usize, value: f64) -> Jet {
        assert!(i < table.n);
        let mut c = vec![0.0; table.len()];
        c[0] = value;
        if table.order >= 1 {
            let mut alpha = vec![0u8; table.n];
            alpha[i] = 1;
            let pos = table.position(&alpha).unwrap();
            c[pos] = 1.0;
        }
        Jet {
            table: table.clone(),
            c,
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Raw partial derivative `∂^α f` (factorial-adjusted).
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let pos = self
            .table
            .position(alpha)
            .expect("multi-index outside jet order");
        self.c[pos] * self.table.factorials[pos]
    }

    pub fn d1(&self, i: usize) -> f64 {
        let mut alpha = vec![0u8; self.table.n];
        alpha[i] = 1;
        self.partial(&alpha)
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut alpha = vec![0u8; self.table.n];
        alpha[i] += 1;
        alpha[j] += 1;
        self.partial(&alpha)
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut alpha = vec![0u8; self.table.n];
        alpha[i] += 1;
        alpha[j] += 1;
        alpha[k] += 1;
        self.partial(&alpha)
    }

    /// Partial derivative as a jet of one lower order (same variables).
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.table.order >= 1);
        let out_table = table(self.table.n, self.table.order - 1);
        let mut c = vec![0.0; out_table.len()];
        for (pos, beta) in out_table.monomials.iter().enumerate() {
            let mut alpha = beta.clone();
            alpha[var] += 1;
            if let Some(src) = self.table.position(&alpha) {
                c[pos] = self.c[src] * (beta[var] as f64 + 1.0);
            }
        }
        Jet { table: out_table, c }
    }

    /// Forget coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.table.order);
        let out_table = table(self.table.n, order);
        let mut c = vec![0.0; out_table.len()];
        c.copy_from_slice(&self.c[..out_table.len()]);
        Jet { table: out_table, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            table: self.table.clone(),
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// Composition with a scalar function given by its derivatives at the
    /// jet's value: `derivs[k] = f^{(k)}(g(0))`. Exact through the jet order.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.table.order;
        assert!(derivs.len() > order);
        // h = self with the constant part removed; Horner in h.
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut fact = 1.0;
        let mut coeffs = vec![0.0; order + 1];
        for (k, item) in coeffs.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *item = derivs[k] / fact;
        }
        let mut acc = Jet::constant(&self.table, coeffs[order]);
        for k in (0..order).rev() {
            acc = &acc * &h;
            acc.c[0] += coeffs[k];
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        assert!(v != 0.0, "jet reciprocal at zero");
        self.compose(&[1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&[e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        assert!(v > 0.0, "jet log of non-positive value");
        self.compose(&[v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)])
    }

    pub fn sqrt(&self) -> Jet {
        let v = self.value();
        assert!(v > 0.0, "jet sqrt of non-positive value");
        let s = v.sqrt();
        self.compose(&[
            s,
            0.5 / s,
            -0.25 / (s * v),
            0.375 / (s * v * v),
        ])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s])
    }

    pub fn tan(&self) -> Jet {
        let t = self.value().tan();
        let d1 = 1.0 + t * t;
        self.compose(&[t, d1, 2.0 * t * d1, d1 * (2.0 * d1 + 4.0 * t * t)])
    }

    pub fn sinh(&self) -> Jet {
        let s = self.value().sinh();
        let c = self.value().cosh();
        self.compose(&[s, c, s, c])
    }

    pub fn cosh(&self) -> Jet {
        let s = self.value().sinh();
        let c = self.value().cosh();
        self.compose(&[c, s, c, s])
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value().tanh();
        let d1 = 1.0 - t * t;
        self.compose(&[t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0)])
    }

    pub fn abs(&self) -> Jet {
        let v = self.value();
        assert!(v != 0.0, "jet abs at zero is not differentiable");
        self.scale(v.signum())
    }

    /// Integer power by repeated multiplication (exact for rational metrics).
    pub fn powi(&self, e: i64) -> Jet {
        if e == 0 {
            return Jet::constant(&self.table, 1.0);
        }
        let base = if e < 0 { self.recip() } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..e.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    /// Real power via derivatives of `x^e`; requires a positive base.
    pub fn powf(&self, e: f64) -> Jet {
        if e == e.round() && e.abs() < 64.0 {
            return self.powi(e as i64);
        }
        let v = self.value();
        assert!(v > 0.0, "jet real power of non-positive base");
        self.compose(&[
            v.powf(e),
            e * v.powf(e - 1.0),
            e * (e - 1.0) * v.powf(e - 2.0),
            e * (e - 1.0) * (e - 2.0) * v.powf(e - 3.0),
        ])
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.table, &rhs.table));
        Jet {
            table: self.table.clone(),
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.table, &rhs.table));
        Jet {
            table: self.table.clone(),
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.table, &rhs.table));
        let len = self.table.len();
        let mut c = vec![0.0; len];
        for i in 0..len {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            let row = &self.table.prod[i * len..(i + 1) * len];
            for j in 0..len {
                let b = rhs.c[j];
                if b == 0.0 {
                    continue;
                }
                if let Some(k) = row[j] {
                    c[k as usize] += a * b;
                }
            }
        }
        Jet {
            table: self.table.clone(),
            c,
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Jet {
    pub fn div(&self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn table_sizes() {
        assert_eq!(table(1, 3).len(), 4);
        assert_eq!(table(2, 3).len(), 10);
        assert_eq!(table(3, 3).len(), 20); // C(6,3)
        assert_eq!(table(6, 2).len(), 28); // C(8,2)
    }

    #[test]
    fn polynomial_product_is_exact() {
        let t = table(2, 3);
        let x = Jet::variable(&t, 0, 2.0);
        let y = Jet::variable(&t, 1, -1.0);
        // f = x^2 * y
        let f = &(&x * &x) * &y;
        close(f.value(), -4.0, 0.0);
        close(f.d1(0), 2.0 * 2.0 * -1.0, 0.0);
        close(f.d1(1), 4.0, 0.0);
        close(f.d2(0, 0), -2.0, 0.0);
        close(f.d2(0, 1), 4.0, 0.0);
        close(f.d3(0, 0, 1), 2.0, 0.0);
        close(f.d3(0, 0, 0), 0.0, 0.0);
    }

    #[test]
    fn reciprocal_derivatives() {
        // 1/x^2 at x=2: value 1/4, f' = -2x^-3 = -0.25, f'' = 6x^-4 = 0.375
        let t = table(1, 3);
        let x = Jet::variable(&t, 0, 2.0);
        let f = (&x * &x).recip();
        close(f.value(), 0.25, 1e-15);
        close(f.d1(0), -0.25, 1e-15);
        close(f.d2(0, 0), 0.375, 1e-15);
        close(f.d3(0, 0, 0), -0.75, 1e-15);
    }

    #[test]
    fn exp_chain_rule() {
        let t = table(2, 3);
        let x = Jet::variable(&t, 0, 0.3);
        let y = Jet::variable(&t, 1, -0.2);
        let f = (&(&x * &y)).exp();
        let e = (0.3f64 * -0.2).exp();
        close(f.value(), e, 1e-15);
        close(f.d1(0), -0.2 * e, 1e-15);
        close(f.d2(0, 1), e * (1.0 + 0.3 * -0.2), 1e-14);
    }

    #[test]
    fn derivative_jet_consistency() {
        let t = table(2, 3);
        let x = Jet::variable(&t, 0, 1.3);
        let y = Jet::variable(&t, 1, 0.7);
        let f = &(&x * &(&y * &y)) * &x; // x^2 y^2
        let fx = f.derivative(0);
        close(fx.value(), f.d1(0), 1e-14);
        close(fx.d1(1), f.d2(0, 1), 1e-14);
        close(fx.d2(1, 1), f.d3(0, 1, 1), 1e-14);
    }

    #[test]
    fn powf_matches_exp_log() {
        let t = table(1, 3);
        let x = Jet::variable(&t, 0, 1.7);
        let a = x.powf(0.5);
        let b = x.ln().scale(0.5).exp();
        for (u, v) in a.c.iter().zip(&b.c) {
            close(*u, *v, 1e-13);
        }
    }
}
