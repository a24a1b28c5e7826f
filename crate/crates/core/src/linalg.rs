//! Small dense matrix helpers (n <= 12). Gauss-Jordan with partial
//! pivoting; robustness matters more than speed at these sizes.

use crate::jet::Jet;

pub type Mat = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn det(a: &Mat) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        d *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    d
}

/// Inverse, or `None` when a pivot vanishes.
pub fn invert(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m = a.clone();
    let mut inv = identity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(piv, col);
        inv.swap(piv, col);
        let d = m[col][col];
        for k in 0..n {
            m[col][k] /= d;
            inv[col][k] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[row][k] -= f * m[col][k];
                inv[row][k] -= f * inv[col][k];
            }
        }
    }
    Some(inv)
}

/// Inverse of a matrix of jets, pivoting on the constant term.
pub fn invert_jets(a: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = a.len();
    let table = a[0][0].table.clone();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&table, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col]
                .value()
                .abs()
                .partial_cmp(&m[j][col].value().abs())
                .unwrap()
        })?;
        if m[piv][col].value() == 0.0 {
            return None;
        }
        m.swap(piv, col);
        inv.swap(piv, col);
        let d = m[col][col].recip();
        for k in 0..n {
            m[col][k] = &m[col][k] * &d;
            inv[col][k] = &inv[col][k] * &d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col].clone();
            if f.c.iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..n {
                m[row][k] = &m[row][k] - &(&f * &m[col][k]);
                inv[row][k] = &inv[row][k] - &(&f * &inv[col][k]);
            }
        }
    }
    Some(inv)
}

pub fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(r, x)| r * x).sum())
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{table, Jet};

    #[test]
    fn invert_matches_identity() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let inv = invert(&a).unwrap();
        let prod = matmul(&a, &inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - expect).abs() < 1e-14);
            }
        }
        assert!((det(&a) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn jet_inverse_derivative() {
        // d/dx (1/x) = -1/x^2 recovered through the 1x1 jet inverse.
        let t = table(1, 2);
        let x = Jet::variable(&t, 0, 2.0);
        let inv = invert_jets(&[vec![x]]).unwrap();
        assert!((inv[0][0].value() - 0.5).abs() < 1e-15);
        assert!((inv[0][0].d1(0) + 0.25).abs() < 1e-15);
    }
}
