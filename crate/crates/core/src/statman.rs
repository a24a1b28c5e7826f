//! Base-manifold statistical geometry: metric, Levi-Civita and statistical
//! Christoffel symbols, skewness tensor K, cubic tensor C, dual connection,
//! curvature tensors, the index-swapped tensor, and covariant derivatives
//! of K and R.
//!
//! Index convention used throughout the crate:
//! `R(∂_i, ∂_j) ∂_k = R^l_{kij} ∂_l`, stored as `r[l][k][i][j]`. Lowered
//! tensors pair the metric with the last slot.

use std::collections::HashMap;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::{table, Jet};
use crate::linalg::{self, Mat};

pub type T3 = Vec<Vec<Vec<f64>>>;
pub type T4 = Vec<Vec<Vec<Vec<f64>>>>;
pub type T5 = Vec<Vec<Vec<Vec<Vec<f64>>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    Riemannian,
    Pseudo,
}

/// Skewness data: either K^k_{ij} directly or the statistical Christoffel
/// symbols Γ^k_{ij} (K is then Γ - Γ̂).
#[derive(Debug, Clone)]
pub enum SkewInput {
    Skewness(Vec<Vec<Vec<Expr>>>),
    Christoffels(Vec<Vec<Vec<Expr>>>),
}

#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub coords: Vec<String>,
    pub metric: Vec<Vec<Expr>>,
    pub skew: SkewInput,
    pub signature: Signature,
    pub params: HashMap<String, f64>,
}

impl ManifoldSpec {
    pub fn new(
        dim: usize,
        coords: Vec<String>,
        metric: Vec<Vec<Expr>>,
        skew: SkewInput,
        signature: Signature,
        params: HashMap<String, f64>,
    ) -> Result<ManifoldSpec> {
        for i in 0..dim {
            for j in 0..i {
                if metric[i][j] != metric[j][i] {
                    return Err(GeomError::Symmetry {
                        a: format!("g[{}][{}]", i + 1, j + 1),
                        b: format!("g[{}][{}]", j + 1, i + 1),
                    });
                }
            }
        }
        if let SkewInput::Skewness(k) = &skew {
            for l in 0..dim {
                for i in 0..dim {
                    for j in 0..i {
                        if k[l][i][j] != k[l][j][i] {
                            return Err(GeomError::Symmetry {
                                a: format!("K[{}][{}][{}]", l + 1, i + 1, j + 1),
                                b: format!("K[{}][{}][{}]", l + 1, j + 1, i + 1),
                            });
                        }
                    }
                }
            }
        }
        Ok(ManifoldSpec {
            dim,
            coords,
            metric,
            skew,
            signature,
            params,
        })
    }

    pub fn geometry_at(&self, x: &[f64]) -> Result<BaseGeometry> {
        BaseGeometry::compute(self, x)
    }

    /// Metric matrix, inverse, and order-3 derivative jets at a point.
    pub fn metric_at(&self, x: &[f64]) -> Result<(Mat, Mat, Vec<Vec<Jet>>)> {
        let n = self.dim;
        let mut g_jets = vec![vec![]; n];
        for i in 0..n {
            for j in 0..n {
                g_jets[i].push(self.metric[i][j].jet3(x, &self.params)?);
            }
        }
        let g: Mat = (0..n)
            .map(|i| (0..n).map(|j| g_jets[i][j].value()).collect())
            .collect();
        let det = linalg::det(&g);
        if det.abs() < 1e-14 {
            return Err(GeomError::SingularMetric {
                point: x.to_vec(),
                det,
            });
        }
        let ginv = linalg::invert(&g).ok_or(GeomError::SingularMetric {
            point: x.to_vec(),
            det,
        })?;
        Ok((g, ginv, g_jets))
    }
}

/// Everything the lifted geometry needs at a single base point, computed
/// once from exact jets.
#[derive(Debug)]
pub struct BaseGeometry {
    pub n: usize,
    pub x: Vec<f64>,
    pub signature: Signature,
    pub g: Mat,
    pub ginv: Mat,
    pub g_jets: Vec<Vec<Jet>>,
    /// Levi-Civita Christoffels Γ̂^k_{ij}, values and order-2 jets.
    pub gamma_hat: T3,
    pub gamma_hat_jets: Vec<Vec<Vec<Jet>>>,
    /// Skewness K^k_{ij}.
    pub k: T3,
    pub k_jets: Vec<Vec<Vec<Jet>>>,
    /// Statistical connection Γ = Γ̂ + K and dual Γ* = Γ̂ - K.
    pub gamma: T3,
    pub gamma_jets: Vec<Vec<Vec<Jet>>>,
    pub gamma_star: T3,
    /// Lowered skewness K_{ijk} = g_{kl} K^l_{ij} and cubic tensor C_{ijk}.
    pub k_low: T3,
    pub c_low: T3,
    /// Curvatures of Γ, Γ̂, Γ*: r[l][k][i][j] = R^l_{kij}.
    pub r: T4,
    pub r_jets: Vec<Vec<Vec<Vec<Jet>>>>,
    pub r_hat: T4,
    pub r_star: T4,
    /// Index-swapped tensors of R and R*.
    pub r_tilde: T4,
    pub r_tilde_jets: Vec<Vec<Vec<Vec<Jet>>>>,
    pub r_tilde_star: T4,
    /// Covariant derivatives: nabla_k[a][l][i][j] = (∇_{∂_a} K)^l_{ij}, etc.
    pub nabla_k: T4,
    pub nabla_hat_k: T4,
    pub nabla_r: T5,
    pub nabla_r_tilde: T5,
}

fn zeros3(n: usize) -> T3 {
    vec![vec![vec![0.0; n]; n]; n]
}
fn zeros4(n: usize) -> T4 {
    vec![vec![vec![vec![0.0; n]; n]; n]; n]
}
fn zeros5(n: usize) -> T5 {
    vec![vec![vec![vec![vec![0.0; n]; n]; n]; n]; n]
}

impl BaseGeometry {
    fn compute(spec: &ManifoldSpec, x: &[f64]) -> Result<BaseGeometry> {
        let n = spec.dim;
        let (g, ginv, g_jets) = spec.metric_at(x)?;
        let t2 = table(n, 2);
        let t1 = table(n, 1);

        // Order-2 jets of g, its inverse, and ∂g (from the order-3 jets).
        let g2: Vec<Vec<Jet>> = g_jets
            .iter()
            .map(|row| row.iter().map(|j| j.truncate(2)).collect())
            .collect();
        let ginv2 = linalg::invert_jets(&g2).ok_or(GeomError::SingularMetric {
            point: x.to_vec(),
            det: linalg::det(&g),
        })?;
        let dg: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|l| {
                (0..n)
                    .map(|i| (0..n).map(|j| g_jets[i][j].derivative(l)).collect())
                    .collect()
            })
            .collect(); // dg[l][i][j] = ∂_l g_ij as order-2 jet

        // Γ̂^k_{ij} = ½ g^{kl} (∂_i g_jl + ∂_j g_il - ∂_l g_ij)
        let mut gamma_hat_jets = vec![vec![vec![Jet::constant(&t2, 0.0); n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Jet::constant(&t2, 0.0);
                    for l in 0..n {
                        let term = &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j];
                        acc = &acc + &(&ginv2[k][l] * &term);
                    }
                    gamma_hat_jets[k][i][j] = acc.scale(0.5);
                }
            }
        }

        // Skewness jets (order 2), from K expressions or Γ - Γ̂.
        let mut k_jets = vec![vec![vec![Jet::constant(&t2, 0.0); n]; n]; n];
        match &spec.skew {
            SkewInput::Skewness(kexpr) => {
                let coords: Vec<Jet> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Jet::variable(&t2, i, v))
                    .collect();
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            k_jets[l][i][j] =
                                kexpr[l][i][j].eval_jet(&t2, &coords, &spec.params)?;
                        }
                    }
                }
            }
            SkewInput::Christoffels(gexpr) => {
                let coords: Vec<Jet> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Jet::variable(&t2, i, v))
                    .collect();
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let gam = gexpr[l][i][j].eval_jet(&t2, &coords, &spec.params)?;
                            k_jets[l][i][j] = &gam - &gamma_hat_jets[l][i][j];
                        }
                    }
                }
            }
        }

        let val3 = |jets: &Vec<Vec<Vec<Jet>>>| -> T3 {
            (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| (0..n).map(|c| jets[a][b][c].value()).collect())
                        .collect()
                })
                .collect()
        };
        let gamma_hat = val3(&gamma_hat_jets);
        let k = val3(&k_jets);

        // Lowered K and total-symmetry (Codazzi) check.
        let mut k_low = zeros3(n);
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    k_low[i][j][m] = (0..n).map(|l| g[m][l] * k[l][i][j]).sum();
                }
            }
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    asym = asym.max((k_low[i][j][m] - k_low[m][j][i]).abs());
                    asym = asym.max((k_low[i][j][m] - k_low[j][i][m]).abs());
                }
            }
        }
        if asym > 1e-9 {
            return Err(GeomError::NotStatistical { deviation: asym });
        }

        let mut gamma_jets = vec![vec![vec![Jet::constant(&t2, 0.0); n]; n]; n];
        let mut gamma_star_jets = vec![vec![vec![Jet::constant(&t2, 0.0); n]; n]; n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma_jets[l][i][j] = &gamma_hat_jets[l][i][j] + &k_jets[l][i][j];
                    gamma_star_jets[l][i][j] = &gamma_hat_jets[l][i][j] - &k_jets[l][i][j];
                }
            }
        }
        let gamma = val3(&gamma_jets);
        let gamma_star = val3(&gamma_star_jets);

        // Cubic tensor C_{ijk} = ∂_k g_ij - Γ^h_{ik} g_jh - Γ^h_{jk} g_ih.
        let mut c_low = zeros3(n);
        for i in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    let mut v = dg[kk][i][j].value();
                    for h in 0..n {
                        v -= gamma[h][i][kk] * g[j][h] + gamma[h][j][kk] * g[i][h];
                    }
                    c_low[i][j][kk] = v;
                }
            }
        }

        // Curvature as order-1 jets: R^l_{kij} = ∂_i Γ^l_{jk} - ∂_j Γ^l_{ik}
        //                                      + Γ^l_{im} Γ^m_{jk} - Γ^l_{jm} Γ^m_{ik}.
        let curvature_jets = |gam: &Vec<Vec<Vec<Jet>>>| -> Vec<Vec<Vec<Vec<Jet>>>> {
            let g1: Vec<Vec<Vec<Jet>>> = (0..n)
                .map(|l| {
                    (0..n)
                        .map(|i| (0..n).map(|j| gam[l][i][j].truncate(1)).collect())
                        .collect()
                })
                .collect();
            (0..n)
                .map(|l| {
                    (0..n)
                        .map(|kk| {
                            (0..n)
                                .map(|i| {
                                    (0..n)
                                        .map(|j| {
                                            let mut acc = &gam[l][j][kk].derivative(i)
                                                - &gam[l][i][kk].derivative(j);
                                            for m in 0..n {
                                                acc = &acc + &(&g1[l][i][m] * &g1[m][j][kk]);
                                                acc = &acc - &(&g1[l][j][m] * &g1[m][i][kk]);
                                            }
                                            acc
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        let r_jets = curvature_jets(&gamma_jets);
        let r_hat_jets = curvature_jets(&gamma_hat_jets);
        let r_star_jets = curvature_jets(&gamma_star_jets);
        let val4 = |jets: &Vec<Vec<Vec<Vec<Jet>>>>| -> T4 {
            (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| {
                            (0..n)
                                .map(|c| (0..n).map(|d| jets[a][b][c][d].value()).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        let r = val4(&r_jets);
        let r_hat = val4(&r_hat_jets);
        let r_star = val4(&r_star_jets);

        // Index-swapped tensor: g(R̃(∂_i,∂_j)∂_k, ∂_w) = g(R(∂_k,∂_w)∂_i, ∂_j),
        // so R̃^l_{kij} = g^{lw} g_{jh} R^h_{ikw}. Built as order-1 jets so its
        // covariant derivative is available.
        let g1: Vec<Vec<Jet>> = g_jets
            .iter()
            .map(|row| row.iter().map(|j| j.truncate(1)).collect())
            .collect();
        let ginv1: Vec<Vec<Jet>> =
            linalg::invert_jets(&g1).ok_or(GeomError::SingularMetric {
                point: x.to_vec(),
                det: linalg::det(&g),
            })?;
        let swap_jets = |rj: &Vec<Vec<Vec<Vec<Jet>>>>| -> Vec<Vec<Vec<Vec<Jet>>>> {
            (0..n)
                .map(|l| {
                    (0..n)
                        .map(|kk| {
                            (0..n)
                                .map(|i| {
                                    (0..n)
                                        .map(|j| {
                                            let mut acc = Jet::constant(&t1, 0.0);
                                            for w in 0..n {
                                                for h in 0..n {
                                                    let term = &(&ginv1[l][w] * &g1[j][h])
                                                        * &rj[h][i][kk][w];
                                                    acc = &acc + &term;
                                                }
                                            }
                                            acc
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        let r_tilde_jets = swap_jets(&r_jets);
        let r_tilde = val4(&r_tilde_jets);
        let r_tilde_star = val4(&swap_jets(&r_star_jets));

        // Covariant derivatives with the statistical connection Γ
        // (the Levi-Civita variant of ∇K is kept for the curvature
        // decomposition identity).
        let nabla_k_with = |conn: &T3| -> T4 {
            let mut out = zeros4(n);
            for a in 0..n {
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = k_jets[l][i][j].d1(a);
                            for m in 0..n {
                                v += conn[l][a][m] * k[m][i][j];
                                v -= conn[m][a][i] * k[l][m][j];
                                v -= conn[m][a][j] * k[l][i][m];
                            }
                            out[a][l][i][j] = v;
                        }
                    }
                }
            }
            out
        };
        let nabla_k = nabla_k_with(&gamma);
        let nabla_hat_k = nabla_k_with(&gamma_hat);

        let nabla4 = |tj: &Vec<Vec<Vec<Vec<Jet>>>>, tv: &T4| -> T5 {
            let mut out = zeros5(n);
            for a in 0..n {
                for l in 0..n {
                    for kk in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = tj[l][kk][i][j].d1(a);
                                for m in 0..n {
                                    v += gamma[l][a][m] * tv[m][kk][i][j];
                                    v -= gamma[m][a][kk] * tv[l][m][i][j];
                                    v -= gamma[m][a][i] * tv[l][kk][m][j];
                                    v -= gamma[m][a][j] * tv[l][kk][i][m];
                                }
                                out[a][l][kk][i][j] = v;
                            }
                        }
                    }
                }
            }
            out
        };
        let nabla_r = nabla4(&r_jets, &r);
        let nabla_r_tilde = nabla4(&r_tilde_jets, &r_tilde);

        Ok(BaseGeometry {
            n,
            x: x.to_vec(),
            signature: spec.signature,
            g,
            ginv,
            g_jets,
            gamma_hat,
            gamma_hat_jets,
            k,
            k_jets,
            gamma,
            gamma_jets,
            gamma_star,
            k_low,
            c_low,
            r,
            r_jets,
            r_hat,
            r_star,
            r_tilde,
            r_tilde_jets,
            r_tilde_star,
            nabla_k,
            nabla_hat_k,
            nabla_r,
            nabla_r_tilde,
        })
    }

    // ---- pointwise tensor contractions on component vectors ----

    pub fn gdot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.g[i][j] * a[i] * b[j];
            }
        }
        s
    }

    /// K(X, Y) as a vector.
    pub fn k_map(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|l| {
                let mut s = 0.0;
                for i in 0..self.n {
                    for j in 0..self.n {
                        s += self.k[l][i][j] * a[i] * b[j];
                    }
                }
                s
            })
            .collect()
    }

    /// R(X, Y) Z with the statistical curvature tensor.
    pub fn r_map(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.contract4(&self.r, x, y, z)
    }

    pub fn r_hat_map(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.contract4(&self.r_hat, x, y, z)
    }

    /// R̃(X, Y) Z.
    pub fn rt_map(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.contract4(&self.r_tilde, x, y, z)
    }

    fn contract4(&self, t: &T4, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|l| {
                let mut s = 0.0;
                for k in 0..self.n {
                    for i in 0..self.n {
                        for j in 0..self.n {
                            s += t[l][k][i][j] * z[k] * x[i] * y[j];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// (∇_A K)(Y, Z) with the statistical connection.
    pub fn nabla_k_map(&self, a: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|l| {
                let mut s = 0.0;
                for aa in 0..self.n {
                    for i in 0..self.n {
                        for j in 0..self.n {
                            s += self.nabla_k[aa][l][i][j] * a[aa] * y[i] * z[j];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// (∇_A R)(X, Y) Z.
    pub fn nabla_r_map(&self, a: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.contract5(&self.nabla_r, a, x, y, z)
    }

    /// (∇_A R̃)(X, Y) Z.
    pub fn nabla_rt_map(&self, a: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.contract5(&self.nabla_r_tilde, a, x, y, z)
    }

    fn contract5(&self, t: &T5, a: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|l| {
                let mut s = 0.0;
                for aa in 0..self.n {
                    for k in 0..self.n {
                        for i in 0..self.n {
                            for j in 0..self.n {
                                s += t[aa][l][k][i][j] * a[aa] * z[k] * x[i] * y[j];
                            }
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Lowered curvature R(X,Y,Z,W) = g(R(X,Y)Z, W) for a given tensor.
    pub fn lowered(&self, t: &T4, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let v = self.contract4(t, x, y, z);
        self.gdot(&v, w)
    }

    /// Max deviation of R = R̂ + (∇̂K)-antisymmetrization + [K,K].
    pub fn curvature_decomposition_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev: f64 = 0.0;
        for l in 0..n {
            for kk in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut rhs = self.r_hat[l][kk][i][j]
                            + self.nabla_hat_k[i][l][j][kk]
                            - self.nabla_hat_k[j][l][i][kk];
                        for m in 0..n {
                            rhs += self.k[l][i][m] * self.k[m][j][kk]
                                - self.k[l][j][m] * self.k[m][i][kk];
                        }
                        dev = dev.max((self.r[l][kk][i][j] - rhs).abs());
                    }
                }
            }
        }
        dev
    }

    /// Max deviation of the duality identity on coordinate fields:
    /// ∂_a g_ij - Γ^m_{ai} g_mj - Γ*^m_{aj} g_im = 0.
    pub fn duality_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev: f64 = 0.0;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = self.g_jets[i][j].d1(a);
                    for m in 0..n {
                        v -= self.gamma[m][a][i] * self.g[m][j];
                        v -= self.gamma_star[m][a][j] * self.g[i][m];
                    }
                    dev = dev.max(v.abs());
                }
            }
        }
        dev
    }

    /// Max deviation of metric compatibility of Γ̂: ∂_a g_ij - Γ̂-terms.
    pub fn lc_compatibility_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev: f64 = 0.0;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = self.g_jets[i][j].d1(a);
                    for m in 0..n {
                        v -= self.gamma_hat[m][a][i] * self.g[m][j];
                        v -= self.gamma_hat[m][a][j] * self.g[i][m];
                    }
                    dev = dev.max(v.abs());
                }
            }
        }
        dev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn exp_geo(xi: f64) -> BaseGeometry {
        models::catalog()
            .into_iter()
            .find(|m| m.name == "exponential")
            .unwrap()
            .spec
            .geometry_at(&[xi])
            .unwrap()
    }

    fn normal_geo(mu: f64, sigma: f64) -> BaseGeometry {
        models::catalog()
            .into_iter()
            .find(|m| m.name == "normal")
            .unwrap()
            .spec
            .geometry_at(&[mu, sigma])
            .unwrap()
    }

    #[test]
    fn exponential_family_components() {
        let geo = exp_geo(2.0);
        assert!((geo.g[0][0] - 0.25).abs() < 1e-15);
        assert!((geo.gamma_hat[0][0][0] + 0.5).abs() < 1e-13);
        assert!((geo.k[0][0][0] - 0.5).abs() < 1e-13);
        assert!((geo.c_low[0][0][0] + 2.0 / 8.0).abs() < 1e-13);
        // Γ*¹₁₁ = Γ̂ - K = -2/ξ
        assert!((geo.gamma_star[0][0][0] + 1.0).abs() < 1e-13);
        // Γ¹₁₁ = Γ̂ + K = 0
        assert!(geo.gamma[0][0][0].abs() < 1e-13);
        // curvature vanishes in dimension 1
        assert!(geo.r[0][0][0][0].abs() < 1e-13);
    }

    #[test]
    fn normal_family_components() {
        let geo = normal_geo(0.0, 1.0);
        assert!((geo.g[0][0] - 1.0).abs() < 1e-15);
        assert!((geo.g[1][1] - 2.0).abs() < 1e-15);
        // Levi-Civita: Γ̂¹₁₂ = -1/σ, Γ̂²₁₁ = 1/(2σ), Γ̂²₂₂ = -1/σ
        assert!((geo.gamma_hat[0][0][1] + 1.0).abs() < 1e-13);
        assert!((geo.gamma_hat[1][0][0] - 0.5).abs() < 1e-13);
        assert!((geo.gamma_hat[1][1][1] + 1.0).abs() < 1e-13);
        // Skewness
        assert!((geo.k[0][0][1] + 1.0).abs() < 1e-13);
        assert!((geo.k[1][0][0] + 0.5).abs() < 1e-13);
        assert!((geo.k[1][1][1] + 2.0).abs() < 1e-13);
        // Statistical Christoffels: Γ¹₁₂ = -2/σ, Γ²₂₂ = -3/σ, Γ²₁₁ = 0
        assert!((geo.gamma[0][0][1] + 2.0).abs() < 1e-13);
        assert!((geo.gamma[1][1][1] + 3.0).abs() < 1e-13);
        assert!(geo.gamma[1][0][0].abs() < 1e-13);
        // Dual: Γ*¹₁₂ = 0
        assert!(geo.gamma_star[0][0][1].abs() < 1e-13);
        // Cubic tensor at σ = 1: C₁₁₂ = 2, C₂₂₂ = 8, C₁₁₁ = C₁₂₂ = 0
        assert!((geo.c_low[0][0][1] - 2.0).abs() < 1e-13);
        assert!((geo.c_low[1][1][1] - 8.0).abs() < 1e-13);
        assert!(geo.c_low[0][0][0].abs() < 1e-13);
        assert!(geo.c_low[0][1][1].abs() < 1e-13);
        // ∇₁K¹₁₁ = 1/σ², ∇₂K²₂₂ = -4/σ²
        assert!((geo.nabla_k[0][0][0][0] - 1.0).abs() < 1e-13);
        assert!((geo.nabla_k[1][1][1][1] + 4.0).abs() < 1e-13);
        // flat statistical connection
        for l in 0..2 {
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(geo.r[l][k][i][j].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn structural_identities_normal() {
        let geo = normal_geo(0.5, 2.0);
        assert!(geo.curvature_decomposition_deviation() < 1e-9);
        assert!(geo.duality_deviation() < 1e-9);
        assert!(geo.lc_compatibility_deviation() < 1e-9);
    }

    #[test]
    fn not_statistical_is_rejected() {
        // Γ with a non-Codazzi torsion-free part: g = I, Γ¹₂₂ = 1 gives a
        // lowered skewness with K_{221} = 1 but K_{122} = 0.
        let dim = 2;
        let zero = || crate::expr::parse("0", 2, &[]).unwrap();
        let mut gexpr = vec![vec![vec![zero(); 2]; 2]; 2];
        gexpr[0][1][1] = crate::expr::parse("1", 2, &[]).unwrap();
        let metric = vec![
            vec![crate::expr::parse("1", 2, &[]).unwrap(), zero()],
            vec![zero(), crate::expr::parse("1", 2, &[]).unwrap()],
        ];
        let spec = ManifoldSpec::new(
            dim,
            vec!["x1".into(), "x2".into()],
            metric,
            SkewInput::Christoffels(gexpr),
            Signature::Riemannian,
            HashMap::new(),
        )
        .unwrap();
        match spec.geometry_at(&[0.0, 1.0]) {
            Err(GeomError::NotStatistical { .. }) => {}
            other => panic!("expected NotStatistical, got {other:?}"),
        }
    }
}
