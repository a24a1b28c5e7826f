//! Brute-force oracle: the lifted metric written out in induced bundle
//! coordinates (x, u) with exact 2n-variable jets, its Christoffel symbols
//! and curvature by the raw coordinate formulas, the change of frame back
//! to the adapted basis, and randomized cross-validation of every closed
//! form against the oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cgbundle::{adapted_frame, Bundle, MetricParams};
use crate::error::{GeomError, Result};
use crate::jet::{table, Jet};
use crate::linalg::Mat;
use crate::statman::{BaseGeometry, ManifoldSpec, SkewInput};

pub type T3 = Vec<Vec<Vec<f64>>>;
pub type T4 = Vec<Vec<Vec<Vec<f64>>>>;

/// The induced metric G_{AB} on TM at one point, with order-2 jets in the
/// 2n bundle variables, plus the base Christoffel jets needed downstream.
pub struct InducedMetric {
    /// Base dimension n (the bundle has 2n coordinates).
    pub n: usize,
    /// Bundle point (x, u).
    pub point: Vec<f64>,
    pub g: Mat,
    pub ginv: Mat,
    /// Order-2 jets of G_{AB} in the 2n variables.
    pub jets: Vec<Vec<Jet>>,
    /// Statistical Christoffels Γ^k_{ij}(x) as order-2 bundle jets.
    pub gamma_base_jets: Vec<Vec<Vec<Jet>>>,
    /// Max deviation of G from F^{-T} diag(g, h) F^{-1} evaluated
    /// numerically; an internal consistency certificate.
    pub frame_consistency: f64,
}

/// Gauss-Jordan inversion of a square matrix of jets (any shared order).
/// Pivots on the largest value part; fails on a numerically zero pivot.
fn jet_mat_inverse(m: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = m.len();
    let t = m[0][0].table.clone();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&t, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].value().abs() > a[piv][col].value().abs() {
                piv = r;
            }
        }
        if a[piv][col].value().abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let inv_piv = a[col][col].recip();
        for j in 0..n {
            a[col][j] = &a[col][j] * &inv_piv;
            inv[col][j] = &inv[col][j] * &inv_piv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            if f.value() == 0.0 && f.c.iter().all(|&v| v == 0.0) {
                continue;
            }
            for j in 0..n {
                a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
            }
        }
    }
    Some(inv)
}

/// Determinant of a square jet matrix by elimination.
fn jet_det(m: &[Vec<Jet>]) -> Jet {
    let n = m.len();
    let t = m[0][0].table.clone();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut det = Jet::constant(&t, 1.0);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].value().abs() > a[piv][col].value().abs() {
                piv = r;
            }
        }
        if a[piv][col].value().abs() == 0.0 {
            return Jet::constant(&t, 0.0);
        }
        if piv != col {
            a.swap(col, piv);
            det = det.scale(-1.0);
        }
        det = &det * &a[col][col];
        let inv_piv = a[col][col].recip();
        for r in col + 1..n {
            let f = &a[r][col] * &inv_piv;
            for j in col..n {
                a[r][j] = &a[r][j] - &(&f * &a[col][j]);
            }
        }
    }
    det
}

/// Evaluate the induced metric of g_{p,q} at (x, u) with exact order-2 jets
/// in all 2n bundle variables.
pub fn induced_metric_jets(
    spec: &ManifoldSpec,
    x: &[f64],
    u: &[f64],
    mp: MetricParams,
) -> Result<InducedMetric> {
    let n = spec.dim;
    let nn = 2 * n;
    let t3 = table(nn, 3);
    let t2 = table(nn, 2);

    // base coordinates as bundle jets (order 3 for the metric, so the
    // Christoffels retain exact order-2 jets)
    let xj3: Vec<Jet> = (0..n).map(|i| Jet::variable(&t3, i, x[i])).collect();
    let mut g3 = vec![vec![]; n];
    for i in 0..n {
        for j in 0..n {
            g3[i].push(spec.metric[i][j].eval_jet(&t3, &xj3, &spec.params)?);
        }
    }
    let g_base: Mat = (0..n).map(|i| (0..n).map(|j| g3[i][j].value()).collect()).collect();
    let det = crate::linalg::det(&g_base);
    if det.abs() < 1e-14 {
        return Err(GeomError::SingularMetric {
            point: x.to_vec(),
            det,
        });
    }

    let ginv3 = jet_mat_inverse(&g3).ok_or(GeomError::SingularMetric {
        point: x.to_vec(),
        det,
    })?;
    let ginv2: Vec<Vec<Jet>> = ginv3
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(2)).collect())
        .collect();
    let g2: Vec<Vec<Jet>> = g3
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(2)).collect())
        .collect();

    // Levi-Civita Christoffels as order-2 bundle jets
    let dg: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|l| {
            (0..n)
                .map(|i| (0..n).map(|j| g3[i][j].derivative(l)).collect())
                .collect()
        })
        .collect();
    let mut gamma_hat = vec![vec![vec![]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = Jet::constant(&t2, 0.0);
                for l in 0..n {
                    let term = &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j];
                    s = &s + &(&ginv2[k][l] * &term);
                }
                gamma_hat[k][i].push(s.scale(0.5));
            }
        }
    }

    // statistical Christoffels Γ = Γ̂ + K (or given directly)
    let xj2: Vec<Jet> = (0..n).map(|i| Jet::variable(&t2, i, x[i])).collect();
    let mut gamma = vec![vec![vec![]; n]; n];
    match &spec.skew {
        SkewInput::Christoffels(c) => {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        gamma[k][i].push(c[k][i][j].eval_jet(&t2, &xj2, &spec.params)?);
                    }
                }
            }
        }
        SkewInput::Skewness(kx) => {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let kj = kx[k][i][j].eval_jet(&t2, &xj2, &spec.params)?;
                        gamma[k][i].push(&gamma_hat[k][i][j] + &kj);
                    }
                }
            }
        }
    }

    // fiber coordinates and the lifted-metric scalars
    let uj: Vec<Jet> = (0..n).map(|i| Jet::variable(&t2, n + i, u[i])).collect();
    let gdot = |a: &[Jet], b: &[Jet]| -> Jet {
        let mut s = Jet::constant(&t2, 0.0);
        for i in 0..n {
            for j in 0..n {
                s = &s + &(&(&g2[i][j] * &a[i]) * &b[j]);
            }
        }
        s
    };
    let tau = gdot(&uj, &uj);
    let oqt = 1.0 + mp.q * tau.value();
    if oqt <= 1e-10 {
        return Err(GeomError::OutsideBMq { value: oqt });
    }
    let alpha = &tau + &Jet::constant(&t2, 1.0);
    let ap_inv = alpha.powf(-mp.p);

    // w_i = u^r Γ^k_{ir} ∂_k, the vertical leg of ∂_i in the adapted frame
    let w: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let mut s = Jet::constant(&t2, 0.0);
                    for r in 0..n {
                        s = &s + &(&gamma[k][i][r] * &uj[r]);
                    }
                    s
                })
                .collect()
        })
        .collect();

    // h(a, b) = α^{-p}(g(a,b) + q g(a,u)g(b,u)) on vertical legs
    let h = |a: &[Jet], b: &[Jet]| -> Jet {
        let gab = gdot(a, b);
        let gau = gdot(a, &uj);
        let gbu = gdot(b, &uj);
        let inner = &gab + &(&gau * &gbu).scale(mp.q);
        &ap_inv * &inner
    };

    let unit: Vec<Vec<Jet>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| Jet::constant(&t2, if k == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();

    let mut jets: Vec<Vec<Jet>> = vec![vec![Jet::constant(&t2, 0.0); nn]; nn];
    for i in 0..n {
        for j in 0..n {
            jets[i][j] = &g2[i][j] + &h(&w[i], &w[j]);
            let cross = h(&w[i], &unit[j]);
            jets[i][n + j] = cross.clone();
            jets[n + j][i] = cross;
            jets[n + i][n + j] = h(&unit[i], &unit[j]);
        }
    }

    let g: Mat = (0..nn)
        .map(|a| (0..nn).map(|b| jets[a][b].value()).collect())
        .collect();
    let ginv = crate::linalg::invert(&g).ok_or(GeomError::SingularMetric {
        point: [x, u].concat(),
        det: crate::linalg::det(&g),
    })?;

    // consistency certificate: G == F^{-T} diag(g, h) F^{-1} at values
    let geo = spec.geometry_at(x)?;
    let (_, finv) = adapted_frame(&geo, u);
    let mut block = vec![vec![0.0; nn]; nn];
    for i in 0..n {
        for j in 0..n {
            block[i][j] = g_base[i][j];
            block[n + i][n + j] = jets[n + i][n + j].value();
        }
    }
    let mut frame_consistency: f64 = 0.0;
    for a in 0..nn {
        for b in 0..nn {
            let mut s = 0.0;
            for c in 0..nn {
                for d in 0..nn {
                    s += finv[c][a] * block[c][d] * finv[d][b];
                }
            }
            frame_consistency = frame_consistency.max((s - g[a][b]).abs());
        }
    }

    Ok(InducedMetric {
        n,
        point: [x, u].concat(),
        g,
        ginv,
        jets,
        gamma_base_jets: gamma,
        frame_consistency,
    })
}

/// Christoffel symbols of the induced metric as order-1 bundle jets.
fn christoffel_jets(im: &InducedMetric) -> Vec<Vec<Vec<Jet>>> {
    let nn = 2 * im.n;
    let g1: Vec<Vec<Jet>> = im
        .jets
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(1)).collect())
        .collect();
    let ginv1 = jet_mat_inverse(&g1).expect("induced metric invertible");
    let dg: Vec<Vec<Vec<Jet>>> = (0..nn)
        .map(|a| {
            (0..nn)
                .map(|b| (0..nn).map(|c| im.jets[b][c].derivative(a)).collect())
                .collect()
        })
        .collect();
    (0..nn)
        .map(|a| {
            (0..nn)
                .map(|b| {
                    (0..nn)
                        .map(|c| {
                            let mut s = Jet::constant(&g1[0][0].table, 0.0);
                            for d in 0..nn {
                                let term = &(&dg[b][c][d] + &dg[c][b][d]) - &dg[d][b][c];
                                s = &s + &(&ginv1[a][d] * &term);
                            }
                            s.scale(0.5)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Γ̄^A_{BC} of the induced metric, values only; indexed [A][B][C].
pub fn oracle_christoffels(im: &InducedMetric) -> T3 {
    christoffel_jets(im)
        .iter()
        .map(|p| {
            p.iter()
                .map(|r| r.iter().map(|j| j.value()).collect())
                .collect()
        })
        .collect()
}

/// Curvature of the induced metric, `ro[A][B][C][D] = R̄^A_{BCD}` with
/// `R̄(∂_C, ∂_D)∂_B = R̄^A_{BCD} ∂_A` (the crate-wide convention).
pub fn oracle_curvature(im: &InducedMetric) -> T4 {
    let nn = 2 * im.n;
    let gj = christoffel_jets(im);
    let mut r = vec![vec![vec![vec![0.0; nn]; nn]; nn]; nn];
    for a in 0..nn {
        for b in 0..nn {
            for c in 0..nn {
                for d in 0..nn {
                    let mut s = gj[a][d][b].d1(c) - gj[a][c][b].d1(d);
                    for e in 0..nn {
                        s += gj[a][c][e].value() * gj[e][d][b].value()
                            - gj[a][d][e].value() * gj[e][c][b].value();
                    }
                    r[a][b][c][d] = s;
                }
            }
        }
    }
    r
}

/// Structural sanity of an oracle curvature tensor: max deviation from
/// antisymmetry in the last pair, pair symmetry of the lowered tensor, and
/// the first Bianchi identity.
pub fn oracle_curvature_invariants(im: &InducedMetric, r: &T4) -> (f64, f64, f64) {
    let nn = 2 * im.n;
    let mut antisym: f64 = 0.0;
    let mut bianchi: f64 = 0.0;
    let mut low = vec![vec![vec![vec![0.0; nn]; nn]; nn]; nn];
    for w in 0..nn {
        for b in 0..nn {
            for c in 0..nn {
                for d in 0..nn {
                    let mut s = 0.0;
                    for a in 0..nn {
                        s += im.g[w][a] * r[a][b][c][d];
                    }
                    low[w][b][c][d] = s;
                }
            }
        }
    }
    let mut pair: f64 = 0.0;
    for a in 0..nn {
        for b in 0..nn {
            for c in 0..nn {
                for d in 0..nn {
                    antisym = antisym.max((r[a][b][c][d] + r[a][b][d][c]).abs());
                    bianchi = bianchi
                        .max((r[a][b][c][d] + r[a][c][d][b] + r[a][d][b][c]).abs());
                    pair = pair.max((low[a][b][c][d] - low[d][c][b][a]).abs());
                }
            }
        }
    }
    (antisym, pair, bianchi)
}

/// Transform oracle connection coefficients to the adapted frame:
/// `C^γ_{αβ} = (F^{-1})^γ_C (E_α(F^C_β) + F^A_α F^B_β Γ̄^C_{AB})`.
pub fn to_adapted_connection(geo: &BaseGeometry, u: &[f64], gammabar: &T3) -> T3 {
    let n = geo.n;
    let nn = 2 * n;
    let (f, finv) = adapted_frame(geo, u);
    // ∂_A F^C_β: only the block F^{n+k}_i = -u^r Γ^k_{ir} is non-constant
    let df = |a: usize, cc: usize, beta: usize| -> f64 {
        if cc < n || beta >= n {
            return 0.0;
        }
        let k = cc - n;
        let i = beta;
        if a < n {
            let mut s = 0.0;
            for r in 0..n {
                s -= u[r] * geo.gamma_jets[k][i][r].d1(a);
            }
            s
        } else {
            -geo.gamma[k][i][a - n]
        }
    };
    let mut out = vec![vec![vec![0.0; nn]; nn]; nn];
    for alpha in 0..nn {
        for beta in 0..nn {
            for gamma in 0..nn {
                let mut s = 0.0;
                for c in 0..nn {
                    let mut inner = 0.0;
                    for a in 0..nn {
                        if f[a][alpha] == 0.0 {
                            continue;
                        }
                        inner += f[a][alpha] * df(a, c, beta);
                        for b in 0..nn {
                            if f[b][beta] != 0.0 {
                                inner += f[a][alpha] * f[b][beta] * gammabar[c][a][b];
                            }
                        }
                    }
                    s += finv[gamma][c] * inner;
                }
                out[alpha][beta][gamma] = s;
            }
        }
    }
    out
}

/// Transform oracle curvature to the adapted frame (purely tensorial).
/// Returns `ra[γ][β][α1][α2]` with `R(E_{α1}, E_{α2})E_β = ra^γ E_γ`.
pub fn to_adapted_curvature(geo: &BaseGeometry, u: &[f64], rbar: &T4) -> T4 {
    let n = geo.n;
    let nn = 2 * n;
    let (f, finv) = adapted_frame(geo, u);
    // contract one index at a time to stay O(n^5)
    let mut t1 = vec![vec![vec![vec![0.0; nn]; nn]; nn]; nn];
    for g in 0..nn {
        for b in 0..nn {
            for c in 0..nn {
                for d in 0..nn {
                    let mut s = 0.0;
                    for a in 0..nn {
                        s += finv[g][a] * rbar[a][b][c][d];
                    }
                    t1[g][b][c][d] = s;
                }
            }
        }
    }
    let contract = |t: &T4, slot: usize| -> T4 {
        let mut out = vec![vec![vec![vec![0.0; nn]; nn]; nn]; nn];
        for g in 0..nn {
            for b in 0..nn {
                for c in 0..nn {
                    for d in 0..nn {
                        let mut s = 0.0;
                        for e in 0..nn {
                            let v = match slot {
                                1 => t[g][e][c][d],
                                2 => t[g][b][e][d],
                                _ => t[g][b][c][e],
                            };
                            let fr = match slot {
                                1 => f[e][b],
                                2 => f[e][c],
                                _ => f[e][d],
                            };
                            s += v * fr;
                        }
                        out[g][b][c][d] = s;
                    }
                }
            }
        }
        out
    };
    let t2 = contract(&t1, 1);
    let t3 = contract(&t2, 2);
    contract(&t3, 3)
}

/// Numerical divergence of the geodesic spray ξ^A = (u^k, -u^i u^r Γ^k_{ir})
/// with respect to the induced volume: div ξ = |G|^{-1/2} ∂_A(|G|^{1/2} ξ^A).
pub fn oracle_divergence(im: &InducedMetric) -> f64 {
    let n = im.n;
    let nn = 2 * n;
    let g1: Vec<Vec<Jet>> = im
        .jets
        .iter()
        .map(|row| row.iter().map(|j| j.truncate(1)).collect())
        .collect();
    let t1 = g1[0][0].table.clone();
    let sqrtdet = jet_det(&g1).abs().sqrt();
    let uj: Vec<Jet> = (0..n)
        .map(|i| Jet::variable(&t1, n + i, im.point[n + i]))
        .collect();
    let mut div = 0.0;
    for a in 0..nn {
        let xi = if a < n {
            uj[a].clone()
        } else {
            let k = a - n;
            let mut s = Jet::constant(&t1, 0.0);
            for i in 0..n {
                for r in 0..n {
                    s = &s - &(&(&im.gamma_base_jets[k][i][r].truncate(1) * &uj[i]) * &uj[r]);
                }
            }
            s
        };
        div += (&sqrtdet * &xi).d1(a);
    }
    div / sqrtdet.value()
}

/// Deviation record for one compared block.
#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: &'static str,
    pub max_abs: f64,
    pub max_rel: f64,
    pub worst_x: Vec<f64>,
    pub worst_u: Vec<f64>,
}

#[derive(Debug)]
pub struct CrossValidationReport {
    pub blocks: Vec<BlockReport>,
    pub samples: usize,
    pub max_rel: f64,
    pub frame_consistency: f64,
}

const CONN_BLOCKS: [&str; 4] = ["conn HH", "conn HV", "conn VH", "conn VV"];
const CURV_BLOCKS: [&str; 12] = [
    "curv HHH->H",
    "curv HHH->V",
    "curv HHV->H",
    "curv HHV->V",
    "curv HVH->H",
    "curv HVH->V",
    "curv HVV->H",
    "curv HVV->V",
    "curv VVH->H",
    "curv VVH->V",
    "curv VVV->H",
    "curv VVV->V",
];

struct SampleDev {
    // per block: (max_abs, max_rel)
    dev: Vec<(f64, f64)>,
    frame_consistency: f64,
}

fn rel(closed: f64, oracle: f64) -> f64 {
    (closed - oracle).abs() / 1.0f64.max(closed.abs()).max(oracle.abs())
}

fn compare_sample(
    spec: &ManifoldSpec,
    mp: MetricParams,
    x: &[f64],
    u: &[f64],
) -> Result<SampleDev> {
    let n = spec.dim;
    let geo = spec.geometry_at(x)?;
    let bundle = Bundle::new(&geo, u, mp)?;
    let im = induced_metric_jets(spec, x, u, mp)?;
    let gammabar = oracle_christoffels(&im);
    let rbar = oracle_curvature(&im);
    let conn_o = to_adapted_connection(&geo, u, &gammabar);
    let curv_o = to_adapted_curvature(&geo, u, &rbar);
    let conn_c = bundle.nabla_pq_coeffs();

    let mut dev = vec![(0.0f64, 0.0f64); 16];
    for alpha in 0..2 * n {
        for beta in 0..2 * n {
            let block = match (alpha < n, beta < n) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            for gamma in 0..2 * n {
                let (c, o) = (conn_c[alpha][beta][gamma], conn_o[alpha][beta][gamma]);
                dev[block].0 = dev[block].0.max((c - o).abs());
                dev[block].1 = dev[block].1.max(rel(c, o));
            }
        }
    }

    let mut e = vec![vec![0.0; n]; n];
    for (i, row) in e.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    // block index 4.. follows CURV_BLOCKS order
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (ei, ej, ek) = (&e[i], &e[j], &e[k]);
                let comp: [(usize, Vec<f64>, usize, usize, usize, bool); 12] = [
                    (4, bundle.curv_hhh_h(ei, ej, ek), i, j, k, false),
                    (5, bundle.curv_hhh_v(ei, ej, ek), i, j, k, true),
                    (6, bundle.curv_hhv_h(ei, ej, ek), i, j, k + n, false),
                    (7, bundle.curv_hhv_v(ei, ej, ek), i, j, k + n, true),
                    (8, bundle.curv_hvh_h(ei, ej, ek), i, j + n, k, false),
                    (9, bundle.curv_hvh_v(ei, ej, ek), i, j + n, k, true),
                    (10, bundle.curv_hvv_h(ei, ej, ek), i, j + n, k + n, false),
                    (11, bundle.curv_hvv_v(ei, ej, ek), i, j + n, k + n, true),
                    (12, bundle.curv_vvh_h(ei, ej, ek), i + n, j + n, k, false),
                    (13, bundle.curv_vvh_v(ei, ej, ek), i + n, j + n, k, true),
                    (14, bundle.curv_vvv_h(ei, ej, ek), i + n, j + n, k + n, false),
                    (15, bundle.curv_vvv_v(ei, ej, ek), i + n, j + n, k + n, true),
                ];
                for (block, closed, a1, a2, b, vertical) in comp {
                    for l in 0..n {
                        let gamma = if vertical { l + n } else { l };
                        // curv_o[γ][β][α1][α2]: R(E_{α1},E_{α2})E_β
                        let o = curv_o[gamma][b][a1][a2];
                        let c = closed[l];
                        dev[block].0 = dev[block].0.max((c - o).abs());
                        dev[block].1 = dev[block].1.max(rel(c, o));
                    }
                }
            }
        }
    }

    Ok(SampleDev {
        dev,
        frame_consistency: im.frame_consistency,
    })
}

/// Compare every closed-form connection block and curvature component
/// against the induced-coordinate oracle over a deterministic seeded cloud
/// of fiber vectors above the given base points.
pub fn cross_validate(
    spec: &ManifoldSpec,
    mp: MetricParams,
    points: &[Vec<f64>],
    fibers_per_point: usize,
    seed: u64,
) -> Result<CrossValidationReport> {
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for x in points {
        let geo = spec.geometry_at(x)?;
        for _ in 0..fibers_per_point {
            // rejection-sample an admissible fiber vector with ‖u‖ <= 2
            let mut u;
            let mut tries = 0;
            loop {
                u = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
                let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 2.0 {
                    for v in &mut u {
                        *v *= 2.0 / norm;
                    }
                }
                let tau = geo.gdot(&u, &u);
                // alpha must stay positive as well: the vertical block
                // carries alpha^{-p} with real p.
                if 1.0 + mp.q * tau > 0.1 && 1.0 + tau > 0.1 {
                    break;
                }
                tries += 1;
                if tries > 1000 {
                    return Err(GeomError::OutsideBMq {
                        value: 1.0 + mp.q * tau,
                    });
                }
            }
            samples.push((x.clone(), u));
        }
    }

    let devs: Vec<Result<SampleDev>> = samples
        .par_iter()
        .map(|(x, u)| compare_sample(spec, mp, x, u))
        .collect();

    let mut blocks: Vec<BlockReport> = CONN_BLOCKS
        .iter()
        .chain(CURV_BLOCKS.iter())
        .map(|name| BlockReport {
            name,
            max_abs: 0.0,
            max_rel: 0.0,
            worst_x: vec![],
            worst_u: vec![],
        })
        .collect();
    let mut frame_consistency: f64 = 0.0;
    for (sample, dev) in samples.iter().zip(devs) {
        let dev = dev?;
        frame_consistency = frame_consistency.max(dev.frame_consistency);
        for (b, (abs, rel)) in dev.dev.iter().enumerate() {
            if *rel > blocks[b].max_rel {
                blocks[b].max_rel = *rel;
                blocks[b].worst_x = sample.0.clone();
                blocks[b].worst_u = sample.1.clone();
            }
            blocks[b].max_abs = blocks[b].max_abs.max(*abs);
        }
    }
    let max_rel = blocks.iter().fold(0.0f64, |m, b| m.max(b.max_rel));
    Ok(CrossValidationReport {
        blocks,
        samples: samples.len(),
        max_rel,
        frame_consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn model(name: &str) -> ManifoldSpec {
        models::catalog()
            .into_iter()
            .find(|m| m.name == name)
            .unwrap()
            .spec
    }

    #[test]
    fn induced_metric_consistency() {
        let spec = model("normal");
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0)] {
            let im = induced_metric_jets(&spec, &[0.0, 1.0], &[0.6, -0.4], MetricParams { p, q })
                .unwrap();
            assert!(im.frame_consistency <= 1e-12, "{}", im.frame_consistency);
        }
    }

    #[test]
    fn oracle_curvature_structure() {
        let spec = model("normal");
        let im = induced_metric_jets(
            &spec,
            &[0.3, 0.8],
            &[0.5, 0.2],
            MetricParams { p: 1.0, q: 1.0 },
        )
        .unwrap();
        let r = oracle_curvature(&im);
        let (antisym, pair, bianchi) = oracle_curvature_invariants(&im, &r);
        assert!(antisym <= 1e-8, "{antisym}");
        assert!(pair <= 1e-8, "{pair}");
        assert!(bianchi <= 1e-8, "{bianchi}");
    }

    #[test]
    fn divergence_matches_closed_form() {
        let spec = model("exponential");
        let geo = spec.geometry_at(&[1.0]).unwrap();
        for &(p, q) in &[(1.0, 1.0), (0.0, 0.0), (0.7, 0.3)] {
            let mp = MetricParams { p, q };
            let b = Bundle::new(&geo, &[1.0], mp).unwrap();
            let im = induced_metric_jets(&spec, &[1.0], &[1.0], mp).unwrap();
            let dev = (b.geodesic_flow_divergence() - oracle_divergence(&im)).abs();
            assert!(dev <= 1e-9, "p={p} q={q}: {dev}");
        }
    }

    #[test]
    fn cross_validate_exponential() {
        let spec = model("exponential");
        let report = cross_validate(
            &spec,
            MetricParams { p: 1.0, q: 1.0 },
            &[vec![1.0], vec![2.0]],
            4,
            7,
        )
        .unwrap();
        assert!(report.max_rel <= 1e-8, "{:#?}", report.blocks);
    }

    #[test]
    fn cross_validate_normal() {
        let spec = model("normal");
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0), (1.5, -0.2)] {
            let report = cross_validate(
                &spec,
                MetricParams { p, q },
                &[vec![0.0, 1.0], vec![0.5, 1.5]],
                3,
                42,
            )
            .unwrap();
            assert!(
                report.max_rel <= 1e-7,
                "p={p} q={q}: {:#?}",
                report
                    .blocks
                    .iter()
                    .filter(|b| b.max_rel > 1e-7)
                    .collect::<Vec<_>>()
            );
        }
    }
}
