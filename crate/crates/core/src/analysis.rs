//! Sectional and scalar curvature of the lifted metric: closed forms for
//! pure-lift planes, the orthonormal lifted frame, the per-frame sectional
//! table with its rational constants, scalar curvature by three routes,
//! the curvature-norm identity, and the constant-curvature structure
//! checker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cgbundle::{Bundle, LiftedVector, MetricParams};
use crate::error::{GeomError, Result};
use crate::statman::{BaseGeometry, ManifoldSpec, Signature};

/// Squared area of the parallelogram spanned by two lifted vectors.
pub fn q_pq(bundle: &Bundle, a: &LiftedVector, b: &LiftedVector) -> f64 {
    let aa = bundle.g_pq(a, a);
    let bb = bundle.g_pq(b, b);
    let ab = bundle.g_pq(a, b);
    aa * bb - ab * ab
}

/// Sectional curvature of the plane spanned by two lifted vectors, via the
/// defining quotient g_{p,q}(R^{p,q}(A,B)B, A) / Q_{p,q}(A,B). Works for
/// arbitrary nondegenerate planes.
pub fn sectional_pq(bundle: &Bundle, a: &LiftedVector, b: &LiftedVector) -> Result<f64> {
    let q = q_pq(bundle, a, b);
    if q <= 1e-12 {
        return Err(GeomError::DegeneratePlane { q });
    }
    let r = bundle.curvature_pq(a, b, b);
    Ok(bundle.g_pq(&r, a) / q)
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| x.abs() <= 1e-12)
}

fn check_orthonormal(bundle: &Bundle, x: &[f64], y: &[f64]) -> Result<()> {
    let geo = bundle.geo;
    let dev = (geo.gdot(x, x) - 1.0)
        .abs()
        .max((geo.gdot(y, y) - 1.0).abs())
        .max(geo.gdot(x, y).abs());
    if dev > 1e-9 {
        return Err(GeomError::NotOrthonormal {
            reason: format!("base-vector Gram deviation {dev:e}"),
        });
    }
    Ok(())
}

/// Closed-form sectional curvature for pure lifts of g-orthonormal base
/// vectors. Dispatches on the lift types of the two inputs; any other input
/// is rejected with NotOrthonormal.
pub fn sectional_closed(bundle: &Bundle, a: &LiftedVector, b: &LiftedVector) -> Result<f64> {
    let pure = |v: &LiftedVector| -> Option<(bool, Vec<f64>)> {
        if is_zero(&v.v) {
            Some((true, v.h.clone()))
        } else if is_zero(&v.h) {
            Some((false, v.v.clone()))
        } else {
            None
        }
    };
    let (ah, x) = pure(a).ok_or_else(|| GeomError::NotOrthonormal {
        reason: "first vector is not a pure lift".into(),
    })?;
    let (bh, y) = pure(b).ok_or_else(|| GeomError::NotOrthonormal {
        reason: "second vector is not a pure lift".into(),
    })?;
    check_orthonormal(bundle, &x, &y)?;
    match (ah, bh) {
        (true, true) => Ok(sectional_hh(bundle, &x, &y)),
        (true, false) => Ok(sectional_hv(bundle, &x, &y)),
        (false, true) => Ok(sectional_hv(bundle, &y, &x)),
        (false, false) => Ok(sectional_vv(bundle, &x, &y)),
    }
}

/// 𝒦_{p,q}(X^H, Y^H) for g-orthonormal X, Y.
pub fn sectional_hh(b: &Bundle, x: &[f64], y: &[f64]) -> f64 {
    let geo = b.geo;
    let u = &b.u;
    let rxyy = geo.r_map(x, y, y);
    let rxyu = geo.r_map(x, y, u);
    let kxx = geo.k_map(x, x);
    let kyy = geo.k_map(y, y);
    let kxy = geo.k_map(x, y);
    geo.gdot(&rxyy, x) + geo.gdot(&geo.nabla_k_map(y, x, y), x)
        - geo.gdot(&geo.nabla_k_map(x, y, y), x)
        + geo.gdot(&kxx, &kyy)
        - geo.gdot(&kxy, &kxy)
        - 3.0 / (4.0 * b.ap) * geo.gdot(&rxyu, &rxyu)
        - 3.0 * b.q / (4.0 * b.ap) * geo.gdot(&rxyu, u).powi(2)
}

/// 𝒦_{p,q}(X^H, Y^V) for g-orthonormal X, Y.
pub fn sectional_hv(b: &Bundle, x: &[f64], y: &[f64]) -> f64 {
    let geo = b.geo;
    let u = &b.u;
    let (p, q, al, ap, oqt) = (b.p, b.q, b.alpha, b.ap, b.oqt);
    let guy = geo.gdot(y, u);
    let yv2 = (1.0 + q * guy * guy) / ap; // g_{p,q}(Y^V, Y^V)
    let kxu = geo.k_map(x, u);
    let kxuu = geo.gdot(&kxu, u);
    let kxy = geo.k_map(x, y);
    let kyy = geo.k_map(y, y);
    let rt_uy_x = geo.rt_map(u, y, x);
    let rt_uu_x = geo.rt_map(u, u, x);
    let rt_uy = |v: &[f64]| geo.rt_map(u, y, v);
    let rt_uu = |v: &[f64]| geo.rt_map(u, u, v);
    let mut s = 0.0;
    let c = 1.0 / (4.0 * ap * ap);
    s -= c * (geo.gdot(&rt_uy(&rt_uy_x), x) + q * guy * geo.gdot(&rt_uu(&rt_uy_x), x));
    s -= c * q * guy * (geo.gdot(&rt_uy(&rt_uu_x), x) + q * guy * geo.gdot(&rt_uu(&rt_uu_x), x));
    s += kxuu * kxuu
        * (-p * (p + 2.0) / (al * al) * yv2 - q.powi(3) * guy * guy / (oqt * ap));
    s += 2.0 * p / (ap * al) * kxuu * geo.gdot(&kyy, x);
    s += geo.gdot(&geo.nabla_k_map(x, y, y), x) / ap;
    s -= p / al * yv2 * geo.gdot(&geo.nabla_k_map(x, u, u), x);
    s += 2.0 * q / ap * guy * geo.gdot(&geo.nabla_k_map(x, y, u), x);
    s -= 3.0 * q / ap * geo.gdot(&kxy, u).powi(2);
    s += 4.0 * p * q / (ap * al) * guy * kxuu * geo.gdot(&kxy, u);
    let t = geo.k_map(y, &kxy);
    let t2 = geo.k_map(x, &kyy);
    s += (geo.gdot(&t, x) - geo.gdot(&t2, x)) / ap;
    let kxu_y = geo.k_map(y, &kxu);
    let kyu = geo.k_map(y, u);
    let kyu_x = geo.k_map(x, &kyu);
    s += 2.0 * q / ap * guy * (geo.gdot(&kxu_y, x) - geo.gdot(&kyu_x, x));
    s += q * q / ap * guy * guy * geo.gdot(&kxu, &kxu);
    s += p / al * yv2 * geo.gdot(&geo.k_map(u, u), &geo.k_map(x, x));
    ap / (1.0 + q * guy * guy) * s
}

/// 𝒦_{p,q}(X^V, Y^V) for g-orthonormal X, Y.
pub fn sectional_vv(b: &Bundle, x: &[f64], y: &[f64]) -> f64 {
    let geo = b.geo;
    let u = &b.u;
    let (p, q, al, ap, tau) = (b.p, b.q, b.alpha, b.ap, b.tau);
    let a2p = ap * ap;
    let (gux, guy) = (geo.gdot(x, u), geo.gdot(y, u));
    let xv2 = (1.0 + q * gux * gux) / ap;
    let yv2 = (1.0 + q * guy * guy) / ap;
    let kuu = geo.k_map(u, u);
    let kuu2 = geo.gdot(&kuu, &kuu);
    let kxx = geo.k_map(x, x);
    let kyy = geo.k_map(y, y);
    let kxy = geo.k_map(x, y);
    let (kux, kuy) = (geo.k_map(u, x), geo.k_map(u, y));
    let mut s = 0.0;
    s -= p * p / (al * al) * kuu2 * xv2 * yv2;
    s += p / (ap * al) * (xv2 * geo.gdot(&kyy, &kuu) + yv2 * geo.gdot(&kxx, &kuu));
    s += 2.0 * p * q / (a2p * al) * (gux * geo.gdot(&kuu, &kux) + guy * geo.gdot(&kuu, &kuy));
    s += (geo.gdot(&kxy, &kxy) - geo.gdot(&kyy, &kxx)) / a2p;
    s += 2.0 * q / a2p * (gux * geo.gdot(&kxy, &kuy) + guy * geo.gdot(&kxy, &kux));
    s -= 2.0 * q / a2p * (gux * geo.gdot(&kyy, &kux) + guy * geo.gdot(&kxx, &kuy));
    s += q * q / a2p
        * (gux * gux * geo.gdot(&kuy, &kuy) + guy * guy * geo.gdot(&kux, &kux));
    s += (p * p * q * q / (al * al * a2p) * gux * guy * kuu2
        - 2.0 * p * q / (al * a2p) * geo.gdot(&kuu, &kxy)
        - 2.0 * q * q / a2p * geo.gdot(&kux, &kuy))
        * gux
        * guy;
    let sf = &b.sf;
    s -= ((tau * sf.n * al + 2.0 - p) * p - sf.n * al * al) / (al * al * ap)
        * (gux * gux + guy * guy);
    s -= (p * (sf.m * tau - 1.0) - sf.m * al) / (ap * al);
    a2p / (1.0 + q * gux * gux + q * guy * guy) * s
}

/// g-orthonormal base frame at the bundle's base point, with the first
/// vector prescribed (normalized), completed by Gram-Schmidt over the
/// coordinate directions in the given order.
pub fn base_orthonormal_frame(
    geo: &BaseGeometry,
    first: Option<&[f64]>,
    order: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if geo.signature == Signature::Pseudo {
        return Err(GeomError::PseudoRiemannianUnsupported);
    }
    let n = geo.n;
    let mut frame: Vec<Vec<f64>> = vec![];
    let mut candidates: Vec<Vec<f64>> = vec![];
    if let Some(f) = first {
        candidates.push(f.to_vec());
    }
    for &i in order {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        candidates.push(e);
    }
    for mut v in candidates {
        for f in &frame {
            let c = geo.gdot(&v, f);
            for (a, b) in v.iter_mut().zip(f) {
                *a -= c * b;
            }
        }
        let norm2 = geo.gdot(&v, &v);
        if norm2 < 1e-12 {
            continue;
        }
        let inv = 1.0 / norm2.sqrt();
        for a in &mut v {
            *a *= inv;
        }
        frame.push(v);
        if frame.len() == n {
            break;
        }
    }
    if frame.len() < n {
        return Err(GeomError::SingularMetric {
            point: geo.x.clone(),
            det: 0.0,
        });
    }
    Ok(frame)
}

/// An orthonormal frame of T_{(x,u)}TM adapted to the canonical field:
/// horizontal lifts of a base frame with e_1 = u/|u|, plus normalized
/// vertical lifts.
#[derive(Debug)]
pub struct LiftedFrame {
    /// g-orthonormal base frame, e_1 = u/|u|.
    pub base: Vec<Vec<f64>>,
    /// 2m vectors, g_{p,q}-orthonormal.
    pub lifted: Vec<LiftedVector>,
}

pub fn lifted_orthonormal_frame(bundle: &Bundle) -> Result<LiftedFrame> {
    lifted_frame_ordered(bundle, &(0..bundle.geo.n).collect::<Vec<_>>())
}

/// Same as `lifted_orthonormal_frame` with an explicit Gram-Schmidt
/// completion order (used to test reframing invariance).
pub fn lifted_frame_ordered(bundle: &Bundle, order: &[usize]) -> Result<LiftedFrame> {
    let geo = bundle.geo;
    if bundle.tau < 1e-12 {
        return Err(GeomError::ZeroFiberVector);
    }
    let base = base_orthonormal_frame(geo, Some(&bundle.u), order)?;
    let mut lifted: Vec<LiftedVector> = base.iter().map(|e| LiftedVector::horizontal(e)).collect();
    for (j, e) in base.iter().enumerate() {
        let norm2 = if j == 0 {
            bundle.oqt / bundle.ap
        } else {
            1.0 / bundle.ap
        };
        let s = 1.0 / norm2.sqrt();
        lifted.push(LiftedVector::vertical(
            &e.iter().map(|v| v * s).collect::<Vec<f64>>(),
        ));
    }
    Ok(LiftedFrame { base, lifted })
}

/// The rational constants of the frame sectional-curvature formulas,
/// obtained by specializing the mixed-plane closed forms to the canonical
/// frame (e_1 = u/|u| both horizontally and vertically). See
/// DISCREPANCIES.md for how these relate to the unnormalized displays.
#[derive(Debug, Clone, Copy)]
pub struct SectionalConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl SectionalConstants {
    pub fn new(p: f64, q: f64, tau: f64) -> SectionalConstants {
        let al = 1.0 + tau;
        let oqt = 1.0 + q * tau;
        let ap = al.powf(p);
        let a2 = (1.0 + 2.0 * q * tau) / oqt - p * tau / al;
        let sf = crate::cgbundle::ScaleFactors::new(p, q, tau);
        SectionalConstants {
            a1: -p * (p + 2.0) * tau * tau / (al * al) - (q * tau).powi(3) / (oqt * oqt)
                + 2.0 * p * tau / (al * oqt)
                - 3.0 * q * tau / oqt
                + 4.0 * p * q * tau * tau / (al * oqt),
            a2,
            a3: oqt,
            a4: -a2,
            a5: oqt / (4.0 * ap),
            b1: -(p * tau).powi(2) / (al * al)
                + p * tau / (al * oqt)
                + 2.0 * p * q * tau * tau / (al * oqt),
            b2: oqt,
            b3: p * tau / al - (1.0 + 2.0 * q * tau) / oqt,
            b4: -tau * ((tau * sf.n * al + 2.0 - p) * p - sf.n * al * al) * al.powf(p - 2.0)
                / oqt
                - (p * (sf.m * tau - 1.0) - sf.m * al) * al.powf(p - 1.0) / oqt,
        }
    }
}

/// Full 2m×2m table of sectional curvatures over the lifted orthonormal
/// frame, computed from the per-pair frame formulas. Diagonal entries are 0.
pub fn sectional_frame(bundle: &Bundle, frame: &LiftedFrame) -> Vec<Vec<f64>> {
    let geo = bundle.geo;
    let m = geo.n;
    let u = &bundle.u;
    let (p, q, al, ap) = (bundle.p, bundle.q, bundle.alpha, bundle.ap);
    let sc = SectionalConstants::new(p, q, bundle.tau);
    let e = &frame.base;
    let e1 = &e[0];
    let mut table = vec![vec![0.0; 2 * m]; 2 * m];

    let kmap = |a: &[f64], bv: &[f64]| geo.k_map(a, bv);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                table[i][j] = sectional_hh(bundle, &e[i], &e[j]);
            }
        }
        // (E_i, E_{m+1})
        let kei_e1 = kmap(&e[i], e1);
        let g_kei_e1_e1 = geo.gdot(&kei_e1, e1);
        let rt_u_e1_ei = geo.rt_map(u, e1, &e[i]);
        table[i][m] = sc.a1 * g_kei_e1_e1 * g_kei_e1_e1
            + sc.a2 * geo.gdot(&geo.nabla_k_map(&e[i], e1, e1), &e[i])
            + sc.a3 * geo.gdot(&kei_e1, &kei_e1)
            + sc.a4 * geo.gdot(&kmap(e1, e1), &kmap(&e[i], &e[i]))
            + sc.a5 * geo.gdot(&rt_u_e1_ei, &rt_u_e1_ei);
        table[m][i] = table[i][m];
        // (E_i, E_{m+j}), j >= 2
        for j in 1..m {
            let ej = &e[j];
            let rt = geo.rt_map(u, ej, &e[i]);
            let rtrt = geo.rt_map(u, ej, &rt);
            let kei_u = kmap(&e[i], u);
            let kei_uu = geo.gdot(&kei_u, u);
            let kej_ej = kmap(ej, ej);
            let kei_ej = kmap(&e[i], ej);
            let v = -0.25 / ap * geo.gdot(&rtrt, &e[i])
                - p * (p + 2.0) / (al * al) * kei_uu * kei_uu
                + 2.0 * p / al * kei_uu * geo.gdot(&kej_ej, &e[i])
                + geo.gdot(&geo.nabla_k_map(&e[i], ej, ej), &e[i])
                - p / al * geo.gdot(&geo.nabla_k_map(&e[i], u, u), &e[i])
                - 3.0 * q * geo.gdot(&kei_ej, u).powi(2)
                + geo.gdot(&kmap(ej, &kei_ej), &e[i])
                - geo.gdot(&kmap(&e[i], &kej_ej), &e[i])
                + p / al * geo.gdot(&kmap(u, u), &kmap(&e[i], &e[i]));
            table[i][m + j] = v;
            table[m + j][i] = v;
        }
    }
    let ke1_e1 = kmap(e1, e1);
    for j in 1..m {
        let kej_e1 = kmap(&e[j], e1);
        let v = sc.b1 * geo.gdot(&ke1_e1, &ke1_e1)
            + sc.b2 * geo.gdot(&kej_e1, &kej_e1)
            + sc.b3 * geo.gdot(&kmap(&e[j], &e[j]), &ke1_e1)
            + sc.b4;
        table[m][m + j] = v;
        table[m + j][m] = v;
    }
    let kuu = kmap(u, u);
    let kuu2 = geo.gdot(&kuu, &kuu);
    for i in 1..m {
        for j in 1..m {
            if i == j {
                continue;
            }
            let kei_ei = kmap(&e[i], &e[i]);
            let kej_ej = kmap(&e[j], &e[j]);
            let kei_ej = kmap(&e[i], &e[j]);
            table[m + i][m + j] = -p * p / (al * al) * kuu2
                + p / al * (geo.gdot(&kej_ej, &kuu) + geo.gdot(&kei_ei, &kuu))
                + geo.gdot(&kei_ej, &kei_ej)
                - geo.gdot(&kej_ej, &kei_ei)
                - al.powf(p - 1.0)
                    * (p * (bundle.sf.m * bundle.tau - 1.0) - bundle.sf.m * al);
        }
    }
    table
}

/// Scalar curvature of (TM, g_{p,q}) by three independent routes.
#[derive(Debug, Clone, Copy)]
pub struct ScalarReport {
    /// Closed-form expression over the lifted frame.
    pub closed: f64,
    /// Sum of frame sectional curvatures over ordered pairs.
    pub frame: f64,
    /// Double trace of the oracle curvature in induced coordinates.
    pub oracle: f64,
}

/// Closed-form scalar curvature (the assembled frame-sum expression).
pub fn scalar_closed(bundle: &Bundle, frame: &LiftedFrame) -> f64 {
    let geo = bundle.geo;
    let m = geo.n;
    let mf = m as f64;
    let u = &bundle.u;
    let (p, q, al, ap, tau) = (bundle.p, bundle.q, bundle.alpha, bundle.ap, bundle.tau);
    let sc = SectionalConstants::new(p, q, tau);
    let e = &frame.base;
    let e1 = &e[0];

    // base scalar curvature
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                s += geo.gdot(&geo.r_map(&e[i], &e[j], &e[j]), &e[i]);
            }
        }
    }
    // horizontal double sum
    for i in 0..m {
        for j in 0..m {
            let r = geo.r_map(&e[i], &e[j], u);
            let kei_ei = geo.k_map(&e[i], &e[i]);
            let kej_ej = geo.k_map(&e[j], &e[j]);
            let kei_ej = geo.k_map(&e[i], &e[j]);
            s += -3.0 / (4.0 * ap) * geo.gdot(&r, &r)
                - 3.0 * q / (4.0 * ap) * geo.gdot(&r, u).powi(2)
                + geo.gdot(&geo.nabla_k_map(&e[j], &e[i], &e[j]), &e[i])
                - geo.gdot(&geo.nabla_k_map(&e[i], &e[j], &e[j]), &e[i])
                + geo.gdot(&kei_ei, &kej_ej)
                - geo.gdot(&kei_ej, &kei_ej);
        }
    }
    // single sum with A constants and the folded mixed-sum remainders
    let kuu = geo.k_map(u, u);
    let ke1_e1 = geo.k_map(e1, e1);
    for i in 0..m {
        let kei_e1 = geo.k_map(&e[i], e1);
        let kei_u = geo.k_map(&e[i], u);
        let kei_ei = geo.k_map(&e[i], &e[i]);
        let rt = geo.rt_map(u, e1, &e[i]);
        s += 2.0
            * (sc.a1 * geo.gdot(&kei_e1, e1).powi(2)
                + (sc.a2 - tau * p / al * (mf - 1.0))
                    * geo.gdot(&geo.nabla_k_map(&e[i], e1, e1), &e[i])
                + sc.a3 * geo.gdot(&kei_e1, &kei_e1)
                + (sc.a4 + tau * p / al * (mf - 1.0)) * geo.gdot(&ke1_e1, &kei_ei)
                + sc.a5 * geo.gdot(&rt, &rt)
                - (mf - 1.0) * p * (p + 2.0) / (al * al) * geo.gdot(&kei_u, u).powi(2));
    }
    // mixed sum, j >= 2
    for i in 0..m {
        for j in 1..m {
            let kei_u = geo.k_map(&e[i], u);
            let kej_ej = geo.k_map(&e[j], &e[j]);
            let kei_ej = geo.k_map(&e[i], &e[j]);
            let rt = geo.rt_map(u, &e[j], &e[i]);
            s += 2.0
                * (-0.25 / ap * geo.gdot(&geo.rt_map(u, &e[j], &rt), &e[i])
                    + 2.0 * p / al * geo.gdot(&kei_u, u) * geo.gdot(&kej_ej, &e[i])
                    + geo.gdot(&geo.nabla_k_map(&e[i], &e[j], &e[j]), &e[i])
                    - 3.0 * q * geo.gdot(&kei_ej, u).powi(2)
                    + geo.gdot(&geo.k_map(&e[j], &kei_ej), &e[i])
                    - geo.gdot(&geo.k_map(&e[i], &kej_ej), &e[i]));
        }
    }
    // vertical sums with B constants
    for j in 1..m {
        let kej_e1 = geo.k_map(&e[j], e1);
        let kej_ej = geo.k_map(&e[j], &e[j]);
        s += 2.0 * (sc.b2 * geo.gdot(&kej_e1, &kej_e1) + sc.b3 * geo.gdot(&kej_ej, &ke1_e1));
    }
    s += 2.0 * (mf - 1.0) * sc.b1 * geo.gdot(&ke1_e1, &ke1_e1);
    s += 2.0 * (mf - 1.0) * sc.b4;
    // purely vertical double sum, i, j >= 2
    for i in 1..m {
        for j in 1..m {
            if i == j {
                continue;
            }
            let kei_ei = geo.k_map(&e[i], &e[i]);
            let kej_ej = geo.k_map(&e[j], &e[j]);
            let kei_ej = geo.k_map(&e[i], &e[j]);
            s += 2.0 * p / al * geo.gdot(&kej_ej, &kuu) + geo.gdot(&kei_ej, &kei_ej)
                - geo.gdot(&kej_ej, &kei_ei);
        }
    }
    s -= (mf - 1.0) * (mf - 2.0) * p * p / (al * al) * geo.gdot(&kuu, &kuu);
    s -= (mf - 1.0) * (mf - 2.0) * al.powf(p - 1.0)
        * (p * (bundle.sf.m * tau - 1.0) - bundle.sf.m * al);
    s
}

/// All three scalar-curvature routes at one bundle point.
pub fn scalar_pq(spec: &ManifoldSpec, x: &[f64], u: &[f64], mp: MetricParams) -> Result<ScalarReport> {
    let geo = spec.geometry_at(x)?;
    let bundle = Bundle::new(&geo, u, mp)?;
    let frame = lifted_orthonormal_frame(&bundle)?;
    let closed = scalar_closed(&bundle, &frame);
    let table = sectional_frame(&bundle, &frame);
    let mut frame_sum = 0.0;
    for a in 0..2 * geo.n {
        for b in 0..2 * geo.n {
            if a != b {
                frame_sum += table[a][b];
            }
        }
    }
    let im = crate::oracle::induced_metric_jets(spec, x, u, mp)?;
    let r = crate::oracle::oracle_curvature(&im);
    let nn = 2 * geo.n;
    // S = G^{ac} G^{bd} g(R(∂_a,∂_b)∂_d, ∂_c)
    let mut oracle = 0.0;
    for a in 0..nn {
        for b in 0..nn {
            for c in 0..nn {
                for d in 0..nn {
                    let mut low = 0.0;
                    for w in 0..nn {
                        low += im.g[c][w] * r[w][d][a][b];
                    }
                    oracle += im.ginv[a][c] * im.ginv[b][d] * low;
                }
            }
        }
    }
    Ok(ScalarReport {
        closed,
        frame: frame_sum,
        oracle,
    })
}

/// Σ_{i,j}|R(e_i,e_j)u|² versus Σ_{i,j}|R̃(u,e_j)e_i|² over a g-orthonormal
/// base frame; returns (lhs, rhs, |lhs − rhs|).
pub fn norm_identity_check(geo: &BaseGeometry, u: &[f64]) -> Result<(f64, f64, f64)> {
    let frame = base_orthonormal_frame(geo, None, &(0..geo.n).collect::<Vec<_>>())?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for ei in &frame {
        for ej in &frame {
            let r = geo.r_map(ei, ej, u);
            lhs += geo.gdot(&r, &r);
            let rt = geo.rt_map(u, ej, ei);
            rhs += geo.gdot(&rt, &rt);
        }
    }
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Structural norms and flags underlying the constant-curvature criterion:
/// the lifted metric has constant sectional curvature iff it is flat, which
/// requires a flat base, parallel skewness, commuting skewness operators,
/// and p = q = 0.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub max_r: f64,
    pub max_r_hat: f64,
    pub max_nabla_k: f64,
    pub max_k_commutator: f64,
    pub codazzi_ok: bool,
    pub fibers_totally_geodesic: bool,
    pub flow_incompressible: bool,
    pub is_sasaki: bool,
    pub constant_curvature_candidate: bool,
    /// Max |R^{p,q}| over bundle spot checks, populated when the candidate
    /// flag is set.
    pub max_lifted_curvature: Option<f64>,
    pub tolerance: f64,
}

pub fn constant_curvature_check(
    spec: &ManifoldSpec,
    mp: MetricParams,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<StructureReport> {
    let tol = 1e-8;
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_r: f64 = 0.0;
    let mut max_r_hat: f64 = 0.0;
    let mut max_nk: f64 = 0.0;
    let mut max_comm: f64 = 0.0;
    let mut max_defect: f64 = 0.0;
    let mut max_div: f64 = 0.0;
    let mut bundles: Vec<(Vec<f64>, Vec<f64>)> = vec![];
    for x in points {
        let geo = spec.geometry_at(x)?;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        max_r = max_r.max(geo.r[l][k][i][j].abs());
                        max_r_hat = max_r_hat.max(geo.r_hat[l][k][i][j].abs());
                        // [K_i, K_j]^l_k
                        let mut c = 0.0;
                        for s in 0..n {
                            c += geo.k[l][i][s] * geo.k[s][j][k] - geo.k[l][j][s] * geo.k[s][i][k];
                        }
                        max_comm = max_comm.max(c.abs());
                        for a in 0..n {
                            max_nk = max_nk.max(geo.nabla_k[a][l][k][i].abs());
                        }
                    }
                }
            }
        }
        // fiber-vector samples for the bundle-level flags
        for _ in 0..3 {
            let mut u: Vec<f64>;
            loop {
                u = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 2.0 {
                    for v in &mut u {
                        *v *= 2.0 / norm;
                    }
                }
                if 1.0 + mp.q * geo.gdot(&u, &u) > 0.1 {
                    break;
                }
            }
            let b = Bundle::new(&geo, &u, mp)?;
            max_div = max_div.max(b.geodesic_flow_divergence().abs());
            for i in 0..n {
                for j in 0..n {
                    let mut ei = vec![0.0; n];
                    let mut ej = vec![0.0; n];
                    ei[i] = 1.0;
                    ej[j] = 1.0;
                    let d = b.totally_geodesic_defect(&ei, &ej);
                    max_defect = max_defect.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                }
            }
            bundles.push((x.clone(), u));
        }
    }
    let is_sasaki = mp.p == 0.0 && mp.q == 0.0;
    let candidate =
        max_r <= tol && max_r_hat <= tol && max_nk <= tol && max_comm <= tol && is_sasaki;
    let max_lifted_curvature = if candidate {
        let mut worst: f64 = 0.0;
        for (x, u) in &bundles {
            let geo = spec.geometry_at(x)?;
            let b = Bundle::new(&geo, u, mp)?;
            let mut e = vec![vec![0.0; n]; n];
            for (i, row) in e.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for (ah, bh, ch) in [
                            (true, true, true),
                            (true, true, false),
                            (true, false, true),
                            (true, false, false),
                            (false, false, true),
                            (false, false, false),
                        ] {
                            let lift = |h: bool, v: &Vec<f64>| {
                                if h {
                                    LiftedVector::horizontal(v)
                                } else {
                                    LiftedVector::vertical(v)
                                }
                            };
                            let r = b.curvature_pq(
                                &lift(ah, &e[i]),
                                &lift(bh, &e[j]),
                                &lift(ch, &e[k]),
                            );
                            worst = worst.max(r.max_abs());
                        }
                    }
                }
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok(StructureReport {
        max_r,
        max_r_hat,
        max_nabla_k: max_nk,
        max_k_commutator: max_comm,
        codazzi_ok: true,
        fibers_totally_geodesic: max_defect <= tol,
        flow_incompressible: max_div <= tol,
        is_sasaki,
        constant_curvature_candidate: candidate,
        max_lifted_curvature,
        tolerance: tol,
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
    fn q_displays_for_orthonormal_pairs() {
        let spec = model("normal");
        let geo = spec.geometry_at(&[0.0, 1.0]).unwrap();
        let u = [0.7, -0.3];
        for &(p, q) in &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.0)] {
            let b = Bundle::new(&geo, &u, MetricParams { p, q }).unwrap();
            // g = diag(1, 2) at σ=1: orthonormal pair
            let x = [1.0, 0.0];
            let y = [0.0, 1.0 / 2.0f64.sqrt()];
            let (gux, guy) = (geo.gdot(&x, &u), geo.gdot(&y, &u));
            let xh = LiftedVector::horizontal(&x);
            let yh = LiftedVector::horizontal(&y);
            let xv = LiftedVector::vertical(&x);
            let yv = LiftedVector::vertical(&y);
            assert!((q_pq(&b, &xh, &yh) - 1.0).abs() <= 1e-12);
            let want = (1.0 + q * guy * guy) / b.ap;
            assert!((q_pq(&b, &xh, &yv) - want).abs() <= 1e-12);
            let want = (1.0 + q * gux * gux + q * guy * guy) / (b.ap * b.ap);
            assert!((q_pq(&b, &xv, &yv) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn closed_sectional_matches_general_route() {
        let spec = model("normal");
        let geo = spec.geometry_at(&[0.2, 1.3]).unwrap();
        let u = [0.8, 0.4];
        let x = {
            let s = geo.gdot(&[1.0, 0.0], &[1.0, 0.0]).sqrt();
            [1.0 / s, 0.0]
        };
        // complete to g-orthonormal pair
        let mut y = vec![0.0, 1.0];
        let c = geo.gdot(&y, &x);
        y[0] -= c * x[0];
        y[1] -= c * x[1];
        let s = geo.gdot(&y, &y).sqrt();
        y[0] /= s;
        y[1] /= s;
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0), (1.5, -0.2)] {
            let b = Bundle::new(&geo, &u, MetricParams { p, q }).unwrap();
            for (a, bb) in [
                (LiftedVector::horizontal(&x), LiftedVector::horizontal(&y)),
                (LiftedVector::horizontal(&x), LiftedVector::vertical(&y)),
                (LiftedVector::vertical(&x), LiftedVector::horizontal(&y)),
                (LiftedVector::vertical(&x), LiftedVector::vertical(&y)),
            ] {
                let general = sectional_pq(&b, &a, &bb).unwrap();
                let closed = sectional_closed(&b, &a, &bb).unwrap();
                assert!(
                    (general - closed).abs() <= 1e-7 * general.abs().max(1.0),
                    "p={p} q={q}: general {general} closed {closed}"
                );
            }
        }
    }

    #[test]
    fn frame_is_orthonormal_and_table_matches_general() {
        let spec = model("normal");
        let geo = spec.geometry_at(&[0.1, 0.9]).unwrap();
        let u = [0.5, 0.6];
        for &(p, q) in &[(1.0, 1.0), (0.5, 2.0), (0.0, 0.0)] {
            let b = Bundle::new(&geo, &u, MetricParams { p, q }).unwrap();
            let frame = lifted_orthonormal_frame(&b).unwrap();
            for (a, ea) in frame.lifted.iter().enumerate() {
                for (c, ec) in frame.lifted.iter().enumerate() {
                    let want = if a == c { 1.0 } else { 0.0 };
                    let got = b.g_pq(ea, ec);
                    assert!((got - want).abs() <= 1e-10, "({a},{c}): {got}");
                }
            }
            let table = sectional_frame(&b, &frame);
            for a in 0..4 {
                for c in 0..4 {
                    if a == c {
                        continue;
                    }
                    let general = sectional_pq(&b, &frame.lifted[a], &frame.lifted[c]).unwrap();
                    assert!(
                        (table[a][c] - general).abs() <= 1e-7 * general.abs().max(1.0),
                        "p={p} q={q} ({a},{c}): table {} general {general}",
                        table[a][c]
                    );
                }
            }
        }
    }

    #[test]
    fn constants_at_tau_zero() {
        for &(p, q) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 0.1)] {
            let sc = SectionalConstants::new(p, q, 0.0);
            assert!((sc.a3 - 1.0).abs() <= 1e-12);
            assert!((sc.a5 - 0.25).abs() <= 1e-12);
            assert!((sc.b2 - 1.0).abs() <= 1e-12);
            assert!(sc.b4.is_finite());
        }
    }

    #[test]
    fn scalar_three_routes_agree() {
        let spec = model("normal");
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0)] {
            let rep = scalar_pq(&spec, &[0.0, 1.0], &[0.5, 0.3], MetricParams { p, q }).unwrap();
            let scale = rep.oracle.abs().max(1.0);
            assert!(
                (rep.closed - rep.frame).abs() <= 1e-6 * scale,
                "p={p} q={q}: {rep:?}"
            );
            assert!(
                (rep.frame - rep.oracle).abs() <= 1e-6 * scale,
                "p={p} q={q}: {rep:?}"
            );
        }
    }

    #[test]
    fn scalar_reframing_invariance() {
        let spec = model("normal");
        let geo = spec.geometry_at(&[0.3, 1.2]).unwrap();
        let b = Bundle::new(&geo, &[0.4, 0.7], MetricParams { p: 1.0, q: 1.0 }).unwrap();
        let f1 = lifted_frame_ordered(&b, &[0, 1]).unwrap();
        let f2 = lifted_frame_ordered(&b, &[1, 0]).unwrap();
        let sum = |f: &LiftedFrame| {
            let t = sectional_frame(&b, f);
            let mut s = 0.0;
            for a in 0..4 {
                for c in 0..4 {
                    if a != c {
                        s += t[a][c];
                    }
                }
            }
            s
        };
        assert!((sum(&f1) - sum(&f2)).abs() <= 1e-9);
    }

    #[test]
    fn norm_identity_models() {
        for name in ["normal", "exponential", "euclid_deformed_ab"] {
            let spec = model(name);
            let x: Vec<f64> = match spec.dim {
                1 => vec![1.0],
                _ => vec![0.0, 1.0],
            };
            let geo = spec.geometry_at(&x).unwrap();
            let u: Vec<f64> = (0..spec.dim).map(|i| 1.0 - 0.3 * i as f64).collect();
            let (_, _, dev) = norm_identity_check(&geo, &u).unwrap();
            assert!(dev <= 1e-9, "{name}: {dev}");
        }
    }

    #[test]
    fn sasaki_flat_is_constant_curvature_candidate() {
        let spec = model("sasaki_flat");
        let rep = constant_curvature_check(
            &spec,
            MetricParams { p: 0.0, q: 0.0 },
            &[vec![0.0, 0.0], vec![0.5, -0.3]],
            11,
        )
        .unwrap();
        assert!(rep.constant_curvature_candidate, "{rep:?}");
        assert!(rep.max_lifted_curvature.unwrap() <= 1e-9, "{rep:?}");
        assert!(rep.fibers_totally_geodesic);
        assert!(rep.flow_incompressible);
    }

    #[test]
    fn normal_is_not_candidate() {
        let spec = model("normal");
        let rep = constant_curvature_check(
            &spec,
            MetricParams { p: 0.0, q: 0.0 },
            &[vec![0.0, 1.0]],
            11,
        )
        .unwrap();
        assert!(!rep.constant_curvature_candidate);
        assert!(rep.max_nabla_k > 1e-8);
    }

    #[test]
    fn pseudo_frame_rejected() {
        let spec = models::pseudo_offdiag("3").unwrap();
        let geo = spec.geometry_at(&[0.2, 0.4]).unwrap();
        let b = Bundle::new(&geo, &[1.0, 1.0], MetricParams { p: 1.0, q: 1.0 }).unwrap();
        match lifted_orthonormal_frame(&b) {
            Err(GeomError::PseudoRiemannianUnsupported) => {}
            other => panic!("expected PseudoRiemannianUnsupported, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_plane_rejected() {
        let spec = model("normal");
        let geo = spec.geometry_at(&[0.0, 1.0]).unwrap();
        let b = Bundle::new(&geo, &[1.0, 0.0], MetricParams { p: 1.0, q: 1.0 }).unwrap();
        let a = LiftedVector::horizontal(&[1.0, 0.0]);
        match sectional_pq(&b, &a, &a) {
            Err(GeomError::DegeneratePlane { .. }) => {}
            other => panic!("expected DegeneratePlane, got {other:?}"),
        }
    }
}
