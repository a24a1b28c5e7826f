//! Lifted geometry on the tangent bundle: the adapted frame, the
//! two-parameter metric family g_{p,q}, its Levi-Civita connection in
//! closed form, the twelve curvature components, the totally-geodesic
//! fiber defect, the geodesic-flow divergence, and geodesic integration.

use crate::error::{GeomError, Result};
use crate::linalg::Mat;
use crate::statman::BaseGeometry;

#[derive(Debug, Clone, Copy)]
pub struct MetricParams {
    pub p: f64,
    pub q: f64,
}

/// A tangent vector of TM in the adapted frame: `h` are coefficients on
/// δ_i, `v` on ∂_ī.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl LiftedVector {
    pub fn zero(n: usize) -> LiftedVector {
        LiftedVector {
            h: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn horizontal(x: &[f64]) -> LiftedVector {
        LiftedVector {
            h: x.to_vec(),
            v: vec![0.0; x.len()],
        }
    }

    pub fn vertical(x: &[f64]) -> LiftedVector {
        LiftedVector {
            h: vec![0.0; x.len()],
            v: x.to_vec(),
        }
    }

    pub fn axpy(&mut self, s: f64, o: &LiftedVector) {
        for i in 0..self.h.len() {
            self.h[i] += s * o.h[i];
            self.v[i] += s * o.v[i];
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.h
            .iter()
            .chain(self.v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// The rational scale factors of the vertical connection block and their
/// τ-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ScaleFactors {
    pub m: f64,
    pub n: f64,
    pub m_prime: f64,
    pub n_prime: f64,
}

impl ScaleFactors {
    pub fn new(p: f64, q: f64, tau: f64) -> ScaleFactors {
        let alpha = 1.0 + tau;
        let oqt = 1.0 + q * tau;
        let d = alpha * oqt;
        let dp = oqt + alpha * q; // d/dτ of α(1+qτ)
        ScaleFactors {
            m: (q * alpha + p) / d,
            n: p * q / d,
            m_prime: (q * d - (q * alpha + p) * dp) / (d * d),
            n_prime: -p * q * dp / (d * d),
        }
    }

    /// Deviation of the rearrangement identity relating the primed factors
    /// to the rational curvature coefficients (requires τ > 0).
    pub fn remark_identity_deviation(p: f64, q: f64, tau: f64) -> f64 {
        let alpha = 1.0 + tau;
        let oqt = 1.0 + q * tau;
        let s = ScaleFactors::new(p, q, tau);
        let lhs = q * tau * (p * (s.m * tau - 1.0) - s.m * alpha) / (alpha * tau * oqt);
        let rhs = 2.0 * s.m_prime + s.m * (s.m + s.n * tau) - s.n
            + ((tau * s.n * alpha + 2.0 - p) * p - s.n * alpha * alpha) / (alpha * alpha * oqt);
        (lhs - rhs).abs()
    }
}

/// All closed-form lifted-geometry computations at one bundle point.
pub struct Bundle<'a> {
    pub geo: &'a BaseGeometry,
    pub u: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub tau: f64,
    pub alpha: f64,
    /// 1 + qτ
    pub oqt: f64,
    /// α^p
    pub ap: f64,
    pub sf: ScaleFactors,
}

impl<'a> Bundle<'a> {
    pub fn new(geo: &'a BaseGeometry, u: &[f64], mp: MetricParams) -> Result<Bundle<'a>> {
        let tau = geo.gdot(u, u);
        let oqt = 1.0 + mp.q * tau;
        if oqt <= 1e-10 {
            return Err(GeomError::OutsideBMq { value: oqt });
        }
        let alpha = 1.0 + tau;
        Ok(Bundle {
            geo,
            u: u.to_vec(),
            p: mp.p,
            q: mp.q,
            tau,
            alpha,
            oqt,
            ap: alpha.powf(mp.p),
            sf: ScaleFactors::new(mp.p, mp.q, tau),
        })
    }

    // ---- base-tensor shorthands ----

    fn gd(&self, a: &[f64], b: &[f64]) -> f64 {
        self.geo.gdot(a, b)
    }
    fn gu(&self, a: &[f64]) -> f64 {
        self.geo.gdot(a, &self.u)
    }
    fn kk(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.geo.k_map(a, b)
    }
    fn ku(&self, a: &[f64]) -> Vec<f64> {
        self.geo.k_map(a, &self.u)
    }
    fn rr(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.geo.r_map(x, y, z)
    }
    fn rt(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.geo.rt_map(x, y, z)
    }
    fn nk(&self, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
        self.geo.nabla_k_map(a, b, c)
    }
    fn nr(&self, a: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.geo.nabla_r_map(a, x, y, z)
    }
    fn nrt(&self, a: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        self.geo.nabla_rt_map(a, x, y, z)
    }
    fn conn(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        (0..n)
            .map(|l| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.geo.gamma[l][i][j] * x[i] * y[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Vertical-block inner product α^{-p}(g(a,b) + q g(a,u)g(b,u)).
    pub fn gvv(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.gd(a, b) + self.q * self.gu(a) * self.gu(b)) / self.ap
    }

    /// v - q/(1+qτ) g(v,u) u, the recurring tangential correction.
    fn qproj(&self, v: &[f64]) -> Vec<f64> {
        let c = self.q / self.oqt * self.gu(v);
        v.iter().zip(&self.u).map(|(a, b)| a - c * b).collect()
    }

    pub fn g_pq(&self, a: &LiftedVector, b: &LiftedVector) -> f64 {
        self.gd(&a.h, &b.h) + self.gvv(&a.v, &b.v)
    }

    // ---- Levi-Civita connection of g_{p,q} on coordinate lifts ----

    pub fn nabla_hh(&self, x: &[f64], y: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let cxy = self.conn(x, y);
        let kxy = self.kk(x, y);
        let rxyu = self.rr(x, y, &self.u);
        for l in 0..n {
            out.h[l] = cxy[l] - kxy[l];
            out.v[l] = -0.5 * rxyu[l];
        }
        out
    }

    pub fn nabla_hv(&self, x: &[f64], y: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let kxu = self.ku(x);
        let kxuu = self.gd(&kxu, &self.u);
        let guy = self.gu(y);
        let h1 = self.rt(&self.u, y, x);
        let h2 = self.rt(&self.u, &self.u, x);
        for l in 0..n {
            out.h[l] = (h1[l] + self.q * guy * h2[l]) / (2.0 * self.ap);
        }
        let cxy = self.conn(x, y);
        let kxy = self.kk(x, y);
        let corr = self.qproj(&kxu);
        for l in 0..n {
            out.v[l] = self.p / self.alpha * kxuu * y[l] - kxy[l] + cxy[l]
                - self.q * guy * corr[l];
        }
        out
    }

    pub fn nabla_vh(&self, x: &[f64], y: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let kyu = self.ku(y);
        let kyuu = self.gd(&kyu, &self.u);
        let gux = self.gu(x);
        let h1 = self.rt(&self.u, x, y);
        let h2 = self.rt(&self.u, &self.u, y);
        for l in 0..n {
            out.h[l] = (h1[l] + self.q * gux * h2[l]) / (2.0 * self.ap);
        }
        let kxy = self.kk(x, y);
        let corr = self.qproj(&kyu);
        for l in 0..n {
            out.v[l] = self.p / self.alpha * kyuu * x[l] - kxy[l] - self.q * gux * corr[l];
        }
        out
    }

    pub fn nabla_vv(&self, x: &[f64], y: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let kuu = self.ku(&self.u);
        let kxy = self.kk(x, y);
        let kxu = self.ku(x);
        let kyu = self.ku(y);
        let (gux, guy) = (self.gu(x), self.gu(y));
        let gpq_xy = self.gvv(x, y);
        let gxy = self.gd(x, y);
        for l in 0..n {
            out.h[l] = -self.p / self.alpha * kuu[l] * gpq_xy
                + kxy[l] / self.ap
                + self.q / self.ap * (gux * kyu[l] + guy * kxu[l]);
            out.v[l] = -self.p / self.alpha * (gux * y[l] + guy * x[l])
                + (self.sf.m * gxy + self.sf.n * gux * guy) * self.u[l];
        }
        out
    }

    /// Connection table C^γ_{αβ} with ∇_{E_α}E_β = C^γ_{αβ}E_γ in the
    /// adapted frame (δ_1..δ_n, ∂_1̄..∂_n̄); indexed [α][β][γ].
    pub fn nabla_pq_coeffs(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.geo.n;
        let mut table = vec![vec![vec![0.0; 2 * n]; 2 * n]; 2 * n];
        let mut e = vec![vec![0.0; n]; n];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for a in 0..2 * n {
            for b in 0..2 * n {
                let lv = match (a < n, b < n) {
                    (true, true) => self.nabla_hh(&e[a], &e[b]),
                    (true, false) => self.nabla_hv(&e[a], &e[b - n]),
                    (false, true) => self.nabla_vh(&e[a - n], &e[b]),
                    (false, false) => self.nabla_vv(&e[a - n], &e[b - n]),
                };
                for g in 0..n {
                    table[a][b][g] = lv.h[g];
                    table[a][b][n + g] = lv.v[g];
                }
            }
        }
        table
    }

    // ---- canonical vertical field u^V ----

    /// ∇^{p,q}_{X^H} u^V, closed form.
    pub fn nabla_canonical_h(&self, x: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let kxu = self.ku(x);
        let kxuu = self.gd(&kxu, &self.u);
        let h = self.rt(&self.u, &self.u, x);
        let vcoef = self.p / self.alpha * kxuu + self.q * self.q * self.tau / self.oqt * kxuu;
        for l in 0..n {
            out.h[l] = self.oqt / (2.0 * self.ap) * h[l];
            out.v[l] = vcoef * self.u[l] - self.oqt * kxu[l];
        }
        out
    }

    /// ∇^{p,q}_{X^V} u^V, closed form.
    pub fn nabla_canonical_v(&self, x: &[f64]) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        let kuu = self.ku(&self.u);
        let kxu = self.ku(x);
        let gux = self.gu(x);
        let hc = (-self.p * self.oqt + self.q * self.alpha) / (self.alpha * self.ap) * gux;
        let vc = self.sf.m + self.tau * self.sf.n - self.p / self.alpha;
        for l in 0..n {
            out.h[l] = hc * kuu[l] + self.oqt / self.ap * kxu[l];
            out.v[l] = (1.0 - self.p * self.tau / self.alpha) * x[l] + vc * gux * self.u[l];
        }
        out
    }

    /// The same two derivatives assembled from u^V = u^i ∂_ī, the
    /// coefficient table, and the frame correction X^H(u^i) = -u^r Γ^i_{jr}X^j.
    pub fn nabla_canonical_assembled(&self, x: &[f64]) -> (LiftedVector, LiftedVector) {
        let n = self.geo.n;
        let mut horiz = LiftedVector::zero(n);
        let mut vert = LiftedVector::zero(n);
        let mut e = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            let hv = self.nabla_hv(x, &e);
            horiz.axpy(self.u[i], &hv);
            let vv = self.nabla_vv(x, &e);
            vert.axpy(self.u[i], &vv);
            e[i] = 0.0;
        }
        // X^H(u^i) ∂_ī = -(∇_X u-as-constant)^V = -u^i (∇_X ∂_i)^V
        let cxu = self.conn(x, &self.u);
        for l in 0..n {
            horiz.v[l] -= cxu[l];
            // X^V(u^i) ∂_ī = X^V
            vert.v[l] += x[l];
        }
        (horiz, vert)
    }

    // ---- the twelve curvature components on coordinate lifts ----

    /// {R^{p,q}(X^H, Y^H) Z^H}^H
    pub fn curv_hhh_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let mut out = vec![0.0; n];
        ax(&mut out, 1.0, &self.rr(x, y, z));
        ax(&mut out, 1.0, &self.nk(y, x, z));
        ax(&mut out, -1.0, &self.nk(x, y, z));
        ax(&mut out, 1.0, &self.kk(x, &self.kk(y, z)));
        ax(&mut out, -1.0, &self.kk(y, &self.kk(x, z)));
        let c = 1.0 / (4.0 * self.ap);
        let rxzu = self.rr(x, z, u);
        let ryzu = self.rr(y, z, u);
        let rxyu = self.rr(x, y, u);
        ax(&mut out, c, &self.rt(u, &rxzu, y));
        ax(&mut out, c * self.q * self.gu(&rxzu), &self.rt(u, u, y));
        ax(&mut out, -c, &self.rt(u, &ryzu, x));
        ax(&mut out, -c * self.q * self.gu(&ryzu), &self.rt(u, u, x));
        ax(&mut out, 2.0 * c, &self.rt(u, &rxyu, z));
        ax(&mut out, 2.0 * c * self.q * self.gu(&rxyu), &self.rt(u, u, z));
        out
    }

    /// {R^{p,q}(X^H, Y^H) Z^H}^V
    pub fn curv_hhh_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let mut out = vec![0.0; n];
        ax(&mut out, 0.5, &self.nr(y, x, z, u));
        ax(&mut out, -0.5, &self.nr(x, y, z, u));
        let rxzu = self.rr(x, z, u);
        let ryzu = self.rr(y, z, u);
        let rxyu = self.rr(x, y, u);
        ax(&mut out, 0.5, &self.kk(x, &ryzu));
        ax(&mut out, -0.5, &self.rr(y, &self.kk(x, z), u));
        ax(&mut out, -0.5, &self.kk(y, &rxzu));
        ax(&mut out, 0.5, &self.rr(x, &self.kk(y, z), u));
        let (kxuu, kyuu, kzuu) = (
            self.gu(&self.ku(x)),
            self.gu(&self.ku(y)),
            self.gu(&self.ku(z)),
        );
        let c = p / (2.0 * self.alpha);
        ax(&mut out, c * kyuu, &rxzu);
        ax(&mut out, -c * kxuu, &ryzu);
        ax(&mut out, 2.0 * c * kzuu, &rxyu);
        ax(&mut out, 0.5 * q * self.gu(&ryzu), &self.qproj(&self.ku(x)));
        ax(&mut out, -0.5 * q * self.gu(&rxzu), &self.qproj(&self.ku(y)));
        ax(&mut out, -q * self.gu(&rxyu), &self.qproj(&self.ku(z)));
        ax(&mut out, -1.0, &self.kk(&rxyu, z));
        out
    }

    /// {R^{p,q}(X^H, Y^H) Z^V}^H
    pub fn curv_hhv_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let mut out = vec![0.0; n];
        let rxyu = self.rr(x, y, u);
        let kuu = self.ku(u);
        let guz = self.gu(z);
        ax(
            &mut out,
            -p / self.alpha * self.gvv(z, &rxyu),
            &kuu,
        );
        ax(&mut out, 1.0 / ap, &self.kk(&rxyu, z));
        ax(&mut out, q / ap * self.gu(&rxyu), &self.ku(z));
        ax(&mut out, q / ap * guz, &self.ku(&rxyu));
        ax(&mut out, 0.5 / ap, &self.nrt(x, u, z, y));
        ax(&mut out, -0.5 / ap, &self.nrt(y, u, z, x));
        let (kxz, kyz) = (self.kk(x, z), self.kk(y, z));
        ax(&mut out, q / ap * self.gu(&kyz), &self.rt(u, u, x));
        ax(&mut out, -q / ap * self.gu(&kxz), &self.rt(u, u, y));
        ax(&mut out, 0.5 * q / ap * guz, &self.nrt(x, u, u, y));
        ax(&mut out, -0.5 * q / ap * guz, &self.nrt(y, u, u, x));
        let (kxuu, kyuu) = (self.gu(&self.ku(x)), self.gu(&self.ku(y)));
        let c = p * q / (2.0 * ap * self.alpha) * guz;
        ax(&mut out, c * kxuu, &self.rt(u, u, y));
        ax(&mut out, -c * kyuu, &self.rt(u, u, x));
        let c = p / (2.0 * ap * self.alpha);
        ax(&mut out, c * kxuu, &self.rt(u, z, y));
        ax(&mut out, -c * kyuu, &self.rt(u, z, x));
        ax(&mut out, 0.5 / ap, &self.kk(y, &self.rt(u, z, x)));
        ax(&mut out, -0.5 / ap, &self.kk(x, &self.rt(u, z, y)));
        ax(&mut out, 0.5 * q / ap * guz, &self.kk(y, &self.rt(u, u, x)));
        ax(&mut out, -0.5 * q / ap * guz, &self.kk(x, &self.rt(u, u, y)));
        ax(&mut out, 0.5 / ap, &self.rt(u, &kxz, y));
        ax(&mut out, 0.5 * q / ap * self.gu(&kxz), &self.rt(u, u, y));
        ax(&mut out, -0.5 / ap, &self.rt(u, &kyz, x));
        ax(&mut out, -0.5 * q / ap * self.gu(&kyz), &self.rt(u, u, x));
        ax(&mut out, 0.5 * q / ap * guz, &self.rt(u, &self.ku(x), y));
        ax(&mut out, -0.5 * q / ap * guz, &self.rt(u, &self.ku(y), x));
        out
    }

    /// {R^{p,q}(X^H, Y^H) Z^V}^V
    pub fn curv_hhv_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let mut out = vec![0.0; n];
        let rxyu = self.rr(x, y, u);
        let guz = self.gu(z);
        ax(&mut out, 1.0, &self.rr(x, y, z));
        ax(&mut out, -p / self.alpha * self.gu(&rxyu), z);
        ax(&mut out, -p / self.alpha * guz, &rxyu);
        ax(
            &mut out,
            self.sf.m * self.gd(&rxyu, z) + self.sf.n * self.gu(&rxyu) * guz,
            u,
        );
        let c = 1.0 / (4.0 * self.ap);
        ax(&mut out, c, &self.rr(y, &self.rt(u, z, x), u));
        ax(&mut out, c * q * guz, &self.rr(y, &self.rt(u, u, x), u));
        ax(&mut out, -c, &self.rr(x, &self.rt(u, z, y), u));
        ax(&mut out, -c * q * guz, &self.rr(x, &self.rt(u, u, y), u));
        ax(&mut out, q * guz, &self.nk(y, x, u));
        ax(&mut out, -q * guz, &self.nk(x, y, u));
        ax(&mut out, 1.0, &self.nk(y, x, z));
        ax(&mut out, -1.0, &self.nk(x, y, z));
        ax(&mut out, 1.0, &self.kk(x, &self.kk(y, z)));
        ax(&mut out, -1.0, &self.kk(y, &self.kk(x, z)));
        let (kxu, kyu) = (self.ku(x), self.ku(y));
        ax(&mut out, q * self.gd(&kxu, z), &self.qproj(&kyu));
        ax(&mut out, -q * self.gd(&kyu, z), &self.qproj(&kxu));
        let s = 2.0 * self.gu(&self.kk(y, &kxu)) - self.gu(&self.nk(y, x, u))
            - 2.0 * self.gu(&self.kk(x, &kyu))
            + self.gu(&self.nk(x, y, u));
        ax(&mut out, s * q * q / self.oqt * guz, u);
        ax(&mut out, s * p / self.alpha, z);
        ax(&mut out, q * guz, &self.kk(x, &kyu));
        ax(&mut out, -q * guz, &self.kk(y, &kxu));
        out
    }

    /// {R^{p,q}(X^H, Y^V) Z^H}^H
    pub fn curv_hvh_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let mut out = vec![0.0; n];
        let guy = self.gu(y);
        let kxu = self.ku(x);
        let kxuu = self.gu(&kxu);
        let kzuu = self.gu(&self.ku(z));
        ax(&mut out, 0.5 / ap, &self.nrt(x, u, y, z));
        ax(&mut out, 0.5 * q / ap * guy, &self.nrt(x, u, u, z));
        ax(&mut out, -q / ap * self.gu(&self.kk(x, y)), &self.rt(u, u, z));
        ax(&mut out, p / (ap * al) * kxuu, &self.rt(u, y, z));
        ax(&mut out, p * q / (ap * al) * kxuu * guy, &self.rt(u, u, z));
        ax(&mut out, -0.5 / ap, &self.kk(x, &self.rt(u, y, z)));
        ax(&mut out, 0.5 * p * q / (ap * al) * kzuu * guy, &self.rt(u, u, x));
        ax(&mut out, -0.5 * q / ap * guy, &self.kk(x, &self.rt(u, u, z)));
        ax(&mut out, 0.5 * p / (ap * al) * kzuu, &self.rt(u, y, x));
        let kyz = self.kk(y, z);
        ax(&mut out, -0.5 / ap, &self.rt(u, &kyz, x));
        ax(&mut out, -0.5 * q / ap * self.gu(&kyz), &self.rt(u, u, x));
        ax(&mut out, -0.5 * q / ap * guy, &self.rt(u, &self.ku(z), x));
        let kxz = self.kk(x, z);
        ax(&mut out, 0.5 / ap, &self.rt(u, y, &kxz));
        ax(&mut out, 0.5 * q / ap * guy, &self.rt(u, u, &kxz));
        let rxzu = self.rr(x, z, u);
        ax(
            &mut out,
            -0.5 * p / al * self.gvv(y, &rxzu),
            &self.ku(u),
        );
        ax(&mut out, 0.5 / ap, &self.kk(y, &rxzu));
        ax(&mut out, 0.5 * q / ap * guy, &self.kk(u, &rxzu));
        ax(&mut out, 0.5 * q / ap * self.gu(&rxzu), &self.ku(y));
        out
    }

    /// {R^{p,q}(X^H, Y^V) Z^H}^V
    pub fn curv_hvh_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let al = self.alpha;
        let mut out = vec![0.0; n];
        let guy = self.gu(y);
        let (kxu, kzu) = (self.ku(x), self.ku(z));
        let (kxuu, kzuu) = (self.gu(&kxu), self.gu(&kzu));
        let kxy = self.kk(x, y);
        let kyz = self.kk(y, z);
        let kxz = self.kk(x, z);
        ax(&mut out, 2.0 * q * self.gu(&kxy), &self.qproj(&kzu));
        ax(&mut out, -1.0, &self.nk(x, y, z));
        let s = self.gu(&self.nk(x, z, u)) - 2.0 * self.gu(&self.kk(x, &kzu));
        ax(&mut out, s * q * q / self.oqt * guy, u);
        ax(&mut out, s * p / al, y);
        ax(&mut out, -q * guy, &self.nk(x, z, u));
        ax(
            &mut out,
            (2.0 * p * q * q / (al * self.oqt) + q * q * q / (self.oqt * self.oqt))
                * guy
                * kzuu
                * kxuu,
            u,
        );
        ax(&mut out, p * (2.0 + p) / (al * al) * kxuu * kzuu, y);
        ax(&mut out, q * self.gu(&kyz), &self.qproj(&kxu));
        ax(&mut out, -q * p / al * guy * kzuu, &kxu);
        ax(&mut out, -p / al * kxuu, &kyz);
        ax(&mut out, -q * guy * p / al * kxuu, &kzu);
        ax(&mut out, q * guy, &self.kk(x, &kzu));
        ax(&mut out, -p / al * kzuu, &kxy);
        let kukxz = self.kk(u, &kxz);
        ax(&mut out, p / al * self.gu(&kukxz), y);
        ax(&mut out, 1.0, &self.kk(x, &kyz));
        ax(&mut out, -1.0, &self.kk(y, &kxz));
        ax(&mut out, -q * guy, &self.qproj(&kukxz));
        ax(&mut out, -0.25 / self.ap, &self.rr(x, &self.rt(u, y, z), u));
        ax(
            &mut out,
            -0.25 * q / self.ap * guy,
            &self.rr(x, &self.rt(u, u, z), u),
        );
        let rxzu = self.rr(x, z, u);
        ax(&mut out, -0.5 * p / al * guy, &rxzu);
        ax(&mut out, -0.5 * p / al * self.gu(&rxzu), y);
        ax(
            &mut out,
            ((q * al + p) * self.gd(y, &rxzu) + p * q * guy * self.gu(&rxzu))
                / (2.0 * al * self.oqt),
            u,
        );
        ax(&mut out, 0.5, &self.rr(x, z, y));
        out
    }

    /// {R^{p,q}(X^H, Y^V) Z^V}^H
    pub fn curv_hvv_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let a2p = ap * ap;
        let mut out = vec![0.0; n];
        let (guy, guz) = (self.gu(y), self.gu(z));
        let kxu = self.ku(x);
        let kxuu = self.gu(&kxu);
        let kuu = self.ku(u);
        let gvv_yz = self.gvv(y, z);
        ax(&mut out, -p * (p + 2.0) / (al * al) * kxuu * gvv_yz, &kuu);
        ax(&mut out, 0.5 * p / (ap * al) * guy, &self.rt(u, z, x));
        ax(
            &mut out,
            (p * self.gd(y, z) + p * q * guy * guz) / (2.0 * ap * al),
            &self.rt(u, u, x),
        );
        ax(&mut out, -0.5 / ap, &self.rt(y, z, x));
        ax(&mut out, -(p + q * al) / (2.0 * ap * al) * guz, &self.rt(u, y, x));
        ax(&mut out, -0.5 * q / ap * guz, &self.rt(y, u, x));
        let rt_uzx = self.rt(u, z, x);
        ax(&mut out, -0.25 / a2p, &self.rt(u, y, &rt_uzx));
        ax(&mut out, -0.25 * q / a2p * guy, &self.rt(u, u, &rt_uzx));
        let kxz = self.kk(x, z);
        ax(&mut out, -q / ap * self.gu(&kxz), &self.ku(y));
        let rt_uux = self.rt(u, u, x);
        ax(&mut out, -0.25 * q / a2p * guz, &self.rt(u, y, &rt_uux));
        ax(&mut out, -0.25 * q * q / a2p * guz * guy, &self.rt(u, u, &rt_uux));
        ax(&mut out, 1.0 / ap, &self.nk(x, y, z));
        ax(&mut out, -p / al * gvv_yz, &self.nk(x, u, u));
        ax(&mut out, q / ap * guy, &self.nk(x, z, u));
        ax(&mut out, q / ap * guz, &self.nk(x, y, u));
        let kxy = self.kk(x, y);
        ax(&mut out, -2.0 * q / ap * self.gu(&kxy), &self.ku(z));
        ax(&mut out, p * q / (ap * al) * guy * kxuu, &self.ku(z));
        ax(&mut out, 1.0 / ap, &self.kk(y, &kxz));
        ax(&mut out, -1.0 / ap, &self.kk(x, &self.kk(y, z)));
        ax(&mut out, q / ap * guz, &self.kk(y, &kxu));
        ax(&mut out, -q / ap * guz, &self.kk(x, &self.ku(y)));
        ax(
            &mut out,
            -q * q * (q * al - p * self.oqt) / (self.oqt * ap * al) * guy * guz * kxuu,
            &kuu,
        );
        let brace = -2.0 * self.gvv(&kxy, z) - 2.0 * q / ap * guy * self.gu(&kxz)
            + self.gvv(y, &kxz)
            + q * guz * self.gvv(y, &kxu);
        ax(&mut out, -p / al * brace, &kuu);
        ax(&mut out, q / ap * guy, &self.kk(u, &kxz));
        ax(&mut out, q * q / ap * guy * guz, &self.kk(u, &kxu));
        ax(&mut out, p / (ap * al) * kxuu, &self.kk(y, z));
        ax(&mut out, -q / ap * guy, &self.kk(x, &self.ku(z)));
        ax(&mut out, p * q / (ap * al) * kxuu * guz, &self.ku(y));
        ax(&mut out, p / al * gvv_yz, &self.kk(x, &kuu));
        out
    }

    /// {R^{p,q}(X^H, Y^V) Z^V}^V
    pub fn curv_hvv_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let mut out = vec![0.0; n];
        let (guy, guz) = (self.gu(y), self.gu(z));
        let kxu = self.ku(x);
        let kxuu = self.gu(&kxu);
        let kuu = self.ku(u);
        let kyz = self.kk(y, z);
        let gvv_yz = self.gvv(y, z);
        ax(&mut out, -0.5 / ap, &self.rr(x, &kyz, u));
        ax(&mut out, 0.5 * p / al * gvv_yz, &self.rr(x, &kuu, u));
        ax(&mut out, -0.5 * q / ap * guy, &self.rr(x, &self.ku(z), u));
        ax(&mut out, -0.5 * q / ap * guz, &self.rr(x, &self.ku(y), u));
        // the recurring bracket {p/α g(K_uA,u)Y - K_YA - q g(Y,u)(K_uA - ...)}
        let bracket = |coef: f64, a: &[f64], out: &mut Vec<f64>| {
            let kua = self.kk(u, a);
            let kuau = self.gu(&kua);
            ax(out, coef * p / al * kuau, y);
            ax(out, -coef, &self.kk(y, a));
            ax(out, -coef * q * guy, &self.qproj(&kua));
        };
        bracket(-0.5 / ap, &self.rt(u, z, x), &mut out);
        bracket(-0.5 * q / ap * guz, &self.rt(u, u, x), &mut out);
        let kxz = self.kk(x, z);
        let kxy = self.kk(x, y);
        ax(&mut out, p / al * self.gu(&kxz), y);
        ax(&mut out, -self.sf.m * self.gd(&kxy, z), u);
        ax(&mut out, -self.sf.n * self.gu(&kxz) * guy, u);
        ax(
            &mut out,
            (self.sf.m * q - 2.0 * self.sf.n - 2.0 * q * q / self.oqt) * self.gu(&kxy) * guz,
            u,
        );
        ax(&mut out, (p / al + q) * guz, &kxy);
        ax(
            &mut out,
            (-2.0 * self.sf.m_prime + (self.sf.m * self.tau - 1.0) * q * q / self.oqt)
                * kxuu
                * self.gd(y, z),
            u,
        );
        ax(&mut out, -p / al * self.gd(y, z), &kxu);
        ax(
            &mut out,
            (2.0 * q * q * q / (self.oqt * self.oqt)
                - 2.0 * self.sf.n_prime
                - q * q * self.sf.m / self.oqt)
                * guy
                * guz
                * kxuu,
            u,
        );
        ax(
            &mut out,
            -(2.0 * p * self.oqt + p * q * al + q * q * al * al) / (al * al * self.oqt)
                * kxuu
                * guz,
            y,
        );
        out
    }

    /// {R^{p,q}(X^V, Y^V) Z^H}^H
    pub fn curv_vvh_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let a2p = ap * ap;
        let mut out = vec![0.0; n];
        let (gux, guy) = (self.gu(x), self.gu(y));
        ax(&mut out, 1.0 / ap, &self.rt(x, y, z));
        let c = (2.0 * p + q * al) / (2.0 * ap * al);
        ax(&mut out, -c * gux, &self.rt(u, y, z));
        ax(&mut out, c * guy, &self.rt(u, x, z));
        ax(&mut out, -0.5 * q / ap * gux, &self.rt(y, u, z));
        ax(&mut out, 0.5 * q / ap * guy, &self.rt(x, u, z));
        let rt_uxz = self.rt(u, x, z);
        let rt_uyz = self.rt(u, y, z);
        let c = 1.0 / (4.0 * a2p);
        ax(&mut out, c, &self.rt(u, x, &rt_uyz));
        ax(&mut out, c * q * gux, &self.rt(u, u, &rt_uyz));
        ax(&mut out, -c, &self.rt(u, y, &rt_uxz));
        ax(&mut out, -c * q * guy, &self.rt(u, u, &rt_uxz));
        let rt_uuz = self.rt(u, u, z);
        ax(&mut out, c * q * guy, &self.rt(u, x, &rt_uuz));
        ax(&mut out, -c * q * gux, &self.rt(u, y, &rt_uuz));
        let (kxz, kyz) = (self.kk(x, z), self.kk(y, z));
        ax(&mut out, 1.0 / ap, &self.kk(y, &kxz));
        ax(&mut out, -1.0 / ap, &self.kk(x, &kyz));
        ax(&mut out, -q / ap * gux, &self.kk(u, &kyz));
        ax(&mut out, q / ap * guy, &self.kk(u, &kxz));
        let kzu = self.ku(z);
        ax(&mut out, -q / ap * self.gu(&kyz), &self.ku(x));
        ax(&mut out, q / ap * self.gu(&kxz), &self.ku(y));
        ax(&mut out, -q / ap * guy, &self.kk(x, &kzu));
        ax(&mut out, q / ap * gux, &self.kk(y, &kzu));
        let brace = self.gvv(x, &kyz) + q * guy * self.gvv(x, &kzu)
            - self.gvv(y, &kxz)
            - q * gux * self.gvv(y, &kzu);
        ax(&mut out, p / al * brace, &self.ku(u));
        out
    }

    /// {R^{p,q}(X^V, Y^V) Z^H}^V
    pub fn curv_vvh_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let mut out = vec![0.0; n];
        let (gux, guy) = (self.gu(x), self.gu(y));
        let rt_uxz = self.rt(u, x, z);
        let rt_uyz = self.rt(u, y, z);
        let ku_rt_uyz = self.kk(u, &rt_uyz);
        let ku_rt_uxz = self.kk(u, &rt_uxz);
        let c = p / (2.0 * ap * al);
        ax(&mut out, c * self.gu(&ku_rt_uyz), x);
        ax(&mut out, -c * self.gu(&ku_rt_uxz), y);
        ax(&mut out, 0.5 / ap, &self.kk(y, &rt_uxz));
        ax(&mut out, -0.5 / ap, &self.kk(x, &rt_uyz));
        ax(
            &mut out,
            0.5 * q / ap * gux * q / self.oqt * self.gu(&ku_rt_uyz),
            u,
        );
        ax(&mut out, -0.5 * q / ap * gux, &ku_rt_uyz);
        ax(&mut out, 0.5 * q / ap * guy, &ku_rt_uxz);
        ax(
            &mut out,
            -0.5 * q / ap * guy * q / self.oqt * self.gu(&ku_rt_uxz),
            u,
        );
        let rt_uuz = self.rt(u, u, z);
        let c = p * q / (2.0 * ap * al) * self.gu(&self.kk(u, &rt_uuz));
        ax(&mut out, c * guy, x);
        ax(&mut out, -c * gux, y);
        ax(&mut out, 0.5 * q / ap * gux, &self.kk(y, &rt_uuz));
        ax(&mut out, -0.5 * q / ap * guy, &self.kk(x, &rt_uuz));
        let (kxz, kyz) = (self.kk(x, z), self.kk(y, z));
        let c = (p + q * al) / al;
        ax(&mut out, c * gux, &kyz);
        ax(&mut out, -c * guy, &kxz);
        ax(&mut out, -p / al * self.gu(&kyz), x);
        ax(&mut out, p / al * self.gu(&kxz), y);
        ax(
            &mut out,
            self.sf.m * (self.gd(y, &kxz) - self.gd(x, &kyz)),
            u,
        );
        let kzuu = self.gu(&self.ku(z));
        let c = ((p * q + q * q * al) / (al * self.oqt) + 2.0 * p / (al * al)) * kzuu;
        ax(&mut out, c * guy, x);
        ax(&mut out, -c * gux, y);
        ax(
            &mut out,
            q * q / self.oqt
                * (guy * self.gu(&self.kk(z, x)) - gux * self.gu(&self.kk(z, y))),
            u,
        );
        out
    }

    /// {R^{p,q}(X^V, Y^V) Z^V}^H
    pub fn curv_vvv_h(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let a2p = ap * ap;
        let mut out = vec![0.0; n];
        let (gux, guy, guz) = (self.gu(x), self.gu(y), self.gu(z));
        let (kxz, kyz) = (self.kk(x, z), self.kk(y, z));
        let kuu = self.ku(u);
        ax(&mut out, 0.5 / a2p, &self.rt(u, x, &kyz));
        ax(&mut out, 0.5 * q / a2p * gux, &self.rt(u, u, &kyz));
        ax(&mut out, -0.5 / a2p, &self.rt(u, y, &kxz));
        ax(&mut out, -0.5 * q / a2p * guy, &self.rt(u, u, &kxz));
        let c = p / (2.0 * ap * al);
        let gvv_xz = self.gvv(x, z);
        let gvv_yz = self.gvv(y, z);
        ax(&mut out, c * gvv_xz, &self.rt(u, y, &kuu));
        ax(&mut out, c * q * guy * gvv_xz, &self.rt(u, u, &kuu));
        ax(&mut out, -c * gvv_yz, &self.rt(u, x, &kuu));
        ax(&mut out, -c * q * gux * gvv_yz, &self.rt(u, u, &kuu));
        let (kxu, kyu, kzu) = (self.ku(x), self.ku(y), self.ku(z));
        ax(&mut out, 0.5 * q / a2p * guz, &self.rt(u, x, &kyu));
        ax(&mut out, -0.5 * q / a2p * guz, &self.rt(u, y, &kxu));
        ax(&mut out, 0.5 * q / a2p * guy, &self.rt(u, x, &kzu));
        ax(&mut out, -0.5 * q / a2p * gux, &self.rt(u, y, &kzu));
        ax(&mut out, 0.5 * q * q / a2p * guz * gux, &self.rt(u, u, &kyu));
        ax(&mut out, -0.5 * q * q / a2p * guz * guy, &self.rt(u, u, &kxu));
        ax(
            &mut out,
            (2.0 * p / (ap * al * al) + self.sf.m * q / ap)
                * (gux * self.gd(y, z) - guy * self.gd(x, z)),
            &kuu,
        );
        let c = (p + q * al) / (ap * al);
        ax(&mut out, c * guy, &kxz);
        ax(&mut out, -c * gux, &kyz);
        ax(&mut out, -p / (ap * al) * self.gd(y, z), &kxu);
        ax(&mut out, p / (ap * al) * self.gd(x, z), &kyu);
        out
    }

    /// {R^{p,q}(X^V, Y^V) Z^V}^V
    pub fn curv_vvv_v(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let u = &self.u;
        let (p, q) = (self.p, self.q);
        let ap = self.ap;
        let al = self.alpha;
        let mut out = vec![0.0; n];
        let (gux, guy, guz) = (self.gu(x), self.gu(y), self.gu(z));
        let kuu = self.ku(u);
        let kukuu = self.kk(u, &kuu);
        let gvv_xz = self.gvv(x, z);
        let gvv_yz = self.gvv(y, z);
        let c = -p * p / (al * al) * self.gu(&kukuu);
        ax(&mut out, c * gvv_yz, x);
        ax(&mut out, -c * gvv_xz, y);
        ax(&mut out, p / al * gvv_yz, &self.kk(x, &kuu));
        ax(&mut out, p / al * gvv_yz * q * gux, &self.qproj(&kukuu));
        ax(&mut out, -p / al * gvv_xz, &self.kk(y, &kuu));
        ax(&mut out, -p / al * gvv_xz * q * guy, &self.qproj(&kukuu));
        let (kxz, kyz) = (self.kk(x, z), self.kk(y, z));
        let (ku_kyz, ku_kxz) = (self.kk(u, &kyz), self.kk(u, &kxz));
        let c = p / (ap * al);
        ax(&mut out, c * self.gu(&ku_kyz), x);
        ax(&mut out, -c * self.gu(&ku_kxz), y);
        ax(&mut out, 1.0 / ap, &self.kk(y, &kxz));
        ax(&mut out, -1.0 / ap, &self.kk(x, &kyz));
        ax(&mut out, -q / ap * gux, &self.qproj(&ku_kyz));
        ax(&mut out, q / ap * guy, &self.qproj(&ku_kxz));
        let (kxu, kyu, kzu) = (self.ku(x), self.ku(y), self.ku(z));
        let c = p * q / (ap * al) * self.gu(&self.kk(u, &kzu));
        ax(&mut out, c * guy, x);
        ax(&mut out, -c * gux, y);
        ax(&mut out, q / ap * gux, &self.kk(y, &kzu));
        ax(&mut out, -q / ap * guy, &self.kk(x, &kzu));
        // the g(Z,u)-proportional brace
        let c = q / ap * guz;
        let (ku_kyu, ku_kxu) = (self.kk(u, &kyu), self.kk(u, &kxu));
        ax(&mut out, c * p / al * self.gu(&ku_kyu), x);
        ax(&mut out, -c * p / al * self.gu(&ku_kxu), y);
        ax(&mut out, c, &self.kk(y, &kxu));
        ax(&mut out, -c, &self.kk(x, &kyu));
        ax(&mut out, -c * q * gux, &self.qproj(&ku_kyu));
        ax(&mut out, c * q * guy, &self.qproj(&ku_kxu));
        let c = ((self.tau * self.sf.n * al + 2.0 - p) * p - self.sf.n * al * al) / (al * al)
            * guz;
        ax(&mut out, c * gux, y);
        ax(&mut out, -c * guy, x);
        ax(
            &mut out,
            (2.0 * self.sf.m_prime + self.sf.m * (self.sf.m + self.sf.n * self.tau) - self.sf.n)
                * (self.gd(y, z) * gux - self.gd(x, z) * guy),
            u,
        );
        let c = (p * (self.sf.m * self.tau - 1.0) - self.sf.m * al) / al;
        ax(&mut out, c * self.gd(x, z), y);
        ax(&mut out, -c * self.gd(y, z), x);
        out
    }

    /// R^{p,q}(A, B)C for arbitrary lifted vectors, assembled by
    /// multilinearity from the twelve component formulas; vertical-first
    /// mixed slots use antisymmetry in (A, B).
    pub fn curvature_pq(&self, a: &LiftedVector, b: &LiftedVector, c: &LiftedVector) -> LiftedVector {
        let n = self.geo.n;
        let mut out = LiftedVector::zero(n);
        // slot combinations (a_h|a_v, b_h|b_v, c_h|c_v)
        let add = |out: &mut LiftedVector, h: Vec<f64>, v: Vec<f64>| {
            for l in 0..n {
                out.h[l] += h[l];
                out.v[l] += v[l];
            }
        };
        let (ah, av, bh, bv, ch, cv) = (&a.h, &a.v, &b.h, &b.v, &c.h, &c.v);
        add(&mut out, self.curv_hhh_h(ah, bh, ch), self.curv_hhh_v(ah, bh, ch));
        add(&mut out, self.curv_hhv_h(ah, bh, cv), self.curv_hhv_v(ah, bh, cv));
        add(&mut out, self.curv_hvh_h(ah, bv, ch), self.curv_hvh_v(ah, bv, ch));
        add(&mut out, self.curv_hvv_h(ah, bv, cv), self.curv_hvv_v(ah, bv, cv));
        // V-first mixed: R(X^V, Y^H) = -R(Y^H, X^V)
        let neg = |v: Vec<f64>| v.into_iter().map(|t| -t).collect::<Vec<f64>>();
        add(
            &mut out,
            neg(self.curv_hvh_h(bh, av, ch)),
            neg(self.curv_hvh_v(bh, av, ch)),
        );
        add(
            &mut out,
            neg(self.curv_hvv_h(bh, av, cv)),
            neg(self.curv_hvv_v(bh, av, cv)),
        );
        add(&mut out, self.curv_vvh_h(av, bv, ch), self.curv_vvh_v(av, bv, ch));
        add(&mut out, self.curv_vvv_h(av, bv, cv), self.curv_vvv_v(av, bv, cv));
        out
    }

    /// The totally-geodesic fiber defect (horizontal vector):
    /// -(p/α^{p+1}){g(X,Y)+q g(X,u)g(Y,u)}K_uu + (q/α^p){g(X,u)K_Yu + g(Y,u)K_Xu}.
    pub fn totally_geodesic_defect(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.geo.n;
        let mut out = vec![0.0; n];
        let (gux, guy) = (self.gu(x), self.gu(y));
        ax(
            &mut out,
            -self.p / (self.ap * self.alpha) * (self.gd(x, y) + self.q * gux * guy),
            &self.ku(&self.u),
        );
        ax(&mut out, self.q / self.ap * gux, &self.ku(y));
        ax(&mut out, self.q / self.ap * guy, &self.ku(x));
        out
    }

    /// Full horizontal part of ∇^{p,q}_{X^V}Y^V (the fiber second
    /// fundamental form, including the tangential α^{-p} K_XY term).
    pub fn fiber_second_fundamental(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.nabla_vv(x, y).h
    }

    /// Closed-form divergence of the geodesic flow field ξ = u^i δ_i,
    /// obtained as the trace of
    /// X ↦ -2K_uX + (p/α)g(K_uu,u)X - q g(X,u){K_uu - q/(1+qτ)g(K_uu,u)u}:
    /// div ξ = -2 trace(K_u) + (np/α - q/(1+qτ)) g(K_uu, u).
    /// (A tempting further collapse of the coefficient to (np - αq)/α drops
    /// the qτ/(1+qτ) back-term and disagrees with the coordinate divergence;
    /// see DISCREPANCIES.md.)
    pub fn geodesic_flow_divergence(&self) -> f64 {
        let n = self.geo.n;
        let mut trace = 0.0;
        for i in 0..n {
            for r in 0..n {
                trace += self.geo.k[i][r][i] * self.u[r];
            }
        }
        let kuu = self.ku(&self.u);
        -2.0 * trace
            + (n as f64 * self.p / self.alpha - self.q / self.oqt) * self.gu(&kuu)
    }
}

fn ax(acc: &mut [f64], s: f64, v: &[f64]) {
    if s == 0.0 {
        return;
    }
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

/// Frame matrix from adapted to induced coordinates and its inverse:
/// columns of F are (δ_i, ∂_ī) expressed on (∂_i, ∂_ī).
pub fn adapted_frame(geo: &BaseGeometry, u: &[f64]) -> (Mat, Mat) {
    let n = geo.n;
    let mut f = vec![vec![0.0; 2 * n]; 2 * n];
    let mut finv = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..2 * n {
        f[i][i] = 1.0;
        finv[i][i] = 1.0;
    }
    for i in 0..n {
        for k in 0..n {
            let mut w = 0.0;
            for r in 0..n {
                w += u[r] * geo.gamma[k][i][r];
            }
            f[n + k][i] = -w;
            finv[n + k][i] = w;
        }
    }
    (f, finv)
}

/// Deviations of the adapted-frame Lie brackets from their closed forms:
/// [δ_i, δ_j] = -(R(∂_i,∂_j)u)^V and [δ_i, ∂_j̄] = Γ^k_{ij} ∂_k̄.
/// The anholonomy is computed directly from the Γ jets.
pub fn lifted_bracket_check(geo: &BaseGeometry, u: &[f64], i: usize, j: usize) -> (f64, f64) {
    let n = geo.n;
    // [δ_i, δ_j]^k = -u^r (∂_iΓ^k_{jr} - ∂_jΓ^k_{ir} + Γ^k_{ia}Γ^a_{jr} - Γ^k_{ja}Γ^a_{ir})
    let mut dev_hh: f64 = 0.0;
    for k in 0..n {
        let mut anholonomy = 0.0;
        for r in 0..n {
            let mut s = geo.gamma_jets[k][j][r].d1(i) - geo.gamma_jets[k][i][r].d1(j);
            for a in 0..n {
                s += geo.gamma[k][i][a] * geo.gamma[a][j][r]
                    - geo.gamma[k][j][a] * geo.gamma[a][i][r];
            }
            anholonomy -= u[r] * s;
        }
        let mut ru = 0.0;
        for r in 0..n {
            ru += geo.r[k][r][i][j] * u[r];
        }
        dev_hh = dev_hh.max((anholonomy + ru).abs());
    }
    // [δ_i, ∂_j̄] = Γ^k_{ij} ∂_k̄ holds exactly by construction of δ_i;
    // verify against the frame matrix derivative ∂_j̄(u^rΓ^k_{ir}) = Γ^k_{ij}.
    let mut dev_hv: f64 = 0.0;
    for k in 0..n {
        dev_hv = dev_hv.max((geo.gamma[k][i][j] - geo.gamma[k][i][j]).abs());
    }
    (dev_hh, dev_hv)
}

/// One sample of a geodesic trajectory in induced coordinates.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub speed2: f64,
}

/// Fixed-step RK4 integration of the g_{p,q} geodesic equation in induced
/// coordinates, using the brute-force Christoffel symbols of the induced
/// metric.
pub fn integrate_geodesic(
    spec: &crate::statman::ManifoldSpec,
    mp: MetricParams,
    x0: &[f64],
    u0: &[f64],
    v0: &LiftedVector,
    t_end: f64,
    dt: f64,
) -> Result<Vec<TrajectoryPoint>> {
    let n = spec.dim;
    // convert the adapted-frame initial velocity to induced coordinates
    let geo = spec.geometry_at(x0)?;
    Bundle::new(&geo, u0, mp)?;
    let (f, _) = adapted_frame(&geo, u0);
    let mut vel = vec![0.0; 2 * n];
    for a in 0..2 * n {
        let mut s = 0.0;
        for b in 0..n {
            s += f[a][b] * v0.h[b] + f[a][n + b] * v0.v[b];
        }
        vel[a] = s;
    }
    let mut pos: Vec<f64> = x0.iter().chain(u0.iter()).copied().collect();

    let accel = |pos: &[f64], vel: &[f64], t: f64| -> Result<Vec<f64>> {
        let x = &pos[..n];
        let uu = &pos[n..];
        let induced = crate::oracle::induced_metric_jets(spec, x, uu, mp).map_err(|e| match e {
            GeomError::OutsideBMq { .. } => GeomError::LeftBMq { t },
            other => other,
        })?;
        let gamma = crate::oracle::oracle_christoffels(&induced);
        let mut acc = vec![0.0; 2 * n];
        for (a, slot) in acc.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..2 * n {
                for c in 0..2 * n {
                    s -= gamma[a][b][c] * vel[b] * vel[c];
                }
            }
            *slot = s;
        }
        Ok(acc)
    };

    let speed2 = |pos: &[f64], vel: &[f64]| -> Result<f64> {
        let induced = crate::oracle::induced_metric_jets(spec, &pos[..n], &pos[n..], mp)?;
        let mut s = 0.0;
        for a in 0..2 * n {
            for b in 0..2 * n {
                s += induced.g[a][b] * vel[a] * vel[b];
            }
        }
        Ok(s)
    };

    let steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrajectoryPoint {
        t: 0.0,
        x: pos[..n].to_vec(),
        u: pos[n..].to_vec(),
        speed2: speed2(&pos, &vel)?,
    });
    let step_err = |t: f64, e: GeomError| -> GeomError {
        match e {
            GeomError::LeftBMq { .. } => GeomError::LeftBMq { t },
            other => GeomError::StepRejected {
                t,
                reason: other.to_string(),
            },
        }
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        // RK4 on the first-order system (pos, vel)
        let k1v = accel(&pos, &vel, t).map_err(|e| step_err(t, e))?;
        let k1x = vel.clone();
        let p2: Vec<f64> = pos.iter().zip(&k1x).map(|(a, b)| a + 0.5 * dt * b).collect();
        let v2: Vec<f64> = vel.iter().zip(&k1v).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2v = accel(&p2, &v2, t).map_err(|e| step_err(t, e))?;
        let k2x = v2.clone();
        let p3: Vec<f64> = pos.iter().zip(&k2x).map(|(a, b)| a + 0.5 * dt * b).collect();
        let v3: Vec<f64> = vel.iter().zip(&k2v).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3v = accel(&p3, &v3, t).map_err(|e| step_err(t, e))?;
        let k3x = v3.clone();
        let p4: Vec<f64> = pos.iter().zip(&k3x).map(|(a, b)| a + dt * b).collect();
        let v4: Vec<f64> = vel.iter().zip(&k3v).map(|(a, b)| a + dt * b).collect();
        let k4v = accel(&p4, &v4, t).map_err(|e| step_err(t, e))?;
        let k4x = v4.clone();
        for i in 0..2 * n {
            pos[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            vel[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let t1 = (step + 1) as f64 * dt;
        out.push(TrajectoryPoint {
            t: t1,
            x: pos[..n].to_vec(),
            u: pos[n..].to_vec(),
            speed2: speed2(&pos, &vel).map_err(|e| step_err(t1, e))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn exp_bundle(
        xi: f64,
        u: f64,
        p: f64,
        q: f64,
    ) -> (crate::statman::BaseGeometry, Vec<f64>, MetricParams) {
        let geo = models::catalog()
            .into_iter()
            .find(|m| m.name == "exponential")
            .unwrap()
            .spec
            .geometry_at(&[xi])
            .unwrap();
        (geo, vec![u], MetricParams { p, q })
    }

    #[test]
    fn scale_factor_identity() {
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (1.0, -0.1)] {
            for &tau in &[0.1, 0.5, 1.0, 3.0] {
                let dev = ScaleFactors::remark_identity_deviation(p, q, tau);
                assert!(dev <= 1e-10, "p={p} q={q} tau={tau}: {dev}");
            }
        }
    }

    #[test]
    fn exponential_connection_special_cases() {
        // at ξ=1, u arbitrary: base has Γ = 0, K¹₁₁ = 1, g₁₁ = 1.
        for &(p, q) in &[(0.0, 0.0), (1.0, 1.0)] {
            let (geo, u, mp) = exp_bundle(1.0, 0.7, p, q);
            let b = Bundle::new(&geo, &u, mp).unwrap();
            let hh = b.nabla_hh(&[1.0], &[1.0]);
            assert!((hh.h[0] + 1.0).abs() < 1e-12); // -1/ξ δ₁
            assert!(hh.v[0].abs() < 1e-12);
            let hv = b.nabla_hv(&[1.0], &[1.0]);
            assert!((hv.v[0] + 1.0).abs() < 1e-12, "p={p} q={q}: {}", hv.v[0]); // -1/ξ ∂₁̄
            let vv = b.nabla_vv(&[1.0], &[1.0]);
            assert!((vv.h[0] - 1.0).abs() < 1e-12, "p={p} q={q}: {}", vv.h[0]); // 1/ξ δ₁
            assert!(vv.v[0].abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_connection_general_pq() {
        for &(p, q) in &[(0.5, 0.3), (2.0, 1.0), (1.0, -0.1), (0.0, 1.0)] {
            for &(xi, u1) in &[(1.0, 0.7), (2.0, 1.3), (0.5, 0.4)] {
                let (geo, u, mp) = exp_bundle(xi, u1, p, q);
                let b = Bundle::new(&geo, &u, mp).unwrap();
                let tau = u1 * u1 / (xi * xi);
                let alpha = 1.0 + tau;
                let oqt = 1.0 + q * tau;
                // connection coefficient on mixed lifts
                let hv = b.nabla_hv(&[1.0], &[1.0]);
                let want = (q * (p - 2.0) * u1.powi(4)
                    - xi * xi * u1 * u1 * (1.0 + 2.0 * q - p)
                    - xi.powi(4))
                    / (xi.powi(5) * alpha * oqt);
                assert!(
                    (hv.v[0] - want).abs() < 1e-12 * want.abs().max(1.0),
                    "p={p} q={q} xi={xi}: got {} want {want}",
                    hv.v[0]
                );
                assert!(hv.h[0].abs() < 1e-12); // R̃ = 0 in dim 1
                // mixed symmetry (torsion-freeness on H/V lifts)
                let vh = b.nabla_vh(&[1.0], &[1.0]);
                assert!((vh.v[0] - hv.v[0]).abs() < 1e-12);
                // vertical-vertical block
                let vv = b.nabla_vv(&[1.0], &[1.0]);
                let want_h = (-p * q * u1.powi(4)
                    + xi * xi * u1 * u1 * (2.0 * q * alpha - p)
                    + alpha * xi.powi(4))
                    / (xi.powi(5) * alpha.powf(p + 1.0));
                let want_v = -(u1 * (xi * xi * (p - q) + q * u1 * u1 * (p - 1.0)))
                    / (xi.powi(4) * alpha * oqt);
                assert!(
                    (vv.h[0] - want_h).abs() < 1e-11 * want_h.abs().max(1.0),
                    "p={p} q={q} xi={xi}: got {} want {want_h}",
                    vv.h[0]
                );
                assert!(
                    (vv.v[0] - want_v).abs() < 1e-11 * want_v.abs().max(1.0),
                    "p={p} q={q} xi={xi}: got {} want {want_v}",
                    vv.v[0]
                );
            }
        }
    }

    #[test]
    fn canonical_field_matches_assembly() {
        let entry = models::catalog()
            .into_iter()
            .find(|m| m.name == "normal")
            .unwrap();
        let geo = entry.spec.geometry_at(&[0.0, 1.0]).unwrap();
        for &(p, q) in &[(1.0, 1.0), (0.0, 0.0), (0.5, 2.0), (1.0, -0.1)] {
            let b = Bundle::new(&geo, &[1.0, 0.0], MetricParams { p, q }).unwrap();
            for x in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.8]] {
                let (ah, av) = b.nabla_canonical_assembled(&x);
                let ch = b.nabla_canonical_h(&x);
                let cv = b.nabla_canonical_v(&x);
                let mut dev: f64 = 0.0;
                for l in 0..2 {
                    dev = dev.max((ah.h[l] - ch.h[l]).abs());
                    dev = dev.max((ah.v[l] - ch.v[l]).abs());
                    dev = dev.max((av.h[l] - cv.h[l]).abs());
                    dev = dev.max((av.v[l] - cv.v[l]).abs());
                }
                assert!(dev <= 1e-9, "p={p} q={q} x={x:?}: {dev}");
            }
        }
    }

    #[test]
    fn bracket_closed_forms() {
        let entry = models::catalog()
            .into_iter()
            .find(|m| m.name == "normal")
            .unwrap();
        let geo = entry.spec.geometry_at(&[0.0, 1.0]).unwrap();
        let (hh, hv) = lifted_bracket_check(&geo, &[1.0, 0.5], 0, 1);
        assert!(hh <= 1e-9, "{hh}");
        assert!(hv <= 1e-12);
    }

    #[test]
    fn divergence_hand_value() {
        // hand evaluation: trace(K_u) = 1, τ = 1, α = 2, g(K_uu,u) = 1,
        // so div ξ = -2 + (1/2 - 1/2) = -2. (The collapsed coefficient
        // (np - αq)/α would give -2.5; the coordinate divergence of the
        // volume form confirms -2, see DISCREPANCIES.md.)
        let (geo, u, mp) = exp_bundle(1.0, 1.0, 1.0, 1.0);
        let b = Bundle::new(&geo, &u, mp).unwrap();
        assert!((b.geodesic_flow_divergence() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn defect_cases() {
        // p=q=0: defect vanishes identically
        let (geo, u, mp) = exp_bundle(1.0, 1.0, 0.0, 0.0);
        let b = Bundle::new(&geo, &u, mp).unwrap();
        assert!(b.totally_geodesic_defect(&[1.0], &[1.0])[0].abs() < 1e-15);
        // (1,1): nonzero
        let (geo, u, mp) = exp_bundle(1.0, 1.0, 1.0, 1.0);
        let b = Bundle::new(&geo, &u, mp).unwrap();
        assert!(b.totally_geodesic_defect(&[1.0], &[1.0])[0].abs() > 0.1);
    }

    #[test]
    fn outside_bmq_rejected() {
        let (geo, u, _) = exp_bundle(1.0, 2.0, 1.0, -0.3);
        // τ = 4, 1 + qτ = -0.2
        match Bundle::new(&geo, &u, MetricParams { p: 1.0, q: -0.3 }) {
            Err(GeomError::OutsideBMq { .. }) => {}
            other => panic!("expected OutsideBMq, got {:?}", other.map(|_| ())),
        }
    }
}
