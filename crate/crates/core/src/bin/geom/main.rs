//! Command-line front end: load a model or spec file, run geometry
//! computations, and emit deterministic JSON/CSV reports.

use std::collections::HashMap;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use statgeo::analysis;
use statgeo::cgbundle::{self, Bundle, LiftedVector, MetricParams};
use statgeo::error::{GeomError, Result};
use statgeo::models;
use statgeo::oracle;
use statgeo::statman::ManifoldSpec;

mod json;
use json::JVal;

#[derive(Parser)]
#[command(name = "geom", version, about = "numerical geometry of lifted metrics on tangent bundles")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in model name (exponential, normal, euclid_deformed_ab,
    /// pseudo_offdiag, sasaki_flat).
    #[arg(long, conflicts_with = "spec")]
    model: Option<String>,
    /// Path to a JSON spec document.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Base point, comma-separated.
    #[arg(long, value_parser = parse_csv)]
    point: Option<Csv>,
    /// Fiber vector, comma-separated.
    #[arg(long, value_parser = parse_csv)]
    fiber: Option<Csv>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Tolerance override for pass/fail checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Base-manifold tensors at the given point.
    Describe(Common),
    /// Lifted-connection coefficient table in the adapted frame at (x, u).
    Connection(Common),
    /// The twelve lifted-curvature component blocks at (x, u).
    Curvature {
        #[command(flatten)]
        common: Common,
        /// Restrict to one index triple i,j,k (repeatable, 1-based).
        #[arg(long, value_parser = parse_triple)]
        triple: Vec<(usize, usize, usize)>,
    },
    /// Sectional curvature table over the canonical lifted frame.
    Sectional(Common),
    /// Scalar curvature by closed form, frame sum, and oracle.
    Scalar(Common),
    /// Verification sweeps; exit code 0 iff the check passes.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        which: Check,
    },
    /// Integrate a geodesic of the lifted metric.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// Horizontal part of the initial velocity, comma-separated.
        #[arg(long, value_parser = parse_csv)]
        vh: Option<Csv>,
        /// Vertical part of the initial velocity, comma-separated.
        #[arg(long, value_parser = parse_csv)]
        vv: Option<Csv>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Closed-form regression suite over the built-in models.
    VerifyPaper {
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Check {
    Codazzi,
    Flat,
    TotallyGeodesic,
    Incompressible,
    CrossValidate,
    NormIdentity,
    Ex0Pde,
}

#[derive(Clone)]
struct Csv(Vec<f64>);

fn parse_csv(s: &str) -> std::result::Result<Csv, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<f64>, String>>()
        .map(Csv)
}

fn parse_triple(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 3 || v.contains(&0) {
        return Err("expected three 1-based indices i,j,k".into());
    }
    Ok((v[0] - 1, v[1] - 1, v[2] - 1))
}

struct Loaded {
    name: String,
    spec: ManifoldSpec,
    sample_points: Vec<Vec<f64>>,
}

fn load(common: &Common) -> Result<Loaded> {
    if let Some(path) = &common.spec {
        let text = std::fs::read_to_string(path).map_err(|e| GeomError::Schema {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let (name, spec) = models::load_spec(&text)?;
        let point = common
            .point
            .clone()
            .map(|c| c.0)
            .unwrap_or_else(|| vec![0.0; spec.dim]);
        Ok(Loaded {
            name,
            spec,
            sample_points: vec![point],
        })
    } else {
        let name = common.model.clone().unwrap_or_else(|| "normal".into());
        let entry = models::catalog()
            .into_iter()
            .find(|m| m.name == name)
            .ok_or_else(|| GeomError::Schema {
                path: "--model".into(),
                reason: format!("unknown model '{name}'"),
            })?;
        Ok(Loaded {
            name: entry.name,
            spec: entry.spec,
            sample_points: entry.sample_points,
        })
    }
}

fn point_of(common: &Common, loaded: &Loaded) -> Vec<f64> {
    common
        .point
        .clone()
        .map(|c| c.0)
        .unwrap_or_else(|| loaded.sample_points[0].clone())
}

fn fiber_of(common: &Common, loaded: &Loaded) -> Vec<f64> {
    common
        .fiber
        .clone()
        .map(|c| c.0)
        .unwrap_or_else(|| vec![0.5; loaded.spec.dim])
}

fn envelope(common: &Common, command: &str, loaded: &Loaded, tol: f64) -> Vec<(String, JVal)> {
    let doc = models::save_spec(&loaded.name, &loaded.spec);
    let hash = hex(&Sha256::digest(doc.as_bytes()));
    vec![
        ("version".into(), JVal::s(env!("CARGO_PKG_VERSION"))),
        ("command".into(), JVal::s(command)),
        ("model".into(), JVal::s(&loaded.name)),
        ("spec_sha256".into(), JVal::s(&hash)),
        ("p".into(), JVal::Num(common.p)),
        ("q".into(), JVal::Num(common.q)),
        ("seed".into(), JVal::Int(common.seed as i64)),
        ("tolerance".into(), JVal::Num(tol)),
    ]
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn emit(common_out: &Option<String>, text: &str) -> Result<()> {
    match common_out {
        Some(path) => std::fs::write(path, text).map_err(|e| GeomError::Schema {
            path: path.clone(),
            reason: e.to_string(),
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn t2(m: &[Vec<f64>]) -> JVal {
    JVal::Arr(m.iter().map(|r| JVal::nums(r)).collect())
}

fn t3(m: &[Vec<Vec<f64>>]) -> JVal {
    JVal::Arr(m.iter().map(|r| t2(r)).collect())
}

fn t4(m: &[Vec<Vec<Vec<f64>>>]) -> JVal {
    JVal::Arr(m.iter().map(|r| t3(r)).collect())
}

fn cmd_describe(common: &Common) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let x = point_of(common, &loaded);
    let geo = loaded.spec.geometry_at(&x)?;
    let mut obj = envelope(common, "describe", &loaded, 0.0);
    obj.push(("point".into(), JVal::nums(&x)));
    obj.push(("g".into(), t2(&geo.g)));
    obj.push(("g_inv".into(), t2(&geo.ginv)));
    obj.push(("gamma_hat".into(), t3(&geo.gamma_hat)));
    obj.push(("skewness".into(), t3(&geo.k)));
    obj.push(("gamma".into(), t3(&geo.gamma)));
    obj.push(("gamma_star".into(), t3(&geo.gamma_star)));
    obj.push(("cubic".into(), t3(&geo.c_low)));
    obj.push(("curvature".into(), t4(&geo.r)));
    obj.push(("curvature_lc".into(), t4(&geo.r_hat)));
    obj.push(("nabla_k".into(), t4(&geo.nabla_k)));
    Ok((JVal::Obj(obj).pretty(), true))
}

fn cmd_connection(common: &Common) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let x = point_of(common, &loaded);
    let u = fiber_of(common, &loaded);
    let geo = loaded.spec.geometry_at(&x)?;
    let b = Bundle::new(&geo, &u, MetricParams { p: common.p, q: common.q })?;
    let coeffs = b.nabla_pq_coeffs();
    let n = geo.n;
    let labels: Vec<String> = (0..2 * n)
        .map(|a| {
            if a < n {
                format!("H{}", a + 1)
            } else {
                format!("V{}", a - n + 1)
            }
        })
        .collect();
    let mut obj = envelope(common, "connection", &loaded, 0.0);
    obj.push(("point".into(), JVal::nums(&x)));
    obj.push(("fiber".into(), JVal::nums(&u)));
    obj.push((
        "frame".into(),
        JVal::Arr(labels.iter().map(|l| JVal::s(l)).collect()),
    ));
    obj.push(("coefficients".into(), t3(&coeffs)));
    Ok((JVal::Obj(obj).pretty(), true))
}

fn cmd_curvature(
    common: &Common,
    triples: &[(usize, usize, usize)],
) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let x = point_of(common, &loaded);
    let u = fiber_of(common, &loaded);
    let geo = loaded.spec.geometry_at(&x)?;
    let b = Bundle::new(&geo, &u, MetricParams { p: common.p, q: common.q })?;
    let n = geo.n;
    let triples: Vec<(usize, usize, usize)> = if triples.is_empty() {
        let mut all = vec![];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    all.push((i, j, k));
                }
            }
        }
        all
    } else {
        triples.to_vec()
    };
    type BlockFn<'a> = Box<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + 'a>;
    let blocks: Vec<(&'static str, BlockFn)> = vec![
        ("R(Hi,Hj)Hk horizontal", Box::new(|x, y, z| b.curv_hhh_h(x, y, z))),
        ("R(Hi,Hj)Hk vertical", Box::new(|x, y, z| b.curv_hhh_v(x, y, z))),
        ("R(Hi,Hj)Vk horizontal", Box::new(|x, y, z| b.curv_hhv_h(x, y, z))),
        ("R(Hi,Hj)Vk vertical", Box::new(|x, y, z| b.curv_hhv_v(x, y, z))),
        ("R(Hi,Vj)Hk horizontal", Box::new(|x, y, z| b.curv_hvh_h(x, y, z))),
        ("R(Hi,Vj)Hk vertical", Box::new(|x, y, z| b.curv_hvh_v(x, y, z))),
        ("R(Hi,Vj)Vk horizontal", Box::new(|x, y, z| b.curv_hvv_h(x, y, z))),
        ("R(Hi,Vj)Vk vertical", Box::new(|x, y, z| b.curv_hvv_v(x, y, z))),
        ("R(Vi,Vj)Hk horizontal", Box::new(|x, y, z| b.curv_vvh_h(x, y, z))),
        ("R(Vi,Vj)Hk vertical", Box::new(|x, y, z| b.curv_vvh_v(x, y, z))),
        ("R(Vi,Vj)Vk horizontal", Box::new(|x, y, z| b.curv_vvv_h(x, y, z))),
        ("R(Vi,Vj)Vk vertical", Box::new(|x, y, z| b.curv_vvv_v(x, y, z))),
    ];
    let mut obj = envelope(common, "curvature", &loaded, 0.0);
    obj.push(("point".into(), JVal::nums(&x)));
    obj.push(("fiber".into(), JVal::nums(&u)));
    let mut comp = vec![];
    for (name, f) in &blocks {
        let mut rows = vec![];
        for &(i, j, k) in &triples {
            let mut ei = vec![0.0; n];
            let mut ej = vec![0.0; n];
            let mut ek = vec![0.0; n];
            ei[i] = 1.0;
            ej[j] = 1.0;
            ek[k] = 1.0;
            let val = f(&ei, &ej, &ek);
            rows.push(JVal::Obj(vec![
                (
                    "ijk".into(),
                    JVal::Arr(
                        [i, j, k]
                            .iter()
                            .map(|&v| JVal::Int(v as i64 + 1))
                            .collect(),
                    ),
                ),
                ("value".into(), JVal::nums(&val)),
            ]));
        }
        comp.push((name.to_string(), JVal::Arr(rows)));
    }
    obj.push(("components".into(), JVal::Obj(comp)));
    Ok((JVal::Obj(obj).pretty(), true))
}

fn cmd_sectional(common: &Common) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let x = point_of(common, &loaded);
    let u = fiber_of(common, &loaded);
    let geo = loaded.spec.geometry_at(&x)?;
    let b = Bundle::new(&geo, &u, MetricParams { p: common.p, q: common.q })?;
    let frame = analysis::lifted_orthonormal_frame(&b)?;
    let table = analysis::sectional_frame(&b, &frame);
    let sc = analysis::SectionalConstants::new(common.p, common.q, b.tau);
    let mut obj = envelope(common, "sectional", &loaded, 0.0);
    obj.push(("point".into(), JVal::nums(&x)));
    obj.push(("fiber".into(), JVal::nums(&u)));
    obj.push(("base_frame".into(), t2(&frame.base)));
    obj.push((
        "constants".into(),
        JVal::Obj(vec![
            ("A1".into(), JVal::Num(sc.a1)),
            ("A2".into(), JVal::Num(sc.a2)),
            ("A3".into(), JVal::Num(sc.a3)),
            ("A4".into(), JVal::Num(sc.a4)),
            ("A5".into(), JVal::Num(sc.a5)),
            ("B1".into(), JVal::Num(sc.b1)),
            ("B2".into(), JVal::Num(sc.b2)),
            ("B3".into(), JVal::Num(sc.b3)),
            ("B4".into(), JVal::Num(sc.b4)),
        ]),
    ));
    obj.push(("sectional_table".into(), t2(&table)));
    Ok((JVal::Obj(obj).pretty(), true))
}

fn cmd_scalar(common: &Common) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let x = point_of(common, &loaded);
    let u = fiber_of(common, &loaded);
    let mp = MetricParams { p: common.p, q: common.q };
    let rep = analysis::scalar_pq(&loaded.spec, &x, &u, mp)?;
    let tol = common.tol.unwrap_or(1e-6);
    let scale = rep.oracle.abs().max(1.0);
    let pass = (rep.closed - rep.frame).abs() <= tol * scale
        && (rep.frame - rep.oracle).abs() <= tol * scale;
    let mut obj = envelope(common, "scalar", &loaded, tol);
    obj.push(("point".into(), JVal::nums(&x)));
    obj.push(("fiber".into(), JVal::nums(&u)));
    obj.push(("closed_form".into(), JVal::Num(rep.closed)));
    obj.push(("frame_sum".into(), JVal::Num(rep.frame)));
    obj.push(("oracle".into(), JVal::Num(rep.oracle)));
    obj.push(("pass".into(), JVal::Bool(pass)));
    Ok((JVal::Obj(obj).pretty(), pass))
}

fn seeded_fibers(n: usize, q: f64, geo: &statgeo::statman::BaseGeometry, seed: u64, count: usize) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![];
    while out.len() < count {
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 2.0 {
            for v in &mut u {
                *v *= 2.0 / norm;
            }
        }
        if 1.0 + q * geo.gdot(&u, &u) > 0.1 {
            out.push(u);
        }
    }
    out
}

fn cmd_check(common: &Common, which: Check) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let mp = MetricParams { p: common.p, q: common.q };
    let points: Vec<Vec<f64>> = match &common.point {
        Some(x) => vec![x.0.clone()],
        None => loaded.sample_points.clone(),
    };
    let fibers_per_point = (common.samples / points.len().max(1)).max(1);

    let (name, payload, pass, tol): (&str, Vec<(String, JVal)>, bool, f64) = match which {
        Check::Codazzi => {
            let tol = common.tol.unwrap_or(1e-9);
            let mut worst: f64 = 0.0;
            for x in &points {
                let geo = loaded.spec.geometry_at(x)?;
                worst = worst
                    .max(geo.curvature_decomposition_deviation())
                    .max(geo.duality_deviation())
                    .max(geo.lc_compatibility_deviation());
            }
            (
                "codazzi",
                vec![("max_deviation".into(), JVal::Num(worst))],
                worst <= tol,
                tol,
            )
        }
        Check::Flat => {
            let tol = common.tol.unwrap_or(1e-8);
            let rep = analysis::constant_curvature_check(&loaded.spec, mp, &points, common.seed)?;
            let lifted_ok = rep.max_lifted_curvature.map(|v| v <= 1e-9).unwrap_or(false);
            let pass = rep.constant_curvature_candidate && lifted_ok;
            (
                "flat",
                vec![
                    ("max_curvature".into(), JVal::Num(rep.max_r)),
                    ("max_curvature_lc".into(), JVal::Num(rep.max_r_hat)),
                    ("max_nabla_k".into(), JVal::Num(rep.max_nabla_k)),
                    ("max_k_commutator".into(), JVal::Num(rep.max_k_commutator)),
                    ("is_sasaki".into(), JVal::Bool(rep.is_sasaki)),
                    (
                        "max_lifted_curvature".into(),
                        rep.max_lifted_curvature.map(JVal::Num).unwrap_or(JVal::Null),
                    ),
                    (
                        "constant_curvature_candidate".into(),
                        JVal::Bool(rep.constant_curvature_candidate),
                    ),
                ],
                pass,
                tol,
            )
        }
        Check::TotallyGeodesic => {
            let tol = common.tol.unwrap_or(1e-8);
            let n = loaded.spec.dim;
            let mut max_defect: f64 = 0.0;
            let mut max_k: f64 = 0.0;
            for x in &points {
                let geo = loaded.spec.geometry_at(x)?;
                for u in seeded_fibers(n, common.q, &geo, common.seed, fibers_per_point) {
                    let b = Bundle::new(&geo, &u, mp)?;
                    for i in 0..n {
                        for j in 0..n {
                            let mut ei = vec![0.0; n];
                            let mut ej = vec![0.0; n];
                            ei[i] = 1.0;
                            ej[j] = 1.0;
                            let d = b.totally_geodesic_defect(&ei, &ej);
                            max_defect =
                                max_defect.max(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                            max_k = max_k.max(
                                geo.k_map(&ei, &ej)
                                    .iter()
                                    .fold(0.0f64, |m, v| m.max(v.abs())),
                            );
                        }
                    }
                }
            }
            let expected = (common.p == 0.0 && common.q == 0.0) || max_k <= tol;
            let observed = max_defect <= tol;
            (
                "totally-geodesic",
                vec![
                    ("max_defect".into(), JVal::Num(max_defect)),
                    ("max_skewness".into(), JVal::Num(max_k)),
                    ("expected_totally_geodesic".into(), JVal::Bool(expected)),
                    ("observed_totally_geodesic".into(), JVal::Bool(observed)),
                ],
                expected == observed,
                tol,
            )
        }
        Check::Incompressible => {
            let tol = common.tol.unwrap_or(1e-6);
            let n = loaded.spec.dim;
            let mut max_dev: f64 = 0.0;
            let mut max_div: f64 = 0.0;
            let mut max_k: f64 = 0.0;
            for x in &points {
                let geo = loaded.spec.geometry_at(x)?;
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            max_k = max_k.max(geo.k[l][i][j].abs());
                        }
                    }
                }
                for u in seeded_fibers(n, common.q, &geo, common.seed, fibers_per_point) {
                    let b = Bundle::new(&geo, &u, mp)?;
                    let closed = b.geodesic_flow_divergence();
                    let im = oracle::induced_metric_jets(&loaded.spec, x, &u, mp)?;
                    let od = oracle::oracle_divergence(&im);
                    max_dev = max_dev.max((closed - od).abs());
                    max_div = max_div.max(closed.abs());
                }
            }
            let expected_zero = (common.p == 0.0 && common.q == 0.0) || max_k <= 1e-12;
            let observed_zero = max_div <= 1e-10;
            (
                "incompressible",
                vec![
                    ("max_closed_vs_oracle".into(), JVal::Num(max_dev)),
                    ("max_divergence".into(), JVal::Num(max_div)),
                    ("expected_incompressible".into(), JVal::Bool(expected_zero)),
                    ("observed_incompressible".into(), JVal::Bool(observed_zero)),
                ],
                max_dev <= tol && expected_zero == observed_zero,
                tol,
            )
        }
        Check::CrossValidate => {
            let conn_tol = 1e-8;
            let tol = common.tol.unwrap_or(1e-6);
            let rep =
                oracle::cross_validate(&loaded.spec, mp, &points, fibers_per_point, common.seed)?;
            let mut pass = true;
            let mut rows = vec![];
            for blk in &rep.blocks {
                let t = if blk.name.starts_with("conn") { conn_tol } else { tol };
                if blk.max_rel > t {
                    pass = false;
                }
                rows.push(JVal::Obj(vec![
                    ("block".into(), JVal::s(blk.name)),
                    ("max_abs".into(), JVal::Num(blk.max_abs)),
                    ("max_rel".into(), JVal::Num(blk.max_rel)),
                    ("worst_x".into(), JVal::nums(&blk.worst_x)),
                    ("worst_u".into(), JVal::nums(&blk.worst_u)),
                ]));
            }
            (
                "cross-validate",
                vec![
                    ("samples".into(), JVal::Int(rep.samples as i64)),
                    ("max_rel".into(), JVal::Num(rep.max_rel)),
                    (
                        "frame_consistency".into(),
                        JVal::Num(rep.frame_consistency),
                    ),
                    ("blocks".into(), JVal::Arr(rows)),
                ],
                pass,
                tol,
            )
        }
        Check::NormIdentity => {
            let tol = common.tol.unwrap_or(1e-9);
            let n = loaded.spec.dim;
            let mut worst: f64 = 0.0;
            for x in &points {
                let geo = loaded.spec.geometry_at(x)?;
                for u in seeded_fibers(n, common.q, &geo, common.seed, fibers_per_point) {
                    let (_, _, dev) = analysis::norm_identity_check(&geo, &u)?;
                    worst = worst.max(dev);
                }
            }
            (
                "norm-identity",
                vec![("max_deviation".into(), JVal::Num(worst))],
                worst <= tol,
                tol,
            )
        }
        Check::Ex0Pde => {
            let tol = common.tol.unwrap_or(1e-10);
            let params: Vec<String> = {
                let mut p: Vec<String> = loaded.spec.params.keys().cloned().collect();
                p.sort();
                p
            };
            let a = statgeo::expr::parse("1/(c1-x1)", 2, &params)?;
            let bb = statgeo::expr::parse("1/(c2-x2)", 2, &params)?;
            let zero = statgeo::expr::parse("0", 2, &params)?;
            let mut pmap = loaded.spec.params.clone();
            pmap.entry("c1".into()).or_insert(2.0);
            pmap.entry("c2".into()).or_insert(3.0);
            let mut worst: f64 = 0.0;
            for x in &points {
                let res = models::ex0_pde_residual(&a, &bb, &zero, &zero, x, &pmap)?;
                worst = worst.max(res.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
            (
                "ex0-pde",
                vec![("max_residual".into(), JVal::Num(worst))],
                worst <= tol,
                tol,
            )
        }
    };

    let mut obj = envelope(common, "check", &loaded, tol);
    obj.push(("check".into(), JVal::s(name)));
    obj.extend(payload);
    obj.push(("pass".into(), JVal::Bool(pass)));
    Ok((JVal::Obj(obj).pretty(), pass))
}

fn cmd_geodesic(
    common: &Common,
    vh: Option<Csv>,
    vv: Option<Csv>,
    t_end: f64,
    dt: f64,
) -> Result<(String, bool)> {
    let loaded = load(common)?;
    let n = loaded.spec.dim;
    let x = point_of(common, &loaded);
    let u = fiber_of(common, &loaded);
    let mut v = LiftedVector::zero(n);
    if let Some(h) = vh {
        v.h = h.0;
    } else {
        v.h = vec![1.0; n];
    }
    if let Some(vert) = vv {
        v.v = vert.0;
    }
    let mp = MetricParams { p: common.p, q: common.q };
    let traj = cgbundle::integrate_geodesic(&loaded.spec, mp, &x, &u, &v, t_end, dt)?;
    if common.format == Format::Csv {
        let mut out = String::new();
        out.push('t');
        for i in 0..n {
            out.push_str(&format!(",x{}", i + 1));
        }
        for i in 0..n {
            out.push_str(&format!(",u{}", i + 1));
        }
        out.push_str(",speed2\n");
        for pt in &traj {
            out.push_str(&format!("{}", pt.t));
            for v in pt.x.iter().chain(pt.u.iter()) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", pt.speed2));
        }
        return Ok((out, true));
    }
    let drift = {
        let s0 = traj.first().map(|p| p.speed2).unwrap_or(0.0);
        traj.iter()
            .map(|p| (p.speed2 - s0).abs())
            .fold(0.0f64, f64::max)
            / s0.abs().max(1e-300)
    };
    let mut obj = envelope(common, "geodesic", &loaded, 0.0);
    obj.push(("t_end".into(), JVal::Num(t_end)));
    obj.push(("dt".into(), JVal::Num(dt)));
    obj.push(("speed2_relative_drift".into(), JVal::Num(drift)));
    obj.push((
        "trajectory".into(),
        JVal::Arr(
            traj.iter()
                .map(|p| {
                    JVal::Obj(vec![
                        ("t".into(), JVal::Num(p.t)),
                        ("x".into(), JVal::nums(&p.x)),
                        ("u".into(), JVal::nums(&p.u)),
                        ("speed2".into(), JVal::Num(p.speed2)),
                    ])
                })
                .collect(),
        ),
    ));
    Ok((JVal::Obj(obj).pretty(), true))
}

struct Row {
    label: String,
    expected: f64,
    computed: f64,
    tol: f64,
}

fn verify_rows() -> Result<Vec<Row>> {
    let mut rows = vec![];
    let catalog = models::catalog();

    // closed-form tensor tables of every model
    for entry in &catalog {
        rows.push(Row {
            label: format!("{}: tensor table deviation", entry.name),
            expected: 0.0,
            computed: entry.expected_deviation()?,
            tol: 1e-10,
        });
    }

    // exponential model: closed-form base tensors
    let expo = catalog.iter().find(|e| e.name == "exponential").unwrap();
    for &xi in &[0.5, 1.0, 2.0] {
        let geo = expo.spec.geometry_at(&[xi])?;
        for (label, expected, computed) in [
            ("g11 - 1/ξ²", 1.0 / (xi * xi), geo.g[0][0]),
            ("Γ̂¹₁₁ + 1/ξ", -1.0 / xi, geo.gamma_hat[0][0][0]),
            ("K¹₁₁ - 1/ξ", 1.0 / xi, geo.k[0][0][0]),
            ("C₁₁₁ + 2/ξ³", -2.0 / (xi * xi * xi), geo.c_low[0][0][0]),
        ] {
            rows.push(Row {
                label: format!("exponential ξ={xi}: {label}"),
                expected,
                computed,
                tol: 1e-12,
            });
        }
        // connection/curvature blocks against the coordinate oracle
        let rep = oracle::cross_validate(
            &expo.spec,
            MetricParams { p: 1.0, q: 1.0 },
            &[vec![xi]],
            5,
            42,
        )?;
        rows.push(Row {
            label: format!("exponential ξ={xi} (1,1): oracle max relative deviation"),
            expected: 0.0,
            computed: rep.max_rel,
            tol: 1e-7,
        });
    }

    // scalar curvature: closed form, frame sum, and oracle must agree
    for entry in &catalog {
        if entry.spec.signature != statgeo::statman::Signature::Riemannian {
            continue;
        }
        let x = entry.sample_points[0].clone();
        let u = vec![0.5; entry.spec.dim];
        let rep = analysis::scalar_pq(&entry.spec, &x, &u, MetricParams { p: 1.0, q: 1.0 })?;
        let dev = (rep.closed - rep.oracle)
            .abs()
            .max((rep.frame - rep.oracle).abs())
            / rep.oracle.abs().max(1.0);
        rows.push(Row {
            label: format!("{}: scalar three-route agreement (1,1)", entry.name),
            expected: 0.0,
            computed: dev,
            tol: 1e-6,
        });
    }

    // exponential model: geodesic-flow divergence at ξ=1, u=1, p=q=1.
    // See DISCREPANCIES.md §1 for the value.
    {
        let geo = expo.spec.geometry_at(&[1.0])?;
        let b = Bundle::new(&geo, &[1.0], MetricParams { p: 1.0, q: 1.0 })?;
        rows.push(Row {
            label: "exponential ξ=1 (1,1): div ξ".into(),
            expected: -2.0,
            computed: b.geodesic_flow_divergence(),
            tol: 1e-9,
        });
    }

    // normal model is never a constant-curvature candidate
    let normal = catalog.iter().find(|e| e.name == "normal").unwrap();
    for (p, q) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        let rep = analysis::constant_curvature_check(
            &normal.spec,
            MetricParams { p, q },
            &normal.sample_points,
            42,
        )?;
        rows.push(Row {
            label: format!("normal (p,q)=({p},{q}): flat candidate (0 = false)"),
            expected: 0.0,
            computed: rep.constant_curvature_candidate as i64 as f64,
            tol: 0.5,
        });
    }

    // deformed-Euclid parallelism PDE and structure norms
    let euclid = catalog.iter().find(|e| e.name == "euclid_deformed_ab").unwrap();
    {
        let params = vec!["c1".to_string(), "c2".to_string()];
        let a = statgeo::expr::parse("1/(c1-x1)", 2, &params)?;
        let bb = statgeo::expr::parse("1/(c2-x2)", 2, &params)?;
        let zero = statgeo::expr::parse("0", 2, &params)?;
        let mut pmap = HashMap::new();
        pmap.insert("c1".to_string(), 3.0);
        pmap.insert("c2".to_string(), 3.0);
        let mut worst: f64 = 0.0;
        for x in &euclid.sample_points {
            for r in models::ex0_pde_residual(&a, &bb, &zero, &zero, x, &pmap)? {
                worst = worst.max(r.abs());
            }
        }
        rows.push(Row {
            label: "euclid_deformed_ab: parallelism PDE residual".into(),
            expected: 0.0,
            computed: worst,
            tol: 1e-10,
        });
        let rep = analysis::constant_curvature_check(
            &euclid.spec,
            MetricParams { p: 0.0, q: 0.0 },
            &euclid.sample_points,
            42,
        )?;
        rows.push(Row {
            label: "euclid_deformed_ab (0,0): flat candidate (1 = true)".into(),
            expected: 1.0,
            computed: rep.constant_curvature_candidate as i64 as f64,
            tol: 0.5,
        });
        rows.push(Row {
            label: "euclid_deformed_ab (0,0): lifted curvature spot check".into(),
            expected: 0.0,
            computed: rep.max_lifted_curvature.unwrap_or(f64::NAN),
            tol: 1e-8,
        });
    }

    // off-diagonal plane: constant skewness is flat, coordinate-dependent is not
    {
        let flat = models::pseudo_offdiag("2")?;
        let geo = flat.spec_geometry_probe()?;
        rows.push(Row {
            label: "pseudo_offdiag f=2: max base curvature".into(),
            expected: 0.0,
            computed: geo,
            tol: 1e-9,
        });
        let curved = models::pseudo_offdiag("x1")?;
        let g = curved.geometry_at(&[0.0, 0.7])?;
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for l in 0..2 {
                for k in 0..2 {
                    for i in 0..2 {
                        worst = worst.max(g.nabla_k[a][l][k][i].abs());
                    }
                }
            }
        }
        rows.push(Row {
            label: "pseudo_offdiag f=x1: max ∇K (≥ 0.5 expected)".into(),
            expected: 1.0,
            computed: worst.min(1.0).max(0.5_f64.min(worst)),
            tol: 0.5,
        });
    }

    Ok(rows)
}

trait ProbeExt {
    fn spec_geometry_probe(&self) -> Result<f64>;
}
impl ProbeExt for ManifoldSpec {
    fn spec_geometry_probe(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in [[0.0, 0.0], [0.5, -0.3], [1.0, 2.0]] {
            let geo = self.geometry_at(&x)?;
            for l in 0..self.dim {
                for k in 0..self.dim {
                    for i in 0..self.dim {
                        for j in 0..self.dim {
                            worst = worst.max(geo.r[l][k][i][j].abs());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }
}

fn cmd_verify(out: &Option<String>) -> Result<(String, bool)> {
    let rows = verify_rows()?;
    let mut pass = true;
    let mut arr = vec![];
    let mut text_rows = String::new();
    for r in &rows {
        let ok = (r.computed - r.expected).abs() <= r.tol;
        if !ok {
            pass = false;
        }
        text_rows.push_str(&format!(
            "{:60} expected {:>12.5e} computed {:>12.5e} {}\n",
            r.label,
            r.expected,
            r.computed,
            if ok { "PASS" } else { "FAIL" }
        ));
        arr.push(JVal::Obj(vec![
            ("label".into(), JVal::s(&r.label)),
            ("expected".into(), JVal::Num(r.expected)),
            ("computed".into(), JVal::Num(r.computed)),
            ("tolerance".into(), JVal::Num(r.tol)),
            ("pass".into(), JVal::Bool(ok)),
        ]));
    }
    eprint!("{text_rows}");
    let obj = JVal::Obj(vec![
        ("version".into(), JVal::s(env!("CARGO_PKG_VERSION"))),
        ("command".into(), JVal::s("verify-paper")),
        ("rows".into(), JVal::Arr(arr)),
        ("pass".into(), JVal::Bool(pass)),
    ]);
    emit(out, &obj.pretty())?;
    Ok((String::new(), pass))
}

fn run(cli: Cli) -> Result<bool> {
    let (text, pass, out) = match &cli.cmd {
        Cmd::Describe(c) => {
            let (t, p) = cmd_describe(c)?;
            (t, p, c.out.clone())
        }
        Cmd::Connection(c) => {
            let (t, p) = cmd_connection(c)?;
            (t, p, c.out.clone())
        }
        Cmd::Curvature { common, triple } => {
            let (t, p) = cmd_curvature(common, triple)?;
            (t, p, common.out.clone())
        }
        Cmd::Sectional(c) => {
            let (t, p) = cmd_sectional(c)?;
            (t, p, c.out.clone())
        }
        Cmd::Scalar(c) => {
            let (t, p) = cmd_scalar(c)?;
            (t, p, c.out.clone())
        }
        Cmd::Check { common, which } => {
            let (t, p) = cmd_check(common, *which)?;
            (t, p, common.out.clone())
        }
        Cmd::Geodesic {
            common,
            vh,
            vv,
            t_end,
            dt,
        } => {
            let (t, p) = cmd_geodesic(common, vh.clone(), vv.clone(), *t_end, *dt)?;
            (t, p, common.out.clone())
        }
        Cmd::VerifyPaper { out } => {
            let (_, p) = cmd_verify(out)?;
            return Ok(p);
        }
    };
    emit(&out, &text)?;
    Ok(pass)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GEOM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let obj = JVal::Obj(vec![(
                "error".into(),
                JVal::Obj(vec![
                    ("kind".into(), JVal::s(error_kind(&e))),
                    ("message".into(), JVal::s(&e.to_string())),
                ]),
            )]);
            eprintln!("{}", obj.pretty());
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &GeomError) -> &'static str {
    match e {
        GeomError::Syntax { .. } => "syntax",
        GeomError::UnknownIdentifier { .. } => "unknown-identifier",
        GeomError::Domain { .. } => "domain",
        GeomError::SingularMetric { .. } => "singular-metric",
        GeomError::NotStatistical { .. } => "not-statistical",
        GeomError::OutsideBMq { .. } => "outside-bmq",
        GeomError::LeftBMq { .. } => "left-bmq",
        GeomError::StepRejected { .. } => "step-rejected",
        GeomError::DegeneratePlane { .. } => "degenerate-plane",
        GeomError::NotOrthonormal { .. } => "not-orthonormal",
        GeomError::ZeroFiberVector => "zero-fiber-vector",
        GeomError::PseudoRiemannianUnsupported => "pseudo-riemannian-unsupported",
        GeomError::Schema { .. } => "schema",
        GeomError::Symmetry { .. } => "symmetry",
    }
}
