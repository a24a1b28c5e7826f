//! Built-in manifold catalog with closed-form expected values, the
//! deformed-Euclidean parallelism PDE residuals, and JSON spec I/O.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use crate::error::{GeomError, Result};
use crate::expr::{parse, Expr};
use crate::jet::table;
use crate::statman::{BaseGeometry, ManifoldSpec, Signature, SkewInput};

/// A tensor slot an expected value refers to.
#[derive(Debug, Clone)]
pub enum Slot {
    G(usize, usize),
    GammaHat(usize, usize, usize),
    K(usize, usize, usize),
    Gamma(usize, usize, usize),
    GammaStar(usize, usize, usize),
    CLow(usize, usize, usize),
    R(usize, usize, usize, usize),
    NablaK(usize, usize, usize, usize),
}

impl Slot {
    pub fn read(&self, geo: &BaseGeometry) -> f64 {
        match *self {
            Slot::G(i, j) => geo.g[i][j],
            Slot::GammaHat(l, i, j) => geo.gamma_hat[l][i][j],
            Slot::K(l, i, j) => geo.k[l][i][j],
            Slot::Gamma(l, i, j) => geo.gamma[l][i][j],
            Slot::GammaStar(l, i, j) => geo.gamma_star[l][i][j],
            Slot::CLow(i, j, k) => geo.c_low[i][j][k],
            Slot::R(l, k, i, j) => geo.r[l][k][i][j],
            Slot::NablaK(a, l, i, j) => geo.nabla_k[a][l][i][j],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expected {
    pub label: String,
    pub slot: Slot,
    pub expr: Expr,
}

pub struct ModelCatalogEntry {
    pub name: String,
    pub spec: ManifoldSpec,
    pub expected: Vec<Expected>,
    pub note: String,
    /// Points in the model's domain used by regression tests.
    pub sample_points: Vec<Vec<f64>>,
}

impl ModelCatalogEntry {
    /// Max |engine − closed form| over the expected table and sample points.
    pub fn expected_deviation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in &self.sample_points {
            let geo = self.spec.geometry_at(x)?;
            for e in &self.expected {
                let want = e.expr.eval(x, &self.spec.params)?;
                worst = worst.max((e.slot.read(&geo) - want).abs());
            }
        }
        Ok(worst)
    }
}

fn zero_exprs(n: usize) -> Vec<Vec<Vec<Expr>>> {
    let z = parse("0", n, &[]).unwrap();
    vec![vec![vec![z; n]; n]; n]
}

fn metric_exprs(n: usize, entries: &[(usize, usize, &str)], params: &[String]) -> Vec<Vec<Expr>> {
    let z = parse("0", n, params).unwrap();
    let mut m = vec![vec![z; n]; n];
    for &(i, j, text) in entries {
        let e = parse(text, n, params).unwrap();
        m[i][j] = e.clone();
        m[j][i] = e;
    }
    m
}

fn skew_exprs(
    n: usize,
    entries: &[(usize, usize, usize, &str)],
    params: &[String],
) -> Vec<Vec<Vec<Expr>>> {
    let mut k = zero_exprs(n);
    for &(l, i, j, text) in entries {
        let e = parse(text, n, params).unwrap();
        k[l][i][j] = e.clone();
        k[l][j][i] = e;
    }
    k
}

fn expected(n: usize, params: &[String], rows: &[(&str, Slot, &str)]) -> Vec<Expected> {
    rows.iter()
        .map(|(label, slot, text)| Expected {
            label: label.to_string(),
            slot: slot.clone(),
            expr: parse(text, n, params).unwrap(),
        })
        .collect()
}

/// The off-diagonal pseudo-Riemannian plane with a single skewness
/// component K¹₂₂ given by an expression in (x1, x2).
pub fn pseudo_offdiag(ftilde: &str) -> Result<ManifoldSpec> {
    let metric = metric_exprs(2, &[(0, 1, "1")], &[]);
    let mut k = zero_exprs(2);
    k[0][1][1] = parse(ftilde, 2, &[])?;
    ManifoldSpec::new(
        2,
        vec!["x1".into(), "x2".into()],
        metric,
        SkewInput::Skewness(k),
        Signature::Pseudo,
        HashMap::new(),
    )
}

pub fn catalog() -> Vec<ModelCatalogEntry> {
    let mut out = Vec::new();

    // Exponential distributions, natural parameter x1 = ξ > 0.
    {
        let spec = ManifoldSpec::new(
            1,
            vec!["xi".into()],
            metric_exprs(1, &[(0, 0, "1/x1^2")], &[]),
            SkewInput::Skewness(skew_exprs(1, &[(0, 0, 0, "1/x1")], &[])),
            Signature::Riemannian,
            HashMap::new(),
        )
        .unwrap();
        let exp = expected(
            1,
            &[],
            &[
                ("g_11", Slot::G(0, 0), "1/x1^2"),
                ("lc_1_11", Slot::GammaHat(0, 0, 0), "-1/x1"),
                ("K_1_11", Slot::K(0, 0, 0), "1/x1"),
                ("conn_1_11", Slot::Gamma(0, 0, 0), "0"),
                ("dual_1_11", Slot::GammaStar(0, 0, 0), "-2/x1"),
                ("C_111", Slot::CLow(0, 0, 0), "-2/x1^3"),
            ],
        );
        out.push(ModelCatalogEntry {
            name: "exponential".into(),
            spec,
            expected: exp,
            note: "exponential family, Fisher metric 1/xi^2, exponential connection flat".into(),
            sample_points: vec![vec![0.5], vec![1.0], vec![2.0], vec![3.0], vec![5.0]],
        });
    }

    // Normal distributions, coordinates (mu, sigma), sigma = x2 > 0.
    {
        let spec = ManifoldSpec::new(
            2,
            vec!["mu".into(), "sigma".into()],
            metric_exprs(2, &[(0, 0, "1/x2^2"), (1, 1, "2/x2^2")], &[]),
            SkewInput::Skewness(skew_exprs(
                2,
                &[
                    (0, 0, 1, "-1/x2"),
                    (1, 0, 0, "-1/(2*x2)"),
                    (1, 1, 1, "-2/x2"),
                ],
                &[],
            )),
            Signature::Riemannian,
            HashMap::new(),
        )
        .unwrap();
        let exp = expected(
            2,
            &[],
            &[
                ("lc_1_12", Slot::GammaHat(0, 0, 1), "-1/x2"),
                ("lc_2_11", Slot::GammaHat(1, 0, 0), "1/(2*x2)"),
                ("lc_2_22", Slot::GammaHat(1, 1, 1), "-1/x2"),
                ("conn_1_12", Slot::Gamma(0, 0, 1), "-2/x2"),
                ("conn_2_11", Slot::Gamma(1, 0, 0), "0"),
                ("conn_2_22", Slot::Gamma(1, 1, 1), "-3/x2"),
                ("C_112", Slot::CLow(0, 0, 1), "2/x2^3"),
                ("C_222", Slot::CLow(1, 1, 1), "8/x2^3"),
                ("C_111", Slot::CLow(0, 0, 0), "0"),
                ("C_122", Slot::CLow(0, 1, 1), "0"),
                ("R_1_112", Slot::R(0, 0, 0, 1), "0"),
                ("R_2_112", Slot::R(1, 0, 0, 1), "0"),
                ("R_1_212", Slot::R(0, 1, 0, 1), "0"),
                ("R_2_212", Slot::R(1, 1, 0, 1), "0"),
            ],
        );
        out.push(ModelCatalogEntry {
            name: "normal".into(),
            spec,
            expected: exp,
            note: "normal family, Fisher metric diag(1/sigma^2, 2/sigma^2), flat exponential connection".into(),
            sample_points: vec![
                vec![0.0, 0.5],
                vec![0.3, 1.0],
                vec![-1.0, 2.0],
                vec![2.0, 1.5],
                vec![0.7, 3.0],
            ],
        });
    }

    // Euclidean plane with the solved parallel diagonal skewness family.
    {
        let params = vec!["c1".to_string(), "c2".to_string()];
        let mut pv = HashMap::new();
        pv.insert("c1".to_string(), 2.0);
        pv.insert("c2".to_string(), 3.0);
        let spec = ManifoldSpec::new(
            2,
            vec!["x1".into(), "x2".into()],
            metric_exprs(2, &[(0, 0, "1"), (1, 1, "1")], &params),
            SkewInput::Skewness(skew_exprs(
                2,
                &[(0, 0, 0, "1/(c1-x1)"), (1, 1, 1, "1/(c2-x2)")],
                &params,
            )),
            Signature::Riemannian,
            pv,
        )
        .unwrap();
        let mut exp = expected(
            2,
            &params,
            &[
                ("K_1_11", Slot::K(0, 0, 0), "1/(c1-x1)"),
                ("K_2_22", Slot::K(1, 1, 1), "1/(c2-x2)"),
            ],
        );
        for l in 0..2 {
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        exp.push(Expected {
                            label: format!("R_{}_{}{}{}", l + 1, k + 1, i + 1, j + 1),
                            slot: Slot::R(l, k, i, j),
                            expr: parse("0", 2, &params).unwrap(),
                        });
                        exp.push(Expected {
                            label: format!("nablaK_{}_{}{}{}", l + 1, k + 1, i + 1, j + 1),
                            slot: Slot::NablaK(l, k, i, j),
                            expr: parse("0", 2, &params).unwrap(),
                        });
                    }
                }
            }
        }
        out.push(ModelCatalogEntry {
            name: "euclid_deformed_ab".into(),
            spec,
            expected: exp,
            note: "Euclidean metric with parallel diagonal skewness A = 1/(c1-x1), B = 1/(c2-x2)"
                .into(),
            sample_points: vec![
                vec![0.0, 0.0],
                vec![0.5, 1.0],
                vec![-1.0, 0.5],
                vec![1.0, -1.0],
                vec![0.3, 0.7],
            ],
        });
    }

    // Off-diagonal pseudo-Riemannian plane with constant skewness.
    {
        let spec = pseudo_offdiag("3").unwrap();
        let mut exp = expected(2, &[], &[("C_222", Slot::CLow(1, 1, 1), "-6")]);
        for l in 0..2 {
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        exp.push(Expected {
                            label: format!("R_{}_{}{}{}", l + 1, k + 1, i + 1, j + 1),
                            slot: Slot::R(l, k, i, j),
                            expr: parse("0", 2, &[]).unwrap(),
                        });
                        exp.push(Expected {
                            label: format!("nablaK_{}_{}{}{}", l + 1, k + 1, i + 1, j + 1),
                            slot: Slot::NablaK(l, k, i, j),
                            expr: parse("0", 2, &[]).unwrap(),
                        });
                    }
                }
            }
        }
        out.push(ModelCatalogEntry {
            name: "pseudo_offdiag".into(),
            spec,
            expected: exp,
            note: "off-diagonal pseudo metric, single skewness component K^1_22 = 3".into(),
            sample_points: vec![
                vec![0.0, 0.0],
                vec![1.0, 2.0],
                vec![-0.5, 0.5],
                vec![3.0, -1.0],
                vec![0.2, 0.9],
            ],
        });
    }

    // Flat Euclidean plane with zero skewness: the lifted metric at
    // p = q = 0 is flat.
    {
        let spec = ManifoldSpec::new(
            2,
            vec!["x1".into(), "x2".into()],
            metric_exprs(2, &[(0, 0, "1"), (1, 1, "1")], &[]),
            SkewInput::Skewness(zero_exprs(2)),
            Signature::Riemannian,
            HashMap::new(),
        )
        .unwrap();
        let mut exp = Vec::new();
        for l in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    exp.push(Expected {
                        label: format!("K_{}_{}{}", l + 1, i + 1, j + 1),
                        slot: Slot::K(l, i, j),
                        expr: parse("0", 2, &[]).unwrap(),
                    });
                    exp.push(Expected {
                        label: format!("conn_{}_{}{}", l + 1, i + 1, j + 1),
                        slot: Slot::Gamma(l, i, j),
                        expr: parse("0", 2, &[]).unwrap(),
                    });
                }
            }
        }
        out.push(ModelCatalogEntry {
            name: "sasaki_flat".into(),
            spec,
            expected: exp,
            note: "Euclidean plane, zero skewness; flat lifted metric at p = q = 0".into(),
            sample_points: vec![
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![-2.0, 0.5],
                vec![0.3, -0.7],
                vec![5.0, 5.0],
            ],
        });
    }

    out
}

/// Residuals of the parallelism system for a diagonal/off-diagonal skewness
/// family on the Euclidean plane. The tensor is determined by four
/// functions A, B, C, D of (x1, x2); the eight PDE residuals come first,
/// the algebraic commutativity relation D(A-D) - C(C-B) last.
pub fn ex0_pde_residual(
    a: &Expr,
    b: &Expr,
    c: &Expr,
    d: &Expr,
    x: &[f64],
    params: &HashMap<String, f64>,
) -> Result<Vec<f64>> {
    let t = table(2, 1);
    let coords: Vec<crate::jet::Jet> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| crate::jet::Jet::variable(&t, i, v))
        .collect();
    let ja = a.eval_jet(&t, &coords, params)?;
    let jb = b.eval_jet(&t, &coords, params)?;
    let jc = c.eval_jet(&t, &coords, params)?;
    let jd = d.eval_jet(&t, &coords, params)?;
    let (av, bv, cv, dv) = (ja.value(), jb.value(), jc.value(), jd.value());
    Ok(vec![
        ja.d1(0) - (av * av + cv * cv),
        ja.d1(1) - cv * (av + dv),
        jb.d1(0) - dv * (bv + cv),
        jb.d1(1) - (bv * bv + dv * dv),
        jc.d1(0) - cv * (av + dv),
        jc.d1(1) - (cv * cv + dv * dv),
        jd.d1(0) - (cv * cv + dv * dv),
        jd.d1(1) - dv * (bv + cv),
        dv * (av - dv) - cv * (cv - bv),
    ])
}

// ---- JSON spec documents ----

fn schema_err(path: &str, reason: &str) -> GeomError {
    GeomError::Schema {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

fn get_str(obj: &Map<String, Value>, key: &str) -> Result<String> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| schema_err(key, "missing or not a string"))
}

/// Parse a JSON spec document into a named manifold spec.
///
/// Symmetric slots in `metric` and `skewness`/`christoffels` may be null;
/// they are mirrored from the transposed slot. Textually different but
/// numerically equal symmetric metric entries are accepted (checked at 10
/// deterministic sample points) and normalized to the lower-index text.
pub fn load_spec(text: &str) -> Result<(String, ManifoldSpec)> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| schema_err("", &format!("invalid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| schema_err("", "document is not an object"))?;
    let name = get_str(obj, "name")?;
    let dim = obj
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| schema_err("dim", "missing or not a positive integer"))? as usize;
    if dim == 0 || dim > 6 {
        return Err(schema_err("dim", "must be between 1 and 6"));
    }
    let coords: Vec<String> = match obj.get("coords") {
        None => (1..=dim).map(|i| format!("x{i}")).collect(),
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| schema_err("coords", "not an array"))?;
            if arr.len() != dim {
                return Err(schema_err("coords", "length must equal dim"));
            }
            arr.iter()
                .enumerate()
                .map(|(i, c)| {
                    c.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| schema_err(&format!("coords[{i}]"), "not a string"))
                })
                .collect::<Result<_>>()?
        }
    };
    let params: HashMap<String, f64> = match obj.get("params") {
        None => HashMap::new(),
        Some(v) => {
            let pobj = v
                .as_object()
                .ok_or_else(|| schema_err("params", "not an object"))?;
            pobj.iter()
                .map(|(k, val)| {
                    val.as_f64()
                        .map(|f| (k.clone(), f))
                        .ok_or_else(|| schema_err(&format!("params.{k}"), "not a number"))
                })
                .collect::<Result<_>>()?
        }
    };
    let param_names: Vec<String> = {
        let mut p: Vec<String> = params.keys().cloned().collect();
        p.sort();
        p
    };
    let signature = match obj.get("signature").and_then(Value::as_str) {
        None | Some("riemannian") => Signature::Riemannian,
        Some("pseudo") => Signature::Pseudo,
        Some(other) => {
            return Err(schema_err(
                "signature",
                &format!("unknown value {other:?}; expected \"riemannian\" or \"pseudo\""),
            ))
        }
    };

    // Metric: dim x dim array of expression strings (upper slots may be null).
    let marr = obj
        .get("metric")
        .and_then(Value::as_array)
        .ok_or_else(|| schema_err("metric", "missing or not an array"))?;
    if marr.len() != dim {
        return Err(schema_err("metric", "row count must equal dim"));
    }
    let mut mtext: Vec<Vec<Option<String>>> = Vec::with_capacity(dim);
    for (i, row) in marr.iter().enumerate() {
        let r = row
            .as_array()
            .ok_or_else(|| schema_err(&format!("metric[{i}]"), "not an array"))?;
        if r.len() != dim {
            return Err(schema_err(&format!("metric[{i}]"), "length must equal dim"));
        }
        let mut out = Vec::with_capacity(dim);
        for (j, cell) in r.iter().enumerate() {
            out.push(match cell {
                Value::Null => None,
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => {
                    return Err(schema_err(
                        &format!("metric[{i}][{j}]"),
                        "not a string, number, or null",
                    ))
                }
            });
        }
        mtext.push(out);
    }
    let mut metric: Vec<Vec<Expr>> = vec![vec![parse("0", dim, &param_names)?; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let cell = match (&mtext[i][j], &mtext[j][i]) {
                (Some(a), _) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => {
                    return Err(schema_err(
                        &format!("metric[{i}][{j}]"),
                        "both symmetric slots are null",
                    ))
                }
            };
            let e = parse(&cell, dim, &param_names)?;
            if let (Some(a), Some(b)) = (&mtext[i][j], &mtext[j][i]) {
                if a != b && i != j {
                    // Different texts: accept only if numerically equal.
                    let eb = parse(b, dim, &param_names)?;
                    for s in 0..10 {
                        let pt: Vec<f64> = (0..dim)
                            .map(|c| 0.37 + 0.11 * (s as f64) + 0.29 * (c as f64))
                            .collect();
                        let (va, vb) = (e.eval(&pt, &params), eb.eval(&pt, &params));
                        match (va, vb) {
                            (Ok(va), Ok(vb)) if (va - vb).abs() <= 1e-12 => {}
                            _ => {
                                return Err(GeomError::Symmetry {
                                    a: format!("metric[{}][{}]", i + 1, j + 1),
                                    b: format!("metric[{}][{}]", j + 1, i + 1),
                                })
                            }
                        }
                    }
                }
            }
            metric[i][j] = e.clone();
            metric[j][i] = e;
        }
    }

    // Skewness or Christoffel symbols: dim^3 nested arrays.
    let (key, is_skew) = if obj.contains_key("skewness") {
        ("skewness", true)
    } else if obj.contains_key("christoffels") {
        ("christoffels", false)
    } else {
        return Err(schema_err(
            "skewness",
            "one of \"skewness\" or \"christoffels\" is required",
        ));
    };
    let karr = obj
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| schema_err(key, "not an array"))?;
    if karr.len() != dim {
        return Err(schema_err(key, "outer length must equal dim"));
    }
    let mut ktext: Vec<Vec<Vec<Option<String>>>> = Vec::with_capacity(dim);
    for (l, block) in karr.iter().enumerate() {
        let b = block
            .as_array()
            .ok_or_else(|| schema_err(&format!("{key}[{l}]"), "not an array"))?;
        if b.len() != dim {
            return Err(schema_err(&format!("{key}[{l}]"), "length must equal dim"));
        }
        let mut rows = Vec::with_capacity(dim);
        for (i, row) in b.iter().enumerate() {
            let r = row
                .as_array()
                .ok_or_else(|| schema_err(&format!("{key}[{l}][{i}]"), "not an array"))?;
            if r.len() != dim {
                return Err(schema_err(
                    &format!("{key}[{l}][{i}]"),
                    "length must equal dim",
                ));
            }
            let mut cells = Vec::with_capacity(dim);
            for (j, cell) in r.iter().enumerate() {
                cells.push(match cell {
                    Value::Null => None,
                    Value::String(s) => Some(s.clone()),
                    Value::Number(n) => Some(n.to_string()),
                    _ => {
                        return Err(schema_err(
                            &format!("{key}[{l}][{i}][{j}]"),
                            "not a string, number, or null",
                        ))
                    }
                });
            }
            rows.push(cells);
        }
        ktext.push(rows);
    }
    let mut kexpr = vec![vec![vec![parse("0", dim, &param_names)?; dim]; dim]; dim];
    for l in 0..dim {
        for i in 0..dim {
            for j in i..dim {
                let cell = match (&ktext[l][i][j], &ktext[l][j][i]) {
                    (Some(a), _) => a.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => "0".to_string(),
                };
                if let (Some(a), Some(b)) = (&ktext[l][i][j], &ktext[l][j][i]) {
                    if a != b {
                        return Err(GeomError::Symmetry {
                            a: format!("{key}[{}][{}][{}]", l + 1, i + 1, j + 1),
                            b: format!("{key}[{}][{}][{}]", l + 1, j + 1, i + 1),
                        });
                    }
                }
                let e = parse(&cell, dim, &param_names)?;
                kexpr[l][i][j] = e.clone();
                kexpr[l][j][i] = e;
            }
        }
    }
    let skew = if is_skew {
        SkewInput::Skewness(kexpr)
    } else {
        SkewInput::Christoffels(kexpr)
    };

    let spec = ManifoldSpec::new(dim, coords, metric, skew, signature, params)?;
    Ok((name, spec))
}

/// Serialize a spec to the JSON document format (deterministic field order).
pub fn save_spec(name: &str, spec: &ManifoldSpec) -> String {
    let metric: Vec<Vec<String>> = spec
        .metric
        .iter()
        .map(|row| row.iter().map(|e| e.to_string()).collect())
        .collect();
    let (key, arr) = match &spec.skew {
        SkewInput::Skewness(k) => ("skewness", k),
        SkewInput::Christoffels(k) => ("christoffels", k),
    };
    let kju: Vec<Vec<Vec<String>>> = arr
        .iter()
        .map(|b| {
            b.iter()
                .map(|r| r.iter().map(|e| e.to_string()).collect())
                .collect()
        })
        .collect();
    let mut params: Vec<(&String, &f64)> = spec.params.iter().collect();
    params.sort_by(|a, b| a.0.cmp(b.0));
    let mut pmap = Map::new();
    for (k, v) in params {
        pmap.insert(k.clone(), json!(v));
    }
    let mut doc = Map::new();
    doc.insert("name".into(), json!(name));
    doc.insert("dim".into(), json!(spec.dim));
    doc.insert("coords".into(), json!(spec.coords));
    doc.insert("metric".into(), json!(metric));
    doc.insert(key.into(), json!(kju));
    doc.insert("params".into(), Value::Object(pmap));
    doc.insert(
        "signature".into(),
        json!(match spec.signature {
            Signature::Riemannian => "riemannian",
            Signature::Pseudo => "pseudo",
        }),
    );
    serde_json::to_string_pretty(&Value::Object(doc)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_expected_values() {
        for entry in catalog() {
            let dev = entry.expected_deviation().unwrap();
            assert!(
                dev <= 1e-10,
                "{}: expected-value deviation {dev}",
                entry.name
            );
        }
    }

    #[test]
    fn catalog_structural_checks() {
        for entry in catalog() {
            for x in &entry.sample_points {
                let geo = entry.spec.geometry_at(x).unwrap();
                assert!(geo.duality_deviation() < 1e-9, "{}", entry.name);
                assert!(
                    geo.curvature_decomposition_deviation() < 1e-9,
                    "{}",
                    entry.name
                );
            }
        }
    }

    #[test]
    fn pde_residuals_solved_family() {
        let params: Vec<String> = vec!["c1".into(), "c2".into()];
        let mut pv = HashMap::new();
        pv.insert("c1".to_string(), 2.0);
        pv.insert("c2".to_string(), 2.0);
        let a = parse("1/(c1-x1)", 2, &params).unwrap();
        let b = parse("1/(c2-x2)", 2, &params).unwrap();
        let z = parse("0", 2, &params).unwrap();
        let res = ex0_pde_residual(&a, &b, &z, &z, &[0.0, 0.0], &pv).unwrap();
        for r in &res {
            assert!(r.abs() <= 1e-12, "residual {r}");
        }
    }

    #[test]
    fn pde_residuals_zero_and_counterexample() {
        let z = parse("0", 2, &[]).unwrap();
        let res = ex0_pde_residual(&z, &z, &z, &z, &[0.3, -0.7], &HashMap::new()).unwrap();
        assert!(res.iter().all(|r| r.abs() == 0.0));

        let a = parse("x1", 2, &[]).unwrap();
        let res = ex0_pde_residual(&a, &z, &z, &z, &[0.0, 0.0], &HashMap::new()).unwrap();
        assert!((res[0] - 1.0).abs() < 1e-15); // dA/dx1 - A^2 = 1 at origin
    }

    #[test]
    fn pseudo_offdiag_nonconstant_has_nabla_k() {
        // f depending only on x2 keeps the connection flat but not parallel
        let spec = pseudo_offdiag("x2").unwrap();
        let geo = spec.geometry_at(&[0.5, 0.2]).unwrap();
        assert!(geo.r.iter().flatten().flatten().flatten().all(|v| v.abs() < 1e-12));
        assert!((geo.nabla_k[1][0][1][1] - 1.0).abs() < 1e-12);
        assert!(geo.nabla_k[0][0][1][1].abs() < 1e-12);
    }

    #[test]
    fn spec_roundtrip() {
        for entry in catalog() {
            let text = save_spec(&entry.name, &entry.spec);
            let (name, spec) = load_spec(&text).unwrap();
            assert_eq!(name, entry.name);
            let x = &entry.sample_points[1];
            let a = entry.spec.geometry_at(x).unwrap();
            let b = spec.geometry_at(x).unwrap();
            for i in 0..a.n {
                for j in 0..a.n {
                    assert!((a.g[i][j] - b.g[i][j]).abs() < 1e-14);
                    for l in 0..a.n {
                        assert!((a.gamma[l][i][j] - b.gamma[l][i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn minimal_line_spec() {
        let (_, spec) = load_spec(
            r#"{"name":"line","dim":1,"metric":[["1"]],"skewness":[[["0"]]]}"#,
        )
        .unwrap();
        let geo = spec.geometry_at(&[0.0]).unwrap();
        assert_eq!(geo.g[0][0], 1.0);
        assert_eq!(geo.gamma[0][0][0], 0.0);
    }

    #[test]
    fn asymmetric_metric_text_equal_values_ok() {
        let (_, spec) = load_spec(
            r#"{"name":"t","dim":2,"metric":[["1","x1+x2"],["x2+x1","1"]],"skewness":[[["0","0"],["0","0"]],[["0","0"],["0","0"]]]}"#,
        )
        .unwrap();
        assert_eq!(spec.dim, 2);
    }

    #[test]
    fn asymmetric_metric_values_rejected() {
        let err = load_spec(
            r#"{"name":"t","dim":2,"metric":[["1","x1"],["x2","1"]],"skewness":[[["0","0"],["0","0"]],[["0","0"],["0","0"]]]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, GeomError::Symmetry { .. }));
    }

    #[test]
    fn schema_errors_have_paths() {
        let err = load_spec(r#"{"name":"t"}"#).unwrap_err();
        match err {
            GeomError::Schema { path, .. } => assert_eq!(path, "dim"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
