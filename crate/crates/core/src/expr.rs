//! Expression language for metric and skewness components.
//!
//! Grammar (EBNF, also documented in the README):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" exponent)?        (right-associative)
//! primary := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers are coordinate names `x1..xn`, declared parameter names, or
//! one of the built-in functions. An exponent must fold to a constant at
//! parse time.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::jet::{Jet, JetTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }
}

/// Immutable syntax tree over coordinates `x1..xn` and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent folded at parse time.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Precedence-aware printing so that print ∘ parse is a fixed point.
        fn prec(e: &Expr) -> u8 {
            match e {
                Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
                Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
                Expr::Neg(_) => 3,
                Expr::Pow(..) => 4,
                _ => 5,
            }
        }
        fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if prec(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                write_child(f, a, p)?;
                write!(f, "{sym}")?;
                // Left-associative: the right child needs strictly higher precedence.
                write_child(f, b, p + 1)
            }
            Expr::Pow(a, e) => {
                write_child(f, a, 5)?;
                if *e < 0.0 {
                    write!(f, "^({e})")
                } else {
                    write!(f, "^{e}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = vec![];
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| GeomError::Syntax {
                    offset: start,
                    expected: "number".into(),
                })?;
                toks.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(GeomError::Syntax {
                    offset: i,
                    expected: "operator, number, identifier, or parenthesis".into(),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    dim: usize,
    params: &'a [String],
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(GeomError::Syntax {
                offset: self.offset(),
                expected: what.into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            Ok(Expr::Neg(Box::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let off = self.offset();
            // Exponent: unary chain over a constant primary; right-associative.
            let e = self.unary()?;
            let folded = const_fold(&e).ok_or_else(|| GeomError::Syntax {
                offset: off,
                expected: "constant exponent".into(),
            })?;
            Ok(Expr::Pow(Box::new(base), folded))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if let Some(idx) = coordinate_index(&name, self.dim) {
                    return Ok(Expr::Var(idx));
                }
                if self.params.iter().any(|p| p == &name) {
                    return Ok(Expr::Param(name));
                }
                Err(GeomError::UnknownIdentifier { name, offset: off })
            }
            _ => Err(GeomError::Syntax {
                offset: off,
                expected: "number, identifier, `-`, or `(`".into(),
            }),
        }
    }
}

fn coordinate_index(name: &str, dim: usize) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    let idx: usize = rest.parse().ok()?;
    if idx >= 1 && idx <= dim {
        Some(idx - 1)
    } else {
        None
    }
}

fn const_fold(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Neg(a) => const_fold(a).map(|v| -v),
        Expr::Bin(op, a, b) => {
            let (a, b) = (const_fold(a)?, const_fold(b)?);
            Some(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            })
        }
        Expr::Pow(a, e) => const_fold(a).map(|v| v.powf(*e)),
        _ => None,
    }
}

/// Parse `text` against a manifold of dimension `dim` with declared parameters.
pub fn parse(text: &str, dim: usize, params: &[String]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(GeomError::Syntax {
            offset: 0,
            expected: "nonempty expression".into(),
        });
    }
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        dim,
        params,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(GeomError::Syntax {
            offset: p.offset(),
            expected: "end of expression".into(),
        });
    }
    Ok(e)
}

impl Expr {
    /// Evaluate into a jet, given one jet per coordinate. The jets may live
    /// in a larger variable space than the manifold dimension (the bundle
    /// oracle passes 2n-variable jets for the n base coordinates).
    pub fn eval_jet(
        &self,
        table: &Arc<JetTable>,
        coords: &[Jet],
        params: &HashMap<String, f64>,
    ) -> Result<Jet> {
        let point: Vec<f64> = coords.iter().map(|j| j.value()).collect();
        let domain_err = |sub: &Expr, reason: &str| GeomError::Domain {
            subexpr: sub.to_string(),
            point: point.clone(),
            reason: reason.into(),
        };
        match self {
            Expr::Num(v) => Ok(Jet::constant(table, *v)),
            Expr::Var(i) => Ok(coords[*i].clone()),
            Expr::Param(name) => params
                .get(name)
                .map(|v| Jet::constant(table, *v))
                .ok_or_else(|| GeomError::UnknownIdentifier {
                    name: name.clone(),
                    offset: 0,
                }),
            Expr::Neg(a) => Ok(-&a.eval_jet(table, coords, params)?),
            Expr::Bin(op, a, b) => {
                let ja = a.eval_jet(table, coords, params)?;
                let jb = b.eval_jet(table, coords, params)?;
                match op {
                    BinOp::Add => Ok(&ja + &jb),
                    BinOp::Sub => Ok(&ja - &jb),
                    BinOp::Mul => Ok(&ja * &jb),
                    BinOp::Div => {
                        if jb.value() == 0.0 {
                            return Err(domain_err(b, "division by zero"));
                        }
                        Ok(ja.div(&jb))
                    }
                }
            }
            Expr::Pow(a, e) => {
                let ja = a.eval_jet(table, coords, params)?;
                if *e == e.round() && e.abs() < 64.0 {
                    if ja.value() == 0.0 && *e < 0.0 {
                        return Err(domain_err(a, "zero raised to a negative power"));
                    }
                    Ok(ja.powi(*e as i64))
                } else {
                    if ja.value() <= 0.0 {
                        return Err(domain_err(a, "non-positive base of a real power"));
                    }
                    Ok(ja.powf(*e))
                }
            }
            Expr::Call(f, a) => {
                let ja = a.eval_jet(table, coords, params)?;
                let v = ja.value();
                match f {
                    Func::Exp => Ok(ja.exp()),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(domain_err(a, "log of non-positive value"));
                        }
                        Ok(ja.ln())
                    }
                    Func::Sqrt => {
                        if v <= 0.0 {
                            return Err(domain_err(a, "sqrt of non-positive value"));
                        }
                        Ok(ja.sqrt())
                    }
                    Func::Sin => Ok(ja.sin()),
                    Func::Cos => Ok(ja.cos()),
                    Func::Tan => Ok(ja.tan()),
                    Func::Sinh => Ok(ja.sinh()),
                    Func::Cosh => Ok(ja.cosh()),
                    Func::Tanh => Ok(ja.tanh()),
                    Func::Abs => {
                        if v == 0.0 {
                            return Err(domain_err(a, "abs at zero is not differentiable"));
                        }
                        Ok(ja.abs())
                    }
                }
            }
        }
    }

    /// Evaluate to an order-3 jet at a base point (the common case).
    pub fn jet3(&self, point: &[f64], params: &HashMap<String, f64>) -> Result<Jet> {
        let t = crate::jet::table(point.len(), 3);
        let coords: Vec<Jet> = point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(&t, i, v))
            .collect();
        self.eval_jet(&t, &coords, params)
    }

    /// Plain evaluation.
    pub fn eval(&self, point: &[f64], params: &HashMap<String, f64>) -> Result<f64> {
        let t = crate::jet::table(point.len(), 0);
        let coords: Vec<Jet> = point.iter().map(|&v| Jet::constant(&t, v)).collect();
        Ok(self.eval_jet(&t, &coords, params)?.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str, dim: usize) -> Expr {
        parse(text, dim, &[]).unwrap()
    }

    #[test]
    fn parses_paper_metric_components() {
        // g11 = 1/xi^2 for the exponential family
        let e = p("1/x1^2", 1);
        assert_eq!(
            e,
            Expr::Bin(
                BinOp::Div,
                Box::new(Expr::Num(1.0)),
                Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2.0))
            )
        );
        assert_eq!(p("x1", 1), Expr::Var(0));
        // g22 = 2/sigma^2 for the normal family
        let e = p("2/x2^2", 2);
        assert_eq!(
            e,
            Expr::Bin(
                BinOp::Div,
                Box::new(Expr::Num(2.0)),
                Box::new(Expr::Pow(Box::new(Expr::Var(1)), 2.0))
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("2-3-4", 1).eval(&[0.0], &HashMap::new()).unwrap(), -5.0);
        assert_eq!(p("2+3*4", 1).eval(&[0.0], &HashMap::new()).unwrap(), 14.0);
        assert_eq!(p("-x1^2", 1).eval(&[3.0], &HashMap::new()).unwrap(), -9.0);
        assert_eq!(p("2^3", 1).eval(&[0.0], &HashMap::new()).unwrap(), 8.0);
    }

    #[test]
    fn unknown_identifier_reports_offset() {
        match parse("1 + sigma", 1, &[]) {
            Err(GeomError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "sigma");
                assert_eq!(offset, 4);
            }
            other => panic!("expected UnknownIdentifier, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_offset() {
        match parse("1 + ", 1, &[]) {
            Err(GeomError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected Syntax, got {other:?}"),
        }
    }

    #[test]
    fn jet_values_match_hand_derivatives() {
        let params = HashMap::new();
        // x1*x2 at (1,1)
        let f = p("x1*x2", 2).jet3(&[1.0, 1.0], &params).unwrap();
        assert_eq!(f.value(), 1.0);
        assert_eq!(f.d1(0), 1.0);
        assert_eq!(f.d1(1), 1.0);
        assert_eq!(f.d2(0, 1), 1.0);
        assert_eq!(f.d2(0, 0), 0.0);
        // 1/x1^2 at 2: f = 1/4, f' = -2/x^3 = -1/4, f'' = 6/x^4 = 3/8
        let f = p("1/x1^2", 1).jet3(&[2.0], &params).unwrap();
        assert!((f.value() - 0.25).abs() < 1e-15);
        assert!((f.d1(0) + 0.25).abs() < 1e-15);
        assert!((f.d2(0, 0) - 0.375).abs() < 1e-14);
        // exp(x1) at 0: all raw partials 1
        let f = p("exp(x1)", 1).jet3(&[0.0], &params).unwrap();
        assert!((f.d3(0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_error_identifies_subexpression() {
        let params = HashMap::new();
        match p("log(x1)", 1).jet3(&[-1.0], &params) {
            Err(GeomError::Domain { subexpr, .. }) => assert_eq!(subexpr, "x1"),
            other => panic!("expected Domain, got {other:?}"),
        }
    }

    #[test]
    fn print_parse_roundtrip_examples() {
        for text in [
            "1/x1^2",
            "2/x2^2",
            "-(x1+x2)*x1",
            "exp(x1)/(1+x2^2)",
            "x1^(-2)",
            "sin(x1)*cos(x2)-tanh(x1)",
        ] {
            let e = p(text, 2);
            let printed = e.to_string();
            let reparsed = parse(&printed, 2, &[]).unwrap();
            assert_eq!(e, reparsed, "roundtrip failed for {text} -> {printed}");
            assert_eq!(printed, reparsed.to_string());
        }
    }
}
