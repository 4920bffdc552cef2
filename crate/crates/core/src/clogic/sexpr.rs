//! JSON encoding of sentences as nested arrays, `[tag, args...]`.
//!
//! Terms:
//! `["var", name]`, `["const", matrix]`, `["unit", re]` or `["unit", re, im]`,
//! `["adj", t]`, `["scale", [re, im], t]`, `["sum", t, t]`,
//! `["block", [[t, ...], ...]]`, `["amp", t, n]`, `["prod", t, t]`.
//!
//! Formulas:
//! `["norm", t]`, `["norm_sq", t]`, `["dist", t, slot]`, `["dist_psd", t, slot]`,
//! `["abs_diff", f, g]`, `["dotminus", f, g]`, `["max", f, g]`, `["min", f, g]`,
//! `["plus", f, g]`, `["scale", c, f]`, `["const", c]`,
//! `["sup", var, domain, f]`, `["inf", var, domain, f]`, `["pred", name, t, ...]`.
//!
//! Domains: `["ball", slot, radius]`, `["unitaries", slot]`.
//!
//! Matrices use the `{"rows", "cols", "data"}` layout.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;

use super::{Domain, Formula, Quantifier, Term};

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn items(v: &Value) -> Result<(&str, &[Value])> {
    let arr = v.as_array().ok_or_else(|| bad(format!("expected a tagged array, got {v}")))?;
    let (tag, rest) = arr.split_first().ok_or_else(|| bad("empty node"))?;
    let tag = tag.as_str().ok_or_else(|| bad(format!("node tag must be a string, got {tag}")))?;
    Ok((tag, rest))
}

fn arity(tag: &str, args: &[Value], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(bad(format!("{tag} takes {n} arguments, got {}", args.len())));
    }
    Ok(())
}

fn num(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad(format!("expected a number, got {v}")))
}

fn string(v: &Value) -> Result<String> {
    v.as_str().map(str::to_string).ok_or_else(|| bad(format!("expected a string, got {v}")))
}

fn complex(v: &Value) -> Result<Complex64> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok(Complex64::new(num(&a[0])?, num(&a[1])?)),
        _ => Ok(Complex64::new(num(v)?, 0.0)),
    }
}

pub fn parse_term(v: &Value) -> Result<Term> {
    let (tag, args) = items(v)?;
    Ok(match tag {
        "var" => {
            arity(tag, args, 1)?;
            Term::Var(string(&args[0])?)
        }
        "const" => {
            arity(tag, args, 1)?;
            Term::Const(serde_json::from_value::<CMatrix>(args[0].clone())?)
        }
        "unit" => match args.len() {
            1 => Term::Unit(Complex64::new(num(&args[0])?, 0.0)),
            2 => Term::Unit(Complex64::new(num(&args[0])?, num(&args[1])?)),
            n => return Err(bad(format!("unit takes 1 or 2 arguments, got {n}"))),
        },
        "adj" => {
            arity(tag, args, 1)?;
            Term::Adjoint(Box::new(parse_term(&args[0])?))
        }
        "scale" => {
            arity(tag, args, 2)?;
            Term::Scale(complex(&args[0])?, Box::new(parse_term(&args[1])?))
        }
        "sum" | "prod" => {
            arity(tag, args, 2)?;
            let a = Box::new(parse_term(&args[0])?);
            let b = Box::new(parse_term(&args[1])?);
            if tag == "sum" {
                Term::Sum(a, b)
            } else {
                Term::Product(a, b)
            }
        }
        "block" => {
            arity(tag, args, 1)?;
            let rows = args[0].as_array().ok_or_else(|| bad("block expects an array of rows"))?;
            Term::Block(
                rows.iter()
                    .map(|r| {
                        r.as_array()
                            .ok_or_else(|| bad("block row must be an array"))?
                            .iter()
                            .map(parse_term)
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?,
            )
        }
        "amp" => {
            arity(tag, args, 2)?;
            let n = args[1].as_u64().ok_or_else(|| bad("amp level must be a non-negative integer"))?;
            Term::Amplify(Box::new(parse_term(&args[0])?), n as usize)
        }
        other => return Err(bad(format!("unknown term tag {other}"))),
    })
}

pub fn parse_domain(v: &Value) -> Result<Domain> {
    let (tag, args) = items(v)?;
    match tag {
        "ball" => {
            arity(tag, args, 2)?;
            Ok(Domain::Ball { slot: string(&args[0])?, radius: num(&args[1])? })
        }
        "unitaries" => {
            arity(tag, args, 1)?;
            Ok(Domain::Unitaries { slot: string(&args[0])? })
        }
        other => Err(bad(format!("unknown domain tag {other}"))),
    }
}

pub fn parse_formula(v: &Value) -> Result<Formula> {
    let (tag, args) = items(v)?;
    let two = |args: &[Value]| -> Result<(Box<Formula>, Box<Formula>)> {
        arity(tag, args, 2)?;
        Ok((Box::new(parse_formula(&args[0])?), Box::new(parse_formula(&args[1])?)))
    };
    Ok(match tag {
        "norm" => {
            arity(tag, args, 1)?;
            Formula::Norm(parse_term(&args[0])?)
        }
        "norm_sq" => {
            arity(tag, args, 1)?;
            Formula::NormSq(parse_term(&args[0])?)
        }
        "dist" => {
            arity(tag, args, 2)?;
            Formula::DistToStructure(parse_term(&args[0])?, string(&args[1])?)
        }
        "dist_psd" => {
            arity(tag, args, 2)?;
            Formula::DistToPsdCone(parse_term(&args[0])?, string(&args[1])?)
        }
        "abs_diff" => {
            let (a, b) = two(args)?;
            Formula::AbsDiff(a, b)
        }
        "dotminus" => {
            let (a, b) = two(args)?;
            Formula::DotMinus(a, b)
        }
        "max" => {
            let (a, b) = two(args)?;
            Formula::Max(a, b)
        }
        "min" => {
            let (a, b) = two(args)?;
            Formula::Min(a, b)
        }
        "plus" => {
            let (a, b) = two(args)?;
            Formula::Plus(a, b)
        }
        "scale" => {
            arity(tag, args, 2)?;
            Formula::scale(num(&args[0])?, parse_formula(&args[1])?)?
        }
        "const" => {
            arity(tag, args, 1)?;
            Formula::Const(num(&args[0])?)
        }
        "sup" | "inf" => {
            arity(tag, args, 3)?;
            Formula::Quant {
                kind: if tag == "sup" { Quantifier::Sup } else { Quantifier::Inf },
                var: string(&args[0])?,
                domain: parse_domain(&args[1])?,
                body: Box::new(parse_formula(&args[2])?),
            }
        }
        "pred" => {
            let (name, rest) = args.split_first().ok_or_else(|| bad("pred needs a name"))?;
            Formula::Pred { name: string(name)?, args: rest.iter().map(parse_term).collect::<Result<_>>()? }
        }
        other => return Err(bad(format!("unknown formula tag {other}"))),
    })
}

pub fn parse_sentence_str(s: &str) -> Result<Formula> {
    let v: Value = serde_json::from_str(s)?;
    parse_formula(&v)
}

fn c_json(c: Complex64) -> Value {
    json!([c.re, c.im])
}

pub fn term_to_json(t: &Term) -> Value {
    match t {
        Term::Var(n) => json!(["var", n]),
        Term::Const(m) => json!(["const", m]),
        Term::Unit(c) if c.im == 0.0 => json!(["unit", c.re]),
        Term::Unit(c) => json!(["unit", c.re, c.im]),
        Term::Adjoint(s) => json!(["adj", term_to_json(s)]),
        Term::Scale(c, s) => json!(["scale", c_json(*c), term_to_json(s)]),
        Term::Sum(a, b) => json!(["sum", term_to_json(a), term_to_json(b)]),
        Term::Product(a, b) => json!(["prod", term_to_json(a), term_to_json(b)]),
        Term::Amplify(s, n) => json!(["amp", term_to_json(s), n]),
        Term::Block(rows) => {
            let rows: Vec<Value> =
                rows.iter().map(|r| Value::Array(r.iter().map(term_to_json).collect())).collect();
            json!(["block", rows])
        }
    }
}

fn domain_to_json(d: &Domain) -> Value {
    match d {
        Domain::Ball { slot, radius } => json!(["ball", slot, radius]),
        Domain::Unitaries { slot } => json!(["unitaries", slot]),
    }
}

pub fn formula_to_json(f: &Formula) -> Value {
    let pair = |tag: &str, a: &Formula, b: &Formula| json!([tag, formula_to_json(a), formula_to_json(b)]);
    match f {
        Formula::Norm(t) => json!(["norm", term_to_json(t)]),
        Formula::NormSq(t) => json!(["norm_sq", term_to_json(t)]),
        Formula::DistToStructure(t, s) => json!(["dist", term_to_json(t), s]),
        Formula::DistToPsdCone(t, s) => json!(["dist_psd", term_to_json(t), s]),
        Formula::AbsDiff(a, b) => pair("abs_diff", a, b),
        Formula::DotMinus(a, b) => pair("dotminus", a, b),
        Formula::Max(a, b) => pair("max", a, b),
        Formula::Min(a, b) => pair("min", a, b),
        Formula::Plus(a, b) => pair("plus", a, b),
        Formula::Scale(c, g) => json!(["scale", c, formula_to_json(g)]),
        Formula::Const(c) => json!(["const", c]),
        Formula::Quant { kind, var, domain, body } => json!([
            match kind {
                Quantifier::Sup => "sup",
                Quantifier::Inf => "inf",
            },
            var,
            domain_to_json(domain),
            formula_to_json(body)
        ]),
        Formula::Pred { name, args } => {
            let mut v = vec![json!("pred"), json!(name)];
            v.extend(args.iter().map(term_to_json));
            Value::Array(v)
        }
    }
}
