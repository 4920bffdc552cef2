//! Continuous-logic formulas over operator-system structures.
//!
//! Terms build matrices out of quantified variables, constants and multiples
//! of the unit; formulas turn those into real numbers through norms,
//! distances and the restricted connectives, and `sup`/`inf` quantify over
//! balls (or unitary groups) of named structures. Quantifiers are evaluated
//! numerically by multistart local search; see [`eval`].

pub mod eval;
mod nelder_mead;
mod registry;
pub mod sexpr;

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::opsystem::OperatorSystem;

pub use eval::{evaluate, Bindings, BlockEvent, Evaluator, Hint, Observer};
pub use registry::{PredicateHandle, PredicateRegistry};

/// Named structures a sentence refers to through its slots.
pub type Structures = BTreeMap<String, OperatorSystem>;

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Const(CMatrix),
    /// c·1, sized by context
    Unit(Complex64),
    Adjoint(Box<Term>),
    Scale(Complex64, Box<Term>),
    Sum(Box<Term>, Box<Term>),
    Block(Vec<Vec<Term>>),
    Amplify(Box<Term>, usize),
    /// Only meaningful over C*-algebra structures.
    Product(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn unit(c: f64) -> Term {
        Term::Unit(Complex64::new(c, 0.0))
    }

    pub fn adj(self) -> Term {
        Term::Adjoint(Box::new(self))
    }

    pub fn scale(self, c: Complex64) -> Term {
        Term::Scale(c, Box::new(self))
    }

    pub fn negated(self) -> Term {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn plus(self, other: Term) -> Term {
        Term::Sum(Box::new(self), Box::new(other))
    }

    pub fn minus(self, other: Term) -> Term {
        self.plus(other.negated())
    }

    pub fn times(self, other: Term) -> Term {
        Term::Product(Box::new(self), Box::new(other))
    }

    pub fn amplify(self, n: usize) -> Term {
        Term::Amplify(Box::new(self), n)
    }

    pub fn block(rows: Vec<Vec<Term>>) -> Term {
        Term::Block(rows)
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) | Term::Unit(_) => {}
            Term::Adjoint(t) | Term::Scale(_, t) | Term::Amplify(t, _) => t.collect_vars(out),
            Term::Sum(a, b) | Term::Product(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Block(rows) => rows.iter().flatten().for_each(|t| t.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }
}

/// Quantifier range: a norm ball of a structure, or its unitaries written
/// as exp(iH) with H self-adjoint in the structure and ‖H‖ ≤ π.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball { slot: String, radius: f64 },
    Unitaries { slot: String },
}

impl Domain {
    pub fn ball(slot: &str, radius: f64) -> Domain {
        Domain::Ball { slot: slot.to_string(), radius }
    }

    pub fn unitaries(slot: &str) -> Domain {
        Domain::Unitaries { slot: slot.to_string() }
    }

    pub fn slot(&self) -> &str {
        match self {
            Domain::Ball { slot, .. } | Domain::Unitaries { slot } => slot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Sup,
    Inf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Norm(Term),
    NormSq(Term),
    DistToStructure(Term, String),
    DistToPsdCone(Term, String),
    AbsDiff(Box<Formula>, Box<Formula>),
    /// max(a − b, 0)
    DotMinus(Box<Formula>, Box<Formula>),
    Max(Box<Formula>, Box<Formula>),
    Min(Box<Formula>, Box<Formula>),
    Plus(Box<Formula>, Box<Formula>),
    /// Nonnegative multiple.
    Scale(f64, Box<Formula>),
    Const(f64),
    Quant {
        kind: Quantifier,
        var: String,
        domain: Domain,
        body: Box<Formula>,
    },
    Pred {
        name: String,
        args: Vec<Term>,
    },
}

impl Formula {
    pub fn norm(t: Term) -> Formula {
        Formula::Norm(t)
    }

    pub fn norm_sq(t: Term) -> Formula {
        Formula::NormSq(t)
    }

    pub fn dist(t: Term, slot: &str) -> Formula {
        Formula::DistToStructure(t, slot.to_string())
    }

    pub fn dist_psd(t: Term, slot: &str) -> Formula {
        Formula::DistToPsdCone(t, slot.to_string())
    }

    pub fn abs_diff(a: Formula, b: Formula) -> Formula {
        Formula::AbsDiff(Box::new(a), Box::new(b))
    }

    pub fn dotminus(a: Formula, b: Formula) -> Formula {
        Formula::DotMinus(Box::new(a), Box::new(b))
    }

    pub fn max(a: Formula, b: Formula) -> Formula {
        Formula::Max(Box::new(a), Box::new(b))
    }

    pub fn min(a: Formula, b: Formula) -> Formula {
        Formula::Min(Box::new(a), Box::new(b))
    }

    pub fn plus(a: Formula, b: Formula) -> Formula {
        Formula::Plus(Box::new(a), Box::new(b))
    }

    pub fn scale(c: f64, f: Formula) -> Result<Formula> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("formula scale must be nonnegative, got {c}")));
        }
        Ok(Formula::Scale(c, Box::new(f)))
    }

    pub fn sup(var: &str, domain: Domain, body: Formula) -> Formula {
        Formula::Quant { kind: Quantifier::Sup, var: var.to_string(), domain, body: Box::new(body) }
    }

    pub fn inf(var: &str, domain: Domain, body: Formula) -> Formula {
        Formula::Quant { kind: Quantifier::Inf, var: var.to_string(), domain, body: Box::new(body) }
    }

    pub fn pred(name: &str, args: Vec<Term>) -> Formula {
        Formula::Pred { name: name.to_string(), args }
    }

    /// Free variables; predicate bodies are closed apart from their
    /// parameters, so only the argument terms contribute.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let add_term = |t: &Term, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            for v in t.vars() {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match self {
            Formula::Norm(t)
            | Formula::NormSq(t)
            | Formula::DistToStructure(t, _)
            | Formula::DistToPsdCone(t, _) => add_term(t, bound, out),
            Formula::AbsDiff(a, b)
            | Formula::DotMinus(a, b)
            | Formula::Max(a, b)
            | Formula::Min(a, b)
            | Formula::Plus(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Scale(_, f) => f.collect_free(bound, out),
            Formula::Const(_) => {}
            Formula::Quant { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Formula::Pred { args, .. } => args.iter().for_each(|t| add_term(t, bound, out)),
        }
    }
}

/// Search budget and randomness for quantifier evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub multistart: usize,
    pub max_iter: usize,
    pub opt_tol: f64,
    pub rng_seed: u64,
}

pub const DEFAULT_SEED: u64 = 0xC5A1;

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { multistart: 16, max_iter: 2000, opt_tol: 1e-3, rng_seed: DEFAULT_SEED }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.multistart == 0 {
            return Err(Error::invalid("multistart must be at least 1"));
        }
        if self.opt_tol.is_nan() || self.opt_tol <= 0.0 {
            return Err(Error::invalid("opt_tol must be positive"));
        }
        Ok(())
    }

    /// Random starts for a quantifier block nested `depth` blocks deep.
    /// Inner blocks are re-solved for every outer trial point, so their
    /// budgets shrink geometrically.
    pub fn starts_at(&self, depth: usize) -> usize {
        (self.multistart >> (2 * depth)).max(1)
    }

    /// Starts (hinted or random) that get a local search after screening.
    pub fn refine_at(&self, depth: usize) -> usize {
        (self.starts_at(depth) / 8).max(1)
    }

    /// Nelder–Mead iterations shared by the refined starts of a block nested
    /// `depth` blocks deep.
    pub fn iters_at(&self, depth: usize) -> usize {
        (self.max_iter >> (6 * depth)).max(20)
    }
}

/// Which direction the reported value is trustworthy in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// No quantifiers: the value is computed directly.
    Exact,
    /// Only sups: the true value is at least this.
    LowerEstimate,
    /// Only infs: the true value is at most this.
    UpperEstimate,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    /// Optimizers found for the quantified variables, following the best
    /// branch from the outermost block inward.
    pub witnesses: BTreeMap<String, CMatrix>,
    pub converged: bool,
    pub bound_kind: BoundKind,
}
