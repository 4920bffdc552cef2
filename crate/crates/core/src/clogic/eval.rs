//! Numerical evaluation of formulas.
//!
//! Consecutive quantifiers of the same kind form a block that is optimized
//! jointly over the real coordinates of its variables. Each block runs
//! Nelder–Mead from caller-supplied hint points and deterministic random
//! ball samples: every start is evaluated once, and local search runs from
//! the most promising few. The block value is the best point found.
//! A sup therefore under-reports and an inf over-reports the true value.
//!
//! Nested blocks are re-solved for every trial point of the enclosing block,
//! with budgets that shrink with depth (see [`EvalConfig::starts_at`]).
//! Random starts are seeded from the configured seed, the block depth and
//! the variable names, never from a shared generator, so a formula and an
//! expansion of it that quantifies the same variables see the same starts.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::opsystem::{dist_to_system, sample_ball, BallSpec, OperatorSystem};

use super::nelder_mead::{self, Options};
use super::registry::PredicateRegistry;
use super::{BoundKind, Domain, EvalConfig, EvalResult, Formula, Quantifier, Structures, Term};

/// Deepest supported quantifier alternation (sup-inf-sup).
pub const MAX_BLOCK_DEPTH: usize = 3;

const MAX_PREDICATE_NESTING: usize = 32;

/// Read-only view of the variables bound at some point of an evaluation.
#[derive(Clone, Copy)]
pub struct Bindings<'e> {
    vars: &'e [(String, CMatrix)],
}

impl<'e> Bindings<'e> {
    pub fn get(&self, name: &str) -> Option<&'e CMatrix> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn names(&self) -> impl Iterator<Item = &'e str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }
}

type HintFn = dyn Fn(&Bindings<'_>) -> Vec<CMatrix> + Send + Sync;

/// Candidate starting values for a quantified variable, computed from the
/// variables bound outside it. For a ball variable a candidate is an element
/// (projected onto the structure and retracted into the ball); for a
/// unitary variable it is a self-adjoint generator H of exp(iH).
#[derive(Clone)]
pub struct Hint {
    pub var: String,
    generate: Arc<HintFn>,
}

impl Hint {
    pub fn new(var: &str, generate: impl Fn(&Bindings<'_>) -> Vec<CMatrix> + Send + Sync + 'static) -> Self {
        Hint { var: var.to_string(), generate: Arc::new(generate) }
    }

    /// A fixed list of candidates.
    pub fn fixed(var: &str, values: Vec<CMatrix>) -> Self {
        Hint::new(var, move |_| values.clone())
    }
}

/// Reported after every completed block optimization.
pub struct BlockEvent<'e> {
    pub kind: Quantifier,
    pub vars: &'e [String],
    /// Variables bound outside the block.
    pub bindings: Bindings<'e>,
    pub value: f64,
    pub witness: &'e [CMatrix],
}

pub type Observer = Arc<dyn Fn(&BlockEvent<'_>) + Send + Sync>;

type Env = Vec<(String, CMatrix)>;

#[derive(Default)]
struct Capture {
    witnesses: BTreeMap<String, CMatrix>,
    converged: Option<bool>,
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(Complex64),
    Mat(CMatrix),
}

/// Evaluates formulas against a fixed set of structures.
pub struct Evaluator<'a> {
    structures: &'a Structures,
    registry: Option<&'a PredicateRegistry>,
    config: EvalConfig,
    tol: Tolerance,
    hints: Vec<Hint>,
    observers: Vec<Observer>,
    unit_dim: Option<usize>,
}

/// Evaluates a closed sentence with no hints and no extra predicates.
pub fn evaluate(sentence: &Formula, structures: &Structures, config: &EvalConfig) -> Result<EvalResult> {
    Evaluator::new(structures, *config).evaluate(sentence)
}

impl<'a> Evaluator<'a> {
    pub fn new(structures: &'a Structures, config: EvalConfig) -> Self {
        let mut dims = structures.values().map(|s| s.ambient_dim());
        let first = dims.next();
        let unit_dim = match first {
            Some(d) if dims.all(|e| e == d) => Some(d),
            _ => None,
        };
        Evaluator {
            structures,
            registry: None,
            config,
            tol: Tolerance::default(),
            hints: Vec::new(),
            observers: Vec::new(),
            unit_dim,
        }
    }

    pub fn with_registry(mut self, registry: &'a PredicateRegistry) -> Self {
        self.registry = Some(registry);
        self
    }

    pub fn with_hint(mut self, hint: Hint) -> Self {
        self.hints.push(hint);
        self
    }

    pub fn with_hints(mut self, hints: impl IntoIterator<Item = Hint>) -> Self {
        self.hints.extend(hints);
        self
    }

    pub fn with_observer(mut self, observer: Observer) -> Self {
        self.observers.push(observer);
        self
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    /// Evaluates a sentence; free variables are an error.
    pub fn evaluate(&self, sentence: &Formula) -> Result<EvalResult> {
        self.evaluate_open(sentence, &[])
    }

    /// Evaluates a formula whose free variables are all bound in `env`.
    pub fn evaluate_open(&self, formula: &Formula, env: &[(String, CMatrix)]) -> Result<EvalResult> {
        self.config.validate()?;
        let bound: BTreeSet<String> = env.iter().map(|(n, _)| n.clone()).collect();
        let free = formula.free_vars();
        if let Some(v) = free.iter().find(|v| !bound.contains(*v)) {
            return Err(Error::invalid(format!("free variable {v}")));
        }
        let mut check = StaticInfo::default();
        self.check(formula, &mut BTreeMap::new(), 0, 0, &mut check)?;
        if check.slots.contains("A") && check.slots.contains("B") {
            if let (Some(a), Some(b)) = (self.structures.get("A"), self.structures.get("B")) {
                if !a.is_subsystem_of(b) {
                    return Err(Error::invalid("structure A is not contained in structure B"));
                }
            }
        }
        let bound_kind = match (check.has_sup, check.has_inf) {
            (false, false) => BoundKind::Exact,
            (true, false) => BoundKind::LowerEstimate,
            (false, true) => BoundKind::UpperEstimate,
            (true, true) => BoundKind::Heuristic,
        };

        let mut env: Env = env.to_vec();
        let mut capture = Capture::default();
        let value = self.eval_formula(formula, &mut env, 0, 0, Some(&mut capture))?;
        Ok(EvalResult {
            value,
            witnesses: capture.witnesses,
            converged: capture.converged.unwrap_or(true),
            bound_kind,
        })
    }

    fn structure(&self, slot: &str) -> Result<&'a OperatorSystem> {
        self.structures.get(slot).ok_or_else(|| Error::invalid(format!("unresolved structure slot {slot}")))
    }

    fn predicate(&self, name: &str) -> Result<&'a super::registry::PredicateDef> {
        self.registry
            .and_then(|r| r.def(name))
            .ok_or_else(|| Error::invalid(format!("unknown predicate {name}")))
    }

    // ----- static checks -------------------------------------------------

    fn check(
        &self,
        f: &Formula,
        var_slots: &mut BTreeMap<String, String>,
        depth: usize,
        pred_nesting: usize,
        info: &mut StaticInfo,
    ) -> Result<()> {
        match f {
            Formula::Norm(t) | Formula::NormSq(t) => self.check_term(t, var_slots),
            Formula::DistToStructure(t, slot) | Formula::DistToPsdCone(t, slot) => {
                self.structure(slot)?;
                info.slots.insert(slot.clone());
                self.check_term(t, var_slots)
            }
            Formula::AbsDiff(a, b)
            | Formula::DotMinus(a, b)
            | Formula::Max(a, b)
            | Formula::Min(a, b)
            | Formula::Plus(a, b) => {
                self.check(a, var_slots, depth, pred_nesting, info)?;
                self.check(b, var_slots, depth, pred_nesting, info)
            }
            Formula::Scale(c, g) => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(Error::invalid(format!("formula scale must be nonnegative, got {c}")));
                }
                self.check(g, var_slots, depth, pred_nesting, info)
            }
            Formula::Const(c) => {
                if !c.is_finite() {
                    return Err(Error::invalid("non-finite formula constant"));
                }
                Ok(())
            }
            Formula::Quant { .. } => {
                let (kind, vars, body) = block_of(f);
                if depth + 1 > MAX_BLOCK_DEPTH {
                    return Err(Error::unsupported(format!(
                        "quantifier alternation deeper than {MAX_BLOCK_DEPTH} blocks"
                    )));
                }
                match kind {
                    Quantifier::Sup => info.has_sup = true,
                    Quantifier::Inf => info.has_inf = true,
                }
                let mut saved = Vec::new();
                for (var, dom) in &vars {
                    let sys = self.structure(dom.slot())?;
                    info.slots.insert(dom.slot().to_string());
                    if let Domain::Ball { radius, .. } = dom {
                        BallSpec::new(sys, *radius)?;
                    }
                    saved.push((var.to_string(), var_slots.insert(var.to_string(), dom.slot().to_string())));
                }
                let r = self.check(body, var_slots, depth + 1, pred_nesting, info);
                for (var, prev) in saved.into_iter().rev() {
                    match prev {
                        Some(p) => var_slots.insert(var, p),
                        None => var_slots.remove(&var),
                    };
                }
                r
            }
            Formula::Pred { name, args } => {
                if pred_nesting >= MAX_PREDICATE_NESTING {
                    return Err(Error::invalid("predicate definitions nest too deeply"));
                }
                let def = self.predicate(name)?;
                if def.params.len() != args.len() {
                    return Err(Error::invalid(format!(
                        "predicate {name} takes {} arguments, got {}",
                        def.params.len(),
                        args.len()
                    )));
                }
                for a in args {
                    self.check_term(a, var_slots)?;
                }
                self.check(&def.body, &mut BTreeMap::new(), depth, pred_nesting + 1, info)
            }
        }
    }

    fn check_term(&self, t: &Term, var_slots: &BTreeMap<String, String>) -> Result<()> {
        match t {
            Term::Product(a, b) => {
                for v in a.vars().into_iter().chain(b.vars()) {
                    if let Some(slot) = var_slots.get(&v) {
                        if !self.structure(slot)?.is_cstar_algebra() {
                            return Err(Error::unsupported(format!(
                                "product of {v} needs structure {slot} to be a C*-algebra"
                            )));
                        }
                    }
                }
                self.check_term(a, var_slots)?;
                self.check_term(b, var_slots)
            }
            Term::Adjoint(s) | Term::Scale(_, s) | Term::Amplify(s, _) => self.check_term(s, var_slots),
            Term::Sum(a, b) => {
                self.check_term(a, var_slots)?;
                self.check_term(b, var_slots)
            }
            Term::Block(rows) => rows.iter().flatten().try_for_each(|s| self.check_term(s, var_slots)),
            Term::Var(_) | Term::Const(_) | Term::Unit(_) => Ok(()),
        }
    }

    /// Interval known to contain the value of `f` regardless of bindings.
    fn bounds(&self, f: &Formula, nesting: usize) -> (f64, f64) {
        const INF: f64 = f64::INFINITY;
        match f {
            Formula::Norm(_)
            | Formula::NormSq(_)
            | Formula::DistToStructure(..)
            | Formula::DistToPsdCone(..)
            | Formula::AbsDiff(..) => (0.0, INF),
            Formula::DotMinus(a, b) => {
                let (al, ah) = self.bounds(a, nesting);
                let (bl, bh) = self.bounds(b, nesting);
                ((al - bh).max(0.0), (ah - bl).max(0.0))
            }
            Formula::Max(a, b) => {
                let (al, ah) = self.bounds(a, nesting);
                let (bl, bh) = self.bounds(b, nesting);
                (al.max(bl), ah.max(bh))
            }
            Formula::Min(a, b) => {
                let (al, ah) = self.bounds(a, nesting);
                let (bl, bh) = self.bounds(b, nesting);
                (al.min(bl), ah.min(bh))
            }
            Formula::Plus(a, b) => {
                let (al, ah) = self.bounds(a, nesting);
                let (bl, bh) = self.bounds(b, nesting);
                (al + bl, ah + bh)
            }
            Formula::Scale(c, g) => {
                if *c == 0.0 {
                    return (0.0, 0.0);
                }
                let (l, h) = self.bounds(g, nesting);
                (c * l, c * h)
            }
            Formula::Const(c) => (*c, *c),
            Formula::Quant { body, .. } => self.bounds(body, nesting),
            Formula::Pred { name, .. } => match self.predicate(name) {
                Ok(def) if nesting < MAX_PREDICATE_NESTING => self.bounds(&def.body, nesting + 1),
                _ => (f64::NEG_INFINITY, INF),
            },
        }
    }

    // ----- evaluation ----------------------------------------------------

    fn eval_formula(
        &self,
        f: &Formula,
        env: &mut Env,
        depth: usize,
        pred_nesting: usize,
        capture: Option<&mut Capture>,
    ) -> Result<f64> {
        Ok(match f {
            Formula::Norm(t) => self.norm_of(t, env)?,
            Formula::NormSq(t) => self.norm_of(t, env)?.powi(2),
            Formula::DistToStructure(t, slot) => {
                let sys = self.structure(slot)?;
                let x = self.to_matrix(self.eval_term(t, env)?, Some(sys.ambient_dim()))?;
                dist_to_system(&x, sys)?
            }
            Formula::DistToPsdCone(t, slot) => {
                let sys = self.structure(slot)?;
                if !sys.is_cstar_algebra() {
                    return Err(Error::unsupported(format!(
                        "distance to the positive cone of {slot} needs a C*-algebra"
                    )));
                }
                let x = self.to_matrix(self.eval_term(t, env)?, Some(sys.ambient_dim()))?;
                if !x.is_square() || x.rows() % sys.ambient_dim() != 0 {
                    return Err(Error::invalid(format!(
                        "{}x{} matrix is not over M_{}",
                        x.rows(),
                        x.cols(),
                        sys.ambient_dim()
                    )));
                }
                x.dist_to_psd(&self.tol)?
            }
            Formula::AbsDiff(a, b) => {
                let (va, vb) = self.eval_pair(a, b, env, depth, pred_nesting, capture)?;
                (va - vb).abs()
            }
            Formula::DotMinus(a, b) => {
                let (va, vb) = self.eval_pair(a, b, env, depth, pred_nesting, capture)?;
                (va - vb).max(0.0)
            }
            Formula::Max(a, b) => {
                let (va, vb) = self.eval_pair(a, b, env, depth, pred_nesting, capture)?;
                va.max(vb)
            }
            Formula::Min(a, b) => {
                let (va, vb) = self.eval_pair(a, b, env, depth, pred_nesting, capture)?;
                va.min(vb)
            }
            Formula::Plus(a, b) => {
                let (va, vb) = self.eval_pair(a, b, env, depth, pred_nesting, capture)?;
                va + vb
            }
            Formula::Scale(c, g) => c * self.eval_formula(g, env, depth, pred_nesting, capture)?,
            Formula::Const(c) => *c,
            Formula::Quant { .. } => {
                let (kind, vars, body) = block_of(f);
                let best = self.optimize_block(kind, &vars, body, env, depth, pred_nesting)?;
                if let Some(cap) = capture {
                    for ((name, _), m) in vars.iter().zip(&best.witness) {
                        cap.witnesses.entry(name.to_string()).or_insert_with(|| m.clone());
                    }
                    cap.converged.get_or_insert(best.converged);
                    let mark = env.len();
                    for ((name, _), m) in vars.iter().zip(&best.witness) {
                        env.push((name.to_string(), m.clone()));
                    }
                    let r = self.eval_formula(body, env, depth + 1, pred_nesting, Some(cap));
                    env.truncate(mark);
                    r?;
                }
                best.value
            }
            Formula::Pred { name, args } => {
                let def = self.predicate(name)?;
                if def.params.len() != args.len() {
                    return Err(Error::invalid(format!("arity mismatch for predicate {name}")));
                }
                let mut inner: Env = Vec::with_capacity(args.len());
                for (p, a) in def.params.iter().zip(args) {
                    let m = self.to_matrix(self.eval_term(a, env)?, None)?;
                    inner.push((p.clone(), m));
                }
                self.eval_formula(&def.body, &mut inner, depth, pred_nesting + 1, capture)?
            }
        })
    }

    fn eval_pair(
        &self,
        a: &Formula,
        b: &Formula,
        env: &mut Env,
        depth: usize,
        pred_nesting: usize,
        mut capture: Option<&mut Capture>,
    ) -> Result<(f64, f64)> {
        let va = self.eval_formula(a, env, depth, pred_nesting, capture.as_deref_mut())?;
        let vb = self.eval_formula(b, env, depth, pred_nesting, capture)?;
        Ok((va, vb))
    }

    fn norm_of(&self, t: &Term, env: &Env) -> Result<f64> {
        Ok(match self.eval_term(t, env)? {
            Value::Scalar(c) => c.norm(),
            Value::Mat(m) => m.op_norm(),
        })
    }

    fn to_matrix(&self, v: Value, dim: Option<usize>) -> Result<CMatrix> {
        match v {
            Value::Mat(m) => Ok(m),
            Value::Scalar(c) => {
                let d = dim.or(self.unit_dim).ok_or_else(|| {
                    Error::invalid("cannot size a multiple of the unit: structures differ in dimension")
                })?;
                Ok(CMatrix::scalar_identity(d, c))
            }
        }
    }

    fn eval_term(&self, t: &Term, env: &Env) -> Result<Value> {
        Ok(match t {
            Term::Var(name) => Value::Mat(
                env.iter()
                    .rev()
                    .find(|(n, _)| n == name)
                    .map(|(_, m)| m.clone())
                    .ok_or_else(|| Error::invalid(format!("unbound variable {name}")))?,
            ),
            Term::Const(m) => Value::Mat(m.clone()),
            Term::Unit(c) => Value::Scalar(*c),
            Term::Adjoint(s) => match self.eval_term(s, env)? {
                Value::Scalar(c) => Value::Scalar(c.conj()),
                Value::Mat(m) => Value::Mat(m.adjoint()),
            },
            Term::Scale(c, s) => match self.eval_term(s, env)? {
                Value::Scalar(z) => Value::Scalar(z * c),
                Value::Mat(m) => Value::Mat(m.scale(*c)),
            },
            Term::Sum(a, b) => match (self.eval_term(a, env)?, self.eval_term(b, env)?) {
                (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(x + y),
                (Value::Scalar(c), Value::Mat(m)) | (Value::Mat(m), Value::Scalar(c)) => {
                    if !m.is_square() {
                        return Err(Error::invalid("adding a unit multiple to a non-square matrix"));
                    }
                    let n = m.rows();
                    Value::Mat(m + CMatrix::scalar_identity(n, c))
                }
                (Value::Mat(x), Value::Mat(y)) => {
                    if x.rows() != y.rows() || x.cols() != y.cols() {
                        return Err(Error::invalid(format!(
                            "sum of {}x{} and {}x{} matrices",
                            x.rows(),
                            x.cols(),
                            y.rows(),
                            y.cols()
                        )));
                    }
                    Value::Mat(x + y)
                }
            },
            Term::Product(a, b) => match (self.eval_term(a, env)?, self.eval_term(b, env)?) {
                (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(x * y),
                (Value::Scalar(c), Value::Mat(m)) | (Value::Mat(m), Value::Scalar(c)) => {
                    Value::Mat(m.scale(c))
                }
                (Value::Mat(x), Value::Mat(y)) => {
                    if x.cols() != y.rows() {
                        return Err(Error::invalid(format!(
                            "product of {}x{} and {}x{} matrices",
                            x.rows(),
                            x.cols(),
                            y.rows(),
                            y.cols()
                        )));
                    }
                    Value::Mat(x * y)
                }
            },
            Term::Amplify(s, n) => {
                if *n == 0 {
                    return Err(Error::invalid("amplification level must be at least 1"));
                }
                match self.eval_term(s, env)? {
                    Value::Scalar(c) => Value::Scalar(c),
                    Value::Mat(m) => Value::Mat(m.amplify(*n)?),
                }
            }
            Term::Block(rows) => Value::Mat(self.eval_block(rows, env)?),
        })
    }

    fn eval_block(&self, rows: &[Vec<Term>], env: &Env) -> Result<CMatrix> {
        if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(Error::invalid("block grid must be a non-empty rectangle"));
        }
        let values: Vec<Vec<Value>> = rows
            .iter()
            .map(|r| r.iter().map(|t| self.eval_term(t, env)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let nr = values.len();
        let nc = values[0].len();
        let mut heights = vec![None; nr];
        let mut widths = vec![None; nc];
        for (i, row) in values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Value::Mat(m) = v {
                    heights[i].get_or_insert(m.rows());
                    widths[j].get_or_insert(m.cols());
                }
            }
        }
        let resolve = |d: Option<usize>| {
            d.or(self.unit_dim)
                .ok_or_else(|| Error::invalid("cannot size a unit block: structures differ in dimension"))
        };
        let heights: Vec<usize> = heights.into_iter().map(resolve).collect::<Result<_>>()?;
        let widths: Vec<usize> = widths.into_iter().map(resolve).collect::<Result<_>>()?;
        let mut grid = Vec::with_capacity(nr);
        for (i, row) in values.into_iter().enumerate() {
            let mut out = Vec::with_capacity(nc);
            for (j, v) in row.into_iter().enumerate() {
                out.push(match v {
                    Value::Mat(m) => m,
                    Value::Scalar(c) if heights[i] == widths[j] => CMatrix::scalar_identity(heights[i], c),
                    Value::Scalar(c) if c == Complex64::new(0.0, 0.0) => {
                        CMatrix::zeros(heights[i], widths[j])
                    }
                    Value::Scalar(_) => {
                        return Err(Error::invalid(format!(
                            "unit multiple in a non-square {}x{} block",
                            heights[i], widths[j]
                        )))
                    }
                });
            }
            grid.push(out);
        }
        CMatrix::block(&grid)
    }

    // ----- quantifier blocks ---------------------------------------------

    fn optimize_block(
        &self,
        kind: Quantifier,
        vars: &[(&str, &Domain)],
        body: &Formula,
        env: &mut Env,
        depth: usize,
        pred_nesting: usize,
    ) -> Result<BlockOutcome> {
        let coords: Vec<VarCoords> = vars
            .iter()
            .map(|(name, dom)| VarCoords::new(name, dom, self.structure(dom.slot())?))
            .collect::<Result<_>>()?;
        let sign = match kind {
            Quantifier::Sup => -1.0,
            Quantifier::Inf => 1.0,
        };
        let (lo, hi) = self.bounds(body, pred_nesting);
        let floor = match kind {
            Quantifier::Inf if lo.is_finite() => lo + 1e-12,
            Quantifier::Sup if hi.is_finite() => -hi + 1e-12,
            _ => f64::NEG_INFINITY,
        };

        // hint starts first, then random ones
        let hint_lists: Vec<Vec<Vec<f64>>> = {
            let bindings = Bindings { vars: env };
            coords
                .iter()
                .map(|vc| {
                    self.hints
                        .iter()
                        .filter(|h| h.var == vc.name)
                        .flat_map(|h| (h.generate)(&bindings))
                        .filter(|m| m.rows() == vc.ambient && m.cols() == vc.ambient && m.is_finite())
                        .map(|m| vc.encode(&m))
                        .collect()
                })
                .collect()
        };
        let n_hint = hint_lists.iter().map(Vec::len).max().unwrap_or(0);
        let n_random = self.config.starts_at(depth);
        let randoms: Vec<Vec<Vec<f64>>> =
            coords.iter().map(|vc| vc.random(self.seed_for(depth, vc.name), n_random + n_hint)).collect();
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_hint + n_random);
        for i in 0..n_hint + n_random {
            let mut x = Vec::new();
            for (j, _) in coords.iter().enumerate() {
                let hl = &hint_lists[j];
                if i < n_hint && !hl.is_empty() {
                    x.extend_from_slice(&hl[i % hl.len()]);
                } else {
                    x.extend_from_slice(&randoms[j][i]);
                }
            }
            starts.push(x);
        }

        let step = coords.iter().map(|c| c.step).fold(0.0, f64::max);
        let opts = Options {
            max_iter: (self.config.iters_at(depth) / self.config.refine_at(depth)).max(20),
            ftol: self.config.opt_tol * 1e-3,
            xtol: 1e-6,
            step,
            floor,
        };

        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let mut objective = |x: &[f64]| -> f64 {
            let mark = env.len();
            let mut offset = 0;
            for vc in &coords {
                env.push((vc.name.to_string(), vc.decode(&x[offset..offset + vc.len], &self.tol)));
                offset += vc.len;
            }
            let r = self.eval_formula(body, env, depth + 1, pred_nesting, None);
            env.truncate(mark);
            match r {
                Ok(v) if v.is_nan() => f64::INFINITY,
                Ok(v) => sign * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::INFINITY
                }
            }
        };

        // screen every start with one evaluation, then refine the best few
        let mut screened: Vec<(f64, usize)> = Vec::with_capacity(starts.len());
        for (i, start) in starts.iter().enumerate() {
            let v = objective(start);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            screened.push((v, i));
            if v <= floor {
                break;
            }
        }
        screened.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<(f64, Vec<f64>, bool)> = None;
        if screened[0].0 <= floor {
            best = Some((screened[0].0, starts[screened[0].1].clone(), true));
        } else {
            for &(_, i) in screened.iter().take(self.config.refine_at(depth)) {
                let out = nelder_mead::minimize(&mut objective, &starts[i], &opts);
                if let Some(e) = failure.borrow_mut().take() {
                    return Err(e);
                }
                if best.as_ref().is_none_or(|b| out.f < b.0) {
                    best = Some((out.f, out.x, out.converged));
                }
                if best.as_ref().unwrap().0 <= floor {
                    break;
                }
            }
        }
        let (f, x, converged) = best.expect("at least one start");
        let mut witness = Vec::with_capacity(coords.len());
        let mut offset = 0;
        for vc in &coords {
            witness.push(vc.decode(&x[offset..offset + vc.len], &self.tol));
            offset += vc.len;
        }
        let value = sign * f;
        if !self.observers.is_empty() {
            let names: Vec<String> = vars.iter().map(|(n, _)| n.to_string()).collect();
            let event =
                BlockEvent { kind, vars: &names, bindings: Bindings { vars: env }, value, witness: &witness };
            for obs in &self.observers {
                obs(&event);
            }
        }
        Ok(BlockOutcome { value, witness, converged })
    }

    fn seed_for(&self, depth: usize, name: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        splitmix(splitmix(self.config.rng_seed ^ (depth as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)) ^ h)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Default)]
struct StaticInfo {
    has_sup: bool,
    has_inf: bool,
    slots: BTreeSet<String>,
}

struct BlockOutcome {
    value: f64,
    witness: Vec<CMatrix>,
    converged: bool,
}

/// Splits off the maximal run of same-kind quantifiers at the head of `f`.
fn block_of(f: &Formula) -> (Quantifier, Vec<(&str, &Domain)>, &Formula) {
    let Formula::Quant { kind, .. } = f else { unreachable!("block_of on a non-quantifier") };
    let kind = *kind;
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Quant { kind: k, var, domain, body } = cur {
        if *k != kind {
            break;
        }
        vars.push((var.as_str(), domain));
        cur = body;
    }
    (kind, vars, cur)
}

/// Real coordinates of one quantified variable.
struct VarCoords<'s> {
    name: &'s str,
    system: &'s OperatorSystem,
    ambient: usize,
    unitary: bool,
    radius: f64,
    len: usize,
    step: f64,
}

impl<'s> VarCoords<'s> {
    fn new(name: &'s str, dom: &Domain, system: &'s OperatorSystem) -> Result<Self> {
        let m = system.dim();
        Ok(match dom {
            Domain::Ball { radius, .. } => VarCoords {
                name,
                system,
                ambient: system.ambient_dim(),
                unitary: false,
                radius: *radius,
                len: 2 * m,
                step: 0.25 * radius,
            },
            Domain::Unitaries { .. } => VarCoords {
                name,
                system,
                ambient: system.ambient_dim(),
                unitary: true,
                radius: PI,
                len: m,
                step: 0.5,
            },
        })
    }

    fn decode(&self, x: &[f64], tol: &Tolerance) -> CMatrix {
        if self.unitary {
            let h = self.system.hermitian_from_real(x);
            let n = h.op_norm();
            let h = if n > self.radius { h.scale_real(self.radius / n) } else { h };
            h.hermitian_part().exp_i_hermitian(tol).expect("Hermitian by construction")
        } else {
            let m = self.system.element_from_real(x);
            let n = m.op_norm();
            if n > self.radius {
                m.scale_real(self.radius / n)
            } else {
                m
            }
        }
    }

    fn encode(&self, m: &CMatrix) -> Vec<f64> {
        if self.unitary {
            self.system.hermitian_coordinates(m)
        } else {
            self.system.real_coordinates(m)
        }
    }

    fn random(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let spec = BallSpec { system: self.system, radius: self.radius };
        sample_ball(&spec, seed, count).iter().map(|m| self.encode(m)).collect()
    }
}
