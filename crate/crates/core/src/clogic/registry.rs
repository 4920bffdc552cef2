use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::Formula;

/// A registered predicate symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateHandle {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct PredicateDef {
    pub params: Vec<String>,
    pub body: Formula,
}

/// Predicate symbols added to the language, each interpreted by its
/// defining formula. Uses expand the body with the parameters bound to the
/// argument values, so the defining axiom sup |Q(u) − body(u)| = 0 holds by
/// construction.
#[derive(Debug, Clone, Default)]
pub struct PredicateRegistry {
    defs: BTreeMap<String, PredicateDef>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, params: &[&str], body: Formula) -> Result<PredicateHandle> {
        if self.defs.contains_key(name) {
            return Err(Error::invalid(format!("predicate {name} is already registered")));
        }
        let mut unique = params.to_vec();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != params.len() {
            return Err(Error::invalid(format!("predicate {name} repeats a parameter")));
        }
        let free = body.free_vars();
        let declared: std::collections::BTreeSet<String> = params.iter().map(|s| s.to_string()).collect();
        if free != declared {
            return Err(Error::invalid(format!(
                "predicate {name}: body free variables {free:?} do not match parameters {declared:?}"
            )));
        }
        self.defs.insert(
            name.to_string(),
            PredicateDef { params: params.iter().map(|s| s.to_string()).collect(), body },
        );
        Ok(PredicateHandle { name: name.to_string(), arity: params.len() })
    }

    pub fn lookup(&self, name: &str) -> Option<PredicateHandle> {
        self.defs.get(name).map(|d| PredicateHandle { name: name.to_string(), arity: d.params.len() })
    }

    pub(crate) fn def(&self, name: &str) -> Option<&PredicateDef> {
        self.defs.get(name)
    }
}
