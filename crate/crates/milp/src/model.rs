//! Solver-agnostic model intermediate representation.
//!
//! A [`Model`] is a list of named variables (continuous or binary), a list of
//! linear constraints, and a linear minimization objective. Every coefficient
//! is checked at build time: magnitudes above `1e9` or nonzero below `1e-9`
//! are rejected to protect the conditioning of the bundled solver.

use std::collections::HashMap;
use std::fmt;

use crate::error::ModelError;

/// Largest coefficient magnitude accepted by the model builder.
pub const MAX_COEFF: f64 = 1e9;
/// Smallest nonzero coefficient magnitude accepted by the model builder.
pub const MIN_COEFF: f64 = 1e-9;

/// Handle to a variable registered in a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Position of the variable in registration order.
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Variable domain kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Constraint comparison sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear expression: sum of coefficient * variable terms plus a constant.
///
/// Terms may reference the same variable more than once; they are merged when
/// the expression is installed into a model.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub(crate) terms: Vec<(VarId, f64)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// Adds `scale * other` into this expression.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.terms.push((v, c * scale));
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Evaluates the expression against a dense value vector indexed by `VarId`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &(v, c) in &self.terms {
            acc += c * values[v.0];
        }
        acc
    }
}

/// A mixed-integer linear minimization model.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub(crate) vars: Vec<Variable>,
    pub(crate) cons: Vec<Constraint>,
    pub(crate) objective: Vec<(usize, f64)>,
    pub(crate) objective_constant: f64,
    name_index: HashMap<String, usize>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a continuous variable with the given bounds.
    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        self.add_var(name.into(), VarKind::Continuous, lower, upper)
    }

    /// Registers a binary variable. Bounds may tighten the domain within [0, 1].
    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    fn add_var(
        &mut self,
        name: String,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        if self.name_index.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if lower > upper {
            return Err(ModelError::InvalidBounds {
                name,
                lower,
                upper,
            });
        }
        if kind == VarKind::Binary && !(lower >= 0.0 && upper <= 1.0) {
            return Err(ModelError::InvalidBounds {
                name,
                lower,
                upper,
            });
        }
        let id = self.vars.len();
        self.name_index.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(VarId(id))
    }

    /// Tightens the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        if lower > upper {
            return Err(ModelError::InvalidBounds {
                name: self.vars[var.0].name.clone(),
                lower,
                upper,
            });
        }
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
        Ok(())
    }

    fn check_coeff(&self, name: &str, coeff: f64) -> Result<(), ModelError> {
        if !coeff.is_finite() || coeff.abs() > MAX_COEFF || (coeff != 0.0 && coeff.abs() < MIN_COEFF)
        {
            return Err(ModelError::BadCoefficient {
                context: name.to_string(),
                value: coeff,
            });
        }
        Ok(())
    }

    /// Merges duplicate variable references and drops exact zeros.
    fn normalize_terms(
        &self,
        name: &str,
        terms: &[(VarId, f64)],
    ) -> Result<Vec<(usize, f64)>, ModelError> {
        let mut acc: HashMap<usize, f64> = HashMap::with_capacity(terms.len());
        for &(v, c) in terms {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVariable {
                    context: name.to_string(),
                });
            }
            *acc.entry(v.0).or_insert(0.0) += c;
        }
        let mut merged: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
        merged.sort_unstable_by_key(|&(v, _)| v);
        for &(_, c) in &merged {
            self.check_coeff(name, c)?;
        }
        Ok(merged)
    }

    /// Adds a linear constraint `expr (sense) rhs`. The expression's constant is
    /// folded into the right-hand side.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<(), ModelError> {
        let name = name.into();
        let adjusted_rhs = rhs - expr.constant;
        if !adjusted_rhs.is_finite() || adjusted_rhs.abs() > MAX_COEFF {
            return Err(ModelError::BadCoefficient {
                context: name,
                value: adjusted_rhs,
            });
        }
        let terms = self.normalize_terms(&name, &expr.terms)?;
        self.cons.push(Constraint {
            name,
            terms,
            sense,
            rhs: adjusted_rhs,
        });
        Ok(())
    }

    /// Installs the minimization objective, replacing any previous one.
    pub fn set_objective(&mut self, expr: LinExpr) -> Result<(), ModelError> {
        let terms = self.normalize_terms("objective", &expr.terms)?;
        self.objective = terms;
        self.objective_constant = expr.constant;
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.vars[var.0].name
    }

    pub fn var_kind(&self, var: VarId) -> VarKind {
        self.vars[var.0].kind
    }

    pub fn var_bounds(&self, var: VarId) -> (f64, f64) {
        (self.vars[var.0].lower, self.vars[var.0].upper)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.name_index.get(name).copied().map(VarId)
    }

    pub fn constraint_names(&self) -> impl Iterator<Item = &str> {
        self.cons.iter().map(|c| c.name.as_str())
    }

    /// Returns (terms, sense, rhs) of the named constraint, if present.
    pub fn constraint_by_name(&self, name: &str) -> Option<(Vec<(VarId, f64)>, Sense, f64)> {
        self.cons.iter().find(|c| c.name == name).map(|c| {
            (
                c.terms.iter().map(|&(v, co)| (VarId(v), co)).collect(),
                c.sense,
                c.rhs,
            )
        })
    }

    pub fn objective_terms(&self) -> Vec<(VarId, f64)> {
        self.objective.iter().map(|&(v, c)| (VarId(v), c)).collect()
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub(crate) fn binary_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names() {
        let mut m = Model::new();
        m.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(matches!(
            m.add_continuous("x", 0.0, 1.0),
            Err(ModelError::DuplicateName(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_coefficients() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let huge = LinExpr::term(x, 2e9);
        assert!(m.add_constraint("c0", huge, Sense::Le, 1.0).is_err());
        let tiny = LinExpr::term(x, 1e-12);
        assert!(m.add_constraint("c1", tiny, Sense::Le, 1.0).is_err());
        let fine = LinExpr::term(x, 1.0);
        assert!(m.add_constraint("c2", fine, Sense::Le, 1.0).is_ok());
    }

    #[test]
    fn merges_duplicate_terms() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let mut e = LinExpr::new();
        e.add_term(x, 1.0).add_term(x, 2.0);
        m.add_constraint("c", e, Sense::Le, 6.0).unwrap();
        let (terms, _, rhs) = m.constraint_by_name("c").unwrap();
        assert_eq!(terms, vec![(x, 3.0)]);
        assert_eq!(rhs, 6.0);
    }

    #[test]
    fn constraint_constant_folds_into_rhs() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let mut e = LinExpr::term(x, 1.0);
        e.add_constant(2.5);
        m.add_constraint("c", e, Sense::Le, 6.0).unwrap();
        let (_, _, rhs) = m.constraint_by_name("c").unwrap();
        assert_eq!(rhs, 3.5);
    }

    #[test]
    fn binary_bounds_enforced() {
        let mut m = Model::new();
        let b = m.add_binary("b").unwrap();
        assert!(m.set_bounds(b, 0.0, 0.0).is_ok());
        assert!(m.set_bounds(b, 1.0, 0.0).is_err());
    }
}
