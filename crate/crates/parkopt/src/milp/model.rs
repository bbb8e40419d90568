//! Solver-independent model representation: variables, linear constraints,
//! and a minimizing linear objective.

use std::collections::HashMap;
use std::fmt;

/// Absolute tolerance for feasibility and integrality checks throughout the
/// crate. Residuals at or below this are treated as exact.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// One linear constraint. Terms are sorted by variable index and hold only
/// nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs_value(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * point[j]).sum()
    }
}

/// A minimizing mixed-integer linear program.
///
/// Variable and constraint order is part of the model's identity: building
/// the same problem twice yields identical orderings, and every tie-break
/// and export downstream relies on that.
#[derive(Debug, Clone)]
pub struct MipModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    /// Dense minimize-objective coefficients, parallel to `variables`.
    objective: Vec<f64>,
    objective_constant: f64,
    index: HashMap<String, usize>,
}

impl PartialEq for MipModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
            && self.objective_constant == other.objective_constant
    }
}

impl MipModel {
    pub fn new(name: impl Into<String>) -> Self {
        MipModel {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            index: HashMap::new(),
        }
    }

    /// Declares a variable; names must be unique (misuse is a bug, so this
    /// panics rather than returning an error).
    pub fn add_variable(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate variable name '{name}'"
        );
        assert!(lower <= upper, "variable '{name}' has empty bounds [{lower}, {upper}]");
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lower, upper });
        self.objective.push(0.0);
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.add_variable(name, VarKind::Continuous, lower, upper)
    }

    /// Adds a constraint. Zero coefficients are dropped; remaining terms are
    /// sorted by variable index. Duplicate variables within one constraint
    /// and out-of-range indices are bugs.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let name = name.into();
        let mut terms: Vec<(usize, f64)> = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        terms.sort_by_key(|&(j, _)| j);
        for pair in terms.windows(2) {
            assert!(pair[0].0 != pair[1].0, "constraint '{name}' repeats a variable");
        }
        for &(j, c) in &terms {
            assert!(j < self.variables.len(), "constraint '{name}' references unknown variable");
            assert!(c.is_finite(), "constraint '{name}' has non-finite coefficient");
        }
        assert!(rhs.is_finite(), "constraint '{name}' has non-finite right-hand side");
        self.constraints.push(Constraint { name, terms, sense, rhs });
    }

    pub fn set_objective_coefficient(&mut self, var: usize, coefficient: f64) {
        self.objective[var] = coefficient;
    }

    pub fn set_objective_constant(&mut self, constant: f64) {
        self.objective_constant = constant;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective_coefficients(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.variables.len() - self.num_binaries()
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.variables.len());
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(point)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Turns a name→value map into a dense point in variable order. Names
    /// the model does not know are rejected; model variables missing from
    /// the map default to 0.
    pub fn point_from_named(
        &self,
        values: &[(String, f64)],
    ) -> Result<Vec<f64>, String> {
        let mut point = vec![0.0; self.variables.len()];
        for (name, value) in values {
            match self.var_index(name) {
                Some(j) => point[j] = *value,
                None => return Err(name.clone()),
            }
        }
        Ok(point)
    }
}

/// One feasibility defect: a violated constraint, an out-of-bounds value,
/// or a fractional binary.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Constraint or variable name.
    pub subject: String,
    pub detail: String,
    /// How far past the tolerance the point sits.
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (by {:.3e})", self.subject, self.detail, self.amount)
    }
}

/// Checks a full point against bounds, integrality, and every constraint,
/// reporting each defect whose residual exceeds [`FEASIBILITY_TOL`].
/// Violations are data; an empty list means the point is feasible.
pub fn check_solution_feasibility(model: &MipModel, point: &[f64]) -> Vec<Violation> {
    assert_eq!(
        point.len(),
        model.variables().len(),
        "point has {} values for {} variables",
        point.len(),
        model.variables().len()
    );
    let mut violations = Vec::new();
    for (var, &value) in model.variables().iter().zip(point) {
        if !value.is_finite() {
            violations.push(Violation {
                subject: var.name.clone(),
                detail: format!("value {value} is not finite"),
                amount: f64::INFINITY,
            });
            continue;
        }
        let below = var.lower - value;
        let above = value - var.upper;
        let out = below.max(above);
        if out > FEASIBILITY_TOL {
            violations.push(Violation {
                subject: var.name.clone(),
                detail: format!("value {value} outside bounds [{}, {}]", var.lower, var.upper),
                amount: out,
            });
        }
        if var.kind == VarKind::Binary {
            let frac = value.min((value - 1.0).abs()).abs();
            if frac > FEASIBILITY_TOL {
                violations.push(Violation {
                    subject: var.name.clone(),
                    detail: format!("binary variable has fractional value {value}"),
                    amount: frac,
                });
            }
        }
    }
    for con in model.constraints() {
        let lhs = con.lhs_value(point);
        let residual = match con.sense {
            Sense::Le => lhs - con.rhs,
            Sense::Ge => con.rhs - lhs,
            Sense::Eq => (lhs - con.rhs).abs(),
        };
        if residual > FEASIBILITY_TOL {
            violations.push(Violation {
                subject: con.name.clone(),
                detail: format!("{lhs} {} {} violated", con.sense, con.rhs),
                amount: residual,
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MipModel {
        // minimize z subject to: b1 + b2 >= 1, z >= 3 b1, z >= 2 b2.
        let mut m = MipModel::new("toy");
        let b1 = m.add_binary("b1");
        let b2 = m.add_binary("b2");
        let z = m.add_continuous("z", 0.0, f64::INFINITY);
        m.add_constraint("pick", vec![(b1, 1.0), (b2, 1.0)], Sense::Ge, 1.0);
        m.add_constraint("z1", vec![(z, 1.0), (b1, -3.0)], Sense::Ge, 0.0);
        m.add_constraint("z2", vec![(z, 1.0), (b2, -2.0)], Sense::Ge, 0.0);
        m.set_objective_coefficient(z, 1.0);
        m
    }

    #[test]
    fn objective_and_lookup() {
        let m = toy();
        assert_eq!(m.num_binaries(), 2);
        assert_eq!(m.num_continuous(), 1);
        assert_eq!(m.var_index("z"), Some(2));
        assert_eq!(m.objective_value(&[0.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn feasible_point_has_no_violations() {
        let m = toy();
        assert!(check_solution_feasibility(&m, &[0.0, 1.0, 2.0]).is_empty());
    }

    #[test]
    fn constraint_violation_is_reported_with_residual() {
        let m = toy();
        let v = check_solution_feasibility(&m, &[1.0, 0.0, 1.0]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "z1");
        assert!((v[0].amount - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_binary_is_reported() {
        let m = toy();
        let v = check_solution_feasibility(&m, &[0.5, 1.0, 3.0]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "b1");
        assert!(v[0].detail.contains("fractional"));
    }

    #[test]
    fn bound_violation_is_reported() {
        let m = toy();
        let v = check_solution_feasibility(&m, &[0.0, 1.0, -0.5]);
        assert!(v.iter().any(|v| v.subject == "z" && v.detail.contains("outside bounds")));
    }

    #[test]
    fn zero_coefficients_are_dropped_and_terms_sorted() {
        let mut m = MipModel::new("t");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("c", vec![(b, 2.0), (a, 0.0)], Sense::Le, 1.0);
        assert_eq!(m.constraints()[0].terms, vec![(b, 2.0)]);
        let _ = a;
    }

    #[test]
    #[should_panic(expected = "duplicate variable name")]
    fn duplicate_names_are_rejected() {
        let mut m = MipModel::new("t");
        m.add_binary("a");
        m.add_binary("a");
    }

    #[test]
    fn named_points_reject_unknown_variables() {
        let m = toy();
        let err = m.point_from_named(&[("nope".into(), 1.0)]).unwrap_err();
        assert_eq!(err, "nope");
        let point = m.point_from_named(&[("b2".into(), 1.0), ("z".into(), 2.0)]).unwrap();
        assert_eq!(point, vec![0.0, 1.0, 2.0]);
    }
}
