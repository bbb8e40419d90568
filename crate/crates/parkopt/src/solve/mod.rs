//! Exact solvers and solver interop.
//!
//! Two independent paths produce provably optimal solutions at desk scale:
//!
//! * [`solve_enumerate`] works in the problem domain — it walks every
//!   affordable candidate subset (and, in capacitated mode, every
//!   assignment) and prices plans with the closed-form evaluator.
//! * [`solve_model_enumerate`] works on the IR — it branches over binary
//!   variables with interval propagation and reads continuous values off
//!   the propagated bounds, knowing nothing about parks or distances.
//!
//! The two must agree, and the test suite holds them to that. Larger
//! instances leave through [`write_mps`] and come back through
//! [`read_solution_file`] / [`solve_via_external`].

mod enumerate;
mod external;
mod ir_enumerate;
mod mps;

pub use enumerate::{assign_uncapacitated, solve_enumerate, SolveError};
pub use external::{read_solution_file, solve_via_external, ExternalError};
pub use ir_enumerate::{for_each_feasible_point, solve_model_enumerate, EnumerationOutcome};
pub use mps::{mps_string, parse_mps, parse_mps_str, write_mps, MpsError};

use std::time::Duration;

use serde::Serialize;

use crate::milp::MipModel;

/// Relative tolerance under which two objective values count as tied and
/// the lexicographic tie-break decides.
pub const TIE_TOL: f64 = 1e-12;

/// Enumeration ceilings. The defaults keep every exhaustive path well under
/// a minute on desk-scale instances; anything larger should go through MPS
/// export instead.
#[derive(Debug, Clone, Copy)]
pub struct SolveLimits {
    /// Candidate-subset enumeration, uncapacitated (2^n subsets).
    pub max_candidates_uncapacitated: usize,
    /// Candidate ceiling in capacitated mode (assignments multiply fast).
    pub max_candidates_capacitated: usize,
    /// Location ceiling in capacitated mode (|opened|^|L| assignments).
    pub max_locations_capacitated: usize,
    /// Binary-variable ceiling for IR enumeration.
    pub max_binaries: usize,
    /// Wall-clock budget for one solve.
    pub time_limit: Duration,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_candidates_uncapacitated: 20,
            max_candidates_capacitated: 8,
            max_locations_capacitated: 6,
            max_binaries: 48,
            time_limit: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    DomainBruteForce,
    IrEnumeration,
    External,
}

/// An optimal plan in id terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPoint {
    /// Opened park ids, canonical order.
    pub opened: Vec<String>,
    /// (location id, park id) pairs, canonical location order.
    pub assignment: Vec<(String, String)>,
    /// Weighted deviation total per race.
    pub alpha: Vec<(String, f64)>,
    /// Largest per-race total.
    pub alpha_max: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub provenance: Provenance,
    /// Present exactly when `status` is `Optimal`.
    pub best: Option<SolutionPoint>,
}

impl Solution {
    pub fn objective(&self) -> Option<f64> {
        self.best.as_ref().map(|p| p.objective)
    }
}

/// True when `a` beats `b` under the canonical order: smaller objective
/// first (ties at [`TIE_TOL`] relative), then lexicographically smaller
/// opened set, then lexicographically smaller assignment.
pub(crate) fn candidate_better(
    a: (f64, &[usize], &[usize]),
    b: (f64, &[usize], &[usize]),
) -> bool {
    let (obj_a, opened_a, asg_a) = a;
    let (obj_b, opened_b, asg_b) = b;
    let scale = obj_a.abs().max(obj_b.abs()).max(1.0);
    if (obj_a - obj_b).abs() > TIE_TOL * scale {
        return obj_a < obj_b;
    }
    if opened_a != opened_b {
        return opened_a < opened_b;
    }
    asg_a < asg_b
}

/// Where the siting variables live inside a model, recovered from the
/// canonical variable names. Models without such variables (hand-built or
/// foreign MPS files) yield empty maps and plain objective-only solutions.
pub(crate) struct ModelShape {
    /// (variable index, park id) for each y(k), declaration order.
    pub y_vars: Vec<(usize, String)>,
    /// (variable index, park ordinal, location ordinal) for each x(k,l).
    pub x_vars: Vec<(usize, usize, usize)>,
    /// Location ids in first-appearance order.
    pub loc_ids: Vec<String>,
    /// (variable index, race label) for each alpha(r).
    pub alpha_vars: Vec<(usize, String)>,
    pub alpha_max_var: Option<usize>,
}

fn inside<'a>(name: &'a str, prefix: &str) -> Option<&'a str> {
    name.strip_prefix(prefix)?.strip_suffix(')')
}

impl ModelShape {
    pub fn of(model: &MipModel) -> ModelShape {
        let mut shape = ModelShape {
            y_vars: Vec::new(),
            x_vars: Vec::new(),
            loc_ids: Vec::new(),
            alpha_vars: Vec::new(),
            alpha_max_var: None,
        };
        for (j, var) in model.variables().iter().enumerate() {
            if let Some(id) = inside(&var.name, "y(") {
                shape.y_vars.push((j, id.to_string()));
            } else if let Some(pair) = inside(&var.name, "x(") {
                if let Some((park, loc)) = pair.split_once(',') {
                    let Some(k) = shape.y_vars.iter().position(|(_, id)| id == park) else {
                        continue;
                    };
                    let l = match shape.loc_ids.iter().position(|id| id == loc) {
                        Some(l) => l,
                        None => {
                            shape.loc_ids.push(loc.to_string());
                            shape.loc_ids.len() - 1
                        }
                    };
                    shape.x_vars.push((j, k, l));
                }
            } else if let Some(race) = inside(&var.name, "alpha(") {
                shape.alpha_vars.push((j, race.to_string()));
            } else if var.name == "alpha_max" {
                shape.alpha_max_var = Some(j);
            }
        }
        shape
    }

    /// Opened park ordinals at a point, ascending.
    pub fn opened_key(&self, point: &[f64]) -> Vec<usize> {
        self.y_vars
            .iter()
            .enumerate()
            .filter(|(_, (j, _))| point[*j] > 0.5)
            .map(|(k, _)| k)
            .collect()
    }

    /// Serving park ordinal per location at a point.
    pub fn assignment_key(&self, point: &[f64]) -> Vec<usize> {
        let mut park_of = vec![usize::MAX; self.loc_ids.len()];
        for &(j, k, l) in &self.x_vars {
            if point[j] > 0.5 && park_of[l] == usize::MAX {
                park_of[l] = k;
            }
        }
        park_of
    }

    /// Assembles the id-level solution point, recomputing the objective
    /// from the model rather than trusting any reported value.
    pub fn solution_point(&self, model: &MipModel, point: &[f64]) -> SolutionPoint {
        let opened = self
            .y_vars
            .iter()
            .filter(|(j, _)| point[*j] > 0.5)
            .map(|(_, id)| id.clone())
            .collect();
        let assignment = self
            .assignment_key(point)
            .iter()
            .enumerate()
            .filter(|&(_, &k)| k != usize::MAX)
            .map(|(l, &k)| (self.loc_ids[l].clone(), self.y_vars[k].1.clone()))
            .collect();
        let alpha: Vec<(String, f64)> =
            self.alpha_vars.iter().map(|(j, race)| (race.clone(), point[*j])).collect();
        let alpha_max = match self.alpha_max_var {
            Some(j) => point[j],
            None => alpha.iter().map(|&(_, a)| a).fold(0.0, f64::max),
        };
        SolutionPoint {
            opened,
            assignment,
            alpha,
            alpha_max,
            objective: model.objective_value(point),
        }
    }
}
