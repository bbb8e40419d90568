//! The mixed-integer linear model of the siting problem.
//!
//! [`build_model`] turns an instance/config pair into a solver-independent
//! IR ([`MipModel`]): open/assign binaries, per-group weighted-deviation
//! totals, endogenous slacks (distance beyond the threshold, load above
//! capacity), and the indicator/product machinery that pins those slacks to
//! their exact values at every feasible integer point — without it, a
//! min-max objective could leave the non-binding groups' slacks inflated.
//!
//! [`evaluate_assignment`] prices any concrete plan in closed form, and
//! [`canonical_lift`] extends a plan to a full IR point; the two views are
//! cross-checked in tests and must agree exactly.

mod build;
mod evaluate;
mod model;

pub use build::{build_model, canonical_lift, compute_big_m, BigM};
pub use evaluate::{evaluate_assignment, Assignment, CategoryBreakdown, DeviationReport, EvalError};
pub(crate) use evaluate::{distance_unit_cost, exogenous_unit_cost};
pub use model::{
    check_solution_feasibility, Constraint, MipModel, Sense, VarKind, Variable, Violation,
    FEASIBILITY_TOL,
};
