//! Exhaustive search over the IR itself.
//!
//! Binaries are fixed one at a time in declaration order; after each fix,
//! interval bounds are propagated through every constraint (feasibility-based
//! bound tightening) until a fixpoint. Branches whose bounds cross die
//! immediately, and once all binaries are fixed the equality rows of the
//! model pin every continuous variable, so each surviving leaf *is* a
//! feasible point. No objective-based pruning happens: the walk visits every
//! feasible point, which is exactly what the exactness checks need.

use std::collections::VecDeque;
use std::time::Instant;

use crate::milp::{check_solution_feasibility, MipModel, Sense, VarKind, FEASIBILITY_TOL};
use crate::solve::{
    candidate_better, ModelShape, Provenance, Solution, SolveLimits, SolveStatus,
};

/// How an enumeration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationOutcome {
    /// Every feasible point was visited.
    Complete,
    /// The binary-count or time limit stopped the walk early; some feasible
    /// points may not have been visited.
    LimitExceeded,
}

/// Minimum improvement for a propagated bound to count as progress.
const IMPROVE_EPS: f64 = 1e-9;
/// Distance from an integer below which a binary bound snaps.
const INT_SNAP: f64 = 1e-6;
/// Propagation budget per node; reaching it stops tightening (which is
/// sound — bounds merely stay looser) rather than looping forever.
const WORK_CAP: usize = 20_000;

struct Propagator<'m> {
    model: &'m MipModel,
    /// Constraint indices touching each variable.
    by_var: Vec<Vec<usize>>,
}

/// Sum of interval endpoints where some addends may be infinite: the finite
/// part plus a count of infinite contributions.
#[derive(Clone, Copy)]
struct Activity {
    finite: f64,
    infs: usize,
}

impl<'m> Propagator<'m> {
    fn new(model: &'m MipModel) -> Self {
        let mut by_var = vec![Vec::new(); model.variables().len()];
        for (ci, c) in model.constraints().iter().enumerate() {
            for &(v, _) in &c.terms {
                by_var[v].push(ci);
            }
        }
        Propagator { model, by_var }
    }

    /// Tightens `lo`/`hi` to a fixpoint. Returns `false` when some
    /// constraint or bound pair is proven unsatisfiable.
    fn propagate(&self, lo: &mut [f64], hi: &mut [f64]) -> bool {
        let constraints = self.model.constraints();
        let mut queued = vec![true; constraints.len()];
        let mut queue: VecDeque<usize> = (0..constraints.len()).collect();
        let mut popped = 0usize;

        while let Some(ci) = queue.pop_front() {
            queued[ci] = false;
            popped += 1;
            if popped > WORK_CAP {
                return true;
            }
            let c = &constraints[ci];

            let mut min = Activity { finite: 0.0, infs: 0 };
            let mut max = Activity { finite: 0.0, infs: 0 };
            for &(v, a) in &c.terms {
                let (term_lo, term_hi) =
                    if a > 0.0 { (a * lo[v], a * hi[v]) } else { (a * hi[v], a * lo[v]) };
                if term_lo == f64::NEG_INFINITY {
                    min.infs += 1;
                } else {
                    min.finite += term_lo;
                }
                if term_hi == f64::INFINITY {
                    max.infs += 1;
                } else {
                    max.finite += term_hi;
                }
            }

            let enforce_le = c.sense != Sense::Ge;
            let enforce_ge = c.sense != Sense::Le;
            if enforce_le && min.infs == 0 && min.finite > c.rhs + FEASIBILITY_TOL {
                return false;
            }
            if enforce_ge && max.infs == 0 && max.finite < c.rhs - FEASIBILITY_TOL {
                return false;
            }

            for &(v, a) in &c.terms {
                let (term_lo, term_hi) =
                    if a > 0.0 { (a * lo[v], a * hi[v]) } else { (a * hi[v], a * lo[v]) };

                if enforce_le {
                    // a·x_v ≤ rhs − min-activity of the other terms.
                    let rest_infs = min.infs - usize::from(term_lo == f64::NEG_INFINITY);
                    if rest_infs == 0 {
                        let rest =
                            if term_lo == f64::NEG_INFINITY { min.finite } else { min.finite - term_lo };
                        let bound = (c.rhs - rest) / a;
                        let changed = if a > 0.0 {
                            self.tighten_upper(v, bound, lo, hi)
                        } else {
                            self.tighten_lower(v, bound, lo, hi)
                        };
                        match changed {
                            Tighten::Infeasible => return false,
                            Tighten::Changed => requeue(&self.by_var[v], &mut queue, &mut queued),
                            Tighten::Unchanged => {}
                        }
                    }
                }
                if enforce_ge {
                    // a·x_v ≥ rhs − max-activity of the other terms.
                    let rest_infs = max.infs - usize::from(term_hi == f64::INFINITY);
                    if rest_infs == 0 {
                        let rest =
                            if term_hi == f64::INFINITY { max.finite } else { max.finite - term_hi };
                        let bound = (c.rhs - rest) / a;
                        let changed = if a > 0.0 {
                            self.tighten_lower(v, bound, lo, hi)
                        } else {
                            self.tighten_upper(v, bound, lo, hi)
                        };
                        match changed {
                            Tighten::Infeasible => return false,
                            Tighten::Changed => requeue(&self.by_var[v], &mut queue, &mut queued),
                            Tighten::Unchanged => {}
                        }
                    }
                }
            }
        }
        true
    }

    fn tighten_upper(&self, v: usize, mut bound: f64, lo: &mut [f64], hi: &mut [f64]) -> Tighten {
        if self.model.variables()[v].kind == VarKind::Binary {
            bound = if bound < 1.0 - INT_SNAP { 0.0 } else { 1.0 };
        }
        if bound >= hi[v] - IMPROVE_EPS {
            return Tighten::Unchanged;
        }
        hi[v] = bound;
        if lo[v] > hi[v] + FEASIBILITY_TOL {
            Tighten::Infeasible
        } else {
            Tighten::Changed
        }
    }

    fn tighten_lower(&self, v: usize, mut bound: f64, lo: &mut [f64], hi: &mut [f64]) -> Tighten {
        if self.model.variables()[v].kind == VarKind::Binary {
            bound = if bound > INT_SNAP { 1.0 } else { 0.0 };
        }
        if bound <= lo[v] + IMPROVE_EPS {
            return Tighten::Unchanged;
        }
        lo[v] = bound;
        if lo[v] > hi[v] + FEASIBILITY_TOL {
            Tighten::Infeasible
        } else {
            Tighten::Changed
        }
    }
}

enum Tighten {
    Unchanged,
    Changed,
    Infeasible,
}

fn requeue(constraints: &[usize], queue: &mut VecDeque<usize>, queued: &mut [bool]) {
    for &ci in constraints {
        if !queued[ci] {
            queued[ci] = true;
            queue.push_back(ci);
        }
    }
}

struct TimedOut;

/// Calls `visit` on every feasible point of `model`, in a fixed
/// (thread-independent) order.
///
/// Points are generated by fixing binaries in declaration order; the
/// continuous coordinates of each visited point are the propagated bounds,
/// and every point is re-checked against the raw model before the callback
/// fires. For models whose continuous variables are not pinned by equalities
/// once binaries are fixed, one completion per binary combination is
/// visited (the bound-minimal one).
pub fn for_each_feasible_point<F>(
    model: &MipModel,
    limits: &SolveLimits,
    mut visit: F,
) -> EnumerationOutcome
where
    F: FnMut(&[f64]),
{
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    if binaries.len() > limits.max_binaries {
        return EnumerationOutcome::LimitExceeded;
    }
    let prop = Propagator::new(model);
    let deadline = Instant::now() + limits.time_limit;
    let lo: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let mut nodes = 0u64;
    match walk(model, &prop, &binaries, deadline, &mut nodes, lo, hi, &mut visit) {
        Ok(()) => EnumerationOutcome::Complete,
        Err(TimedOut) => EnumerationOutcome::LimitExceeded,
    }
}

#[allow(clippy::too_many_arguments)]
fn walk<F>(
    model: &MipModel,
    prop: &Propagator<'_>,
    binaries: &[usize],
    deadline: Instant,
    nodes: &mut u64,
    mut lo: Vec<f64>,
    mut hi: Vec<f64>,
    visit: &mut F,
) -> Result<(), TimedOut>
where
    F: FnMut(&[f64]),
{
    *nodes += 1;
    if Instant::now() > deadline {
        return Err(TimedOut);
    }
    if !prop.propagate(&mut lo, &mut hi) {
        return Ok(());
    }
    let next = binaries.iter().copied().find(|&b| hi[b] - lo[b] > 0.5);
    let Some(branch_var) = next else {
        let point: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if l.is_finite() { l } else if h.is_finite() { h } else { 0.0 })
            .collect();
        if check_solution_feasibility(model, &point).is_empty() {
            visit(&point);
        }
        return Ok(());
    };
    for value in [0.0, 1.0] {
        let mut next_lo = lo.clone();
        let mut next_hi = hi.clone();
        next_lo[branch_var] = value;
        next_hi[branch_var] = value;
        walk(model, prop, binaries, deadline, nodes, next_lo, next_hi, visit)?;
    }
    Ok(())
}

/// Exact solve by exhaustive feasible-point enumeration on the IR.
///
/// Independent of [`solve_enumerate`](crate::solve::solve_enumerate): that
/// one never sees the linear model, this one never sees the instance. The
/// winner is chosen with the same canonical tie-break, so on a model built
/// by [`build_model`](crate::milp::build_model) the two back-ends must
/// return the same plan.
pub fn solve_model_enumerate(model: &MipModel, limits: &SolveLimits) -> Solution {
    let shape = ModelShape::of(model);
    let mut best: Option<(f64, Vec<usize>, Vec<usize>, Vec<f64>)> = None;
    let outcome = for_each_feasible_point(model, limits, |point| {
        let objective = model.objective_value(point);
        let opened = shape.opened_key(point);
        let assigned = shape.assignment_key(point);
        let wins = match &best {
            None => true,
            Some((b_obj, b_opened, b_assigned, _)) => {
                candidate_better((objective, &opened, &assigned), (*b_obj, b_opened, b_assigned))
            }
        };
        if wins {
            best = Some((objective, opened, assigned, point.to_vec()));
        }
    });
    let unsolved = |status: SolveStatus| Solution {
        status,
        provenance: Provenance::IrEnumeration,
        best: None,
    };
    match outcome {
        EnumerationOutcome::LimitExceeded => unsolved(SolveStatus::LimitExceeded),
        EnumerationOutcome::Complete => match best {
            None => unsolved(SolveStatus::Infeasible),
            Some((_, _, _, point)) => Solution {
                status: SolveStatus::Optimal,
                provenance: Provenance::IrEnumeration,
                best: Some(shape.solution_point(model, &point)),
            },
        },
    }
}
