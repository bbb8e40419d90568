//! Repeated-solve analyses: budget sweeps, planning horizons, emphasis
//! calibration, and access-threshold sensitivity.
//!
//! Each analysis re-solves the instance under a family of overrides and
//! pairs every solution with a [`DeviationReport`] recomputed from scratch —
//! reports never echo solver bookkeeping. Sweeps truncate gracefully when a
//! solve hits its limits (the series says where); the other analyses treat
//! a non-optimal solve as an error, because their outputs are meaningless
//! with holes.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{AccessConfig, ParkInstance};
use crate::milp::{evaluate_assignment, Assignment, DeviationReport, EvalError, FEASIBILITY_TOL};
use crate::solve::{solve_enumerate, Solution, SolutionPoint, SolveLimits, SolveStatus};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("solver did not reach optimality during {context} (status {status:?})")]
    Solver { context: String, status: SolveStatus },
    #[error("grid must be nonempty")]
    EmptyGrid,
    #[error("grid must be strictly increasing")]
    UnsortedGrid,
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("periods must be at least 1")]
    NoPeriods,
    #[error("access thresholds must be positive, got {0}")]
    NonpositiveThreshold(f64),
    #[error("solution carries no plan (status {0:?})")]
    Unsolved(SolveStatus),
    #[error("plan exceeds the budget: cost {cost} > budget {budget}")]
    OverBudget { cost: f64, budget: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One budget level of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub budget: f64,
    pub solution: Solution,
    pub report: DeviationReport,
}

/// Solutions across an increasing budget grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSeries {
    pub points: Vec<SweepPoint>,
    /// Budget at which solving stopped being possible within limits; the
    /// series holds the completed prefix.
    pub truncated_at: Option<f64>,
}

/// Which planning discipline [`plan_horizon`] models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlanMode {
    /// One solve with the whole budget up front.
    LongTerm,
    /// Per-period allocations; each period's purchases join the existing
    /// set before the next, and unspent money carries forward.
    Myopic,
}

/// What happened in one planning period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord {
    /// 1-based period index.
    pub period: usize,
    /// Allocation plus carryover available this period.
    pub budget_available: f64,
    /// Candidate parks first purchased this period.
    pub purchased: Vec<String>,
    /// All parks open at the end of the period.
    pub cumulative_opened: Vec<String>,
    pub report: DeviationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanTimeline {
    pub mode: PlanMode,
    pub records: Vec<PeriodRecord>,
    /// The last period's solution; its objective prices the end state.
    pub final_solution: Solution,
}

/// Outcome of sweeping one group's emphasis multiplier over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub group: String,
    pub grid: Vec<f64>,
    /// Opened set with every emphasis at 1.
    pub baseline_opened: Vec<String>,
    /// Opened set per grid value, in grid order.
    pub entries: Vec<(f64, Vec<String>)>,
    /// Smallest tested multiplier whose opened set differs from baseline.
    pub threshold: Option<f64>,
}

/// One access-distance override of a sensitivity run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub max_distance: f64,
    pub solution: Solution,
    pub report: DeviationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSeries {
    pub entries: Vec<ThresholdPoint>,
    /// Size of the opened-set intersection between consecutive entries;
    /// one element per adjacent pair.
    pub consecutive_overlap: Vec<usize>,
}

fn require_strictly_increasing(grid: &[f64]) -> Result<(), PolicyError> {
    if grid.is_empty() {
        return Err(PolicyError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PolicyError::UnsortedGrid);
    }
    Ok(())
}

fn solve_or_fail(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    limits: &SolveLimits,
    context: impl FnOnce() -> String,
) -> Result<Solution, PolicyError> {
    let solution = solve_enumerate(inst, cfg, limits);
    if solution.status == SolveStatus::Optimal {
        Ok(solution)
    } else {
        Err(PolicyError::Solver { context: context(), status: solution.status })
    }
}

/// Re-prices a solver plan from first principles, enforcing the budget.
fn report_for(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    point: &SolutionPoint,
) -> Result<DeviationReport, PolicyError> {
    let opened: Vec<&str> = point.opened.iter().map(String::as_str).collect();
    let pairs: Vec<(&str, &str)> =
        point.assignment.iter().map(|(l, k)| (l.as_str(), k.as_str())).collect();
    let assignment = Assignment::from_ids(inst, &opened, &pairs)?;
    let cost: f64 = inst
        .parks
        .iter()
        .zip(&assignment.opened)
        .filter(|(park, &open)| open && !park.existing)
        .map(|(park, _)| park.cost)
        .sum();
    if cost > inst.budget + FEASIBILITY_TOL {
        return Err(PolicyError::OverBudget { cost, budget: inst.budget });
    }
    Ok(evaluate_assignment(inst, cfg, &assignment)?)
}

/// Checks a solution against the instance and prices it.
pub fn summarize(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    solution: &Solution,
) -> Result<DeviationReport, PolicyError> {
    let point = solution.best.as_ref().ok_or(PolicyError::Unsolved(solution.status))?;
    report_for(inst, cfg, point)
}

/// One exact solve per budget, ascending. A solve that exceeds limits ends
/// the series early rather than failing the whole sweep.
pub fn budget_sweep(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    budgets: &[f64],
    limits: &SolveLimits,
) -> Result<SweepSeries, PolicyError> {
    require_strictly_increasing(budgets)?;
    let mut points = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let scoped = inst.with_budget(budget);
        let solution = solve_enumerate(&scoped, cfg, limits);
        if solution.status != SolveStatus::Optimal {
            return Ok(SweepSeries { points, truncated_at: Some(budget) });
        }
        let report = report_for(&scoped, cfg, solution.best.as_ref().expect("optimal"))?;
        points.push(SweepPoint { budget, solution, report });
    }
    Ok(SweepSeries { points, truncated_at: None })
}

/// Long-term vs. myopic purchase planning over a budget horizon.
pub fn plan_horizon(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    total_budget: f64,
    periods: usize,
    mode: PlanMode,
    limits: &SolveLimits,
) -> Result<PlanTimeline, PolicyError> {
    if periods == 0 {
        return Err(PolicyError::NoPeriods);
    }
    match mode {
        PlanMode::LongTerm => {
            let scoped = inst.with_budget(total_budget);
            let solution =
                solve_or_fail(&scoped, cfg, limits, || "long-term solve".to_string())?;
            let point = solution.best.as_ref().expect("optimal");
            let report = report_for(&scoped, cfg, point)?;
            let purchased = purchases(inst, &point.opened);
            let records = vec![PeriodRecord {
                period: 1,
                budget_available: total_budget,
                purchased,
                cumulative_opened: point.opened.clone(),
                report,
            }];
            Ok(PlanTimeline { mode, records, final_solution: solution })
        }
        PlanMode::Myopic => {
            let allocation = total_budget / periods as f64;
            let mut current = inst.clone();
            let mut carryover = 0.0;
            let mut records = Vec::with_capacity(periods);
            let mut final_solution = None;
            for period in 1..=periods {
                let available = allocation + carryover;
                let scoped = current.with_budget(available);
                let solution =
                    solve_or_fail(&scoped, cfg, limits, || format!("period {period}"))?;
                let point = solution.best.as_ref().expect("optimal");
                let report = report_for(&scoped, cfg, point)?;
                let purchased = purchases(&current, &point.opened);
                let spend: f64 = purchased
                    .iter()
                    .map(|id| current.parks[current.park_index(id).expect("solver id")].cost)
                    .sum();
                carryover = available - spend;
                for id in &purchased {
                    let k = current.park_index(id).expect("solver id");
                    current.parks[k].existing = true;
                    current.parks[k].cost = 0.0;
                }
                records.push(PeriodRecord {
                    period,
                    budget_available: available,
                    purchased,
                    cumulative_opened: point.opened.clone(),
                    report,
                });
                final_solution = Some(solution);
            }
            Ok(PlanTimeline {
                mode,
                records,
                final_solution: final_solution.expect("periods >= 1"),
            })
        }
    }
}

/// Opened parks that are not existing in `inst`, in canonical order.
fn purchases(inst: &ParkInstance, opened: &[String]) -> Vec<String> {
    opened
        .iter()
        .filter(|id| {
            inst.park_index(id).is_none_or(|k| !inst.parks[k].existing)
        })
        .cloned()
        .collect()
}

/// Sweeps one group's emphasis multiplier, looking for the smallest value
/// that changes which parks get opened relative to the all-ones baseline.
pub fn calibrate_emphasis(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    group: &str,
    grid: &[f64],
    limits: &SolveLimits,
) -> Result<CalibrationResult, PolicyError> {
    if !inst.races.iter().any(|r| r == group) {
        return Err(PolicyError::UnknownGroup(group.to_string()));
    }
    require_strictly_increasing(grid)?;

    let mut uniform = cfg.clone();
    uniform.emphasis = inst.races.iter().map(|r| (r.clone(), 1.0)).collect();
    let baseline = solve_or_fail(inst, &uniform, limits, || "baseline solve".to_string())?;
    let baseline_opened = baseline.best.as_ref().expect("optimal").opened.clone();

    let mut entries = Vec::with_capacity(grid.len());
    let mut threshold = None;
    for &weight in grid {
        let mut scoped = uniform.clone();
        scoped.emphasis.insert(group.to_string(), weight);
        let solution =
            solve_or_fail(inst, &scoped, limits, || format!("emphasis {weight}"))?;
        let opened = solution.best.as_ref().expect("optimal").opened.clone();
        if threshold.is_none() && opened != baseline_opened {
            threshold = Some(weight);
        }
        entries.push((weight, opened));
    }
    Ok(CalibrationResult {
        group: group.to_string(),
        grid: grid.to_vec(),
        baseline_opened,
        entries,
        threshold,
    })
}

/// One solve per access-distance override, reporting how much the opened
/// sets of consecutive thresholds agree.
pub fn threshold_sensitivity(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    m_values: &[f64],
    limits: &SolveLimits,
) -> Result<ThresholdSeries, PolicyError> {
    if m_values.is_empty() {
        return Err(PolicyError::EmptyGrid);
    }
    if let Some(&bad) = m_values.iter().find(|&&m| !(m > 0.0)) {
        return Err(PolicyError::NonpositiveThreshold(bad));
    }
    let mut entries = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let scoped = inst.with_max_distance(m);
        let solution =
            solve_or_fail(&scoped, cfg, limits, || format!("threshold {m}"))?;
        let report = report_for(&scoped, cfg, solution.best.as_ref().expect("optimal"))?;
        entries.push(ThresholdPoint { max_distance: m, solution, report });
    }
    let consecutive_overlap = entries
        .windows(2)
        .map(|pair| {
            let a: BTreeSet<&String> =
                pair[0].solution.best.as_ref().expect("optimal").opened.iter().collect();
            pair[1]
                .solution
                .best
                .as_ref()
                .expect("optimal")
                .opened
                .iter()
                .filter(|id| a.contains(id))
                .count()
        })
        .collect();
    Ok(ThresholdSeries { entries, consecutive_overlap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use crate::solve::Provenance;

    fn assert_close(actual: f64, expected: f64) {
        assert!(
            (actual - expected).abs() <= 1e-9 * expected.abs().max(1.0),
            "{actual} != {expected}"
        );
    }

    #[test]
    fn sweep_matches_per_budget_optima() {
        let (inst, cfg) = tiny1();
        let series =
            budget_sweep(&inst, &cfg, &[0.0, 60.0, 100.0, 150.0], &SolveLimits::default())
                .unwrap();
        assert!(series.truncated_at.is_none());
        let objectives: Vec<f64> =
            series.points.iter().map(|p| p.solution.objective().unwrap()).collect();
        assert_close(objectives[0], 2975.0 / 3.0);
        assert_close(objectives[1], 440.0);
        assert_close(objectives[2], 440.0);
        assert_close(objectives[3], 440.0);
        assert!(objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert_eq!(series.points[0].solution.best.as_ref().unwrap().opened, vec!["p1"]);

        // Reports are recomputed and must agree with the solver's alphas.
        for point in &series.points {
            let alpha = &point.solution.best.as_ref().unwrap().alpha;
            for ((race, solver_a), (race2, report_a)) in alpha.iter().zip(&point.report.alpha) {
                assert_eq!(race, race2);
                assert!((solver_a - report_a).abs() <= 1e-6 * solver_a.abs().max(1.0));
            }
            let by_cat = point.report.by_category;
            assert!((by_cat.total() - point.report.total).abs() <= 1e-6);
        }
    }

    #[test]
    fn sweep_grids_must_increase() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits::default();
        assert!(matches!(
            budget_sweep(&inst, &cfg, &[], &limits),
            Err(PolicyError::EmptyGrid)
        ));
        assert!(matches!(
            budget_sweep(&inst, &cfg, &[100.0, 50.0], &limits),
            Err(PolicyError::UnsortedGrid)
        ));
        assert!(matches!(
            budget_sweep(&inst, &cfg, &[50.0, 50.0], &limits),
            Err(PolicyError::UnsortedGrid)
        ));
    }

    #[test]
    fn sweep_truncates_when_limits_bite() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits { max_candidates_capacitated: 0, ..SolveLimits::default() };
        let series = budget_sweep(&inst, &cfg, &[0.0, 60.0], &limits).unwrap();
        assert!(series.points.is_empty());
        assert_eq!(series.truncated_at, Some(0.0));
    }

    #[test]
    fn myopic_carryover_buys_late() {
        let (inst, cfg) = tiny1();
        let timeline =
            plan_horizon(&inst, &cfg, 100.0, 2, PlanMode::Myopic, &SolveLimits::default())
                .unwrap();
        assert_eq!(timeline.records.len(), 2);

        // Period 1: 50 available, nothing affordable (cheapest candidate 60).
        let first = &timeline.records[0];
        assert_close(first.budget_available, 50.0);
        assert!(first.purchased.is_empty());
        assert_eq!(first.cumulative_opened, vec!["p1"]);
        assert_close(first.report.alpha_max, 2975.0 / 3.0);

        // Period 2: carryover lifts the allocation to 100 and p2 is bought.
        let second = &timeline.records[1];
        assert_close(second.budget_available, 100.0);
        assert_eq!(second.purchased, vec!["p2"]);
        assert_eq!(second.cumulative_opened, vec!["p1", "p2"]);
        assert_close(timeline.final_solution.objective().unwrap(), 440.0);
    }

    #[test]
    fn long_term_is_a_single_funded_solve() {
        let (inst, cfg) = tiny1();
        let timeline =
            plan_horizon(&inst, &cfg, 100.0, 7, PlanMode::LongTerm, &SolveLimits::default())
                .unwrap();
        assert_eq!(timeline.records.len(), 1);
        assert_close(timeline.records[0].budget_available, 100.0);
        assert_eq!(timeline.records[0].purchased, vec!["p2"]);
        assert_close(timeline.final_solution.objective().unwrap(), 440.0);
        assert_eq!(timeline.final_solution.provenance, Provenance::DomainBruteForce);
    }

    #[test]
    fn one_period_myopic_equals_long_term() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits::default();
        let myopic = plan_horizon(&inst, &cfg, 100.0, 1, PlanMode::Myopic, &limits).unwrap();
        let long = plan_horizon(&inst, &cfg, 100.0, 1, PlanMode::LongTerm, &limits).unwrap();
        assert_eq!(myopic.records.len(), 1);
        assert_eq!(myopic.records[0].purchased, long.records[0].purchased);
        assert_eq!(myopic.records[0].cumulative_opened, long.records[0].cumulative_opened);
        assert_eq!(
            myopic.final_solution.objective().unwrap(),
            long.final_solution.objective().unwrap()
        );
    }

    #[test]
    fn long_term_dominates_myopic() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits::default();
        for periods in [2usize, 3] {
            let myopic =
                plan_horizon(&inst, &cfg, 100.0, periods, PlanMode::Myopic, &limits).unwrap();
            let long =
                plan_horizon(&inst, &cfg, 100.0, periods, PlanMode::LongTerm, &limits).unwrap();
            assert!(
                long.final_solution.objective().unwrap()
                    <= myopic.final_solution.objective().unwrap() + 1e-9
            );
        }
    }

    #[test]
    fn zero_periods_is_rejected() {
        let (inst, cfg) = tiny1();
        assert!(matches!(
            plan_horizon(&inst, &cfg, 100.0, 0, PlanMode::Myopic, &SolveLimits::default()),
            Err(PolicyError::NoPeriods)
        ));
    }

    #[test]
    fn emphasis_on_the_dominant_group_never_moves_the_plan() {
        let (inst, cfg) = tiny1();
        let grid: Vec<f64> = (0..=10).map(|i| (i * 5) as f64).collect();
        let result =
            calibrate_emphasis(&inst, &cfg, "B", &grid, &SolveLimits::default()).unwrap();
        assert_eq!(result.baseline_opened, vec!["p1", "p2"]);
        assert_eq!(result.entries.len(), 11);
        assert!(result.entries.iter().all(|(_, opened)| opened == &result.baseline_opened));
        assert_eq!(result.threshold, None);
    }

    #[test]
    fn one_point_baseline_grid_finds_no_threshold() {
        let (inst, cfg) = tiny1();
        let result =
            calibrate_emphasis(&inst, &cfg, "A", &[1.0], &SolveLimits::default()).unwrap();
        assert_eq!(result.threshold, None);
    }

    #[test]
    fn calibration_validates_its_inputs() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits::default();
        assert!(matches!(
            calibrate_emphasis(&inst, &cfg, "Z", &[1.0], &limits),
            Err(PolicyError::UnknownGroup(_))
        ));
        assert!(matches!(
            calibrate_emphasis(&inst, &cfg, "A", &[5.0, 0.0], &limits),
            Err(PolicyError::UnsortedGrid)
        ));
    }

    #[test]
    fn thresholds_reshape_the_opened_set() {
        let (inst, cfg) = tiny1();
        let series =
            threshold_sensitivity(&inst, &cfg, &[0.5, 1.0, 1.5], &SolveLimits::default())
                .unwrap();
        let opened: Vec<&Vec<String>> = series
            .entries
            .iter()
            .map(|e| &e.solution.best.as_ref().unwrap().opened)
            .collect();
        assert_eq!(opened[0], &vec!["p1".to_string(), "p2".to_string()]);
        assert_eq!(opened[1], &vec!["p1".to_string(), "p3".to_string()]);
        assert_eq!(opened[2], &vec!["p1".to_string()]);
        assert_close(series.entries[0].solution.objective().unwrap(), 440.0);
        assert_close(series.entries[1].solution.objective().unwrap(), 400.0);
        assert_close(series.entries[2].solution.objective().unwrap(), 275.0 / 3.0);
        assert_eq!(series.consecutive_overlap, vec![1, 1]);
    }

    #[test]
    fn generous_threshold_zeroes_distance_deviations() {
        let (inst, cfg) = tiny1();
        let series =
            threshold_sensitivity(&inst, &cfg, &[10.0], &SolveLimits::default()).unwrap();
        assert_eq!(series.entries[0].report.distance_dev_max, 0.0);
        assert!(series.consecutive_overlap.is_empty());
    }

    #[test]
    fn thresholds_must_be_positive() {
        let (inst, cfg) = tiny1();
        assert!(matches!(
            threshold_sensitivity(&inst, &cfg, &[0.5, -1.0], &SolveLimits::default()),
            Err(PolicyError::NonpositiveThreshold(_))
        ));
    }

    #[test]
    fn summarize_reprices_a_solution() {
        let (inst, cfg) = tiny1();
        let solution = solve_enumerate(&inst, &cfg, &SolveLimits::default());
        let report = summarize(&inst, &cfg, &solution).unwrap();
        assert!(!report.zero_total);
        assert_close(report.total, 484.0);
        assert_close(report.alpha_max, 440.0);
    }

    #[test]
    fn summarize_rejects_unsolved_and_overbudget_plans() {
        let (inst, cfg) = tiny1();
        let unsolved = Solution {
            status: SolveStatus::LimitExceeded,
            provenance: Provenance::DomainBruteForce,
            best: None,
        };
        assert!(matches!(
            summarize(&inst, &cfg, &unsolved),
            Err(PolicyError::Unsolved(SolveStatus::LimitExceeded))
        ));

        let over = Solution {
            status: SolveStatus::Optimal,
            provenance: Provenance::External,
            best: Some(SolutionPoint {
                opened: vec!["p1".into(), "p2".into(), "p3".into()],
                assignment: vec![("l1".into(), "p1".into()), ("l2".into(), "p2".into())],
                alpha: vec![("A".into(), 44.0), ("B".into(), 440.0)],
                alpha_max: 440.0,
                objective: 440.0,
            }),
        };
        assert!(matches!(
            summarize(&inst, &cfg, &over),
            Err(PolicyError::OverBudget { .. })
        ));
    }
}
