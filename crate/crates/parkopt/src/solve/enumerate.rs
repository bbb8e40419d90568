//! Domain-level brute force: every affordable purchase, every assignment.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::instance::{AccessConfig, ObjectiveKind, ParkInstance};
use crate::milp::FEASIBILITY_TOL;
use crate::milp::{evaluate_assignment, Assignment};
use crate::solve::{candidate_better, Provenance, Solution, SolutionPoint, SolveLimits, SolveStatus};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("opened set is empty")]
    EmptyOpenedSet,
    #[error("opened flags cover {0} parks, instance has {1}")]
    Shape(usize, usize),
}

/// Precomputed per-plan pricing data. `base[k·L + l]` is the per-person
/// weighted cost of serving `l` from `k` that does not depend on loads
/// (distance deviation plus the park's exogenous deviations); overcrowding
/// is priced per plan from the loads.
struct Pricing {
    n_parks: usize,
    n_locs: usize,
    n_races: usize,
    base: Vec<f64>,
    /// q_r · t_lr, race-major.
    weighted_pop: Vec<f64>,
    /// Total persons per location.
    loc_pop: Vec<f64>,
    capacity: Vec<f64>,
    cap_rate: f64,
    capacitated: bool,
    min_max: bool,
}

impl Pricing {
    fn new(inst: &ParkInstance, cfg: &AccessConfig) -> Pricing {
        use crate::milp::{distance_unit_cost, exogenous_unit_cost};
        let n_parks = inst.parks.len();
        let n_locs = inst.locations.len();
        let n_races = inst.races.len();
        let mut base = vec![0.0; n_parks * n_locs];
        for (k, park) in inst.parks.iter().enumerate() {
            let (heat, tree) = exogenous_unit_cost(cfg, park);
            for l in 0..n_locs {
                let over = (inst.distance(k, l) - inst.max_distance).max(0.0);
                base[k * n_locs + l] = distance_unit_cost(cfg, over) + heat + tree;
            }
        }
        let mut weighted_pop = vec![0.0; n_races * n_locs];
        for (r, race) in inst.races.iter().enumerate() {
            let q = cfg.emphasis_for(race);
            for l in 0..n_locs {
                weighted_pop[r * n_locs + l] = q * inst.population(l, race) as f64;
            }
        }
        Pricing {
            n_parks,
            n_locs,
            n_races,
            base,
            weighted_pop,
            loc_pop: inst
                .locations
                .iter()
                .map(|l| l.total_population() as f64)
                .collect(),
            capacity: inst.parks.iter().map(|p| p.capacity as f64).collect(),
            cap_rate: cfg.normalizations.cap * cfg.weights.cap_plus,
            capacitated: cfg.capacitated,
            min_max: cfg.objective == ObjectiveKind::MinMax,
        }
    }

    /// Group totals for one plan, written into `alpha`.
    fn alphas_into(&self, park_of: &[usize], loads: &mut [f64], alpha: &mut [f64]) {
        alpha.fill(0.0);
        if self.capacitated {
            loads.fill(0.0);
            for (l, &k) in park_of.iter().enumerate() {
                loads[k] += self.loc_pop[l];
            }
        }
        for (l, &k) in park_of.iter().enumerate() {
            let mut unit = self.base[k * self.n_locs + l];
            if self.capacitated {
                unit += self.cap_rate * (loads[k] - self.capacity[k]).max(0.0);
            }
            if unit == 0.0 {
                continue;
            }
            for r in 0..self.n_races {
                alpha[r] += self.weighted_pop[r * self.n_locs + l] * unit;
            }
        }
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        if self.min_max {
            alpha.iter().copied().fold(0.0, f64::max)
        } else {
            alpha.iter().sum()
        }
    }
}

#[derive(Clone)]
struct Candidate {
    objective: f64,
    opened: Vec<usize>,
    park_of: Vec<usize>,
    alpha: Vec<f64>,
}

fn take_better(best: &mut Option<Candidate>, challenger: Candidate) {
    let wins = match best {
        None => true,
        Some(b) => candidate_better(
            (challenger.objective, &challenger.opened, &challenger.park_of),
            (b.objective, &b.opened, &b.park_of),
        ),
    };
    if wins {
        *best = Some(challenger);
    }
}

/// Cheapest-cost assignment when capacity plays no role: each location
/// independently takes the opened park with the smallest per-person cost
/// (distance deviation plus exogenous deviations), earliest park on ties.
/// This is optimal for both objectives because the per-person cost does
/// not depend on who else uses the park.
pub fn assign_uncapacitated(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    opened: &[bool],
) -> Result<Vec<usize>, SolveError> {
    if opened.len() != inst.parks.len() {
        return Err(SolveError::Shape(opened.len(), inst.parks.len()));
    }
    if !opened.iter().any(|&o| o) {
        return Err(SolveError::EmptyOpenedSet);
    }
    let pricing = Pricing::new(inst, cfg);
    Ok(argmin_assignment(&pricing, opened))
}

fn argmin_assignment(pricing: &Pricing, opened: &[bool]) -> Vec<usize> {
    (0..pricing.n_locs)
        .map(|l| {
            let mut best_k = usize::MAX;
            let mut best_cost = f64::INFINITY;
            for k in 0..pricing.n_parks {
                if opened[k] && pricing.base[k * pricing.n_locs + l] < best_cost {
                    best_cost = pricing.base[k * pricing.n_locs + l];
                    best_k = k;
                }
            }
            best_k
        })
        .collect()
}

/// Exhaustive exact solve in the problem domain.
///
/// Every candidate subset within budget is visited; uncapacitated mode
/// assigns by per-location argmin, capacitated mode enumerates all
/// assignments to opened parks. Subsets are partitioned into contiguous
/// ranges scanned in parallel; the per-range winners are merged in range
/// order under the canonical tie-break, so the result does not depend on
/// thread count.
pub fn solve_enumerate(inst: &ParkInstance, cfg: &AccessConfig, limits: &SolveLimits) -> Solution {
    let unsolved = |status: SolveStatus| Solution {
        status,
        provenance: Provenance::DomainBruteForce,
        best: None,
    };

    let candidates: Vec<usize> =
        (0..inst.parks.len()).filter(|&k| !inst.parks[k].existing).collect();
    let within_limits = if cfg.capacitated {
        candidates.len() <= limits.max_candidates_capacitated
            && inst.locations.len() <= limits.max_locations_capacitated
    } else {
        candidates.len() <= limits.max_candidates_uncapacitated
    };
    if !within_limits {
        return unsolved(SolveStatus::LimitExceeded);
    }

    let pricing = Pricing::new(inst, cfg);
    let existing: Vec<bool> = inst.parks.iter().map(|p| p.existing).collect();
    let deadline = Instant::now() + limits.time_limit;
    let stop = AtomicBool::new(false);

    let total: u64 = 1 << candidates.len();
    let chunks = (rayon::current_num_threads() as u64 * 4).clamp(1, total);
    let ranges: Vec<(u64, u64)> = (0..chunks)
        .map(|i| (total * i / chunks, total * (i + 1) / chunks))
        .collect();

    let bests: Vec<Option<Candidate>> = ranges
        .into_par_iter()
        .map(|(from, to)| {
            scan_subsets(inst, &pricing, &candidates, &existing, from, to, deadline, &stop)
        })
        .collect();

    if stop.load(Ordering::Relaxed) {
        return unsolved(SolveStatus::LimitExceeded);
    }
    let mut best = None;
    for candidate in bests.into_iter().flatten() {
        take_better(&mut best, candidate);
    }
    let Some(win) = best else {
        return unsolved(SolveStatus::Infeasible);
    };

    let opened_flags: Vec<bool> =
        (0..inst.parks.len()).map(|k| win.opened.contains(&k)).collect();
    let assignment = Assignment { opened: opened_flags, park_of: win.park_of.clone() };
    let point = SolutionPoint {
        opened: assignment.opened_ids(inst),
        assignment: assignment.pairs(inst),
        alpha: inst.races.iter().cloned().zip(win.alpha.iter().copied()).collect(),
        alpha_max: win.alpha.iter().copied().fold(0.0, f64::max),
        objective: win.objective,
    };
    debug_assert!(evaluate_assignment(inst, cfg, &assignment).is_ok());
    Solution {
        status: SolveStatus::Optimal,
        provenance: Provenance::DomainBruteForce,
        best: Some(point),
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_subsets(
    inst: &ParkInstance,
    pricing: &Pricing,
    candidates: &[usize],
    existing: &[bool],
    from: u64,
    to: u64,
    deadline: Instant,
    stop: &AtomicBool,
) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut opened_flags = vec![false; inst.parks.len()];
    let mut loads = vec![0.0; inst.parks.len()];
    let mut alpha = vec![0.0; inst.races.len()];

    for mask in from..to {
        if mask.trailing_zeros() >= 10 || mask == from {
            if stop.load(Ordering::Relaxed) {
                return best;
            }
            if Instant::now() > deadline {
                stop.store(true, Ordering::Relaxed);
                return best;
            }
        }

        let mut cost = 0.0;
        for (bit, &k) in candidates.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                cost += inst.parks[k].cost;
            }
        }
        if cost > inst.budget + FEASIBILITY_TOL {
            continue;
        }

        opened_flags.copy_from_slice(existing);
        for (bit, &k) in candidates.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                opened_flags[k] = true;
            }
        }
        let opened: Vec<usize> =
            (0..inst.parks.len()).filter(|&k| opened_flags[k]).collect();
        if opened.is_empty() {
            continue;
        }

        if pricing.capacitated {
            // Mixed-radix walk over every assignment of locations to
            // opened parks.
            let n_locs = inst.locations.len();
            let mut digits = vec![0usize; n_locs];
            let mut park_of: Vec<usize> = vec![opened[0]; n_locs];
            let mut count: u64 = 0;
            loop {
                count += 1;
                if count.trailing_zeros() >= 12 && Instant::now() > deadline {
                    stop.store(true, Ordering::Relaxed);
                    return best;
                }
                pricing.alphas_into(&park_of, &mut loads, &mut alpha);
                let challenger = Candidate {
                    objective: pricing.objective(&alpha),
                    opened: opened.clone(),
                    park_of: park_of.clone(),
                    alpha: alpha.clone(),
                };
                take_better(&mut best, challenger);

                let mut pos = n_locs;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < opened.len() {
                        park_of[pos] = opened[digits[pos]];
                        break;
                    }
                    digits[pos] = 0;
                    park_of[pos] = opened[0];
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX || n_locs == 0 {
                    break;
                }
            }
        } else {
            let park_of = argmin_assignment(pricing, &opened_flags);
            pricing.alphas_into(&park_of, &mut loads, &mut alpha);
            let challenger = Candidate {
                objective: pricing.objective(&alpha),
                opened: opened.clone(),
                park_of,
                alpha: alpha.clone(),
            };
            take_better(&mut best, challenger);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use crate::instance::{ParkInstance, ParkSite, ResidentLocation};
    use std::collections::BTreeMap;

    fn assert_close(actual: f64, expected: f64) {
        assert!(
            (actual - expected).abs() <= 1e-9 * expected.abs().max(1.0),
            "{actual} != {expected}"
        );
    }

    #[test]
    fn argmin_assignment_matches_hand_costs() {
        let (inst, cfg) = tiny1();
        let only_p1 = assign_uncapacitated(&inst, &cfg, &[true, false, false]).unwrap();
        assert_eq!(only_p1, vec![0, 0]);
        // l1: p1 costs 0 vs p2 at 4.25; l2: p1 costs 4.5 vs p2 at 2.0.
        let p1_p2 = assign_uncapacitated(&inst, &cfg, &[true, true, false]).unwrap();
        assert_eq!(p1_p2, vec![0, 1]);
    }

    #[test]
    fn assignment_ties_go_to_the_earlier_park() {
        let parks = vec![
            ParkSite {
                id: "e1".into(),
                existing: true,
                cost: 0.0,
                capacity: 100,
                heat_excess: 0.0,
                heat_deficit: 0.0,
                tree_excess: 0.0,
                tree_deficit: 0.0,
                coords: None,
            },
            ParkSite {
                id: "e2".into(),
                existing: true,
                cost: 0.0,
                capacity: 100,
                heat_excess: 0.0,
                heat_deficit: 0.0,
                tree_excess: 0.0,
                tree_deficit: 0.0,
                coords: None,
            },
        ];
        let locations = vec![ResidentLocation {
            id: "l1".into(),
            population: BTreeMap::from([("A".to_string(), 10u64)]),
            coords: None,
        }];
        let inst = ParkInstance::new(
            parks,
            locations,
            vec!["A".into()],
            vec![1.0, 1.0],
            0.0,
            0.5,
        )
        .unwrap();
        let cfg = crate::instance::AccessConfig::default();
        let park_of = assign_uncapacitated(&inst, &cfg, &[true, true]).unwrap();
        assert_eq!(park_of, vec![0]);
    }

    #[test]
    fn empty_opened_set_is_an_error() {
        let (inst, cfg) = tiny1();
        assert_eq!(
            assign_uncapacitated(&inst, &cfg, &[false, false, false]),
            Err(SolveError::EmptyOpenedSet)
        );
    }

    #[test]
    fn capacitated_minmax_optimum() {
        let (inst, cfg) = tiny1();
        let solution = solve_enumerate(&inst, &cfg, &SolveLimits::default());
        assert_eq!(solution.status, SolveStatus::Optimal);
        assert_eq!(solution.provenance, Provenance::DomainBruteForce);
        let point = solution.best.unwrap();
        assert_eq!(point.opened, vec!["p1", "p2"]);
        assert_eq!(point.assignment, vec![("l1".into(), "p1".into()), ("l2".into(), "p2".into())]);
        assert_close(point.objective, 440.0);
        assert_close(point.alpha[0].1, 44.0);
        assert_close(point.alpha[1].1, 440.0);
    }

    #[test]
    fn capacitated_minall_optimum() {
        let (inst, cfg) = tiny1();
        let cfg = cfg.with_objective(crate::instance::ObjectiveKind::MinAll);
        let solution = solve_enumerate(&inst, &cfg, &SolveLimits::default());
        assert_close(solution.objective().unwrap(), 484.0);
        assert_eq!(solution.best.unwrap().opened, vec!["p1", "p2"]);
    }

    #[test]
    fn uncapacitated_optima() {
        let (inst, cfg) = tiny1();
        let minmax = solve_enumerate(&inst, &cfg.with_capacitated(false), &SolveLimits::default());
        assert_close(minmax.objective().unwrap(), 400.0);

        let minall = solve_enumerate(
            &inst,
            &cfg.with_capacitated(false).with_objective(crate::instance::ObjectiveKind::MinAll),
            &SolveLimits::default(),
        );
        assert_close(minall.objective().unwrap(), 440.0);
        assert_eq!(minall.best.unwrap().opened, vec!["p1", "p2"]);
    }

    #[test]
    fn zero_budget_forces_existing_only() {
        let (inst, cfg) = tiny1();
        let solution = solve_enumerate(&inst.with_budget(0.0), &cfg, &SolveLimits::default());
        let point = solution.best.unwrap();
        assert_eq!(point.opened, vec!["p1"]);
        assert_eq!(point.assignment, vec![("l1".into(), "p1".into()), ("l2".into(), "p1".into())]);
        assert_close(point.objective, 2975.0 / 3.0);
    }

    #[test]
    fn equal_objectives_prefer_the_smaller_opened_set() {
        // Budget 150 also affords {p1,p2,p3}, which ties {p1,p2}; the
        // lexicographically smaller opened set must win.
        let (inst, cfg) = tiny1();
        let solution = solve_enumerate(&inst.with_budget(150.0), &cfg, &SolveLimits::default());
        let point = solution.best.unwrap();
        assert_eq!(point.opened, vec!["p1", "p2"]);
        assert_close(point.objective, 440.0);
    }

    #[test]
    fn candidate_limit_is_reported() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits { max_candidates_capacitated: 1, ..SolveLimits::default() };
        let solution = solve_enumerate(&inst, &cfg, &limits);
        assert_eq!(solution.status, SolveStatus::LimitExceeded);
        assert!(solution.best.is_none());
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let (inst, cfg) = tiny1();
        let limits = SolveLimits::default();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| solve_enumerate(&inst, &cfg, &limits));
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| solve_enumerate(&inst, &cfg, &limits));
        assert_eq!(single, multi);
    }
}
