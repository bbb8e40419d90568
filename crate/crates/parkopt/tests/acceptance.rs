//! Acceptance gate: the end-to-end guarantees the toolkit ships under.
//!
//! Each test prints a single PASS line on success (the contingent
//! case-study check prints SKIPPED when its dataset is not supplied).

use std::time::Instant;

use parkopt::fixtures::{budget_grid, random_tiny, tiny1};
use parkopt::instance::{load_instance, AccessConfig, ObjectiveKind, ParkInstance};
use parkopt::milp::{
    build_model, canonical_lift, check_solution_feasibility, evaluate_assignment, Assignment,
    MipModel,
};
use parkopt::policy::{budget_sweep, plan_horizon, PlanMode};
use parkopt::solve::{
    for_each_feasible_point, parse_mps_str, solve_enumerate, solve_model_enumerate,
    solve_via_external, mps_string, EnumerationOutcome, Solution, SolveLimits, SolveStatus,
};

const CONFIGS: [(ObjectiveKind, bool); 4] = [
    (ObjectiveKind::MinMax, true),
    (ObjectiveKind::MinAll, true),
    (ObjectiveKind::MinMax, false),
    (ObjectiveKind::MinAll, false),
];

fn configured(base: &AccessConfig, objective: ObjectiveKind, capacitated: bool) -> AccessConfig {
    base.with_objective(objective).with_capacitated(capacitated)
}

fn optimal(solution: &Solution, context: &str) -> f64 {
    assert_eq!(solution.status, SolveStatus::Optimal, "{context}: {:?}", solution.status);
    solution.objective().expect("optimal solutions carry a plan")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// The two exact back-ends — one working on instances, one on the linear
/// model — agree on the optimal objective across a randomized corpus and
/// all four objective/capacity configurations.
#[test]
fn acceptance_01_cross_oracle_agreement() {
    let started = Instant::now();
    let limits = SolveLimits::default();
    let mut checked = 0usize;
    for seed in 0..200u64 {
        let (inst, base) = random_tiny(seed);
        for (objective, capacitated) in CONFIGS {
            let cfg = configured(&base, objective, capacitated);
            let domain = solve_enumerate(&inst, &cfg, &limits);
            let model = build_model(&inst, &cfg);
            let ir = solve_model_enumerate(&model, &limits);
            let d = optimal(&domain, &format!("seed {seed} domain {objective:?}/{capacitated}"));
            let m = optimal(&ir, &format!("seed {seed} IR {objective:?}/{capacitated}"));
            assert!(
                rel_close(d, m, 1e-6),
                "seed {seed} {objective:?}/cap={capacitated}: domain {d} vs IR {m}"
            );
            checked += 1;
        }
    }
    println!(
        "PASS cross-oracle agreement: {checked} solves matched across 200 instances x 4 configurations in {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

/// At every feasible integer point of every model in the corpus, the
/// endogenous slack variables equal their closed forms: distance slack
/// max(0, dist - m), overcrowding slack max(0, load - capacity), and the
/// product variable equals slack x assignment.
#[test]
fn acceptance_02_linearization_exactness() {
    let started = Instant::now();
    let limits = SolveLimits::default();
    let mut points = 0u64;
    for seed in 0..200u64 {
        let (inst, base) = random_tiny(seed);
        for (objective, capacitated) in CONFIGS {
            let cfg = configured(&base, objective, capacitated);
            let model = build_model(&inst, &cfg);
            let idx = |name: String| model.var_index(&name).expect("canonical variable");
            let x_idx: Vec<Vec<usize>> = inst
                .parks
                .iter()
                .map(|p| {
                    inst.locations
                        .iter()
                        .map(|l| idx(format!("x({},{})", p.id, l.id)))
                        .collect()
                })
                .collect();
            let dplus_idx: Vec<usize> =
                inst.locations.iter().map(|l| idx(format!("dplus({})", l.id))).collect();
            let cap_idx: Option<(Vec<usize>, Vec<Vec<usize>>)> = capacitated.then(|| {
                (
                    inst.parks.iter().map(|p| idx(format!("aplus({})", p.id))).collect(),
                    inst.parks
                        .iter()
                        .map(|p| {
                            inst.locations
                                .iter()
                                .map(|l| idx(format!("pi_cap({},{})", p.id, l.id)))
                                .collect()
                        })
                        .collect(),
                )
            });
            let pop: Vec<f64> =
                inst.locations.iter().map(|l| l.total_population() as f64).collect();

            let outcome = for_each_feasible_point(&model, &limits, |point| {
                points += 1;
                for l in 0..inst.locations.len() {
                    let dist: f64 = (0..inst.parks.len())
                        .map(|k| point[x_idx[k][l]] * inst.distance(k, l))
                        .sum();
                    let expected = (dist - inst.max_distance).max(0.0);
                    let actual = point[dplus_idx[l]];
                    assert!(
                        (actual - expected).abs() <= 1e-6,
                        "seed {seed} {objective:?}/cap={capacitated} location {l}: \
                         distance slack {actual} vs {expected}"
                    );
                }
                if let Some((aplus_idx, pi_idx)) = &cap_idx {
                    for k in 0..inst.parks.len() {
                        let load: f64 =
                            (0..inst.locations.len()).map(|l| point[x_idx[k][l]] * pop[l]).sum();
                        let expected = (load - inst.parks[k].capacity as f64).max(0.0);
                        let actual = point[aplus_idx[k]];
                        assert!(
                            (actual - expected).abs() <= 1e-6,
                            "seed {seed} park {k}: overcrowding slack {actual} vs {expected}"
                        );
                        for l in 0..inst.locations.len() {
                            let product = point[aplus_idx[k]] * point[x_idx[k][l]];
                            let actual = point[pi_idx[k][l]];
                            assert!(
                                (actual - product).abs() <= 1e-6,
                                "seed {seed} park {k} location {l}: product var {actual} vs {product}"
                            );
                        }
                    }
                }
            });
            assert_eq!(outcome, EnumerationOutcome::Complete, "seed {seed}");
        }
    }
    assert!(points > 0);
    println!(
        "PASS linearization exactness: slack identities held at {points} feasible points in {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

/// Every plan of the tiny fixture lifts to an IR point that is feasible
/// exactly when the plan fits the budget, and the IR objective equals the
/// evaluator's aggregate.
#[test]
fn acceptance_03_evaluator_ir_consistency() {
    let (inst, base) = tiny1();
    let candidates = ["p2", "p3"];
    let mut lifts = 0usize;
    for (objective, capacitated) in CONFIGS {
        let cfg = configured(&base, objective, capacitated);
        let model = build_model(&inst, &cfg);
        for subset_mask in 0..(1u32 << candidates.len()) {
            let mut opened = vec!["p1"];
            for (bit, id) in candidates.iter().enumerate() {
                if subset_mask >> bit & 1 == 1 {
                    opened.push(id);
                }
            }
            let cost: f64 = opened
                .iter()
                .filter_map(|id| inst.park_index(id))
                .filter(|&k| !inst.parks[k].existing)
                .map(|k| inst.parks[k].cost)
                .sum();
            let affordable = cost <= inst.budget;

            // Every assignment of the two locations to opened parks.
            for a in 0..opened.len() {
                for b in 0..opened.len() {
                    let pairs = [("l1", opened[a]), ("l2", opened[b])];
                    let assignment = Assignment::from_ids(&inst, &opened, &pairs).unwrap();
                    let report = evaluate_assignment(&inst, &cfg, &assignment).unwrap();
                    let point = canonical_lift(&inst, &cfg, &model, &assignment).unwrap();
                    let violations = check_solution_feasibility(&model, &point);
                    if affordable {
                        assert!(
                            violations.is_empty(),
                            "{objective:?}/cap={capacitated} {opened:?} {pairs:?}: {violations:?}"
                        );
                        let aggregate = match objective {
                            ObjectiveKind::MinMax => report.alpha_max,
                            ObjectiveKind::MinAll => report.total,
                        };
                        let model_objective = model.objective_value(&point);
                        assert!(
                            rel_close(model_objective, aggregate, 1e-6),
                            "{objective:?}/cap={capacitated} {opened:?} {pairs:?}: \
                             IR {model_objective} vs evaluator {aggregate}"
                        );
                    } else {
                        assert!(!violations.is_empty());
                        assert!(
                            violations.iter().all(|v| v.subject == "budget"),
                            "over-budget plan should only violate the budget row: {violations:?}"
                        );
                    }
                    lifts += 1;
                }
            }
        }
    }
    println!("PASS evaluator/IR consistency: {lifts} lifted plans checked on the tiny fixture");
}

/// More money never hurts: optimal objectives are nonincreasing along
/// ascending budget grids.
#[test]
fn acceptance_04_budget_monotonicity() {
    let limits = SolveLimits::default();
    let mut grids = 0usize;
    for seed in 300..350u64 {
        let (inst, cfg) = random_tiny(seed);
        let series = budget_sweep(&inst, &cfg, &budget_grid(&inst, 5), &limits).unwrap();
        assert!(series.truncated_at.is_none(), "seed {seed} truncated");
        let objectives: Vec<f64> =
            series.points.iter().map(|p| p.solution.objective().unwrap()).collect();
        for pair in objectives.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0),
                "seed {seed}: objective rose from {} to {}",
                pair[0],
                pair[1]
            );
        }
        grids += 1;
    }
    println!("PASS budget monotonicity: nonincreasing objectives on {grids} five-point grids");
}

/// Relaxing capacity can only help, and each objective is best at its own
/// aggregate: the sum-minimizer has the smallest sum, the max-minimizer
/// the smallest max.
#[test]
fn acceptance_05_variant_and_objective_orderings() {
    let limits = SolveLimits::default();
    let tol = 1e-9;
    for seed in 0..200u64 {
        let (inst, base) = random_tiny(seed);
        let solve = |objective, capacitated| {
            let cfg = configured(&base, objective, capacitated);
            let s = solve_enumerate(&inst, &cfg, &limits);
            assert_eq!(s.status, SolveStatus::Optimal, "seed {seed}");
            s.best.unwrap()
        };
        for objective in [ObjectiveKind::MinMax, ObjectiveKind::MinAll] {
            let uncap = solve(objective, false);
            let cap = solve(objective, true);
            assert!(
                uncap.objective <= cap.objective + tol * cap.objective.abs().max(1.0),
                "seed {seed} {objective:?}: uncapacitated {} > capacitated {}",
                uncap.objective,
                cap.objective
            );
        }
        for capacitated in [false, true] {
            let min_max = solve(ObjectiveKind::MinMax, capacitated);
            let min_all = solve(ObjectiveKind::MinAll, capacitated);
            let sum = |alpha: &[(String, f64)]| alpha.iter().map(|(_, a)| a).sum::<f64>();
            let max = |alpha: &[(String, f64)]| {
                alpha.iter().map(|(_, a)| *a).fold(0.0f64, f64::max)
            };
            let (sum_all, sum_max) = (sum(&min_all.alpha), sum(&min_max.alpha));
            assert!(
                sum_all <= sum_max + tol * sum_max.abs().max(1.0),
                "seed {seed} cap={capacitated}: sum-minimizer sums to {sum_all} > {sum_max}"
            );
            let (max_max, max_all) = (max(&min_max.alpha), max(&min_all.alpha));
            assert!(
                max_max <= max_all + tol * max_all.abs().max(1.0),
                "seed {seed} cap={capacitated}: max-minimizer peaks at {max_max} > {max_all}"
            );
        }
    }
    println!("PASS variant and objective orderings: both orderings held on all 200 instances");
}

/// Planning with the whole budget up front is never worse than spending it
/// period by period.
#[test]
fn acceptance_06_horizon_dominance() {
    let limits = SolveLimits::default();
    let mut comparisons = 0usize;
    for seed in 400..430u64 {
        let (inst, cfg) = random_tiny(seed);
        for periods in [2usize, 3] {
            let long = plan_horizon(&inst, &cfg, inst.budget, periods, PlanMode::LongTerm, &limits)
                .unwrap();
            let myopic = plan_horizon(&inst, &cfg, inst.budget, periods, PlanMode::Myopic, &limits)
                .unwrap();
            let lo = long.final_solution.objective().unwrap();
            let mo = myopic.final_solution.objective().unwrap();
            assert!(
                lo <= mo + 1e-9 * mo.abs().max(1.0),
                "seed {seed} periods {periods}: long-term {lo} > myopic {mo}"
            );
            comparisons += 1;
        }
    }
    println!("PASS horizon dominance: long-term never lost across {comparisons} comparisons");
}

/// Scaling every group's emphasis by a positive factor rescales the group
/// totals and leaves the chosen plan untouched.
#[test]
fn acceptance_07_emphasis_homogeneity() {
    let limits = SolveLimits::default();
    let mut checks = 0usize;
    for seed in 500..530u64 {
        let (inst, base) = random_tiny(seed);
        let reference = solve_enumerate(&inst, &base, &limits);
        let ref_point = reference.best.clone().unwrap();
        for scale in [0.5f64, 2.0, 10.0] {
            let mut cfg = base.clone();
            cfg.emphasis = inst.races.iter().map(|r| (r.clone(), scale)).collect();
            let scaled = solve_enumerate(&inst, &cfg, &limits);
            let point = scaled.best.clone().unwrap();
            assert_eq!(point.opened, ref_point.opened, "seed {seed} scale {scale}");
            assert_eq!(point.assignment, ref_point.assignment, "seed {seed} scale {scale}");
            for ((race, scaled_alpha), (race2, base_alpha)) in
                point.alpha.iter().zip(&ref_point.alpha)
            {
                assert_eq!(race, race2);
                assert!(
                    rel_close(*scaled_alpha, scale * base_alpha, 1e-9),
                    "seed {seed} scale {scale} group {race}: {scaled_alpha} vs {}",
                    scale * base_alpha
                );
            }
            checks += 1;
        }
    }
    println!("PASS emphasis homogeneity: plans invariant and totals scaled in {checks} runs");
}

/// Models survive the MPS round trip bit-exactly, and an external solver
/// wired through the command template is accepted when it returns the
/// optimum.
#[test]
fn acceptance_08_mps_round_trip_and_external_stub() {
    let mut round_trips = 0usize;
    for seed in 600..620u64 {
        let (inst, base) = random_tiny(seed);
        let (objective, capacitated) = CONFIGS[(seed % 4) as usize];
        let model = build_model(&inst, &configured(&base, objective, capacitated));
        let back = parse_mps_str(&mps_string(&model)).unwrap();
        assert_eq!(model, back, "seed {seed}");
        round_trips += 1;
    }

    let (inst, cfg) = tiny1();
    let oracle = solve_enumerate(&inst, &cfg, &SolveLimits::default());
    let oracle_point = oracle.best.clone().unwrap();
    let model = build_model(&inst, &cfg);
    let opened: Vec<&str> = oracle_point.opened.iter().map(String::as_str).collect();
    let pairs: Vec<(&str, &str)> =
        oracle_point.assignment.iter().map(|(l, k)| (l.as_str(), k.as_str())).collect();
    let assignment = Assignment::from_ids(&inst, &opened, &pairs).unwrap();
    let point = canonical_lift(&inst, &cfg, &model, &assignment).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let known = dir.path().join("known.sol");
    let mut text = String::new();
    for (var, value) in model.variables().iter().zip(&point) {
        text.push_str(&format!("{} {:.17e}\n", var.name, value));
    }
    std::fs::write(&known, text).unwrap();
    let template = format!("test -s {{mps}} && cp {} {{sol}}", known.display());
    let external = solve_via_external(&model, &template, dir.path()).unwrap();
    assert!(
        rel_close(external.objective().unwrap(), oracle_point.objective, 1e-6),
        "external returned {} vs oracle {}",
        external.objective().unwrap(),
        oracle_point.objective
    );
    println!(
        "PASS MPS round-trip and external stub: {round_trips} models round-tripped; stub matched the oracle"
    );
}

/// Contingent full-dataset check: only runs when a case-study instance
/// directory and an external solver command are supplied via environment
/// variables.
#[test]
fn acceptance_09_case_study_baseline() {
    let (dir, solver) = match (
        std::env::var("PARKOPT_CASE_STUDY_DIR"),
        std::env::var("PARKOPT_MILP_SOLVER"),
    ) {
        (Ok(dir), Ok(solver)) => (dir, solver),
        _ => {
            println!(
                "SKIPPED case-study baseline: set PARKOPT_CASE_STUDY_DIR and \
                 PARKOPT_MILP_SOLVER to run it"
            );
            return;
        }
    };
    let dir = std::path::PathBuf::from(dir);
    let (inst, cfg) = load_instance(&dir, &dir.join("config.json")).unwrap();
    let baseline: ParkInstance = inst.with_budget(0.0);
    let cfg = cfg.with_objective(ObjectiveKind::MinMax).with_capacitated(true);
    let model: MipModel = build_model(&baseline, &cfg);
    let work = tempfile::tempdir().unwrap();
    let solution = solve_via_external(&model, &solver, work.path()).unwrap();
    let objective = solution.objective().unwrap();
    let expected = 650_570.0;
    assert!(
        (objective - expected).abs() <= 0.01 * expected,
        "baseline objective {objective} outside 1% of {expected}"
    );
    println!("PASS case-study baseline: objective {objective} within 1% of {expected}");
}
