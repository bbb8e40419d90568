//! Model construction: instance + config → IR.
//!
//! Variable and constraint names are deterministic functions of the ids in
//! the instance, and declaration order is fixed: y(k), x(k,l), alpha(r),
//! alpha_max, then per-location distance machinery, then per-park capacity
//! machinery. The IR enumerator and the MPS export both lean on that order.

use serde::Serialize;

use crate::instance::{AccessConfig, ObjectiveKind, ParkInstance};
use crate::milp::evaluate::{evaluate_assignment, exogenous_unit_cost, Assignment, EvalError};
use crate::milp::model::{MipModel, Sense};

/// Activation bounds for the indicator constraints. All three are the
/// tightest instance-derived values that remain valid at every feasible
/// point: no assigned distance can exceed the largest pairwise distance,
/// and no park load (hence no overcrowding) can exceed the total
/// population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigM {
    /// Bound on any single park load / overcrowding, persons.
    pub mu_cap_plus: f64,
    /// Bound on any assigned distance, miles.
    pub mu_maxdist: f64,
    /// Same bound as `mu_cap_plus`, used by the capacity-slack indicator.
    pub mu_maxcap: f64,
}

pub fn compute_big_m(inst: &ParkInstance) -> BigM {
    let mut mu_maxdist = 0.0f64;
    for k in 0..inst.parks.len() {
        for l in 0..inst.locations.len() {
            mu_maxdist = mu_maxdist.max(inst.distance(k, l));
        }
    }
    let total = inst.total_population() as f64;
    BigM { mu_cap_plus: total, mu_maxdist, mu_maxcap: total }
}

/// Builds the full model for one instance/config pair.
///
/// MinMax minimizes the worst group total `alpha_max`; MinAll minimizes the
/// sum of the `alpha(r)` and omits `alpha_max` entirely. Uncapacitated mode
/// omits every capacity variable and constraint. The distance term enters
/// each group total once per location (the assignment constraint makes the
/// per-park split redundant).
pub fn build_model(inst: &ParkInstance, cfg: &AccessConfig) -> MipModel {
    let big_m = compute_big_m(inst);
    let n_parks = inst.parks.len();
    let n_locs = inst.locations.len();
    let mut model = MipModel::new("park_access");

    let y: Vec<usize> =
        inst.parks.iter().map(|p| model.add_binary(format!("y({})", p.id))).collect();
    let mut x = vec![vec![0usize; n_locs]; n_parks];
    for (k, park) in inst.parks.iter().enumerate() {
        for (l, loc) in inst.locations.iter().enumerate() {
            x[k][l] = model.add_binary(format!("x({},{})", park.id, loc.id));
        }
    }
    let alpha: Vec<usize> = inst
        .races
        .iter()
        .map(|r| model.add_continuous(format!("alpha({r})"), 0.0, f64::INFINITY))
        .collect();
    let alpha_max = match cfg.objective {
        ObjectiveKind::MinMax => Some(model.add_continuous("alpha_max", 0.0, f64::INFINITY)),
        ObjectiveKind::MinAll => None,
    };
    let dplus: Vec<usize> = inst
        .locations
        .iter()
        .map(|l| model.add_continuous(format!("dplus({})", l.id), 0.0, big_m.mu_maxdist))
        .collect();
    let udist: Vec<usize> =
        inst.locations.iter().map(|l| model.add_binary(format!("udist({})", l.id))).collect();
    let pi_dist: Vec<usize> = inst
        .locations
        .iter()
        .map(|l| model.add_continuous(format!("pi_dist({})", l.id), 0.0, big_m.mu_maxdist))
        .collect();

    let (aplus, ucap, pi_cap_act, pi_cap) = if cfg.capacitated {
        let aplus: Vec<usize> = inst
            .parks
            .iter()
            .map(|p| model.add_continuous(format!("aplus({})", p.id), 0.0, big_m.mu_maxcap))
            .collect();
        let ucap: Vec<usize> =
            inst.parks.iter().map(|p| model.add_binary(format!("ucap({})", p.id))).collect();
        let pi_cap_act: Vec<usize> = inst
            .parks
            .iter()
            .map(|p| model.add_continuous(format!("pi_cap_act({})", p.id), 0.0, big_m.mu_maxcap))
            .collect();
        let mut pi_cap = vec![vec![0usize; n_locs]; n_parks];
        for (k, park) in inst.parks.iter().enumerate() {
            for (l, loc) in inst.locations.iter().enumerate() {
                pi_cap[k][l] = model.add_continuous(
                    format!("pi_cap({},{})", park.id, loc.id),
                    0.0,
                    big_m.mu_cap_plus,
                );
            }
        }
        (aplus, ucap, pi_cap_act, pi_cap)
    } else {
        (Vec::new(), Vec::new(), Vec::new(), Vec::new())
    };

    match cfg.objective {
        ObjectiveKind::MinMax => model.set_objective_coefficient(alpha_max.unwrap(), 1.0),
        ObjectiveKind::MinAll => {
            for &a in &alpha {
                model.set_objective_coefficient(a, 1.0);
            }
        }
    }

    // Group totals: alpha(r) = Σ_l q t [n_d w_d dplus(l)]
    //                        + Σ_{k,l} q t [n_c w_c pi_cap(k,l) + env_k x(k,l)].
    for (r, race) in inst.races.iter().enumerate() {
        let q = cfg.emphasis_for(race);
        let dist_rate = cfg.normalizations.dist * cfg.weights.dist_plus;
        let cap_rate = cfg.normalizations.cap * cfg.weights.cap_plus;
        let mut terms = vec![(alpha[r], 1.0)];
        for (l, _) in inst.locations.iter().enumerate() {
            let persons = inst.population(l, race) as f64;
            terms.push((dplus[l], -q * persons * dist_rate));
            for (k, park) in inst.parks.iter().enumerate() {
                let (heat, tree) = exogenous_unit_cost(cfg, park);
                terms.push((x[k][l], -q * persons * (heat + tree)));
                if cfg.capacitated {
                    terms.push((pi_cap[k][l], -q * persons * cap_rate));
                }
            }
        }
        model.add_constraint(format!("def_alpha({race})"), terms, Sense::Eq, 0.0);
    }

    if let Some(alpha_max) = alpha_max {
        for (r, race) in inst.races.iter().enumerate() {
            model.add_constraint(
                format!("maxdev({race})"),
                vec![(alpha[r], 1.0), (alpha_max, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }

    for (l, loc) in inst.locations.iter().enumerate() {
        let terms = (0..n_parks).map(|k| (x[k][l], 1.0)).collect();
        model.add_constraint(format!("assign({})", loc.id), terms, Sense::Eq, 1.0);
    }
    for (k, park) in inst.parks.iter().enumerate() {
        for (l, loc) in inst.locations.iter().enumerate() {
            model.add_constraint(
                format!("open({},{})", park.id, loc.id),
                vec![(x[k][l], 1.0), (y[k], -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    for (k, park) in inst.parks.iter().enumerate() {
        let rhs = if park.existing { 1.0 } else { 0.0 };
        model.add_constraint(format!("exists({})", park.id), vec![(y[k], 1.0)], Sense::Ge, rhs);
    }
    let budget_terms = inst.parks.iter().enumerate().map(|(k, p)| (y[k], p.cost)).collect();
    model.add_constraint("budget", budget_terms, Sense::Le, inst.budget);

    // Distance slack: dplus(l) ≥ assigned distance − threshold, and the
    // indicator machinery pins it to exactly max(0, distance − threshold).
    let m = inst.max_distance;
    for (l, loc) in inst.locations.iter().enumerate() {
        let assigned_dist = |scale: f64| -> Vec<(usize, f64)> {
            (0..n_parks).map(|k| (x[k][l], scale * inst.distance(k, l))).collect()
        };
        let mut terms = assigned_dist(1.0);
        terms.push((dplus[l], -1.0));
        model.add_constraint(format!("dist_slack({})", loc.id), terms, Sense::Le, m);

        let mut terms = assigned_dist(-1.0);
        terms.push((dplus[l], 1.0));
        terms.push((pi_dist[l], 1.0));
        terms.push((udist[l], -m));
        model.add_constraint(format!("dist_exact({})", loc.id), terms, Sense::Le, -m);

        model.add_constraint(
            format!("dist_pi_open({})", loc.id),
            vec![(pi_dist[l], 1.0), (udist[l], -big_m.mu_maxdist)],
            Sense::Le,
            0.0,
        );

        let mut terms = assigned_dist(-1.0);
        terms.push((pi_dist[l], 1.0));
        model.add_constraint(format!("dist_pi_cap({})", loc.id), terms, Sense::Le, 0.0);

        let mut terms = assigned_dist(-1.0);
        terms.push((pi_dist[l], 1.0));
        terms.push((udist[l], -big_m.mu_maxdist));
        model.add_constraint(
            format!("dist_pi_floor({})", loc.id),
            terms,
            Sense::Ge,
            -big_m.mu_maxdist,
        );
    }

    if cfg.capacitated {
        // Capacity slack aplus(k) pinned to max(0, load − capacity), then
        // pi_cap(k,l) = aplus(k)·x(k,l) via its product envelope.
        for (k, park) in inst.parks.iter().enumerate() {
            let load = |scale: f64| -> Vec<(usize, f64)> {
                (0..n_locs)
                    .map(|l| (x[k][l], scale * inst.locations[l].total_population() as f64))
                    .collect()
            };
            let a_k = park.capacity as f64;

            let mut terms = load(1.0);
            terms.push((aplus[k], -1.0));
            model.add_constraint(format!("cap_slack({})", park.id), terms, Sense::Le, a_k);

            let mut terms = load(-1.0);
            terms.push((aplus[k], 1.0));
            terms.push((pi_cap_act[k], 1.0));
            terms.push((ucap[k], -a_k));
            model.add_constraint(format!("cap_exact({})", park.id), terms, Sense::Le, -a_k);

            model.add_constraint(
                format!("cap_pi_open({})", park.id),
                vec![(pi_cap_act[k], 1.0), (ucap[k], -big_m.mu_maxcap)],
                Sense::Le,
                0.0,
            );

            let mut terms = load(-1.0);
            terms.push((pi_cap_act[k], 1.0));
            model.add_constraint(format!("cap_pi_cap({})", park.id), terms, Sense::Le, 0.0);

            let mut terms = load(-1.0);
            terms.push((pi_cap_act[k], 1.0));
            terms.push((ucap[k], -big_m.mu_maxcap));
            model.add_constraint(
                format!("cap_pi_floor({})", park.id),
                terms,
                Sense::Ge,
                -big_m.mu_maxcap,
            );
        }
        for (k, park) in inst.parks.iter().enumerate() {
            for (l, loc) in inst.locations.iter().enumerate() {
                model.add_constraint(
                    format!("link_open({},{})", park.id, loc.id),
                    vec![(pi_cap[k][l], 1.0), (x[k][l], -big_m.mu_cap_plus)],
                    Sense::Le,
                    0.0,
                );
                model.add_constraint(
                    format!("link_slack({},{})", park.id, loc.id),
                    vec![(pi_cap[k][l], 1.0), (aplus[k], -1.0)],
                    Sense::Le,
                    0.0,
                );
                model.add_constraint(
                    format!("link_floor({},{})", park.id, loc.id),
                    vec![
                        (pi_cap[k][l], 1.0),
                        (aplus[k], -1.0),
                        (x[k][l], -big_m.mu_cap_plus),
                    ],
                    Sense::Ge,
                    -big_m.mu_cap_plus,
                );
            }
        }
    }

    model
}

/// Extends a plan to a full IR point: binaries from the plan, slacks at
/// their closed-form values, indicators set to "within threshold"/"within
/// capacity", products to their defining values, and the group totals from
/// the evaluator. The result is feasible by construction and is the point
/// an exact solver would return for this plan.
pub fn canonical_lift(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    model: &MipModel,
    assignment: &Assignment,
) -> Result<Vec<f64>, EvalError> {
    let report = evaluate_assignment(inst, cfg, assignment)?;
    let mut point = vec![0.0; model.variables().len()];
    let mut set = |name: String, value: f64| {
        let j = model
            .var_index(&name)
            .unwrap_or_else(|| panic!("model is missing variable '{name}'"));
        point[j] = value;
    };

    for (k, park) in inst.parks.iter().enumerate() {
        set(format!("y({})", park.id), assignment.opened[k] as u8 as f64);
    }
    for (l, loc) in inst.locations.iter().enumerate() {
        for (k, park) in inst.parks.iter().enumerate() {
            let assigned = assignment.park_of[l] == k;
            set(format!("x({},{})", park.id, loc.id), assigned as u8 as f64);
        }
    }
    for (race, a) in &report.alpha {
        set(format!("alpha({race})"), *a);
    }
    if model.var_index("alpha_max").is_some() {
        set("alpha_max".into(), report.alpha_max);
    }
    for (l, loc) in inst.locations.iter().enumerate() {
        let dist = inst.distance(assignment.park_of[l], l);
        let within = dist <= inst.max_distance;
        set(format!("dplus({})", loc.id), (dist - inst.max_distance).max(0.0));
        set(format!("udist({})", loc.id), within as u8 as f64);
        set(format!("pi_dist({})", loc.id), if within { dist } else { 0.0 });
    }
    if cfg.capacitated {
        let mut load = vec![0.0f64; inst.parks.len()];
        for (l, &k) in assignment.park_of.iter().enumerate() {
            load[k] += inst.locations[l].total_population() as f64;
        }
        for (k, park) in inst.parks.iter().enumerate() {
            let a_k = park.capacity as f64;
            let within = load[k] <= a_k;
            let aplus = (load[k] - a_k).max(0.0);
            set(format!("aplus({})", park.id), aplus);
            set(format!("ucap({})", park.id), within as u8 as f64);
            set(format!("pi_cap_act({})", park.id), if within { load[k] } else { 0.0 });
            for (l, loc) in inst.locations.iter().enumerate() {
                let assigned = assignment.park_of[l] == k;
                set(format!("pi_cap({},{})", park.id, loc.id), if assigned { aplus } else { 0.0 });
            }
        }
    }
    Ok(point)
}
