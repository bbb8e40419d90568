//! Shared test instances.
//!
//! [`tiny1`] is the hand-checked miniature city used across the test suite:
//! small enough that every optimum can be verified by hand, rich enough to
//! exercise overcrowding, distance deviations, and both kinds of exogenous
//! deviation. [`random_tiny`] produces seeded random instances of the same
//! scale for cross-checking the two solver back-ends against each other.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::instance::{AccessConfig, ParkInstance, ParkSite, ResidentLocation};

fn park(id: &str, existing: bool, cost: f64, capacity: u64) -> ParkSite {
    ParkSite {
        id: id.to_string(),
        existing,
        cost,
        capacity,
        heat_excess: 0.0,
        heat_deficit: 0.0,
        tree_excess: 0.0,
        tree_deficit: 0.0,
        coords: None,
    }
}

fn location(id: &str, counts: &[(&str, u64)]) -> ResidentLocation {
    ResidentLocation {
        id: id.to_string(),
        population: counts.iter().map(|&(r, n)| (r.to_string(), n)).collect(),
        coords: None,
    }
}

/// Three parks, two locations, two demographic groups.
///
/// * `p1` — existing, free, capacity 150, no exogenous deviations.
/// * `p2` — candidate, $60, capacity 100, heat excess 0.5.
/// * `p3` — candidate, $80, capacity 400, tree deficit 10.
///
/// Budget $100, access threshold 0.5 miles, default scoring configuration
/// (MinMax, capacitated).
pub fn tiny1() -> (ParkInstance, AccessConfig) {
    let mut p2 = park("p2", false, 60.0, 100);
    p2.heat_excess = 0.5;
    let mut p3 = park("p3", false, 80.0, 400);
    p3.tree_deficit = 10.0;
    let parks = vec![park("p1", true, 0.0, 150), p2, p3];
    let locations = vec![
        location("l1", &[("A", 100), ("B", 50)]),
        location("l2", &[("A", 20), ("B", 200)]),
    ];
    let races = vec!["A".to_string(), "B".to_string()];
    // Park-major: (p1,l1) (p1,l2) (p2,l1) (p2,l2) (p3,l1) (p3,l2).
    let distances = vec![0.4, 1.5, 1.0, 0.3, 0.6, 0.6];
    let inst = ParkInstance::new(parks, locations, races, distances, 100.0, 0.5)
        .expect("fixture is structurally valid");
    (inst, AccessConfig::default())
}

/// A seeded random instance at the same desk scale: 1–2 existing parks,
/// 1–3 candidates, 1–3 locations, 1–2 groups, random costs, capacities,
/// distances, populations, and one-sided environmental deviations. The
/// configuration is the default one; callers flip objective/capacity mode
/// as needed.
pub fn random_tiny(seed: u64) -> (ParkInstance, AccessConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_existing = rng.gen_range(1..=2usize);
    let n_candidates = rng.gen_range(1..=3usize);
    let n_locations = rng.gen_range(1..=3usize);
    let n_races = rng.gen_range(1..=2usize);
    let races: Vec<String> = ["A", "B"][..n_races].iter().map(|s| s.to_string()).collect();

    let mut parks = Vec::new();
    for i in 0..n_existing + n_candidates {
        let existing = i < n_existing;
        let cost = if existing { 0.0 } else { rng.gen_range(1..=120) as f64 };
        let mut p = park(&format!("p{}", i + 1), existing, cost, rng.gen_range(0..=400));
        // Environmental deviations are one-sided and frequently absent.
        if rng.gen_bool(0.5) {
            let v = rng.gen_range(0.1..5.0);
            if rng.gen_bool(0.5) {
                p.heat_excess = v;
            } else {
                p.heat_deficit = v;
            }
        }
        if rng.gen_bool(0.5) {
            let v = rng.gen_range(1.0..30.0);
            if rng.gen_bool(0.5) {
                p.tree_excess = v;
            } else {
                p.tree_deficit = v;
            }
        }
        parks.push(p);
    }

    let mut locations = Vec::new();
    for l in 0..n_locations {
        let mut population = BTreeMap::new();
        for race in &races {
            population.insert(race.clone(), rng.gen_range(0..=300u64));
        }
        if population.values().sum::<u64>() == 0 {
            population.insert(races[0].clone(), 1);
        }
        locations.push(ResidentLocation {
            id: format!("l{}", l + 1),
            population,
            coords: None,
        });
    }

    let distances: Vec<f64> =
        (0..parks.len() * locations.len()).map(|_| rng.gen_range(0.05..2.0)).collect();

    let candidate_total: f64 =
        parks.iter().filter(|p| !p.existing).map(|p| p.cost).sum();
    let budget = if rng.gen_bool(0.2) {
        0.0
    } else {
        rng.gen_range(0.0..=candidate_total.max(1.0) * 1.2).floor()
    };
    let max_distance = *[0.3, 0.5, 1.0].choose(&mut rng).unwrap();

    let inst = ParkInstance::new(parks, locations, races, distances, budget, max_distance)
        .expect("generated instance is structurally valid");
    (inst, AccessConfig::default())
}

/// A strictly increasing budget grid from 0 up to slightly above the cost
/// of buying every candidate.
pub fn budget_grid(inst: &ParkInstance, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let total: f64 = inst.parks.iter().filter(|p| !p.existing).map(|p| p.cost).sum();
    let top = (total * 1.1).max(1.0);
    (0..points).map(|i| top * i as f64 / (points - 1) as f64).collect()
}
