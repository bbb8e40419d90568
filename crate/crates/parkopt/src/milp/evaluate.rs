//! Closed-form pricing of a concrete siting plan.
//!
//! Given which parks are open and which park serves each location, every
//! model quantity is determined: distance slack is how far the assigned
//! park sits beyond the access threshold, overcrowding is load above
//! capacity, and the exogenous heat/tree deviations ride along with the
//! assignment. The evaluator computes the per-group weighted totals plus
//! all the unweighted reporting statistics in one pass.

use serde::Serialize;
use thiserror::Error;

use crate::instance::{AccessConfig, ParkInstance, ParkSite};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown park id '{0}'")]
    UnknownPark(String),
    #[error("unknown location id '{0}'")]
    UnknownLocation(String),
    #[error("location '{0}' has no assigned park")]
    UnassignedLocation(String),
    #[error("location '{0}' is assigned more than once")]
    DuplicateAssignment(String),
    #[error("location '{location}' is assigned to park '{park}', which is not opened")]
    UnopenedParkAssigned { park: String, location: String },
    #[error("existing park '{0}' cannot be closed")]
    ExistingParkClosed(String),
    #[error("assignment shape mismatch: {0}")]
    Shape(String),
}

/// A concrete plan: which parks are open, and the primary park serving each
/// location (both in canonical index order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// `opened[k]` — park `k` is open.
    pub opened: Vec<bool>,
    /// `park_of[l]` — index of the park serving location `l`.
    pub park_of: Vec<usize>,
}

impl Assignment {
    /// Builds an assignment from ids: the opened set plus one
    /// (location, park) pair per location.
    pub fn from_ids(
        inst: &ParkInstance,
        opened: &[&str],
        pairs: &[(&str, &str)],
    ) -> Result<Self, EvalError> {
        let mut open = vec![false; inst.parks.len()];
        for id in opened {
            let k = inst.park_index(id).ok_or_else(|| EvalError::UnknownPark(id.to_string()))?;
            open[k] = true;
        }
        let mut park_of = vec![usize::MAX; inst.locations.len()];
        for (loc_id, park_id) in pairs {
            let l = inst
                .location_index(loc_id)
                .ok_or_else(|| EvalError::UnknownLocation(loc_id.to_string()))?;
            let k = inst
                .park_index(park_id)
                .ok_or_else(|| EvalError::UnknownPark(park_id.to_string()))?;
            if park_of[l] != usize::MAX {
                return Err(EvalError::DuplicateAssignment(loc_id.to_string()));
            }
            park_of[l] = k;
        }
        if let Some(l) = park_of.iter().position(|&k| k == usize::MAX) {
            return Err(EvalError::UnassignedLocation(inst.locations[l].id.clone()));
        }
        Ok(Assignment { opened: open, park_of })
    }

    fn validate(&self, inst: &ParkInstance) -> Result<(), EvalError> {
        if self.opened.len() != inst.parks.len() {
            return Err(EvalError::Shape(format!(
                "{} opened flags for {} parks",
                self.opened.len(),
                inst.parks.len()
            )));
        }
        if self.park_of.len() != inst.locations.len() {
            return Err(EvalError::Shape(format!(
                "{} assignments for {} locations",
                self.park_of.len(),
                inst.locations.len()
            )));
        }
        for (k, park) in inst.parks.iter().enumerate() {
            if park.existing && !self.opened[k] {
                return Err(EvalError::ExistingParkClosed(park.id.clone()));
            }
        }
        for (l, &k) in self.park_of.iter().enumerate() {
            if k >= inst.parks.len() {
                return Err(EvalError::Shape(format!("location index {l} assigned to park {k}")));
            }
            if !self.opened[k] {
                return Err(EvalError::UnopenedParkAssigned {
                    park: inst.parks[k].id.clone(),
                    location: inst.locations[l].id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Ids of the opened parks in canonical order.
    pub fn opened_ids(&self, inst: &ParkInstance) -> Vec<String> {
        self.opened
            .iter()
            .enumerate()
            .filter(|&(_, &open)| open)
            .map(|(k, _)| inst.parks[k].id.clone())
            .collect()
    }

    /// (location id, park id) pairs in canonical location order.
    pub fn pairs(&self, inst: &ParkInstance) -> Vec<(String, String)> {
        self.park_of
            .iter()
            .enumerate()
            .map(|(l, &k)| (inst.locations[l].id.clone(), inst.parks[k].id.clone()))
            .collect()
    }
}

/// Weighted deviations split by source.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CategoryBreakdown {
    pub distance: f64,
    pub capacity: f64,
    pub heat: f64,
    pub tree: f64,
}

impl CategoryBreakdown {
    pub fn total(&self) -> f64 {
        self.distance + self.capacity + self.heat + self.tree
    }

    fn scaled(&self, s: f64) -> CategoryBreakdown {
        CategoryBreakdown {
            distance: self.distance * s,
            capacity: self.capacity * s,
            heat: self.heat * s,
            tree: self.tree * s,
        }
    }

    fn add(&mut self, other: &CategoryBreakdown) {
        self.distance += other.distance;
        self.capacity += other.capacity;
        self.heat += other.heat;
        self.tree += other.tree;
    }
}

/// Everything worth reporting about one plan: weighted deviation totals per
/// group and per category, their shares of the grand total, and the raw
/// (unweighted) distance and overcrowding experienced at each location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    /// Weighted deviation total per race, canonical race order.
    pub alpha: Vec<(String, f64)>,
    /// Largest per-race total.
    pub alpha_max: f64,
    /// Sum over races.
    pub total: f64,
    /// Weighted totals by category, summed over races.
    pub by_category: CategoryBreakdown,
    /// Weighted totals by category for each race.
    pub by_category_per_race: Vec<(String, CategoryBreakdown)>,
    /// Each category's fraction of `total` (all zero when `zero_total`).
    pub category_share: CategoryBreakdown,
    /// Each race's fraction of `total` (all zero when `zero_total`).
    pub group_share: Vec<(String, f64)>,
    /// True when the plan has no weighted deviations at all; shares are
    /// reported as 0 rather than dividing by zero.
    pub zero_total: bool,
    /// Miles beyond the access threshold per location (0 when within).
    pub distance_dev: Vec<(String, f64)>,
    pub distance_dev_avg: f64,
    pub distance_dev_max: f64,
    /// Overcrowding (persons above capacity) of the park serving each
    /// location; all zeros in uncapacitated mode.
    pub overcrowding: Vec<(String, f64)>,
    pub overcrowding_avg: f64,
    pub overcrowding_max: f64,
}

/// Per-person weighted cost of the fixed park attributes (heat and tree
/// deviations), split by category.
pub(crate) fn exogenous_unit_cost(cfg: &AccessConfig, park: &ParkSite) -> (f64, f64) {
    let heat = cfg.normalizations.heat
        * (cfg.weights.heat_plus * park.heat_excess + cfg.weights.heat_minus * park.heat_deficit);
    let tree = cfg.normalizations.tree
        * (cfg.weights.tree_plus * park.tree_excess + cfg.weights.tree_minus * park.tree_deficit);
    (heat, tree)
}

/// Per-person weighted cost of a distance deviation of `miles`.
pub(crate) fn distance_unit_cost(cfg: &AccessConfig, miles: f64) -> f64 {
    cfg.normalizations.dist * cfg.weights.dist_plus * miles
}

/// Per-person weighted cost of `persons` of overcrowding at the assigned
/// park.
pub(crate) fn overcrowding_unit_cost(cfg: &AccessConfig, persons: f64) -> f64 {
    cfg.normalizations.cap * cfg.weights.cap_plus * persons
}

/// Prices a plan: per-group weighted deviation totals (the α quantities),
/// category breakdowns and shares, and unweighted distance/overcrowding
/// statistics averaged uniformly over resident locations.
pub fn evaluate_assignment(
    inst: &ParkInstance,
    cfg: &AccessConfig,
    assignment: &Assignment,
) -> Result<DeviationReport, EvalError> {
    assignment.validate(inst)?;

    // Park loads drive overcrowding; only priced in capacitated mode.
    let mut load = vec![0u64; inst.parks.len()];
    for (l, &k) in assignment.park_of.iter().enumerate() {
        load[k] += inst.locations[l].total_population();
    }
    let overcrowd: Vec<f64> = inst
        .parks
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if cfg.capacitated {
                (load[k] as f64 - p.capacity as f64).max(0.0)
            } else {
                0.0
            }
        })
        .collect();

    let mut per_race: Vec<CategoryBreakdown> =
        vec![CategoryBreakdown::default(); inst.races.len()];
    let mut distance_dev = Vec::with_capacity(inst.locations.len());
    let mut experienced = Vec::with_capacity(inst.locations.len());
    for (l, loc) in inst.locations.iter().enumerate() {
        let k = assignment.park_of[l];
        let park = &inst.parks[k];
        let dist_miles = (inst.distance(k, l) - inst.max_distance).max(0.0);
        distance_dev.push((loc.id.clone(), dist_miles));
        experienced.push((loc.id.clone(), overcrowd[k]));

        let unit = CategoryBreakdown {
            distance: distance_unit_cost(cfg, dist_miles),
            capacity: overcrowding_unit_cost(cfg, overcrowd[k]),
            heat: exogenous_unit_cost(cfg, park).0,
            tree: exogenous_unit_cost(cfg, park).1,
        };
        for (r, race) in inst.races.iter().enumerate() {
            let persons = inst.population(l, race) as f64;
            if persons == 0.0 {
                continue;
            }
            per_race[r].add(&unit.scaled(cfg.emphasis_for(race) * persons));
        }
    }

    let alpha: Vec<(String, f64)> = inst
        .races
        .iter()
        .zip(&per_race)
        .map(|(race, cat)| (race.clone(), cat.total()))
        .collect();
    let alpha_max = alpha.iter().map(|&(_, a)| a).fold(0.0, f64::max);
    let total: f64 = alpha.iter().map(|&(_, a)| a).sum();

    let mut by_category = CategoryBreakdown::default();
    for cat in &per_race {
        by_category.add(cat);
    }
    let zero_total = total == 0.0;
    let share_scale = if zero_total { 0.0 } else { 1.0 / total };
    let category_share = by_category.scaled(share_scale);
    let group_share = alpha.iter().map(|(race, a)| (race.clone(), a * share_scale)).collect();

    let n_locs = inst.locations.len() as f64;
    let avg = |values: &[(String, f64)]| {
        if values.is_empty() {
            0.0
        } else {
            values.iter().map(|&(_, v)| v).sum::<f64>() / n_locs
        }
    };
    let max = |values: &[(String, f64)]| values.iter().map(|&(_, v)| v).fold(0.0, f64::max);

    Ok(DeviationReport {
        alpha_max,
        total,
        by_category,
        by_category_per_race: inst.races.iter().cloned().zip(per_race).collect(),
        category_share,
        group_share,
        zero_total,
        distance_dev_avg: avg(&distance_dev),
        distance_dev_max: max(&distance_dev),
        overcrowding_avg: avg(&experienced),
        overcrowding_max: max(&experienced),
        alpha,
        distance_dev,
        overcrowding: experienced,
    })
}
