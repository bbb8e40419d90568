//! Problem data and ingestion.
//!
//! A [`ParkInstance`] bundles everything the optimization needs to know
//! about the city: existing and candidate park sites, resident locations
//! with per-race population counts, the pairwise distance matrix, the
//! acquisition budget, and the distance threshold that counts as "good
//! access". The scoring knobs (weights, normalizations, allowable
//! environmental ranges, per-race emphasis) live in [`AccessConfig`].
//!
//! Ingestion reads four CSV files plus a JSON config; see the crate README
//! for the exact file formats. Ordering is significant everywhere: parks,
//! locations, and races keep their file order, and every downstream
//! iteration and tie-break uses that canonical order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{capacity_from_acres, range_deviations};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: missing required column '{column}'")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("{file}: duplicate id '{id}'")]
    DuplicateId { file: String, id: String },
    #[error("{file}: unknown id '{id}'")]
    UnknownId { file: String, id: String },
    #[error("incomplete distance matrix: no entry for park '{park}', location '{location}'")]
    IncompleteDistanceMatrix { park: String, location: String },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid instance:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Data(String),
}

impl InstanceError {
    /// True when the failure is environmental (unreadable file) rather than
    /// a problem with the data itself. Callers use this to distinguish
    /// "fix your data" from "fix your paths".
    pub fn is_io(&self) -> bool {
        matches!(self, InstanceError::Io { .. })
    }
}

/// One park site, existing or candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkSite {
    pub id: String,
    /// Already open today. Existing parks cost nothing and stay open.
    pub existing: bool,
    /// Acquisition cost; 0 for existing parks.
    pub cost: f64,
    /// Serving capacity in persons.
    pub capacity: u64,
    /// Heat-index units above the allowable range (0 if within or below).
    pub heat_excess: f64,
    /// Heat-index units below the allowable range.
    pub heat_deficit: f64,
    /// Tree-cover percentage points above the allowable range.
    pub tree_excess: f64,
    /// Tree-cover percentage points below the allowable range.
    pub tree_deficit: f64,
    /// (longitude, latitude), when known; only used for map output.
    pub coords: Option<(f64, f64)>,
}

/// A residential block with population counts per race label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentLocation {
    pub id: String,
    /// Persons per race label; labels must match the instance race list.
    pub population: BTreeMap<String, u64>,
    pub coords: Option<(f64, f64)>,
}

impl ResidentLocation {
    pub fn total_population(&self) -> u64 {
        self.population.values().sum()
    }
}

/// The full problem data: sites, residents, distances, budget, threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkInstance {
    pub parks: Vec<ParkSite>,
    pub locations: Vec<ResidentLocation>,
    /// Race labels in canonical (first-appearance) order.
    pub races: Vec<String>,
    /// Pairwise distances in miles, park-major: entry `k * |L| + l`.
    distances: Vec<f64>,
    /// Total acquisition budget.
    pub budget: f64,
    /// Distance (miles) considered "good access"; deviations beyond it are
    /// penalized.
    pub max_distance: f64,
}

impl ParkInstance {
    /// Assembles an instance, checking structural consistency (dimensions,
    /// duplicate ids, race labels). Semantic checks live in
    /// [`validate_instance`].
    pub fn new(
        parks: Vec<ParkSite>,
        locations: Vec<ResidentLocation>,
        races: Vec<String>,
        distances: Vec<f64>,
        budget: f64,
        max_distance: f64,
    ) -> Result<Self, InstanceError> {
        if distances.len() != parks.len() * locations.len() {
            return Err(InstanceError::Data(format!(
                "distance matrix has {} entries, expected {} parks x {} locations",
                distances.len(),
                parks.len(),
                locations.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &parks {
            if !seen.insert(p.id.clone()) {
                return Err(InstanceError::DuplicateId { file: "parks".into(), id: p.id.clone() });
            }
        }
        let mut seen = BTreeSet::new();
        for l in &locations {
            if !seen.insert(l.id.clone()) {
                return Err(InstanceError::DuplicateId {
                    file: "locations".into(),
                    id: l.id.clone(),
                });
            }
        }
        let race_set: BTreeSet<&str> = races.iter().map(String::as_str).collect();
        if race_set.len() != races.len() {
            return Err(InstanceError::Data("duplicate race label".into()));
        }
        for l in &locations {
            for race in l.population.keys() {
                if !race_set.contains(race.as_str()) {
                    return Err(InstanceError::Data(format!(
                        "location {}: unknown race '{}'",
                        l.id, race
                    )));
                }
            }
        }
        Ok(ParkInstance { parks, locations, races, distances, budget, max_distance })
    }

    /// Distance in miles from park `k` to location `l` (canonical indices).
    pub fn distance(&self, park: usize, location: usize) -> f64 {
        self.distances[park * self.locations.len() + location]
    }

    /// Population of race `race` at location `l`; 0 when absent.
    pub fn population(&self, location: usize, race: &str) -> u64 {
        self.locations[location].population.get(race).copied().unwrap_or(0)
    }

    /// Total persons across all locations and races.
    pub fn total_population(&self) -> u64 {
        self.locations.iter().map(ResidentLocation::total_population).sum()
    }

    pub fn park_index(&self, id: &str) -> Option<usize> {
        self.parks.iter().position(|p| p.id == id)
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    /// Copy of the instance with a different budget.
    pub fn with_budget(&self, budget: f64) -> Self {
        let mut out = self.clone();
        out.budget = budget;
        out
    }

    /// Copy of the instance with a different access threshold.
    pub fn with_max_distance(&self, max_distance: f64) -> Self {
        let mut out = self.clone();
        out.max_distance = max_distance;
        out
    }
}

/// Objective to optimize: the worst-off group's deviation total, or the sum
/// over all groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MinMax,
    MinAll,
}

/// Weights on each deviation category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub dist_plus: f64,
    pub cap_plus: f64,
    pub heat_plus: f64,
    pub heat_minus: f64,
    pub tree_plus: f64,
    pub tree_minus: f64,
}

/// Per-category normalizations that put deviations on a comparable scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizations {
    pub dist: f64,
    pub cap: f64,
    pub heat: f64,
    pub tree: f64,
}

/// Scoring configuration: how deviations are weighted, normalized, and
/// aggregated into per-group totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessConfig {
    pub weights: Weights,
    pub normalizations: Normalizations,
    /// Allowable heat-index range (lo, hi).
    pub heat_range: (f64, f64),
    /// Allowable tree-cover percentage range (lo, hi).
    pub tree_range: (f64, f64),
    /// Per-race emphasis multipliers; races not listed default to 1.
    pub emphasis: BTreeMap<String, f64>,
    pub objective: ObjectiveKind,
    /// Enforce park capacities (and price overcrowding) when true.
    pub capacitated: bool,
}

impl AccessConfig {
    /// Emphasis multiplier for a race (1 unless configured otherwise).
    pub fn emphasis_for(&self, race: &str) -> f64 {
        self.emphasis.get(race).copied().unwrap_or(1.0)
    }

    pub fn with_objective(&self, objective: ObjectiveKind) -> Self {
        let mut out = self.clone();
        out.objective = objective;
        out
    }

    pub fn with_capacitated(&self, capacitated: bool) -> Self {
        let mut out = self.clone();
        out.capacitated = capacitated;
        out
    }
}

impl Default for AccessConfig {
    /// The deployment defaults: distance dominates, overcrowding and tree
    /// cover matter at a quarter weight, heat at a fifth, and every group
    /// counts equally.
    fn default() -> Self {
        AccessConfig {
            weights: Weights {
                dist_plus: 0.9,
                cap_plus: 0.25,
                heat_plus: 0.2,
                heat_minus: 0.05,
                tree_plus: 0.25,
                tree_minus: 0.2,
            },
            normalizations: Normalizations { dist: 5.0, cap: 1.0 / 150.0, heat: 20.0, tree: 1.0 },
            heat_range: (1.0, 4.0),
            tree_range: (20.0, 70.0),
            emphasis: BTreeMap::new(),
            objective: ObjectiveKind::MinMax,
            capacitated: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Config file

/// Normalizations may be written as plain numbers or as ratio strings like
/// "1/150".
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RatioValue {
    Number(f64),
    Text(String),
}

impl RatioValue {
    fn resolve(&self) -> Result<f64, String> {
        match self {
            RatioValue::Number(v) => Ok(*v),
            RatioValue::Text(s) => {
                let s = s.trim();
                if let Some((num, den)) = s.split_once('/') {
                    let num: f64 =
                        num.trim().parse().map_err(|_| format!("bad ratio '{s}'"))?;
                    let den: f64 =
                        den.trim().parse().map_err(|_| format!("bad ratio '{s}'"))?;
                    if den == 0.0 {
                        return Err(format!("ratio '{s}' divides by zero"));
                    }
                    Ok(num / den)
                } else {
                    s.parse().map_err(|_| format!("bad number '{s}'"))
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    dist_plus: f64,
    cap_plus: f64,
    heat_plus: f64,
    heat_minus: f64,
    tree_plus: f64,
    tree_minus: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizationsFile {
    dist: RatioValue,
    cap: RatioValue,
    heat: RatioValue,
    tree: RatioValue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    budget: f64,
    max_distance: f64,
    weights: Option<WeightsFile>,
    normalizations: Option<NormalizationsFile>,
    heat_range: Option<[f64; 2]>,
    tree_range: Option<[f64; 2]>,
    emphasis: Option<BTreeMap<String, f64>>,
    objective: Option<ObjectiveKind>,
    capacitated: Option<bool>,
}

/// Budget and threshold are carried on the instance; everything else on the
/// config.
struct LoadedConfig {
    budget: f64,
    max_distance: f64,
    config: AccessConfig,
}

fn load_config(path: &Path) -> Result<LoadedConfig, InstanceError> {
    let text = fs::read_to_string(path)
        .map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| InstanceError::Config { path: path.to_path_buf(), message: e.to_string() })?;
    let defaults = AccessConfig::default();
    let config_err =
        |message: String| InstanceError::Config { path: path.to_path_buf(), message };

    let weights = match file.weights {
        Some(w) => Weights {
            dist_plus: w.dist_plus,
            cap_plus: w.cap_plus,
            heat_plus: w.heat_plus,
            heat_minus: w.heat_minus,
            tree_plus: w.tree_plus,
            tree_minus: w.tree_minus,
        },
        None => defaults.weights,
    };
    let normalizations = match file.normalizations {
        Some(n) => Normalizations {
            dist: n.dist.resolve().map_err(&config_err)?,
            cap: n.cap.resolve().map_err(&config_err)?,
            heat: n.heat.resolve().map_err(&config_err)?,
            tree: n.tree.resolve().map_err(&config_err)?,
        },
        None => defaults.normalizations,
    };
    Ok(LoadedConfig {
        budget: file.budget,
        max_distance: file.max_distance,
        config: AccessConfig {
            weights,
            normalizations,
            heat_range: file.heat_range.map(|[lo, hi]| (lo, hi)).unwrap_or(defaults.heat_range),
            tree_range: file.tree_range.map(|[lo, hi]| (lo, hi)).unwrap_or(defaults.tree_range),
            emphasis: file.emphasis.unwrap_or_default(),
            objective: file.objective.unwrap_or(defaults.objective),
            capacitated: file.capacitated.unwrap_or(defaults.capacitated),
        },
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column lookup for one CSV file, with parse helpers that attach file and
/// line context to every error.
struct CsvFile {
    name: String,
    headers: Vec<String>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvFile {
    fn open(dir: &Path, name: &str) -> Result<Self, InstanceError> {
        let path = dir.join(name);
        let mut raw = Vec::new();
        fs::File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut raw))
            .map_err(|source| InstanceError::Io { path: path.clone(), source })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(raw.as_slice());
        let headers = reader
            .headers()
            .map_err(|source| InstanceError::Csv { file: name.into(), source })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|source| InstanceError::Csv { file: name.into(), source })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, record));
        }
        Ok(CsvFile { name: name.to_string(), headers, records })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn required_column(&self, name: &str) -> Result<usize, InstanceError> {
        self.column(name).ok_or_else(|| InstanceError::MissingColumn {
            file: self.name.clone(),
            column: name.to_string(),
        })
    }

    fn parse_err(&self, line: u64, message: String) -> InstanceError {
        InstanceError::Parse { file: self.name.clone(), line, message }
    }

    /// Cell content at `col`, with empty cells read as absent.
    fn cell<'a>(&self, record: &'a csv::StringRecord, col: Option<usize>) -> Option<&'a str> {
        match col {
            Some(i) => record.get(i).filter(|s| !s.is_empty()),
            None => None,
        }
    }

    fn f64_cell(
        &self,
        line: u64,
        record: &csv::StringRecord,
        col: Option<usize>,
        what: &str,
    ) -> Result<Option<f64>, InstanceError> {
        match self.cell(record, col) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.parse_err(line, format!("bad {what} '{s}'"))),
        }
    }
}

fn check_id(file: &CsvFile, line: u64, id: &str) -> Result<(), InstanceError> {
    if id.is_empty() {
        return Err(file.parse_err(line, "empty id".into()));
    }
    if id.chars().any(|c| c.is_whitespace() || matches!(c, ',' | '(' | ')')) {
        return Err(file.parse_err(
            line,
            format!("id '{id}' contains whitespace, commas, or parentheses"),
        ));
    }
    Ok(())
}

/// Rounds a nonnegative fractional person count half-up to whole persons.
pub fn round_half_up(persons: f64) -> u64 {
    persons.round() as u64
}

/// Loads an instance directory (parks.csv, locations.csv, population.csv,
/// distances.csv) plus a JSON config, validates everything, and returns the
/// instance/config pair. Parks, locations, and races keep file order.
pub fn load_instance(
    instance_dir: &Path,
    config_path: &Path,
) -> Result<(ParkInstance, AccessConfig), InstanceError> {
    let loaded = load_config(config_path)?;
    let cfg = loaded.config;

    // parks.csv
    let file = CsvFile::open(instance_dir, "parks.csv")?;
    let col_id = file.required_column("id")?;
    let col_existing = file.required_column("existing")?;
    let col_cost = file.required_column("cost")?;
    let col_capacity = file.column("capacity");
    let col_acres = file.column("acres");
    let col_heat_avg = file.column("heat_avg");
    let col_heat_excess = file.column("heat_excess");
    let col_heat_deficit = file.column("heat_deficit");
    let col_tree_avg = file.column("tree_avg");
    let col_tree_excess = file.column("tree_excess");
    let col_tree_deficit = file.column("tree_deficit");
    let col_lon = file.column("lon");
    let col_lat = file.column("lat");

    let mut parks = Vec::new();
    for (line, record) in &file.records {
        let line = *line;
        let id = record.get(col_id).unwrap_or("").to_string();
        check_id(&file, line, &id)?;
        let existing = match record.get(col_existing).map(str::trim) {
            Some("0") | Some("false") => false,
            Some("1") | Some("true") => true,
            other => {
                return Err(file.parse_err(
                    line,
                    format!("existing must be 0 or 1, got '{}'", other.unwrap_or("")),
                ))
            }
        };
        let cost = file
            .f64_cell(line, record, Some(col_cost), "cost")?
            .ok_or_else(|| file.parse_err(line, "missing cost".into()))?;

        let capacity = match file.f64_cell(line, record, col_capacity, "capacity")? {
            Some(c) if c >= 0.0 && c.fract() == 0.0 && c.is_finite() => c as u64,
            Some(c) => {
                return Err(
                    file.parse_err(line, format!("capacity must be a whole number, got {c}"))
                )
            }
            None => match file.f64_cell(line, record, col_acres, "acres")? {
                Some(acres) => capacity_from_acres(acres)
                    .map_err(|e| file.parse_err(line, format!("park {id}: {e}")))?,
                None => {
                    return Err(file.parse_err(
                        line,
                        format!("park {id}: needs either a capacity or an acreage"),
                    ))
                }
            },
        };

        let heat = env_deviations(
            &file, line, &id, record, "heat", col_heat_avg, col_heat_excess, col_heat_deficit,
            cfg.heat_range,
        )?;
        let tree = env_deviations(
            &file, line, &id, record, "tree", col_tree_avg, col_tree_excess, col_tree_deficit,
            cfg.tree_range,
        )?;

        let lon = file.f64_cell(line, record, col_lon, "lon")?;
        let lat = file.f64_cell(line, record, col_lat, "lat")?;
        let coords = match (lon, lat) {
            (Some(lon), Some(lat)) => Some((lon, lat)),
            (None, None) => None,
            _ => {
                return Err(
                    file.parse_err(line, format!("park {id}: lon and lat must come together"))
                )
            }
        };

        parks.push(ParkSite {
            id,
            existing,
            cost,
            capacity,
            heat_excess: heat.0,
            heat_deficit: heat.1,
            tree_excess: tree.0,
            tree_deficit: tree.1,
            coords,
        });
    }

    // locations.csv
    let file = CsvFile::open(instance_dir, "locations.csv")?;
    let col_id = file.required_column("id")?;
    let col_lon = file.column("lon");
    let col_lat = file.column("lat");
    let mut locations = Vec::new();
    for (line, record) in &file.records {
        let line = *line;
        let id = record.get(col_id).unwrap_or("").to_string();
        check_id(&file, line, &id)?;
        let lon = file.f64_cell(line, record, col_lon, "lon")?;
        let lat = file.f64_cell(line, record, col_lat, "lat")?;
        let coords = match (lon, lat) {
            (Some(lon), Some(lat)) => Some((lon, lat)),
            (None, None) => None,
            _ => {
                return Err(
                    file.parse_err(line, format!("location {id}: lon and lat must come together"))
                )
            }
        };
        locations.push(ResidentLocation { id, population: BTreeMap::new(), coords });
    }

    // population.csv — also fixes the canonical race order (first appearance).
    let file = CsvFile::open(instance_dir, "population.csv")?;
    let col_loc = file.required_column("location_id")?;
    let col_race = file.required_column("race")?;
    let col_count = file.required_column("count")?;
    let mut races: Vec<String> = Vec::new();
    for (line, record) in &file.records {
        let line = *line;
        let loc_id = record.get(col_loc).unwrap_or("");
        let race = record.get(col_race).unwrap_or("").to_string();
        if race.is_empty() {
            return Err(file.parse_err(line, "empty race label".into()));
        }
        let count = file
            .f64_cell(line, record, Some(col_count), "count")?
            .ok_or_else(|| file.parse_err(line, "missing count".into()))?;
        if !(count >= 0.0) || !count.is_finite() {
            return Err(file.parse_err(line, format!("count must be nonnegative, got {count}")));
        }
        let loc = locations
            .iter_mut()
            .find(|l| l.id == loc_id)
            .ok_or_else(|| InstanceError::UnknownId {
                file: file.name.clone(),
                id: loc_id.to_string(),
            })?;
        if loc.population.contains_key(&race) {
            return Err(
                file.parse_err(line, format!("duplicate population entry ({loc_id}, {race})"))
            );
        }
        loc.population.insert(race.clone(), round_half_up(count));
        if !races.contains(&race) {
            races.push(race);
        }
    }

    // distances.csv
    let file = CsvFile::open(instance_dir, "distances.csv")?;
    let col_park = file.required_column("park_id")?;
    let col_loc = file.required_column("location_id")?;
    let col_miles = file.required_column("miles")?;
    let mut distances: Vec<Option<f64>> = vec![None; parks.len() * locations.len()];
    for (line, record) in &file.records {
        let line = *line;
        let park_id = record.get(col_park).unwrap_or("");
        let loc_id = record.get(col_loc).unwrap_or("");
        let miles = file
            .f64_cell(line, record, Some(col_miles), "miles")?
            .ok_or_else(|| file.parse_err(line, "missing miles".into()))?;
        let k = parks.iter().position(|p| p.id == park_id).ok_or_else(|| {
            InstanceError::UnknownId { file: file.name.clone(), id: park_id.to_string() }
        })?;
        let l = locations.iter().position(|x| x.id == loc_id).ok_or_else(|| {
            InstanceError::UnknownId { file: file.name.clone(), id: loc_id.to_string() }
        })?;
        let slot = &mut distances[k * locations.len() + l];
        if slot.is_some() {
            return Err(
                file.parse_err(line, format!("duplicate distance entry ({park_id}, {loc_id})"))
            );
        }
        *slot = Some(miles);
    }
    let mut flat = Vec::with_capacity(distances.len());
    for (k, park) in parks.iter().enumerate() {
        for (l, loc) in locations.iter().enumerate() {
            match distances[k * locations.len() + l] {
                Some(d) => flat.push(d),
                None => {
                    return Err(InstanceError::IncompleteDistanceMatrix {
                        park: park.id.clone(),
                        location: loc.id.clone(),
                    })
                }
            }
        }
    }

    let instance =
        ParkInstance::new(parks, locations, races, flat, loaded.budget, loaded.max_distance)?;
    let violations = validate_instance(&instance, &cfg);
    if !violations.is_empty() {
        return Err(InstanceError::Invalid(violations));
    }
    Ok((instance, cfg))
}

#[allow(clippy::too_many_arguments)]
fn env_deviations(
    file: &CsvFile,
    line: u64,
    id: &str,
    record: &csv::StringRecord,
    what: &str,
    col_avg: Option<usize>,
    col_excess: Option<usize>,
    col_deficit: Option<usize>,
    range: (f64, f64),
) -> Result<(f64, f64), InstanceError> {
    let avg = file.f64_cell(line, record, col_avg, &format!("{what}_avg"))?;
    let excess = file.f64_cell(line, record, col_excess, &format!("{what}_excess"))?;
    let deficit = file.f64_cell(line, record, col_deficit, &format!("{what}_deficit"))?;
    match (avg, excess.is_some() || deficit.is_some()) {
        (Some(_), true) => Err(file.parse_err(
            line,
            format!("park {id}: give either {what}_avg or precomputed deviations, not both"),
        )),
        (Some(avg), false) => {
            let dev = range_deviations(avg, range.0, range.1)
                .map_err(|e| file.parse_err(line, format!("park {id}: {e}")))?;
            Ok((dev.excess, dev.deficit))
        }
        (None, _) => Ok((excess.unwrap_or(0.0), deficit.unwrap_or(0.0))),
    }
}

// ---------------------------------------------------------------------------
// Validation

fn check_nonneg(violations: &mut Vec<String>, value: f64, what: String) {
    if !value.is_finite() || value < 0.0 {
        violations.push(format!("{what} must be nonnegative and finite, got {value}"));
    }
}

/// Checks every instance and config invariant, returning one human-readable
/// violation per problem (empty means valid). Violations are data, not
/// errors: callers decide whether to stop.
pub fn validate_instance(inst: &ParkInstance, cfg: &AccessConfig) -> Vec<String> {
    let mut v = Vec::new();

    let mut seen = BTreeSet::new();
    for p in &inst.parks {
        if !seen.insert(&p.id) {
            v.push(format!("duplicate park id '{}'", p.id));
        }
        check_nonneg(&mut v, p.cost, format!("park {}: cost", p.id));
        if p.existing && p.cost != 0.0 {
            v.push(format!("park {}: existing park must have zero cost", p.id));
        }
        check_nonneg(&mut v, p.heat_excess, format!("park {}: heat_excess", p.id));
        check_nonneg(&mut v, p.heat_deficit, format!("park {}: heat_deficit", p.id));
        check_nonneg(&mut v, p.tree_excess, format!("park {}: tree_excess", p.id));
        check_nonneg(&mut v, p.tree_deficit, format!("park {}: tree_deficit", p.id));
        if p.heat_excess > 0.0 && p.heat_deficit > 0.0 {
            v.push(format!("park {}: excess and deficit heat both positive", p.id));
        }
        if p.tree_excess > 0.0 && p.tree_deficit > 0.0 {
            v.push(format!("park {}: excess and deficit tree cover both positive", p.id));
        }
    }

    let mut seen = BTreeSet::new();
    for l in &inst.locations {
        if !seen.insert(&l.id) {
            v.push(format!("duplicate location id '{}'", l.id));
        }
        for (race, _) in l.population.iter() {
            if !inst.races.contains(race) {
                v.push(format!("location {}: unknown race '{race}'", l.id));
            }
        }
        if l.total_population() < 1 {
            v.push(format!("location {}: total population must be at least 1", l.id));
        }
    }

    if inst.races.is_empty() {
        v.push("instance must define at least one race".into());
    }

    if inst.distances.len() != inst.parks.len() * inst.locations.len() {
        v.push(format!(
            "distance matrix has {} entries, expected {}",
            inst.distances.len(),
            inst.parks.len() * inst.locations.len()
        ));
    } else {
        for (k, p) in inst.parks.iter().enumerate() {
            for (l, loc) in inst.locations.iter().enumerate() {
                let d = inst.distance(k, l);
                if !d.is_finite() || d < 0.0 {
                    v.push(format!("distance ({}, {}) must be nonnegative, got {d}", p.id, loc.id));
                }
            }
        }
    }

    check_nonneg(&mut v, inst.budget, "budget".into());
    if !inst.max_distance.is_finite() || inst.max_distance <= 0.0 {
        v.push(format!("max_distance must be positive, got {}", inst.max_distance));
    }

    let w = &cfg.weights;
    check_nonneg(&mut v, w.dist_plus, "weight dist_plus".into());
    check_nonneg(&mut v, w.cap_plus, "weight cap_plus".into());
    check_nonneg(&mut v, w.heat_plus, "weight heat_plus".into());
    check_nonneg(&mut v, w.heat_minus, "weight heat_minus".into());
    check_nonneg(&mut v, w.tree_plus, "weight tree_plus".into());
    check_nonneg(&mut v, w.tree_minus, "weight tree_minus".into());
    let n = &cfg.normalizations;
    check_nonneg(&mut v, n.dist, "normalization dist".into());
    check_nonneg(&mut v, n.cap, "normalization cap".into());
    check_nonneg(&mut v, n.heat, "normalization heat".into());
    check_nonneg(&mut v, n.tree, "normalization tree".into());
    if !(cfg.heat_range.0 <= cfg.heat_range.1) {
        v.push(format!("heat_range lower bound {} exceeds {}", cfg.heat_range.0, cfg.heat_range.1));
    }
    if !(cfg.tree_range.0 <= cfg.tree_range.1) {
        v.push(format!("tree_range lower bound {} exceeds {}", cfg.tree_range.0, cfg.tree_range.1));
    }
    for (race, q) in &cfg.emphasis {
        if !inst.races.contains(race) {
            v.push(format!("emphasis names unknown race '{race}'"));
        }
        if !q.is_finite() || *q <= 0.0 {
            v.push(format!("race {race}: emphasis must be positive, got {q}"));
        }
    }

    v
}

// ---------------------------------------------------------------------------
// Population preparation

/// Redistributes per-race counts from an old set of groups onto a new one,
/// proportionally to the overlap fraction of each (old, new) pair. Fractions
/// for one old group may sum to less than 1; the remainder falls outside
/// every new group and is dropped.
pub fn reallocate_population(
    old_counts: &BTreeMap<String, BTreeMap<String, f64>>,
    overlap: &BTreeMap<(String, String), f64>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, InstanceError> {
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for ((old, _), fraction) in overlap {
        if !fraction.is_finite() || *fraction < 0.0 || *fraction > 1.0 {
            return Err(InstanceError::Data(format!(
                "overlap fraction for group '{old}' must be in [0, 1], got {fraction}"
            )));
        }
        *sums.entry(old.as_str()).or_insert(0.0) += fraction;
    }
    for (old, total) in sums {
        if total > 1.0 + 1e-9 {
            return Err(InstanceError::Data(format!(
                "overlap fractions for group '{old}' sum to {total}, above 1"
            )));
        }
    }

    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((old, new), fraction) in overlap {
        let Some(counts) = old_counts.get(old) else { continue };
        let entry = out.entry(new.clone()).or_default();
        for (race, count) in counts {
            *entry.entry(race.clone()).or_insert(0.0) += count * fraction;
        }
    }
    Ok(out)
}

/// Scales each location's counts by its in-area fraction (1 when absent)
/// and drops locations whose scaled total falls below `min_pop`.
pub fn clip_and_filter(
    counts: &BTreeMap<String, BTreeMap<String, f64>>,
    area_fraction: &BTreeMap<String, f64>,
    min_pop: f64,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, InstanceError> {
    for (loc, fraction) in area_fraction {
        if !fraction.is_finite() || *fraction <= 0.0 || *fraction > 1.0 {
            return Err(InstanceError::Data(format!(
                "area fraction for location '{loc}' must be in (0, 1], got {fraction}"
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (loc, by_race) in counts {
        let fraction = area_fraction.get(loc).copied().unwrap_or(1.0);
        let scaled: BTreeMap<String, f64> =
            by_race.iter().map(|(race, count)| (race.clone(), count * fraction)).collect();
        let total: f64 = scaled.values().sum();
        if total >= min_pop {
            out.insert(loc.clone(), scaled);
        }
    }
    Ok(out)
}
