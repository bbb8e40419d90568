//! Output writers: JSON artifacts, the long-format deviation report, the
//! wide-format analysis series, and the parks map.
//!
//! Everything here is deterministic: floats go through Rust's shortest
//! round-trip `Display`, row order follows instance order, and no writer
//! consults the clock.

use std::path::Path;

use serde::Serialize;

use parkopt::instance::ParkInstance;
use parkopt::milp::{CategoryBreakdown, DeviationReport};
use parkopt::solve::SolutionPoint;

use crate::Failure;

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Failure::io(format!("cannot serialize {}: {err}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", path.display())))
}

fn categories(breakdown: &CategoryBreakdown) -> [(&'static str, f64); 4] {
    [
        ("distance", breakdown.distance),
        ("capacity", breakdown.capacity),
        ("heat", breakdown.heat),
        ("tree", breakdown.tree),
    ]
}

/// report.csv: long format with the stable schema `metric,entity,race,value`.
/// `entity` is a category name or location id where applicable.
pub(crate) fn write_report_csv(path: &Path, report: &DeviationReport) -> Result<(), Failure> {
    let mut rows: Vec<[String; 4]> = Vec::new();
    let mut push = |metric: &str, entity: &str, race: &str, value: String| {
        rows.push([metric.to_string(), entity.to_string(), race.to_string(), value]);
    };

    for (race, alpha) in &report.alpha {
        push("alpha", "", race, alpha.to_string());
    }
    push("alpha_max", "", "", report.alpha_max.to_string());
    push("total", "", "", report.total.to_string());
    for (category, value) in categories(&report.by_category) {
        push("weighted_by_category", category, "", value.to_string());
    }
    for (race, breakdown) in &report.by_category_per_race {
        for (category, value) in categories(breakdown) {
            push("weighted_by_category", category, race, value.to_string());
        }
    }
    for (category, value) in categories(&report.category_share) {
        push("category_share", category, "", value.to_string());
    }
    for (race, share) in &report.group_share {
        push("group_share", "", race, share.to_string());
    }
    push("zero_total", "", "", u8::from(report.zero_total).to_string());
    for (location, dev) in &report.distance_dev {
        push("distance_deviation", location, "", dev.to_string());
    }
    push("distance_deviation_avg", "", "", report.distance_dev_avg.to_string());
    push("distance_deviation_max", "", "", report.distance_dev_max.to_string());
    for (location, dev) in &report.overcrowding {
        push("overcrowding", location, "", dev.to_string());
    }
    push("overcrowding_avg", "", "", report.overcrowding_avg.to_string());
    push("overcrowding_max", "", "", report.overcrowding_max.to_string());

    let header = ["metric", "entity", "race", "value"].map(str::to_string).to_vec();
    write_series_csv(path, &header, &rows.into_iter().map(Vec::from).collect::<Vec<_>>())
}

/// The per-report columns shared by every analysis series.
pub(crate) fn report_header(races: &[String]) -> Vec<String> {
    let mut header = vec![
        "alpha_max".to_string(),
        "weighted_total".to_string(),
        "wd_distance".to_string(),
        "wd_capacity".to_string(),
        "wd_heat".to_string(),
        "wd_tree".to_string(),
    ];
    header.extend(races.iter().map(|race| format!("alpha:{race}")));
    header.extend(
        ["distance_dev_avg", "distance_dev_max", "overcrowding_avg", "overcrowding_max"]
            .map(str::to_string),
    );
    header
}

pub(crate) fn report_columns(report: &DeviationReport) -> Vec<String> {
    let mut row = vec![
        report.alpha_max.to_string(),
        report.total.to_string(),
        report.by_category.distance.to_string(),
        report.by_category.capacity.to_string(),
        report.by_category.heat.to_string(),
        report.by_category.tree.to_string(),
    ];
    row.extend(report.alpha.iter().map(|(_, alpha)| alpha.to_string()));
    row.push(report.distance_dev_avg.to_string());
    row.push(report.distance_dev_max.to_string());
    row.push(report.overcrowding_avg.to_string());
    row.push(report.overcrowding_max.to_string());
    row
}

pub(crate) fn write_series_csv(
    path: &Path,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let fail = |err: csv::Error| Failure::io(format!("cannot write {}: {err}", path.display()));
    let mut writer = csv::Writer::from_path(path)
        .map_err(|err| Failure::io(format!("cannot create {}: {err}", path.display())))?;
    writer.write_record(header).map_err(fail)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writer.write_record(row).map_err(fail)?;
    }
    writer
        .flush()
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", path.display())))
}

/// RFC 7946 FeatureCollection of the parks that have coordinates: one Point
/// per park with `{id, existing, selected, assigned_population}`. Returns
/// `None` when no park has coordinates — maps are presentation metadata and
/// never required.
pub(crate) fn selected_parks_geojson(
    inst: &ParkInstance,
    point: &SolutionPoint,
) -> Option<serde_json::Value> {
    let mut assigned = vec![0u64; inst.parks.len()];
    for (location, park) in &point.assignment {
        let l = inst.location_index(location).expect("solution ids come from the instance");
        let k = inst.park_index(park).expect("solution ids come from the instance");
        assigned[k] += inst.locations[l].total_population();
    }
    let features: Vec<serde_json::Value> = inst
        .parks
        .iter()
        .enumerate()
        .filter_map(|(k, park)| {
            let (lon, lat) = park.coords?;
            Some(serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [lon, lat] },
                "properties": {
                    "id": park.id,
                    "existing": park.existing,
                    "selected": point.opened.contains(&park.id),
                    "assigned_population": assigned[k],
                },
            }))
        })
        .collect();
    if features.is_empty() {
        return None;
    }
    Some(serde_json::json!({ "type": "FeatureCollection", "features": features }))
}
