//! Parameter derivation from raw site attributes.
//!
//! Candidate parks arrive as parcels with acreage, appraised values, and
//! environmental averages; the model wants capacities, acquisition costs,
//! and one-sided deviations from an allowable range. The helpers here do
//! those conversions and nothing else.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AccessError {
    #[error("acreage must be positive, got {0}")]
    NonpositiveAcreage(f64),
    #[error("range lower bound {lo} exceeds upper bound {hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("cost zone '{0}' has no parcel with a listed land value")]
    NoPricedParcels(String),
    #[error("no cost basis: parcel has no listed value and no zone rate")]
    NoCostBasis,
}

/// One-sided deviations of a scalar average from an allowable range.
///
/// At most one side is nonzero: a single average cannot sit above and below
/// the same range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeDeviation {
    /// Units above the upper bound (0 when inside or below the range).
    pub excess: f64,
    /// Units below the lower bound (0 when inside or above the range).
    pub deficit: f64,
}

/// Splits an average into (excess above `hi`, deficit below `lo`).
pub fn range_deviations(avg: f64, lo: f64, hi: f64) -> Result<RangeDeviation, AccessError> {
    if !avg.is_finite() {
        return Err(AccessError::NotFinite(avg));
    }
    if !(lo <= hi) {
        return Err(AccessError::EmptyRange { lo, hi });
    }
    Ok(RangeDeviation {
        excess: (avg - hi).max(0.0),
        deficit: (lo - avg).max(0.0),
    })
}

/// Serving capacity of a park given its acreage: one hundred residents per
/// acre, rounded down to whole persons.
pub fn capacity_from_acres(acres: f64) -> Result<u64, AccessError> {
    if !acres.is_finite() {
        return Err(AccessError::NotFinite(acres));
    }
    if acres <= 0.0 {
        return Err(AccessError::NonpositiveAcreage(acres));
    }
    Ok((acres * 100.0).floor() as u64)
}

/// One parcel inside a cost zone. `land_value` is the appraised total value
/// when one is on record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parcel {
    pub acres: f64,
    pub land_value: Option<f64>,
}

/// A group of parcels assumed to share a per-acre land price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostZone {
    pub id: String,
    pub parcels: Vec<Parcel>,
}

/// Average per-acre price over the zone's parcels that have a listed value.
pub fn zone_average_cost(zone: &CostZone) -> Result<f64, AccessError> {
    let mut acres = 0.0;
    let mut value = 0.0;
    for parcel in &zone.parcels {
        if let Some(v) = parcel.land_value {
            if parcel.acres <= 0.0 || !parcel.acres.is_finite() {
                return Err(AccessError::NonpositiveAcreage(parcel.acres));
            }
            if !v.is_finite() {
                return Err(AccessError::NotFinite(v));
            }
            acres += parcel.acres;
            value += v;
        }
    }
    if acres == 0.0 {
        return Err(AccessError::NoPricedParcels(zone.id.clone()));
    }
    Ok(value / acres)
}

/// Acquisition cost of one candidate site.
///
/// A listed appraisal wins outright; otherwise the zone's average per-acre
/// rate is applied to the parcel's acreage. Existing parks cost nothing
/// regardless of appraisal.
pub fn estimate_cost(
    listed_value: Option<f64>,
    acres: f64,
    zone_rate: Option<f64>,
    existing: bool,
) -> Result<f64, AccessError> {
    if existing {
        return Ok(0.0);
    }
    if let Some(v) = listed_value {
        if !v.is_finite() {
            return Err(AccessError::NotFinite(v));
        }
        return Ok(v);
    }
    if acres <= 0.0 || !acres.is_finite() {
        return Err(AccessError::NonpositiveAcreage(acres));
    }
    match zone_rate {
        Some(rate) if rate.is_finite() => Ok(rate * acres),
        Some(rate) => Err(AccessError::NotFinite(rate)),
        None => Err(AccessError::NoCostBasis),
    }
}
