//! Distances between text-derived and reported coordinates.

use serde::{Deserialize, Serialize};

use super::{extract_locations, match_streets, resolve, FallbackClient, Gazetteer};
use crate::corpus::{GeoPoint, Message};
use crate::error::{Error, Result};

pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

fn check(p: &GeoPoint) -> Result<()> {
    GeoPoint::new(p.lat, p.lon).map(|_| ())
}

/// Great-circle distance in miles.
pub fn haversine_miles(p1: &GeoPoint, p2: &GeoPoint) -> Result<f64> {
    check(p1)?;
    check(p2)?;
    let (la1, la2) = (p1.lat.to_radians(), p2.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (p2.lon - p1.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin())
}

/// Linear interpolation between order statistics at `h = (n − 1)p`.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single distance).
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    pub unresolved: usize,
    pub distances: Vec<f64>,
}

impl DistanceReport {
    pub fn from_distances(distances: &[f64], unresolved: usize) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::Empty("resolved geo-tagged messages"));
        }
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (sorted.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let q = |p| percentile(&sorted, p).expect("non-empty");
        Ok(DistanceReport {
            n,
            mean,
            std,
            min: sorted[0],
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            max: sorted[n - 1],
            unresolved,
            distances: distances.to_vec(),
        })
    }
}

/// Geocodes the text of each geo-tagged message (ignoring its geo field)
/// and measures the distance to the reported point.
pub fn validate_geocoder(
    messages: &[Message],
    gaz: &Gazetteer,
    alpha: f64,
    fallback: Option<&dyn FallbackClient>,
) -> Result<DistanceReport> {
    let mut distances = Vec::new();
    let mut unresolved = 0;
    for msg in messages {
        let Some(truth) = msg.geo else { continue };
        let spans = extract_locations(msg, gaz, alpha);
        let cands = match_streets(&spans, gaz, alpha)?;
        match resolve(None, cands, gaz, fallback).point {
            Some(p) => distances.push(haversine_miles(&p, &truth)?),
            None => unresolved += 1,
        }
    }
    DistanceReport::from_distances(&distances, unresolved)
}
