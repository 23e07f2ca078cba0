//! Per-cell message counts over a local equirectangular projection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::validate::EARTH_RADIUS_MILES;
use crate::corpus::GeoPoint;
use crate::error::{Error, Result};

const FEET_PER_MILE: f64 = 5280.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

pub const DEFAULT_REGION: Region = Region {
    south: 40.49,
    west: -74.25,
    north: 40.92,
    east: -73.70,
};

impl Region {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self> {
        GeoPoint::new(south, west)?;
        GeoPoint::new(north, east)?;
        if south >= north || west >= east {
            return Err(Error::InvalidInput("region corners out of order".into()));
        }
        Ok(Region { south, west, north, east })
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.south..=self.north).contains(&p.lat) && (self.west..=self.east).contains(&p.lon)
    }

    fn feet_per_degree(&self) -> (f64, f64) {
        let lat_ft = EARTH_RADIUS_MILES * FEET_PER_MILE * std::f64::consts::PI / 180.0;
        let mid = ((self.south + self.north) / 2.0).to_radians();
        (lat_ft * mid.cos(), lat_ft)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub region: Region,
    pub cell_feet: f64,
    /// `(column, row)` from the south-west corner → class → count.
    pub cells: BTreeMap<(i64, i64), BTreeMap<String, u64>>,
}

/// Bins labelled points into square cells `cell_feet` on a side, projected
/// around `region`.
pub fn density_grid(points: &[(GeoPoint, String)], cell_feet: f64, region: Region) -> Result<DensityGrid> {
    if !(cell_feet > 0.0) {
        return Err(Error::InvalidInput(format!("cell size must be > 0, got {cell_feet}")));
    }
    let (fx, fy) = region.feet_per_degree();
    let mut cells: BTreeMap<(i64, i64), BTreeMap<String, u64>> = BTreeMap::new();
    for (p, class) in points {
        GeoPoint::new(p.lat, p.lon)?;
        let x = (p.lon - region.west) * fx;
        let y = (p.lat - region.south) * fy;
        let key = ((x / cell_feet).floor() as i64, (y / cell_feet).floor() as i64);
        *cells.entry(key).or_default().entry(class.clone()).or_default() += 1;
    }
    Ok(DensityGrid {
        region,
        cell_feet,
        cells,
    })
}

impl DensityGrid {
    pub fn total(&self) -> u64 {
        self.cells.values().flat_map(|m| m.values()).sum()
    }

    /// RFC 7946 FeatureCollection, one polygon per non-empty cell.
    pub fn to_geojson(&self) -> Value {
        let (fx, fy) = self.region.feet_per_degree();
        let (dlon, dlat) = (self.cell_feet / fx, self.cell_feet / fy);
        let features: Vec<Value> = self
            .cells
            .iter()
            .map(|(&(i, j), counts)| {
                let w = self.region.west + i as f64 * dlon;
                let s = self.region.south + j as f64 * dlat;
                let (e, n) = (w + dlon, s + dlat);
                let total: u64 = counts.values().sum();
                json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]],
                    },
                    "properties": {
                        "cell": [i, j],
                        "total": total,
                        "counts": counts,
                    },
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_shared_cells() {
        let p = GeoPoint { lat: 40.7, lon: -73.9 };
        let g = density_grid(&[(p, "incident".into())], 100.0, DEFAULT_REGION).unwrap();
        assert_eq!(g.cells.len(), 1);
        assert_eq!(g.total(), 1);
        let q = GeoPoint { lat: 40.70001, lon: -73.90001 };
        let g = density_grid(&[(p, "incident".into()), (q, "construction".into())], 100.0, DEFAULT_REGION).unwrap();
        assert_eq!(g.cells.len(), 1);
        assert_eq!(g.total(), 2);
        let fc = g.to_geojson();
        assert_eq!(fc["features"][0]["properties"]["total"], 2);
    }

    #[test]
    fn empty_and_bad_cell() {
        let g = density_grid(&[], 100.0, DEFAULT_REGION).unwrap();
        assert_eq!(g.to_geojson()["features"].as_array().unwrap().len(), 0);
        assert!(density_grid(&[], 0.0, DEFAULT_REGION).is_err());
        assert!(Region::new(40.49, -74.25, 40.92, -73.70).is_ok());
    }
}
