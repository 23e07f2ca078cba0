//! Location extraction, gazetteer matching and coordinate resolution.

pub mod extract;
pub mod grid;
pub mod resolve;
pub mod similarity;
pub mod validate;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{extract_locations, extract_spans, ExtractedSpan};
pub use grid::{density_grid, DensityGrid, Region, DEFAULT_REGION};
pub use resolve::{
    match_streets, resolve, CentroidTable, FallbackClient, GeoCandidate, GeoResolution, HttpFallback, ResolveMethod,
    StreetMatch,
};
pub use similarity::{normalize_street, similarity, street_similarity};
pub use validate::{haversine_miles, percentile, validate_geocoder, DistanceReport, EARTH_RADIUS_MILES};

pub const DEFAULT_ALPHA: f64 = 80.0;

pub const CUE_WORDS: &[&str] = &["on", "at", "approaching", "near", "between", "exit", "/", "&"];
pub const SUFFIXES: &[&str] = &[
    "st", "street", "ave", "av", "avenue", "blvd", "boulevard", "pkwy", "parkway", "expressway", "expwy", "rd", "road",
    "tunnel", "bridge", "airport", "plaza",
];
pub const DIRECTION_WORDS: &[&str] = &["nb", "sb", "eb", "wb"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreetRecord {
    /// Normalized name.
    pub name: String,
    pub borough: String,
    /// Name as written in the source table.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRecord {
    pub street_a: String,
    pub street_b: String,
    pub borough: String,
    pub lat: f64,
    pub lon: f64,
}

fn borough_key(b: &str) -> String {
    b.trim().to_uppercase()
}

fn pair_key(a: &str, b: &str, borough: &str) -> (String, String, String) {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    (borough_key(borough), x.to_string(), y.to_string())
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    streets: Vec<StreetRecord>,
    /// Normalized name length (chars) → street indices.
    by_len: BTreeMap<usize, Vec<usize>>,
    intersections: Vec<IntersectionRecord>,
    by_pair: HashMap<(String, String, String), usize>,
}

impl Gazetteer {
    pub fn new(streets: Vec<(String, String)>, intersections: Vec<IntersectionRecord>) -> Result<Self> {
        let mut g = Gazetteer::default();
        let mut seen = std::collections::HashSet::new();
        for (name, borough) in streets {
            let rec = StreetRecord {
                name: normalize_street(&name),
                borough: borough_key(&borough),
                display: name.trim().to_string(),
            };
            if rec.name.is_empty() {
                return Err(Error::InvalidInput(format!("street name {name:?} is empty after normalization")));
            }
            if seen.insert((rec.name.clone(), rec.borough.clone())) {
                g.by_len.entry(rec.name.chars().count()).or_default().push(g.streets.len());
                g.streets.push(rec);
            }
        }
        for mut rec in intersections {
            rec.street_a = normalize_street(&rec.street_a);
            rec.street_b = normalize_street(&rec.street_b);
            rec.borough = borough_key(&rec.borough);
            let key = pair_key(&rec.street_a, &rec.street_b, &rec.borough);
            if g.by_pair.contains_key(&key) {
                return Err(Error::InvalidInput(format!(
                    "duplicate intersection {} & {} in {}",
                    rec.street_a, rec.street_b, rec.borough
                )));
            }
            g.by_pair.insert(key, g.intersections.len());
            g.intersections.push(rec);
        }
        Ok(g)
    }

    /// Reads `streets.csv` (name,borough) and, when present,
    /// `intersections.csv` (street_a,street_b,borough,lat,lon) from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let streets_path = dir.join("streets.csv");
        let mut streets = Vec::new();
        let mut r = csv::Reader::from_path(&streets_path).map_err(|e| Error::format(streets_path.display().to_string(), e))?;
        for rec in r.deserialize::<(String, String)>() {
            streets.push(rec.map_err(|e| Error::format("streets.csv", e))?);
        }
        let mut intersections = Vec::new();
        let ipath = dir.join("intersections.csv");
        if ipath.exists() {
            let mut r = csv::Reader::from_path(&ipath).map_err(|e| Error::format("intersections.csv", e))?;
            for rec in r.deserialize::<IntersectionRecord>() {
                intersections.push(rec.map_err(|e| Error::format("intersections.csv", e))?);
            }
        }
        Gazetteer::new(streets, intersections)
    }

    pub fn is_empty(&self) -> bool {
        self.streets.is_empty()
    }

    pub fn streets(&self) -> &[StreetRecord] {
        &self.streets
    }

    pub fn intersections(&self) -> &[IntersectionRecord] {
        &self.intersections
    }

    pub fn intersection(&self, a: &str, b: &str, borough: &str) -> Option<&IntersectionRecord> {
        self.by_pair.get(&pair_key(a, b, borough)).map(|&i| &self.intersections[i])
    }

    /// Streets whose normalized length could reach `alpha` against a query
    /// of `len` chars.
    pub fn candidates(&self, len: usize, alpha: f64) -> impl Iterator<Item = &StreetRecord> {
        let (lo, hi) = similarity::length_band(len, alpha);
        self.by_len
            .range(lo..=hi)
            .flat_map(|(_, idx)| idx.iter().map(|&i| &self.streets[i]))
    }

    /// All records scoring at least `alpha` against `span`, best first.
    pub fn lookup(&self, span: &str, alpha: f64) -> Vec<StreetMatch> {
        let q: Vec<char> = normalize_street(span).chars().collect();
        if q.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<StreetMatch> = self
            .candidates(q.len(), alpha)
            .filter_map(|rec| {
                let b: Vec<char> = rec.name.chars().collect();
                let score = similarity::similarity_chars(&q, &b);
                (score >= alpha).then(|| StreetMatch {
                    street: rec.clone(),
                    score,
                })
            })
            .collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.street.cmp(&b.street)));
        out
    }

    /// Best score over the whole gazetteer (0 when nothing reaches `alpha`).
    pub fn best_score(&self, span: &str, alpha: f64) -> f64 {
        self.lookup(span, alpha).first().map_or(0.0, |m| m.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> Gazetteer {
        Gazetteer::new(
            vec![
                ("GRAND AVENUE".into(), "Queens".into()),
                ("Grand Ave".into(), "queens".into()),
                ("BOSTON ROAD".into(), "Bronx".into()),
            ],
            vec![IntersectionRecord {
                street_a: "Boston Rd".into(),
                street_b: "Grand Avenue".into(),
                borough: "Bronx".into(),
                lat: 40.8,
                lon: -73.9,
            }],
        )
        .unwrap()
    }

    #[test]
    fn dedup_and_pair_lookup() {
        let g = gaz();
        assert_eq!(g.streets().len(), 2);
        assert!(g.intersection("AVENUE GRAND", "BOSTON ROAD", "bronx").is_some());
        assert!(g.intersection("AVENUE GRAND", "BOSTON ROAD", "QUEENS").is_none());
    }

    #[test]
    fn pruned_lookup_equals_scan() {
        let g = gaz();
        for span in ["Grand Ave", "Grnd Av", "Boston", "Boston Road North", "x"] {
            let fast = g.lookup(span, 80.0);
            let slow: Vec<_> = g
                .streets()
                .iter()
                .filter(|r| street_similarity(span, &r.display) >= 80.0)
                .collect();
            assert_eq!(fast.len(), slow.len(), "{span}");
        }
    }

    #[test]
    fn duplicate_intersection_rejected() {
        let rec = IntersectionRecord {
            street_a: "A ST".into(),
            street_b: "B ST".into(),
            borough: "X".into(),
            lat: 0.0,
            lon: 0.0,
        };
        let mut swapped = rec.clone();
        std::mem::swap(&mut swapped.street_a, &mut swapped.street_b);
        assert!(Gazetteer::new(vec![], vec![rec, swapped]).is_err());
    }
}
