//! From matched street names to coordinates.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{normalize_street, Gazetteer, StreetRecord};
use crate::corpus::GeoPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetMatch {
    pub street: StreetRecord,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveMethod {
    Intersection,
    SingleStreetFallback,
    GeoField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoCandidate {
    pub raw_span: String,
    pub matched_streets: Vec<StreetMatch>,
    pub borough: Option<String>,
    /// Several boroughs remain possible.
    pub ambiguous: bool,
}

impl GeoCandidate {
    pub fn best_score(&self) -> f64 {
        self.matched_streets.first().map_or(0.0, |m| m.score)
    }

    fn boroughs(&self) -> BTreeSet<&str> {
        self.matched_streets.iter().map(|m| m.street.borough.as_str()).collect()
    }
}

/// Scores each span against the gazetteer, keeping matches at or above
/// `alpha`, then narrows boroughs using the other spans of the message.
pub fn match_streets(spans: &[String], gaz: &Gazetteer, alpha: f64) -> Result<Vec<GeoCandidate>> {
    if gaz.is_empty() {
        return Err(Error::Empty("gazetteer"));
    }
    if !(0.0..=100.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 100]")));
    }
    let mut cands: Vec<GeoCandidate> = spans
        .iter()
        .map(|s| GeoCandidate {
            raw_span: s.clone(),
            matched_streets: gaz.lookup(s, alpha),
            borough: None,
            ambiguous: false,
        })
        .filter(|c| !c.matched_streets.is_empty())
        .collect();
    let sets: Vec<BTreeSet<String>> = cands
        .iter()
        .map(|c| c.boroughs().into_iter().map(String::from).collect())
        .collect();
    for (i, cand) in cands.iter_mut().enumerate() {
        let own = &sets[i];
        if own.len() == 1 {
            cand.borough = own.iter().next().cloned();
            continue;
        }
        let shared = cand
            .matched_streets
            .iter()
            .map(|m| &m.street.borough)
            .find(|b| sets.iter().enumerate().any(|(j, s)| j != i && s.contains(*b)))
            .cloned();
        match shared {
            Some(b) => {
                cand.matched_streets.retain(|m| m.street.borough == b);
                cand.borough = Some(b);
            }
            None => cand.ambiguous = true,
        }
    }
    Ok(cands)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FallbackQuery {
    pub street_a: String,
    pub street_b: Option<String>,
    pub borough: String,
}

/// External coordinate source consulted when the local intersection table
/// has no answer. `Ok(None)` means "not found"; `Err` is a transport failure.
pub trait FallbackClient: Send + Sync {
    fn lookup(&self, query: &FallbackQuery) -> std::result::Result<Option<GeoPoint>, String>;

    /// Whether two-street queries are meaningful for this client.
    fn answers_intersections(&self) -> bool {
        false
    }
}

/// Street centroids from a local CSV (name,borough,lat,lon).
#[derive(Debug, Clone, Default)]
pub struct CentroidTable {
    points: HashMap<(String, String), GeoPoint>,
}

impl CentroidTable {
    pub fn new(rows: impl IntoIterator<Item = (String, String, f64, f64)>) -> Result<Self> {
        let mut points = HashMap::new();
        for (name, borough, lat, lon) in rows {
            points.insert((normalize_street(&name), borough.trim().to_uppercase()), GeoPoint::new(lat, lon)?);
        }
        Ok(CentroidTable { points })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path.display().to_string(), e))?;
        let rows = r
            .deserialize::<(String, String, f64, f64)>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path.display().to_string(), e))?;
        CentroidTable::new(rows)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl FallbackClient for CentroidTable {
    fn lookup(&self, q: &FallbackQuery) -> std::result::Result<Option<GeoPoint>, String> {
        Ok(self
            .points
            .get(&(normalize_street(&q.street_a), q.borough.trim().to_uppercase()))
            .copied())
    }
}

/// HTTP client for `GET {base}/intersection?street_a=..&street_b=..&borough=..`
/// answering `{"lat": .., "lon": ..}`, or 404 when unknown.
pub struct HttpFallback {
    base_url: String,
    agent: ureq::Agent,
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
}

#[derive(Deserialize)]
struct HttpPoint {
    lat: f64,
    lon: f64,
}

impl HttpFallback {
    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpFallback {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
        }
    }

    fn request(&self, q: &FallbackQuery) -> std::result::Result<Option<GeoPoint>, String> {
        let url = format!("{}/intersection", self.base_url);
        let mut resp = self
            .agent
            .get(&url)
            .query("street_a", &q.street_a)
            .query("street_b", q.street_b.as_deref().unwrap_or(""))
            .query("borough", &q.borough)
            .call()
            .map_err(|e| e.to_string())?;
        match resp.status().as_u16() {
            200 => {
                let p: HttpPoint = resp.body_mut().read_json().map_err(|e| e.to_string())?;
                GeoPoint::new(p.lat, p.lon).map(Some).map_err(|e| e.to_string())
            }
            404 => Ok(None),
            s => Err(format!("fallback returned HTTP {s}")),
        }
    }
}

impl FallbackClient for HttpFallback {
    fn lookup(&self, q: &FallbackQuery) -> std::result::Result<Option<GeoPoint>, String> {
        {
            let mut n = self.in_flight.lock().expect("in-flight counter");
            while *n >= self.max_in_flight {
                n = self.slot_free.wait(n).expect("in-flight counter");
            }
            *n += 1;
        }
        let out = self.request(q);
        *self.in_flight.lock().expect("in-flight counter") -= 1;
        self.slot_free.notify_one();
        out
    }

    fn answers_intersections(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoResolution {
    pub point: Option<GeoPoint>,
    pub method: Option<ResolveMethod>,
    /// Normalized street names behind the point.
    pub streets: Vec<String>,
    pub borough: Option<String>,
    pub reason: Option<String>,
    pub transport_errors: Vec<String>,
    pub candidates: Vec<GeoCandidate>,
}

impl GeoResolution {
    fn unresolved(candidates: Vec<GeoCandidate>, reason: String, transport_errors: Vec<String>) -> Self {
        GeoResolution {
            point: None,
            method: None,
            streets: Vec::new(),
            borough: None,
            reason: Some(reason),
            transport_errors,
            candidates,
        }
    }
}

/// Street pairs across distinct candidates that share a borough, best
/// combined score first.
fn street_pairs(cands: &[GeoCandidate]) -> Vec<(f64, &StreetRecord, &StreetRecord)> {
    let mut out = Vec::new();
    for (i, ci) in cands.iter().enumerate() {
        for cj in &cands[i + 1..] {
            for mi in &ci.matched_streets {
                for mj in &cj.matched_streets {
                    if mi.street.borough == mj.street.borough && mi.street.name != mj.street.name {
                        out.push((mi.score + mj.score, &mi.street, &mj.street));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// Geo field first, then a known intersection, then the fallback client.
pub fn resolve(
    geo: Option<GeoPoint>,
    candidates: Vec<GeoCandidate>,
    gaz: &Gazetteer,
    fallback: Option<&dyn FallbackClient>,
) -> GeoResolution {
    if let Some(p) = geo {
        return GeoResolution {
            point: Some(p),
            method: Some(ResolveMethod::GeoField),
            streets: Vec::new(),
            borough: None,
            reason: None,
            transport_errors: Vec::new(),
            candidates,
        };
    }
    if candidates.is_empty() {
        return GeoResolution::unresolved(candidates, "no street matched".into(), Vec::new());
    }
    let pairs = street_pairs(&candidates);
    for (_, a, b) in &pairs {
        if let Some(rec) = gaz.intersection(&a.name, &b.name, &a.borough) {
            let point = GeoPoint { lat: rec.lat, lon: rec.lon };
            return GeoResolution {
                point: Some(point),
                method: Some(ResolveMethod::Intersection),
                streets: vec![a.name.clone(), b.name.clone()],
                borough: Some(a.borough.clone()),
                reason: None,
                transport_errors: Vec::new(),
                candidates,
            };
        }
    }
    let Some(client) = fallback else {
        return GeoResolution::unresolved(candidates, "no intersection record and no fallback client".into(), Vec::new());
    };
    let mut errors = Vec::new();
    if client.answers_intersections() {
        for (_, a, b) in &pairs {
            let q = FallbackQuery {
                street_a: a.name.clone(),
                street_b: Some(b.name.clone()),
                borough: a.borough.clone(),
            };
            match client.lookup(&q) {
                Ok(Some(point)) => {
                    return GeoResolution {
                        point: Some(point),
                        method: Some(ResolveMethod::Intersection),
                        streets: vec![a.name.clone(), b.name.clone()],
                        borough: Some(a.borough.clone()),
                        reason: None,
                        transport_errors: errors,
                        candidates,
                    }
                }
                Ok(None) => {}
                Err(e) => errors.push(e),
            }
        }
    }
    let mut singles: Vec<&StreetMatch> = candidates.iter().flat_map(|c| c.matched_streets.iter()).collect();
    singles.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.street.cmp(&b.street)));
    let mut asked = BTreeSet::new();
    for m in singles {
        if !asked.insert((&m.street.name, &m.street.borough)) {
            continue;
        }
        let q = FallbackQuery {
            street_a: m.street.name.clone(),
            street_b: None,
            borough: m.street.borough.clone(),
        };
        match client.lookup(&q) {
            Ok(Some(point)) => {
                let (name, borough) = (m.street.name.clone(), m.street.borough.clone());
                return GeoResolution {
                    point: Some(point),
                    method: Some(ResolveMethod::SingleStreetFallback),
                    streets: vec![name],
                    borough: Some(borough),
                    reason: None,
                    transport_errors: errors,
                    candidates,
                };
            }
            Ok(None) => {}
            Err(e) => errors.push(e),
        }
    }
    let reason = if errors.is_empty() {
        "fallback had no coordinate".to_string()
    } else {
        "fallback transport error".to_string()
    };
    GeoResolution::unresolved(candidates, reason, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geocode::IntersectionRecord;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn gaz() -> Gazetteer {
        Gazetteer::new(
            vec![
                ("BRONX RIVER PARKWAY".into(), "BRONX".into()),
                ("EAST 177 STREET".into(), "BRONX".into()),
                ("GRAND AVENUE".into(), "QUEENS".into()),
                ("GRAND AVENUE".into(), "BROOKLYN".into()),
                ("FLATBUSH AVENUE".into(), "BROOKLYN".into()),
                ("LINCOLN TUNNEL".into(), "MANHATTAN".into()),
            ],
            vec![IntersectionRecord {
                street_a: "EAST 177 STREET".into(),
                street_b: "BRONX RIVER PARKWAY".into(),
                borough: "BRONX".into(),
                lat: 40.8382,
                lon: -73.8737,
            }],
        )
        .unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_and_threshold() {
        let g = gaz();
        let c = match_streets(&strings(&["LINCOLN TUNNEL"]), &g, 80.0).unwrap();
        assert_eq!(c[0].matched_streets.len(), 1);
        assert_eq!(c[0].matched_streets[0].score, 100.0);
        assert!(match_streets(&strings(&["x"]), &Gazetteer::default(), 80.0).is_err());
    }

    #[test]
    fn shared_borough_disambiguates() {
        let g = gaz();
        let c = match_streets(&strings(&["Grand Ave", "Flatbush Ave"]), &g, 80.0).unwrap();
        assert_eq!(c[0].borough.as_deref(), Some("BROOKLYN"));
        assert_eq!(c[0].matched_streets.len(), 1);
        let alone = match_streets(&strings(&["Grand Ave"]), &g, 80.0).unwrap();
        assert!(alone[0].ambiguous);
        assert_eq!(alone[0].matched_streets.len(), 2);
    }

    #[test]
    fn intersection_then_fallback() {
        let g = gaz();
        let c = match_streets(&strings(&["Bronx River Pkwy Sb", "177th St"]), &g, 80.0).unwrap();
        let r = resolve(None, c, &g, None);
        assert_eq!(r.method, Some(ResolveMethod::Intersection));
        assert_eq!(r.point, Some(GeoPoint { lat: 40.8382, lon: -73.8737 }));

        let table = CentroidTable::new(vec![("Lincoln Tunnel".into(), "Manhattan".into(), 40.7588352, -73.9999574)]).unwrap();
        let c = match_streets(&strings(&["Lincoln Tunnel"]), &g, 80.0).unwrap();
        let r = resolve(None, c.clone(), &g, Some(&table));
        assert_eq!(r.method, Some(ResolveMethod::SingleStreetFallback));
        assert_eq!(r.point, Some(GeoPoint { lat: 40.7588352, lon: -73.9999574 }));

        let none = resolve(None, c.clone(), &g, None);
        assert!(none.point.is_none() && none.reason.is_some());

        let geo = GeoPoint { lat: 40.0, lon: -74.0 };
        assert_eq!(resolve(Some(geo), c, &g, Some(&table)).method, Some(ResolveMethod::GeoField));
    }

    fn one_shot_server(body: &'static str, status: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut s, _)) = listener.accept() {
                let mut buf = [0u8; 2048];
                let _ = s.read(&mut buf);
                let resp = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = s.write_all(resp.as_bytes());
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn http_client_protocol() {
        let q = FallbackQuery {
            street_a: "LINCOLN TUNNEL".into(),
            street_b: None,
            borough: "MANHATTAN".into(),
        };
        let url = one_shot_server(r#"{"lat": 40.7588352, "lon": -73.9999574}"#, "200 OK");
        let c = HttpFallback::new(&url, Duration::from_secs(5), 2);
        assert_eq!(c.lookup(&q).unwrap(), Some(GeoPoint { lat: 40.7588352, lon: -73.9999574 }));

        let url = one_shot_server("{}", "404 Not Found");
        assert_eq!(HttpFallback::new(&url, Duration::from_secs(5), 1).lookup(&q).unwrap(), None);

        let dead = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", dead.local_addr().unwrap());
        drop(dead);
        let g = gaz();
        let c = match_streets(&strings(&["Lincoln Tunnel"]), &g, 80.0).unwrap();
        let r = resolve(None, c, &g, Some(&HttpFallback::new(&url, Duration::from_millis(500), 1)));
        assert!(r.point.is_none());
        assert_eq!(r.transport_errors.len(), 1);
    }
}
