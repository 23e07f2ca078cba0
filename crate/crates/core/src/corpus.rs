//! Message records, gold labels, ingestion and seeded train/test splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier1 {
    NonTransportation,
    Transportation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier2 {
    Construction,
    TrafficOperations,
    Incident,
    SpecialEvents,
    OtherEvents,
}

impl Tier1 {
    pub const ALL: [Tier1; 2] = [Tier1::NonTransportation, Tier1::Transportation];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier1::NonTransportation => "non_transportation",
            Tier1::Transportation => "transportation",
        }
    }
}

impl Tier2 {
    pub const ALL: [Tier2; 5] = [
        Tier2::Construction,
        Tier2::TrafficOperations,
        Tier2::Incident,
        Tier2::SpecialEvents,
        Tier2::OtherEvents,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier2::Construction => "construction",
            Tier2::TrafficOperations => "traffic_operations",
            Tier2::Incident => "incident",
            Tier2::SpecialEvents => "special_events",
            Tier2::OtherEvents => "other_events",
        }
    }
}

fn label_key(s: &str) -> String {
    s.trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect()
}

impl FromStr for Tier1 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match label_key(s).as_str() {
            "transportation" | "transport" | "1" | "true" => Ok(Tier1::Transportation),
            "nontransportation" | "nontransport" | "0" | "false" => Ok(Tier1::NonTransportation),
            _ => Err(Error::InvalidInput(format!("unknown tier-1 label {s:?}"))),
        }
    }
}

impl FromStr for Tier2 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match label_key(s).as_str() {
            "construction" => Ok(Tier2::Construction),
            "trafficoperations" | "trafficoperation" => Ok(Tier2::TrafficOperations),
            "incident" | "incidents" => Ok(Tier2::Incident),
            "specialevents" | "specialevent" => Ok(Tier2::SpecialEvents),
            "otherevents" | "otherevent" | "others" | "other" => Ok(Tier2::OtherEvents),
            _ => Err(Error::InvalidInput(format!("unknown tier-2 label {s:?}"))),
        }
    }
}

/// Two-tier gold label. A sub-class only exists under `Transportation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub tier1: Tier1,
    pub tier2: Option<Tier2>,
}

impl ClassLabel {
    pub fn new(tier1: Tier1, tier2: Option<Tier2>) -> Result<Self> {
        if tier2.is_some() && tier1 != Tier1::Transportation {
            return Err(Error::InvalidInput(
                "tier-2 label requires tier-1 transportation".into(),
            ));
        }
        Ok(ClassLabel { tier1, tier2 })
    }

    pub fn non_transportation() -> Self {
        ClassLabel {
            tier1: Tier1::NonTransportation,
            tier2: None,
        }
    }

    pub fn transportation(sub: Option<Tier2>) -> Self {
        ClassLabel {
            tier1: Tier1::Transportation,
            tier2: sub,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tier2 {
            Some(t2) => write!(f, "{}/{}", self.tier1.as_str(), t2.as_str()),
            None => f.write_str(self.tier1.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidInput(format!(
                "coordinate ({lat}, {lon}) out of range"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub text: String,
    /// Seconds since the Unix epoch, UTC.
    pub created_at: i64,
    pub user: String,
    pub geo: Option<GeoPoint>,
    pub gold_label: Option<ClassLabel>,
}

impl Message {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("message text is empty".into()));
        }
        Ok(Message {
            id: id.into(),
            text,
            created_at: 0,
            user: String::new(),
            geo: None,
            gold_label: None,
        })
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn with_user(mut self, user: impl Into<String>) -> Self {
        self.user = user.into();
        self
    }

    pub fn with_geo(mut self, geo: GeoPoint) -> Self {
        self.geo = Some(geo);
        self
    }
}

/// An ordered message collection. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    messages: Vec<Message>,
    label_counts: BTreeMap<ClassLabel, usize>,
}

impl Corpus {
    pub fn new(messages: Vec<Message>) -> Self {
        let mut label_counts = BTreeMap::new();
        for m in &messages {
            if let Some(l) = m.gold_label {
                *label_counts.entry(l).or_insert(0) += 1;
            }
        }
        Corpus {
            messages,
            label_counts,
        }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn label_counts(&self) -> &BTreeMap<ClassLabel, usize> {
        &self.label_counts
    }

    pub fn labeled_count(&self) -> usize {
        self.label_counts.values().sum()
    }

    pub fn subset(&self, idx: &[usize]) -> Corpus {
        Corpus::new(idx.iter().map(|&i| self.messages[i].clone()).collect())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.messages.iter().map(|m| m.id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    /// 1-based line (JSONL) or record (CSV) number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    created_at: Option<i64>,
    user: Option<String>,
    geo: Option<JsonGeo>,
    label_tier1: Option<String>,
    label_tier2: Option<String>,
}

#[derive(Debug, Deserialize)]
struct JsonGeo {
    lat: f64,
    lon: f64,
}

#[derive(Debug, Serialize)]
struct JsonRecordOut<'a> {
    id: &'a str,
    text: &'a str,
    created_at: i64,
    user: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    geo: Option<GeoPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_tier1: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_tier2: Option<&'static str>,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.trim().is_empty())
}

fn build_message(
    id: Option<String>,
    text: Option<String>,
    created_at: Option<i64>,
    user: Option<String>,
    geo: Option<(f64, f64)>,
    tier1: Option<String>,
    tier2: Option<String>,
) -> std::result::Result<Message, String> {
    let id = id.ok_or("missing id")?;
    let text = non_empty(text).ok_or("missing or empty text")?;
    let geo = match geo {
        Some((lat, lon)) => Some(GeoPoint::new(lat, lon).map_err(|e| e.to_string())?),
        None => None,
    };
    let tier1 = non_empty(tier1)
        .map(|s| s.parse::<Tier1>())
        .transpose()
        .map_err(|e| e.to_string())?;
    let tier2 = non_empty(tier2)
        .map(|s| s.parse::<Tier2>())
        .transpose()
        .map_err(|e| e.to_string())?;
    let gold_label = match (tier1, tier2) {
        (None, None) => None,
        (None, Some(t2)) => Some(ClassLabel::transportation(Some(t2))),
        (Some(t1), t2) => Some(ClassLabel::new(t1, t2).map_err(|e| e.to_string())?),
    };
    Ok(Message {
        id,
        text,
        created_at: created_at.unwrap_or(0),
        user: user.unwrap_or_default(),
        geo,
        gold_label,
    })
}

fn parse_json_line(line: &str) -> std::result::Result<Message, String> {
    let rec: JsonRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = match rec.id {
        Some(serde_json::Value::String(s)) if !s.is_empty() => Some(s),
        Some(serde_json::Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    build_message(
        id,
        rec.text,
        rec.created_at,
        rec.user,
        rec.geo.map(|g| (g.lat, g.lon)),
        rec.label_tier1,
        rec.label_tier2,
    )
}

/// Reads a corpus. Unreadable files are fatal; malformed records are skipped,
/// logged, and reported in [`LoadedCorpus::skipped`].
pub fn load_corpus(path: &Path, format: InputFormat) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut messages = Vec::new();
    let mut skipped = Vec::new();
    match format {
        InputFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match parse_json_line(&line) {
                    Ok(m) => messages.push(m),
                    Err(reason) => skipped.push(SkippedRecord { line: i + 1, reason }),
                }
            }
        }
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = rdr.headers().map_err(|e| Error::format(path.display().to_string(), e))?.clone();
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            let cols = [
                "id", "text", "created_at", "user", "lat", "lon", "label_tier1", "label_tier2",
            ]
            .map(col);
            for (i, rec) in rdr.records().enumerate() {
                let line = i + 1;
                let rec = match rec {
                    Ok(r) => r,
                    Err(e) => {
                        skipped.push(SkippedRecord { line, reason: e.to_string() });
                        continue;
                    }
                };
                let get = |k: usize| {
                    cols[k]
                        .and_then(|c| rec.get(c))
                        .map(str::to_string)
                        .filter(|s| !s.is_empty())
                };
                let parsed = (|| {
                    let created_at = get(2)
                        .map(|s| s.trim().parse::<i64>().map_err(|e| e.to_string()))
                        .transpose()?;
                    let lat = get(4).map(|s| s.trim().parse::<f64>()).transpose().map_err(|e| e.to_string())?;
                    let lon = get(5).map(|s| s.trim().parse::<f64>()).transpose().map_err(|e| e.to_string())?;
                    let geo = match (lat, lon) {
                        (Some(a), Some(b)) => Some((a, b)),
                        (None, None) => None,
                        _ => return Err("geo requires both lat and lon".to_string()),
                    };
                    build_message(get(0), get(1), created_at, get(3), geo, get(6), get(7))
                })();
                match parsed {
                    Ok(m) => messages.push(m),
                    Err(reason) => skipped.push(SkippedRecord { line, reason }),
                }
            }
        }
    }
    for s in &skipped {
        log::warn!("{}:{}: skipped record: {}", path.display(), s.line, s.reason);
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(messages),
        skipped,
    })
}

/// Serializes messages as JSON Lines in the ingestion schema.
pub fn to_jsonl(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        let rec = JsonRecordOut {
            id: &m.id,
            text: &m.text,
            created_at: m.created_at,
            user: &m.user,
            geo: m.geo,
            label_tier1: m.gold_label.map(|l| l.tier1.as_str()),
            label_tier2: m.gold_label.and_then(|l| l.tier2).map(Tier2::as_str),
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable record"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Random,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub mode: SplitMode,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            seed: 0,
            train_fraction: 0.8,
            mode: SplitMode::Random,
        }
    }
}

/// Number of training members for a group of `n` at `fraction`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).min(n)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {fraction} not in (0, 1)"
        )));
    }
    Ok(())
}

/// Seeded random split of `0..n` into sorted `(train, test)` index lists.
pub fn random_split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    if n == 0 {
        return Err(Error::Empty("corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let k = train_size(n, fraction);
    let mut train = idx[..k].to_vec();
    let mut test = idx[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Seeded split that keeps each stratum's proportion within one member.
///
/// `strata[i]` is any ordered key for item `i`; strata with fewer than two
/// members are rejected with their `Debug` name.
pub fn stratified_split_indices<K: Ord + Clone + fmt::Debug>(
    strata: &[K],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    if strata.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in strata.iter().enumerate() {
        groups.entry(k.clone()).or_default().push(i);
    }
    if let Some((k, g)) = groups.iter().find(|(_, g)| g.len() < 2) {
        return Err(Error::TooFewMembers(format!("{k:?}"), format!("{} member", g.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut members) in groups {
        members.shuffle(&mut rng);
        let k = train_size(members.len(), fraction);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits a corpus into `(train, test)`, preserving input order on each side.
pub fn split(corpus: &Corpus, plan: &SplitPlan) -> Result<(Corpus, Corpus)> {
    let (train, test) = match plan.mode {
        SplitMode::Random => random_split_indices(corpus.len(), plan.train_fraction, plan.seed)?,
        SplitMode::Stratified => {
            let strata: Vec<Option<ClassLabel>> =
                corpus.messages().iter().map(|m| m.gold_label).collect();
            stratified_split_indices(&strata, plan.train_fraction, plan.seed)?
        }
    };
    Ok((corpus.subset(&train), corpus.subset(&test)))
}

/// Seeded random under-sampling of `labels` to the minority-class count.
/// Returns the kept indices in ascending order.
pub fn undersample_indices<K: Ord + Clone>(labels: &[K], seed: u64) -> Result<Vec<usize>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in labels.iter().enumerate() {
        groups.entry(k.clone()).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::InvalidInput(
            "under-sampling needs at least two classes".into(),
        ));
    }
    let minority = groups.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for (_, members) in groups {
        if members.len() == minority {
            kept.extend(members);
        } else {
            let picks = rand::seq::index::sample(&mut rng, members.len(), minority);
            kept.extend(picks.into_iter().map(|p| members[p]));
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Balances a labeled corpus by down-sampling every class to the minority count.
pub fn undersample(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let labels = corpus
        .messages()
        .iter()
        .map(|m| {
            m.gold_label
                .ok_or_else(|| Error::InvalidInput(format!("message {} is unlabeled", m.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept = undersample_indices(&labels, seed)?;
    Ok(corpus.subset(&kept))
}
