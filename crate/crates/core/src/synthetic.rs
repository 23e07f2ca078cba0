//! Seeded templated corpus with the same shape as the real data: agency feed
//! posts and public posts, five transportation sub-classes plus unrelated
//! chatter, street intersections in the text and an occasional geo point.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Corpus, GeoPoint, Message, Tier2};

/// `(text form A, text form B, borough, lat, lon)`.
pub const INTERSECTIONS: &[(&str, &str, &str, f64, f64)] = &[
    ("Bronx River Pkwy", "E 177th St", "BRONX", 40.8382, -73.8737),
    ("Boston Rd", "E 177th St", "BRONX", 40.8406, -73.8797),
    ("Cross Bronx Expwy", "Jerome Ave", "BRONX", 40.8437, -73.9116),
    ("Grand Ave", "69th St", "QUEENS", 40.7267, -73.8962),
    ("Queens Blvd", "Woodhaven Blvd", "QUEENS", 40.7330, -73.8697),
    ("Northern Blvd", "Junction Blvd", "QUEENS", 40.7557, -73.8707),
    ("Flatbush Ave", "Atlantic Ave", "BROOKLYN", 40.6843, -73.9777),
    ("Ocean Pkwy", "Kings Hwy", "BROOKLYN", 40.6056, -73.9686),
    ("Broadway", "W 42nd St", "MANHATTAN", 40.7563, -73.9865),
    ("5th Ave", "E 59th St", "MANHATTAN", 40.7637, -73.9730),
    ("Hylan Blvd", "New Dorp Ln", "STATEN ISLAND", 40.5728, -74.1107),
];

pub const NOISE_TOKENS: &[&str] = &[
    "nyc", "today", "update", "now", "please", "morning", "area", "avoid", "expect", "still",
];

pub fn class_keywords(c: Tier2) -> &'static [&'static str] {
    match c {
        Tier2::Construction => &[
            "construction", "roadwork", "crews", "paving", "repair", "scaffolding", "milling", "resurfacing",
            "utility", "closure",
        ],
        Tier2::TrafficOperations => &[
            "traffic", "congestion", "delays", "slow", "heavy", "jam", "volume", "backed", "gridlock", "signal",
        ],
        Tier2::Incident => &[
            "accident", "crash", "collision", "disabled", "injuries", "overturned", "fire", "police", "ambulance",
            "stalled",
        ],
        Tier2::SpecialEvents => &[
            "parade", "marathon", "concert", "game", "festival", "stadium", "celebration", "fans", "rally",
            "ceremony",
        ],
        Tier2::OtherEvents => &[
            "weather", "flooding", "snow", "ice", "alert", "advisory", "rain", "fog", "tree", "outage",
        ],
    }
}

pub const OTHER_TOPIC_WORDS: &[&str] = &[
    "pizza", "coffee", "movie", "birthday", "music", "happy", "love", "friends", "dinner", "weekend", "lunch",
    "shopping", "photo", "album", "gym", "beach", "book", "class", "party", "vacation",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Transportation messages per sub-class.
    pub per_class: usize,
    pub non_transportation: usize,
    /// Share of content tokens drawn from the class-independent noise list.
    pub noise_fraction: f64,
    /// Chance that a keyword slot is filled from another sub-class.
    pub cross_talk: f64,
    /// Share of public transportation posts carrying a geo point.
    pub geo_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            per_class: 120,
            non_transportation: 200,
            noise_fraction: 0.2,
            cross_talk: 0.15,
            geo_fraction: 0.3,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty list")
}

fn content_tokens(rng: &mut ChaCha8Rng, class: Option<Tier2>, cfg: &SyntheticConfig) -> Vec<String> {
    let n = rng.random_range(4..=6);
    (0..n)
        .map(|_| {
            if rng.random_bool(cfg.noise_fraction) {
                return pick(rng, NOISE_TOKENS).to_string();
            }
            match class {
                None => pick(rng, OTHER_TOPIC_WORDS).to_string(),
                Some(c) => {
                    let source = if rng.random_bool(cfg.cross_talk) {
                        *Tier2::ALL.choose(rng).expect("classes")
                    } else {
                        c
                    };
                    pick(rng, class_keywords(source)).to_string()
                }
            }
        })
        .collect()
}

fn location_phrase(rng: &mut ChaCha8Rng) -> (String, usize) {
    let i = rng.random_range(0..INTERSECTIONS.len());
    let (a, b, ..) = INTERSECTIONS[i];
    let text = match rng.random_range(0..3) {
        0 => format!("on {a} at {b}"),
        1 => format!("at {a} & {b}"),
        _ => format!("near {a}/{b}"),
    };
    (text, i)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Deterministic corpus for `cfg`; labels are attached to every message.
pub fn generate(cfg: &SyntheticConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plan: Vec<Option<Tier2>> = Vec::new();
    for c in Tier2::ALL {
        plan.extend(std::iter::repeat_n(Some(c), cfg.per_class));
    }
    plan.extend(std::iter::repeat_n(None, cfg.non_transportation));
    let mut messages = Vec::with_capacity(plan.len());
    for (i, class) in plan.into_iter().enumerate() {
        let mut toks = content_tokens(&mut rng, class, cfg);
        let user: String;
        let mut geo = None;
        let text = if let Some(c) = class {
            let (loc, which) = location_phrase(&mut rng);
            let roll: f64 = rng.random();
            if roll < 0.3 {
                user = "511NY".into();
                format!("{} {loc} {}", capitalize(class_keywords(c)[0]), toks.join(" "))
            } else if roll < 0.5 {
                user = "TotalTrafficNYC".into();
                format!("{} {loc} #traffic", capitalize(&toks.join(" ")))
            } else {
                user = format!("user{}", rng.random_range(100..1000));
                let at = rng.random_range(0..=toks.len());
                toks.insert(at, loc);
                if rng.random_bool(cfg.geo_fraction) {
                    let (_, _, _, lat, lon) = INTERSECTIONS[which];
                    let jitter = |r: &mut ChaCha8Rng| (r.random::<f64>() - 0.5) * 0.01;
                    geo = GeoPoint::new(lat + jitter(&mut rng), lon + jitter(&mut rng)).ok();
                }
                let mut t = toks.join(" ");
                if rng.random_bool(0.3) {
                    t.push_str(" !!");
                }
                t
            }
        } else {
            user = format!("user{}", rng.random_range(100..1000));
            let mut t = toks.join(" ");
            if rng.random_bool(0.4) {
                t.push_str(" :)");
            }
            t
        };
        let label = match class {
            Some(c) => ClassLabel::transportation(Some(c)),
            None => ClassLabel::non_transportation(),
        };
        let mut m = Message::new(format!("syn-{i:05}"), text)
            .expect("generated text is non-empty")
            .with_user(user)
            .with_label(label);
        m.created_at = 1_484_006_400 + 37 * i as i64;
        if let Some(g) = geo {
            m = m.with_geo(g);
        }
        messages.push(m);
    }
    Corpus::new(messages)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let cfg = SyntheticConfig {
            per_class: 10,
            non_transportation: 7,
            ..SyntheticConfig::default()
        };
        let a = generate(&cfg);
        assert_eq!(a.len(), 57);
        assert_eq!(a.messages(), generate(&cfg).messages());
        assert_eq!(a.labeled_count(), 57);
    }
}
