//! String similarity ratio and street-name normalization.

/// Uppercases and collapses runs of whitespace.
pub fn normalize_basic(s: &str) -> String {
    s.split_whitespace().map(|t| t.to_uppercase()).collect::<Vec<_>>().join(" ")
}

/// Longest common subsequence length over chars.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance with unit insert/delete and substitution cost 2.
pub fn indel_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Ratio `100 · 2m / (a + b)` with `m = (a + b − d) / 2`, on strings that
/// are only uppercased and whitespace-collapsed.
pub fn similarity(x: &str, y: &str) -> f64 {
    let a: Vec<char> = normalize_basic(x).chars().collect();
    let b: Vec<char> = normalize_basic(y).chars().collect();
    similarity_chars(&a, &b)
}

pub(crate) fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let total = a.len() + b.len();
    let d = indel_distance(a, b);
    let m2 = total - d;
    100.0 * m2 as f64 / total as f64
}

const ABBREVIATIONS: &[(&str, &str)] = &[
    ("ST", "STREET"),
    ("STR", "STREET"),
    ("AVE", "AVENUE"),
    ("AV", "AVENUE"),
    ("PKWY", "PARKWAY"),
    ("PKY", "PARKWAY"),
    ("EXPWY", "EXPRESSWAY"),
    ("EXPY", "EXPRESSWAY"),
    ("BLVD", "BOULEVARD"),
    ("RD", "ROAD"),
    ("PL", "PLACE"),
    ("LN", "LANE"),
    ("HWY", "HIGHWAY"),
    ("TPKE", "TURNPIKE"),
];

pub const DIRECTIONS: &[&str] = &["NB", "SB", "EB", "WB"];

fn strip_ordinal(tok: &str) -> &str {
    for suf in ["ST", "ND", "RD", "TH"] {
        if let Some(head) = tok.strip_suffix(suf) {
            if !head.is_empty() && head.chars().all(|c| c.is_ascii_digit()) {
                return head;
            }
        }
    }
    tok
}

/// Canonical street form: uppercase, punctuation dropped, abbreviations
/// expanded, ordinals and travel directions removed, tokens sorted.
pub fn normalize_street(s: &str) -> String {
    let mut toks: Vec<String> = Vec::new();
    for raw in s.split_whitespace() {
        let up: String = raw
            .to_uppercase()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect();
        if up.is_empty() || DIRECTIONS.contains(&up.as_str()) {
            continue;
        }
        let tok = ABBREVIATIONS
            .iter()
            .find(|(abbr, _)| *abbr == up)
            .map_or_else(|| strip_ordinal(&up).to_string(), |(_, full)| full.to_string());
        toks.push(tok);
    }
    toks.sort();
    toks.join(" ")
}

/// Score after street normalization of both sides.
pub fn street_similarity(x: &str, y: &str) -> f64 {
    let a: Vec<char> = normalize_street(x).chars().collect();
    let b: Vec<char> = normalize_street(y).chars().collect();
    similarity_chars(&a, &b)
}

/// Lengths `b` for which a score of at least `alpha` against a string of
/// length `a` is attainable.
pub fn length_band(a: usize, alpha: f64) -> (usize, usize) {
    if alpha <= 0.0 {
        return (0, usize::MAX);
    }
    let a = a as f64;
    let lo = (a * alpha / (200.0 - alpha) - 1e-9).ceil().max(0.0) as usize;
    let hi = if alpha >= 200.0 {
        lo
    } else {
        (a * (200.0 - alpha) / alpha + 1e-9).floor() as usize
    };
    (lo, hi)
}
