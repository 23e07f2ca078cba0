//! Tokenization, slang expansion and cleaning into raw (`w`) and relevant
//! (`r`) token sequences.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slang expansions and stopwords, all keys lowercase.
#[derive(Debug, Clone, Default)]
pub struct LexiconTables {
    pub slang: HashMap<String, String>,
    pub stopwords: HashSet<String>,
}

impl LexiconTables {
    pub fn new<S, W>(slang: S, stopwords: W) -> Self
    where
        S: IntoIterator<Item = (String, String)>,
        W: IntoIterator<Item = String>,
    {
        LexiconTables {
            slang: slang
                .into_iter()
                .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_lowercase()))
                .filter(|(k, _)| !k.is_empty() && !k.contains(char::is_whitespace))
                .collect(),
            stopwords: stopwords
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty() && !w.contains(char::is_whitespace))
                .collect(),
        }
    }

    /// Loads a `slang,expansion` CSV (header optional) and a one-per-line stopword file.
    pub fn load(slang_csv: Option<&Path>, stopwords_txt: Option<&Path>) -> Result<Self> {
        let mut slang = Vec::new();
        if let Some(path) = slang_csv {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_path(path)
                .map_err(|e| Error::format(path.display().to_string(), e))?;
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| Error::format(path.display().to_string(), e))?;
                let (Some(k), Some(v)) = (rec.get(0), rec.get(1)) else {
                    continue;
                };
                if i == 0 && k.trim().eq_ignore_ascii_case("slang") {
                    continue;
                }
                slang.push((k.to_string(), v.to_string()));
            }
        }
        let mut stop = Vec::new();
        if let Some(path) = stopwords_txt {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            stop.extend(text.lines().map(str::to_string));
        }
        Ok(LexiconTables::new(slang, stop))
    }
}

/// A message as the raw tokens `w` (length N) and relevant tokens `r` (length M).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedMessage {
    pub raw_tokens: Vec<String>,
    pub relevant_tokens: Vec<String>,
}

impl ProcessedMessage {
    /// N: token count before any removal.
    pub fn n_raw(&self) -> usize {
        self.raw_tokens.len()
    }

    /// M: count of relevant tokens.
    pub fn n_relevant(&self) -> usize {
        self.relevant_tokens.len()
    }

    pub fn from_relevant(tokens: Vec<String>) -> Self {
        ProcessedMessage {
            raw_tokens: tokens.clone(),
            relevant_tokens: tokens,
        }
    }
}

pub fn is_url(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

fn is_marker(c: char) -> bool {
    c == '#' || c == '@'
}

/// Lowercases and splits on whitespace, peeling leading and trailing
/// punctuation into single-character tokens. Inner punctuation (`i-95`,
/// `rte.9`) and leading `#`/`@` markers stay attached; URLs are kept whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        if is_url(&lower) {
            out.push(lower);
            continue;
        }
        let chars: Vec<char> = lower.chars().collect();
        let mut start = 0;
        while start < chars.len() && !chars[start].is_alphanumeric() && !is_marker(chars[start]) {
            start += 1;
        }
        let mut end = chars.len();
        while end > start && !chars[end - 1].is_alphanumeric() {
            end -= 1;
        }
        // A bare run of markers ("#", "@@") is punctuation too.
        if chars[start..end].iter().all(|&c| is_marker(c)) {
            end = start;
        }
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        let tail_start = end.max(start);
        out.extend(chars[tail_start..].iter().map(|c| c.to_string()));
    }
    out
}

/// Replaces slang tokens by their (possibly multi-word) expansion.
pub fn apply_slang(tokens: &[String], tables: &LexiconTables) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        match tables.slang.get(t) {
            Some(exp) => out.extend(exp.split_whitespace().map(str::to_string)),
            None => out.push(t.clone()),
        }
    }
    out
}

fn normalize_token(token: &str) -> Option<String> {
    if is_url(token) {
        return Some("URL".to_string());
    }
    if token.len() > 1 && token.starts_with('@') && token[1..].chars().any(char::is_alphanumeric) {
        return Some("at_user".to_string());
    }
    let word = token.trim_start_matches('#');
    if !word.chars().any(char::is_alphanumeric) {
        return None;
    }
    Some(word.to_string())
}

/// Produces `r` from slang-expanded tokens: URL and mention replacement,
/// hashtag markers stripped, punctuation and stopwords dropped, duplicates
/// removed keeping first occurrence. `raw_tokens` is the input itself.
pub fn clean(tokens: &[String], tables: &LexiconTables) -> ProcessedMessage {
    let mut seen = HashSet::new();
    let mut relevant = Vec::new();
    for t in tokens {
        let Some(word) = normalize_token(t) else {
            continue;
        };
        if tables.stopwords.contains(&word) {
            continue;
        }
        if seen.insert(word.clone()) {
            relevant.push(word);
        }
    }
    ProcessedMessage {
        raw_tokens: tokens.to_vec(),
        relevant_tokens: relevant,
    }
}

/// Full preprocessing chain for one message text.
pub fn process(text: &str, tables: &LexiconTables) -> ProcessedMessage {
    clean(&apply_slang(&tokenize(text), tables), tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn tables() -> LexiconTables {
        LexiconTables::new(
            vec![
                ("hbd".to_string(), "happy birthday".to_string()),
                ("2moro".to_string(), "tomorrow".to_string()),
            ],
            s(&["the", "on"]),
        )
    }

    #[test]
    fn tokenizes_with_peeled_punctuation() {
        assert_eq!(tokenize("Incident on I-95!"), s(&["incident", "on", "i-95", "!"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("hbd   2moro"), s(&["hbd", "2moro"]));
        assert_eq!(tokenize("(LGA) rte.9,"), s(&["(", "lga", ")", "rte.9", ","]));
        assert_eq!(tokenize("#traffic @MTA # !!"), s(&["#traffic", "@mta", "#", "!", "!"]));
        assert_eq!(tokenize("see http://t.co/X."), s(&["see", "http://t.co/x."]));
    }

    #[test]
    fn expands_slang() {
        let t = tables();
        assert_eq!(apply_slang(&s(&["hbd"]), &t), s(&["happy", "birthday"]));
        assert_eq!(apply_slang(&s(&["2moro"]), &t), s(&["tomorrow"]));
        assert_eq!(apply_slang(&s(&["bridge"]), &t), s(&["bridge"]));
    }

    #[test]
    fn cleans_stopwords() {
        let p = clean(&s(&["the", "crash", "on", "the", "bridge"]), &tables());
        assert_eq!(p.relevant_tokens, s(&["crash", "bridge"]));
        assert_eq!((p.n_raw(), p.n_relevant()), (5, 2));
    }

    #[test]
    fn cleans_urls_mentions_and_duplicates() {
        let p = clean(&s(&["http://t.co/x", "@mta", "delay", "delay"]), &tables());
        assert_eq!(p.relevant_tokens, s(&["URL", "at_user", "delay"]));
        assert_eq!(p.n_relevant(), 3);
        let e = clean(&[], &tables());
        assert_eq!((e.n_raw(), e.n_relevant()), (0, 0));
    }

    #[test]
    fn strips_hashtag_marker_and_punctuation() {
        let p = clean(&s(&["#traffic", "!", "##jam", "#the", "$", "traffic"]), &tables());
        assert_eq!(p.relevant_tokens, s(&["traffic", "jam"]));
    }

    #[test]
    fn full_chain() {
        let p = process("HBD!! the bridge is closed 2moro @MTA http://x.co", &tables());
        assert_eq!(
            p.relevant_tokens,
            s(&["happy", "birthday", "bridge", "is", "closed", "tomorrow", "at_user", "URL"])
        );
        assert_eq!(p.n_raw(), 11);
    }
}
