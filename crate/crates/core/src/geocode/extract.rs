//! Rule-based location span extraction.

use std::collections::BTreeSet;

use super::{Gazetteer, CUE_WORDS, DIRECTION_WORDS, SUFFIXES};
use crate::corpus::Message;
use crate::preprocess::is_url;

const MAX_WINDOW: usize = 4;
const BOUNDARY: &[char] = &[',', '.', '(', ')', '?', '!', ';', ':', '"', '[', ']', '{', '}', '|', '…'];
const SEPARATORS: &[char] = &['/', '&'];

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSpan {
    pub text: String,
    /// Token offset of the first token.
    pub start: usize,
    pub len: usize,
    pub score: f64,
}

#[derive(Debug)]
struct Token {
    text: String,
    segment: usize,
}

impl Token {
    fn lower(&self) -> String {
        self.text.to_lowercase()
    }

    fn is_cue(&self) -> bool {
        CUE_WORDS.contains(&self.lower().as_str())
    }

    fn is_suffix_or_direction(&self) -> bool {
        let w: String = self.lower().chars().filter(|c| c.is_alphanumeric()).collect();
        SUFFIXES.contains(&w.as_str()) || DIRECTION_WORDS.contains(&w.as_str())
    }

    fn is_capitalized(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_uppercase)
    }
}

/// Drops mentions and URLs, strips `#`, rewrites hyphens as "or", and cuts
/// the text into tokens grouped by punctuation-delimited segment.
fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut segment = 0;
    for chunk in text.split_whitespace() {
        if chunk.starts_with('@') || is_url(chunk) {
            segment += 1;
            continue;
        }
        let chunk = chunk.trim_start_matches('#').replace('-', " or ");
        for part in chunk.split_whitespace() {
            let mut word = String::new();
            let flush = |word: &mut String, out: &mut Vec<Token>, segment: usize| {
                if !word.is_empty() {
                    out.push(Token {
                        text: std::mem::take(word),
                        segment,
                    });
                }
            };
            for c in part.chars() {
                if BOUNDARY.contains(&c) {
                    flush(&mut word, &mut out, segment);
                    segment += 1;
                } else if SEPARATORS.contains(&c) {
                    flush(&mut word, &mut out, segment);
                    out.push(Token {
                        text: c.to_string(),
                        segment,
                    });
                } else {
                    word.push(c);
                }
            }
            flush(&mut word, &mut out, segment);
        }
    }
    out
}

fn clean_window(toks: &[Token], start: usize, end: usize) -> bool {
    end <= toks.len()
        && start < end
        && toks[start..end].iter().all(|t| t.segment == toks[start].segment && !t.is_cue())
}

fn windows(toks: &[Token]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (p, t) in toks.iter().enumerate() {
        if t.is_cue() {
            for len in 1..=MAX_WINDOW {
                let (s, e) = (p + 1, p + 1 + len);
                if !clean_window(toks, s, e) || toks[s].segment != t.segment {
                    break;
                }
                out.insert((s, e));
            }
        }
        if t.is_suffix_or_direction() {
            for len in 1..=MAX_WINDOW.min(p + 1) {
                let (s, e) = (p + 1 - len, p + 1);
                if !clean_window(toks, s, e) {
                    break;
                }
                out.insert((s, e));
            }
        }
    }
    let mut i = 0;
    while i < toks.len() {
        let mut j = i;
        while j < toks.len() && toks[j].is_capitalized() && !toks[j].is_cue() && toks[j].segment == toks[i].segment {
            j += 1;
        }
        if j - i >= 2 {
            out.insert((i, j));
        }
        i = j.max(i + 1);
    }
    out
}

/// All-caps words of two or more letters are title-cased ("SB" -> "Sb").
fn display_form(tok: &str) -> String {
    let letters = tok.chars().filter(|c| c.is_alphabetic()).count();
    if letters >= 2 && tok.chars().all(|c| !c.is_alphabetic() || c.is_uppercase()) {
        let mut out = String::new();
        let mut first = true;
        for c in tok.chars() {
            if c.is_alphabetic() && !first {
                out.extend(c.to_lowercase());
            } else {
                out.push(c);
            }
            first &= !c.is_alphabetic();
        }
        out
    } else {
        tok.to_string()
    }
}

/// Scored, non-overlapping spans in text order.
pub fn extract_spans(text: &str, gaz: &Gazetteer, alpha: f64) -> Vec<ExtractedSpan> {
    let toks = tokenize(text);
    let mut scored: Vec<ExtractedSpan> = windows(&toks)
        .into_iter()
        .filter_map(|(s, e)| {
            let text = toks[s..e].iter().map(|t| display_form(&t.text)).collect::<Vec<_>>().join(" ");
            let score = gaz.best_score(&text, alpha);
            (score >= alpha && score > 0.0).then_some(ExtractedSpan {
                text,
                start: s,
                len: e - s,
                score,
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.len.cmp(&a.len))
            .then(a.start.cmp(&b.start))
    });
    let mut taken = vec![false; toks.len()];
    let mut chosen: Vec<ExtractedSpan> = Vec::new();
    for sp in scored {
        if taken[sp.start..sp.start + sp.len].iter().any(|&t| t) {
            continue;
        }
        taken[sp.start..sp.start + sp.len].iter_mut().for_each(|t| *t = true);
        chosen.push(sp);
    }
    chosen.sort_by_key(|s| s.start);
    let mut seen = BTreeSet::new();
    chosen.retain(|s| seen.insert(super::normalize_street(&s.text)));
    chosen
}

/// Location strings mentioned in the message text.
pub fn extract_locations(msg: &Message, gaz: &Gazetteer, alpha: f64) -> Vec<String> {
    extract_spans(&msg.text, gaz, alpha).into_iter().map(|s| s.text).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> Gazetteer {
        let names = [
            ("GRAND AVENUE", "QUEENS"),
            ("NEWTOWN", "QUEENS"),
            ("LAGUARDIA AIRPORT", "QUEENS"),
            ("EAST ELMHURST", "QUEENS"),
            ("BRONX RIVER PARKWAY", "BRONX"),
            ("BOSTON ROAD", "BRONX"),
            ("EAST 177 STREET", "BRONX"),
            ("LINCOLN TUNNEL", "MANHATTAN"),
        ];
        Gazetteer::new(names.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(), vec![]).unwrap()
    }

    fn spans(text: &str) -> Vec<String> {
        extract_spans(text, &gaz(), 80.0).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn cue_and_separator() {
        assert_eq!(
            spans("@MTA @NYCTSubway currently at Grand Ave/ Newtown...can you send someone??"),
            ["Grand Ave", "Newtown"]
        );
    }

    #[test]
    fn suffix_and_capitalized_run() {
        assert_eq!(
            spans("I'm at LaGuardia Airport (LGA) in East Elmhurst, NY"),
            ["LaGuardia Airport", "East Elmhurst"]
        );
    }

    #[test]
    fn three_streets() {
        assert_eq!(
            spans("Accident in #TheBronx on The Bronx River Pkwy SB approaching 177th St, stop and go traffic back to Boston Rd, delay of 2 mins #traffic"),
            ["Bronx River Pkwy Sb", "177th St", "Boston Rd"]
        );
        assert_eq!(spans("495 westbound out of Lincoln Tunnel is apparently closed"), ["Lincoln Tunnel"]);
    }

    #[test]
    fn nothing_to_find() {
        assert!(spans("so tired of this weather").is_empty());
        assert!(spans("").is_empty());
    }

    #[test]
    fn hyphen_becomes_or() {
        let toks = tokenize("exit 3-4 #BQE http://t.co/x");
        let words: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(words, ["exit", "3", "or", "4", "BQE"]);
        assert_eq!(display_form("SB"), "Sb");
        assert_eq!(display_form("LaGuardia"), "LaGuardia");
        assert_eq!(display_form("177th"), "177th");
    }
}
