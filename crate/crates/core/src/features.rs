//! Numeric message features: lexicon polarity, tf-idf, frequent-token
//! presence, raw-text syntactic counts, and train-fitted scaling.
//!
//! Polarity and frequent-token presence divide by the raw token count N even
//! though they sum over the deduplicated relevant tokens. Because relevant
//! tokens are deduplicated, tf is 0 or 1 and the tf-idf block behaves as an
//! idf-weighted presence indicator.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::preprocess::ProcessedMessage;

/// Token polarity scores; absent tokens score 0.
#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    polarity: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        SentimentLexicon {
            polarity: entries.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect(),
        }
    }

    /// Loads a `token,polarity` CSV; a non-numeric first row is taken as a header.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::format(path.display().to_string(), e))?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path.display().to_string(), e))?;
            let (Some(tok), Some(val)) = (rec.get(0), rec.get(1)) else {
                continue;
            };
            match val.trim().parse::<f64>() {
                Ok(v) => entries.push((tok.trim().to_string(), v)),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::format(
                        format!("{}:{}", path.display(), i + 1),
                        e,
                    ))
                }
            }
        }
        Ok(SentimentLexicon::new(entries))
    }

    pub fn score(&self, token: &str) -> f64 {
        self.polarity.get(token).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        SentimentLexicon {
            polarity: self.polarity.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }
}

/// `(Σ P(r_i)) / N`, 0 when N = 0.
pub fn sentiment(msg: &ProcessedMessage, lex: &SentimentLexicon) -> f64 {
    if msg.n_raw() == 0 {
        return 0.0;
    }
    let total: f64 = msg.relevant_tokens.iter().map(|t| lex.score(t)).sum();
    total / msg.n_raw() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenListSource {
    File,
    TopKFromTraining,
}

/// The frequent-token list L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentTokenList {
    pub tokens: Vec<String>,
    pub source: TokenListSource,
    #[serde(skip)]
    set: HashSet<String>,
}

impl FrequentTokenList {
    pub fn new(tokens: Vec<String>, source: TokenListSource) -> Self {
        let set = tokens.iter().cloned().collect();
        FrequentTokenList { tokens, source, set }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Ok(FrequentTokenList::new(tokens, TokenListSource::File))
    }

    /// The `k` most frequent relevant tokens of the training documents;
    /// frequency ties resolve lexicographically.
    pub fn top_k(training: &[ProcessedMessage], k: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in training {
            for t in &doc.relevant_tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = ranked.into_iter().take(k).map(|(t, _)| t.to_string()).collect();
        FrequentTokenList::new(tokens, TokenListSource::TopKFromTraining)
    }

    pub fn contains(&self, token: &str) -> bool {
        if self.set.is_empty() && !self.tokens.is_empty() {
            return self.tokens.iter().any(|t| t == token);
        }
        self.set.contains(token)
    }
}

/// `(Σ [r_m ∈ L]) / N`, 0 when N = 0.
pub fn ftp_score(msg: &ProcessedMessage, list: &FrequentTokenList) -> f64 {
    if msg.n_raw() == 0 {
        return 0.0;
    }
    let hits = msg.relevant_tokens.iter().filter(|t| list.contains(t)).count();
    hits as f64 / msg.n_raw() as f64
}

/// Counts taken from the unprocessed text.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntacticCounts {
    pub hashtags: f64,
    pub questions: f64,
    pub exclamations: f64,
    pub capitals: f64,
    /// Length in characters.
    pub length: f64,
}

pub fn syntactic(raw_text: &str) -> SyntacticCounts {
    let mut c = SyntacticCounts::default();
    for ch in raw_text.chars() {
        c.length += 1.0;
        match ch {
            '#' => c.hashtags += 1.0,
            '?' => c.questions += 1.0,
            '!' => c.exclamations += 1.0,
            _ if ch.is_uppercase() => c.capitals += 1.0,
            _ => {}
        }
    }
    c
}

/// Dense feature column names in matrix order.
pub const DENSE_COLUMNS: [&str; 7] = [
    "sentiment",
    "ftp",
    "length",
    "hashtags",
    "exclamations",
    "questions",
    "capitals",
];

pub fn dense_row(
    raw_text: &str,
    msg: &ProcessedMessage,
    lex: &SentimentLexicon,
    list: &FrequentTokenList,
) -> [f64; 7] {
    let s = syntactic(raw_text);
    [
        sentiment(msg, lex),
        ftp_score(msg, list),
        s.length,
        s.hashtags,
        s.exclamations,
        s.questions,
        s.capitals,
    ]
}

/// Vocabulary and idf table fitted on a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdf {
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfIdf {
    /// idf(r) = ln(|D| / (1 + df(r))). The vocabulary is sorted.
    pub fn fit(training: &[ProcessedMessage]) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::Empty("tf-idf training corpus"));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in training {
            let uniq: HashSet<&str> = doc.relevant_tokens.iter().map(String::as_str).collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = training.len();
        let vocabulary: Vec<String> = df.keys().map(|s| s.to_string()).collect();
        let doc_freq: Vec<usize> = df.values().copied().collect();
        let idf = doc_freq
            .iter()
            .map(|&d| (n as f64 / (1.0 + d as f64)).ln())
            .collect();
        Ok(TfIdf::from_parts(vocabulary, idf, doc_freq, n))
    }

    pub fn from_parts(vocabulary: Vec<String>, idf: Vec<f64>, doc_freq: Vec<usize>, n_docs: usize) -> Self {
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdf { vocabulary, idf, doc_freq, n_docs, index }
    }

    /// Rebuilds the token index (needed after deserialization).
    pub fn reindexed(self) -> Self {
        TfIdf::from_parts(self.vocabulary, self.idf, self.doc_freq, self.n_docs)
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        if self.index.is_empty() && !self.vocabulary.is_empty() {
            return self.vocabulary.iter().position(|t| t == token);
        }
        self.index.get(token).copied()
    }

    /// Sparse tf-idf rows; tokens outside the vocabulary are ignored.
    pub fn transform(&self, docs: &[ProcessedMessage]) -> CsrMatrix {
        let rows = docs
            .iter()
            .map(|doc| {
                let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
                for t in &doc.relevant_tokens {
                    if let Some(j) = self.index_of(t) {
                        *tf.entry(j).or_insert(0.0) += 1.0;
                    }
                }
                tf.into_iter().map(|(j, f)| (j, f * self.idf[j])).collect()
            })
            .collect();
        CsrMatrix::from_row_entries(self.vocabulary.len(), rows).expect("indices from vocabulary")
    }

    /// Stable content hash of the vocabulary, used to pair bases and models.
    pub fn vocabulary_hash(&self) -> String {
        crate::hash::sha256_hex(self.vocabulary.join("\n").as_bytes())
    }
}

/// Per-column standardize-then-min-max parameters fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Min and max of the standardized training column.
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaling {
    /// Population mean and standard deviation per column; a constant column
    /// gets std 1.
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::Empty("scaling training rows"));
        }
        let (n, d) = (train.rows() as f64, train.cols());
        let mut s = Scaling {
            mean: vec![0.0; d],
            std: vec![0.0; d],
            min: vec![0.0; d],
            max: vec![0.0; d],
        };
        for j in 0..d {
            let col = train.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for x in &col {
                let z = (x - mean) / std;
                lo = lo.min(z);
                hi = hi.max(z);
            }
            s.mean[j] = mean;
            s.std[j] = std;
            s.min[j] = lo;
            s.max[j] = hi;
        }
        Ok(s)
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_value(&self, j: usize, x: f64) -> f64 {
        let z = (x - self.mean[j]) / self.std[j];
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            return 0.0;
        }
        ((z - self.min[j]) / span).clamp(0.0, 1.0)
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: m.cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x = self.apply_value(j, *x);
            }
        }
        Ok(out)
    }
}

/// Dense block plus sparse tf-idf block for a set of messages.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub dense: Matrix,
    pub sparse: CsrMatrix,
    pub vocabulary: Vec<String>,
    pub scaling: Option<Scaling>,
}

impl FeatureMatrix {
    /// Builds unscaled features for `docs` with tables fitted elsewhere.
    pub fn build(
        raw_texts: &[&str],
        docs: &[ProcessedMessage],
        tfidf: &TfIdf,
        lex: &SentimentLexicon,
        list: &FrequentTokenList,
    ) -> Result<Self> {
        if raw_texts.len() != docs.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                got: raw_texts.len(),
            });
        }
        let rows: Vec<Vec<f64>> = raw_texts
            .iter()
            .zip(docs)
            .map(|(t, d)| dense_row(t, d, lex, list).to_vec())
            .collect();
        let dense = if rows.is_empty() {
            Matrix::zeros(0, DENSE_COLUMNS.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        Ok(FeatureMatrix {
            dense,
            sparse: tfidf.transform(docs),
            vocabulary: tfidf.vocabulary.clone(),
            scaling: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.dense.rows()
    }

    /// Scales the dense block with `scaling` (fit on training rows only).
    pub fn scaled(&self, scaling: &Scaling) -> Result<Self> {
        Ok(FeatureMatrix {
            dense: scaling.apply(&self.dense)?,
            sparse: self.sparse.clone(),
            vocabulary: self.vocabulary.clone(),
            scaling: Some(scaling.clone()),
        })
    }

    /// CSV export of the dense block followed by the tf-idf columns.
    pub fn to_csv(&self, ids: &[&str]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(DENSE_COLUMNS.iter().take(self.dense.cols()).map(|s| s.to_string()));
        header.extend(self.vocabulary.iter().map(|v| format!("tfidf:{v}")));
        w.write_record(&header).map_err(|e| Error::format("features csv", e))?;
        for i in 0..self.rows() {
            let mut rec = vec![ids.get(i).copied().unwrap_or("").to_string()];
            rec.extend(self.dense.row(i).iter().map(|v| v.to_string()));
            let mut sparse_row = vec![0.0; self.vocabulary.len()];
            for (j, v) in self.sparse.row(i) {
                sparse_row[j] = v;
            }
            rec.extend(sparse_row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::format("features csv", e))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format("features csv", e))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(relevant: &[&str], n: usize) -> ProcessedMessage {
        let mut raw: Vec<String> = relevant.iter().map(|s| s.to_string()).collect();
        while raw.len() < n {
            raw.push("the".into());
        }
        ProcessedMessage {
            raw_tokens: raw,
            relevant_tokens: relevant.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn polarity_divides_by_raw_count() {
        let lex = SentimentLexicon::new(vec![("bad".into(), -2.0), ("great".into(), 3.0)]);
        assert_eq!(sentiment(&pm(&["traffic", "bad"], 4), &lex), -0.5);
        assert_eq!(sentiment(&pm(&["great"], 1), &lex), 3.0);
        assert_eq!(sentiment(&pm(&["bus", "stop"], 2), &lex), 0.0);
        assert_eq!(sentiment(&pm(&[], 0), &lex), 0.0);
    }

    #[test]
    fn ftp_examples() {
        let list = FrequentTokenList::new(vec!["crash".into(), "delay".into()], TokenListSource::File);
        assert_eq!(ftp_score(&pm(&["crash", "bridge", "delay"], 5), &list), 0.4);
        assert_eq!(ftp_score(&pm(&["bus"], 3), &list), 0.0);
        assert_eq!(ftp_score(&pm(&["crash", "delay"], 2), &list), 1.0);
        assert_eq!(ftp_score(&pm(&[], 0), &list), 0.0);
    }

    #[test]
    fn top_k_counts_training_tokens() {
        let docs = vec![pm(&["a", "b"], 2), pm(&["b", "c"], 2), pm(&["b", "a"], 2)];
        let l = FrequentTokenList::top_k(&docs, 2);
        assert_eq!(l.tokens, vec!["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn syntactic_counts() {
        let c = syntactic("Accident!! #traffic #nyc");
        assert_eq!((c.hashtags, c.exclamations, c.questions, c.capitals, c.length), (2.0, 2.0, 0.0, 1.0, 24.0));
        assert_eq!(syntactic(""), SyntacticCounts::default());
        let w = syntactic("WHY???");
        assert_eq!((w.capitals, w.questions, w.length), (3.0, 3.0, 6.0));
        assert_eq!(syntactic("ÉCOLE").capitals, 5.0);
    }

    #[test]
    fn tfidf_examples() {
        let docs = vec![pm(&["x", "y"], 2), pm(&["y"], 1), pm(&["y", "z"], 2)];
        let t = TfIdf::fit(&docs).unwrap();
        assert_eq!(t.vocabulary, vec!["x", "y", "z"]);
        let m = t.transform(&docs);
        assert!((m.get(0, 0) - (1.5f64).ln()).abs() < 1e-15);
        assert!((m.get(0, 0) - 0.405).abs() < 1e-3);
        assert!(m.get(1, 1) < 0.0);
        assert_eq!(m.get(1, 1), (0.75f64).ln());
        assert_eq!(m.get(1, 0), 0.0);
        let unseen = t.transform(&[pm(&["q", "x"], 2)]);
        assert_eq!(unseen.nnz(), 1);
        assert!(TfIdf::fit(&[]).is_err());
    }

    #[test]
    fn scaling_examples() {
        let train = Matrix::from_rows(&[vec![0.0, 5.0], vec![10.0, 5.0]]).unwrap();
        let s = Scaling::fit(&train).unwrap();
        let out = s.apply(&train).unwrap();
        assert_eq!(out.column(0), vec![0.0, 1.0]);
        assert_eq!(out.column(1), vec![0.0, 0.0]);
        let test = Matrix::from_rows(&[vec![20.0, 7.0], vec![-3.0, 5.0]]).unwrap();
        let t = s.apply(&test).unwrap();
        assert_eq!(t.row(0), &[1.0, 0.0]);
        assert_eq!(t.row(1)[0], 0.0);
        assert!(s.apply(&Matrix::zeros(1, 3)).is_err());
    }
}
