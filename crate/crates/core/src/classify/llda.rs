//! Labeled LDA fitted by zeroth-order collapsed variational Bayes (CVB0).
//!
//! Each topic corresponds to one label. During training a document's token
//! responsibilities live only on the topics of its label set; at inference
//! time all topics are allowed and the topic-word distributions are fixed.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::sha256_hex;

pub const DEFAULT_TRAIN_ITERS: usize = 100;
pub const DEFAULT_INFER_ITERS: usize = 50;
pub const CONVERGENCE_TOL: f64 = 1e-4;
pub const DEFAULT_ETA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LldaParams {
    /// Symmetric document-topic prior; `None` means `50 / K`.
    pub alpha: Option<f64>,
    pub eta: f64,
    pub iters: usize,
    pub infer_iters: usize,
}

impl Default for LldaParams {
    fn default() -> Self {
        LldaParams {
            alpha: None,
            eta: DEFAULT_ETA,
            iters: DEFAULT_TRAIN_ITERS,
            infer_iters: DEFAULT_INFER_ITERS,
        }
    }
}

impl LldaParams {
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: Vec<String>,
    pub vocabulary: Vec<String>,
    /// `K × |V|`, rows sum to one.
    pub beta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub eta: f64,
    pub infer_iters: usize,
    pub sweeps: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicMixture {
    pub theta: Vec<f64>,
}

impl TopicMixture {
    /// Index of the largest entry, lowest on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.theta.iter().enumerate() {
            if v > self.theta[best] {
                best = k;
            }
        }
        best
    }
}

fn build_index(vocab: &[String]) -> HashMap<String, usize> {
    vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

/// Incremental CVB0 trainer; [`sweep`](Self::sweep) runs one pass over every
/// token so intermediate states can be inspected.
pub struct LldaTrainer {
    topics: Vec<String>,
    vocabulary: Vec<String>,
    docs: Vec<Vec<usize>>,
    allowed: Vec<Vec<usize>>,
    gamma: Vec<Vec<Vec<f64>>>,
    n_dk: Vec<Vec<f64>>,
    n_wk: Vec<Vec<f64>>,
    n_k: Vec<f64>,
    alpha: f64,
    eta: f64,
    params: LldaParams,
    sweeps: usize,
}

impl LldaTrainer {
    /// `labels[d]` lists the topic indices allowed for document `d`.
    pub fn new(docs: &[Vec<String>], labels: &[Vec<usize>], topics: &[String], params: LldaParams) -> Result<Self> {
        let k = topics.len();
        if k == 0 {
            return Err(Error::Empty("topic list"));
        }
        if docs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                got: labels.len(),
            });
        }
        if !(params.eta > 0.0) || !(params.alpha_for(k) > 0.0) {
            return Err(Error::InvalidInput("alpha and eta must be > 0".into()));
        }
        let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
        if vocab.is_empty() {
            return Err(Error::Empty("training vocabulary"));
        }
        let vocabulary: Vec<String> = vocab.into_iter().cloned().collect();
        let index = build_index(&vocabulary);
        let mut allowed = Vec::with_capacity(docs.len());
        for (d, ls) in labels.iter().enumerate() {
            let set: BTreeSet<usize> = ls.iter().copied().collect();
            if set.is_empty() {
                return Err(Error::InvalidInput(format!("document {d} has an empty label set")));
            }
            if let Some(&bad) = set.iter().find(|&&t| t >= k) {
                return Err(Error::InvalidInput(format!("document {d} has label {bad} outside {k} topics")));
            }
            allowed.push(set.into_iter().collect::<Vec<_>>());
        }
        let doc_ids: Vec<Vec<usize>> = docs.iter().map(|d| d.iter().map(|w| index[w]).collect()).collect();
        let v = vocabulary.len();
        let mut n_dk = vec![vec![0.0; k]; docs.len()];
        let mut n_wk = vec![vec![0.0; k]; v];
        let mut n_k = vec![0.0; k];
        let mut gamma = Vec::with_capacity(docs.len());
        for (d, words) in doc_ids.iter().enumerate() {
            let share = 1.0 / allowed[d].len() as f64;
            let mut g = Vec::with_capacity(words.len());
            for &w in words {
                let mut row = vec![0.0; k];
                for &t in &allowed[d] {
                    row[t] = share;
                    n_dk[d][t] += share;
                    n_wk[w][t] += share;
                    n_k[t] += share;
                }
                g.push(row);
            }
            gamma.push(g);
        }
        Ok(LldaTrainer {
            topics: topics.to_vec(),
            vocabulary,
            docs: doc_ids,
            allowed,
            gamma,
            n_dk,
            n_wk,
            n_k,
            alpha: params.alpha_for(k),
            eta: params.eta,
            params,
            sweeps: 0,
        })
    }

    /// One CVB0 pass; returns the largest responsibility change.
    pub fn sweep(&mut self) -> f64 {
        let v_eta = self.vocabulary.len() as f64 * self.eta;
        let mut max_change: f64 = 0.0;
        let mut fresh = vec![0.0; self.topics.len()];
        for d in 0..self.docs.len() {
            for n in 0..self.docs[d].len() {
                let w = self.docs[d][n];
                let old = &self.gamma[d][n];
                let mut total = 0.0;
                for &t in &self.allowed[d] {
                    let ndk = self.n_dk[d][t] - old[t];
                    let nwk = self.n_wk[w][t] - old[t];
                    let nk = self.n_k[t] - old[t];
                    let p = (ndk + self.alpha) * (nwk + self.eta) / (nk + v_eta);
                    fresh[t] = p;
                    total += p;
                }
                for &t in &self.allowed[d] {
                    let new = fresh[t] / total;
                    let delta = new - self.gamma[d][n][t];
                    max_change = max_change.max(delta.abs());
                    self.n_dk[d][t] += delta;
                    self.n_wk[w][t] += delta;
                    self.n_k[t] += delta;
                    self.gamma[d][n][t] = new;
                }
            }
        }
        self.sweeps += 1;
        max_change
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn responsibilities(&self, d: usize) -> &[Vec<f64>] {
        &self.gamma[d]
    }

    pub fn allowed(&self, d: usize) -> &[usize] {
        &self.allowed[d]
    }

    /// `β_kw = (n_wk + η) / (n_k + |V|η)`.
    pub fn beta(&self) -> Vec<Vec<f64>> {
        let v = self.vocabulary.len();
        let v_eta = v as f64 * self.eta;
        (0..self.topics.len())
            .map(|t| {
                let denom = self.n_k[t] + v_eta;
                let mut row: Vec<f64> = (0..v).map(|w| (self.n_wk[w][t] + self.eta) / denom).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
                row
            })
            .collect()
    }

    /// Label-restricted mixture of a training document.
    pub fn theta(&self, d: usize) -> TopicMixture {
        let k = self.topics.len();
        let n = self.docs[d].len() as f64;
        let denom = n + self.allowed[d].len() as f64 * self.alpha;
        let mut theta = vec![0.0; k];
        for &t in &self.allowed[d] {
            theta[t] = (self.n_dk[d][t] + self.alpha) / denom;
        }
        TopicMixture { theta }
    }

    pub fn model(&self) -> TopicModel {
        TopicModel {
            topics: self.topics.clone(),
            vocabulary: self.vocabulary.clone(),
            beta: self.beta(),
            alpha: self.alpha,
            eta: self.eta,
            infer_iters: self.params.infer_iters,
            sweeps: self.sweeps,
            index: build_index(&self.vocabulary),
        }
    }

    /// Sweeps until convergence or the iteration budget.
    pub fn run(&mut self) -> TopicModel {
        while self.sweeps < self.params.iters {
            if self.sweep() < CONVERGENCE_TOL {
                break;
            }
        }
        self.model()
    }
}

pub fn llda_train(docs: &[Vec<String>], labels: &[Vec<usize>], topics: &[String], params: LldaParams) -> Result<TopicModel> {
    Ok(LldaTrainer::new(docs, labels, topics, params)?.run())
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.topics.len()
    }

    pub fn vocabulary_hash(&self) -> String {
        sha256_hex(self.vocabulary.join("\n").as_bytes())
    }

    fn ensure_index(&mut self) {
        if self.index.len() != self.vocabulary.len() {
            self.index = build_index(&self.vocabulary);
        }
    }

    /// Unconstrained CVB0 over all topics with `β` held fixed.
    pub fn infer(&self, doc: &[String]) -> TopicMixture {
        let k = self.k();
        let words: Vec<usize> = if self.index.len() == self.vocabulary.len() {
            doc.iter().filter_map(|w| self.index.get(w).copied()).collect()
        } else {
            let idx = build_index(&self.vocabulary);
            doc.iter().filter_map(|w| idx.get(w).copied()).collect()
        };
        if words.is_empty() {
            return TopicMixture {
                theta: vec![1.0 / k as f64; k],
            };
        }
        let mut gamma = vec![vec![1.0 / k as f64; k]; words.len()];
        let mut n_dk = vec![words.len() as f64 / k as f64; k];
        let mut fresh = vec![0.0; k];
        for _ in 0..self.infer_iters {
            for (n, &w) in words.iter().enumerate() {
                let mut total = 0.0;
                for t in 0..k {
                    let p = (n_dk[t] - gamma[n][t] + self.alpha) * self.beta[t][w];
                    fresh[t] = p;
                    total += p;
                }
                for t in 0..k {
                    let new = fresh[t] / total;
                    n_dk[t] += new - gamma[n][t];
                    gamma[n][t] = new;
                }
            }
        }
        let denom = words.len() as f64 + k as f64 * self.alpha;
        let mut theta: Vec<f64> = n_dk.iter().map(|c| (c + self.alpha) / denom).collect();
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|x| *x /= s);
        TopicMixture { theta }
    }

    pub fn classify(&self, doc: &[String]) -> usize {
        self.infer(doc).argmax()
    }

    /// Writes `llda.json` and `beta.csv` (one row per topic) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = serde_json::json!({
            "topics": self.topics,
            "alpha": self.alpha,
            "eta": self.eta,
            "infer_iters": self.infer_iters,
            "sweeps": self.sweeps,
            "vocabulary_hash": self.vocabulary_hash(),
            "vocabulary": self.vocabulary,
        });
        let path = dir.join("llda.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&header).expect("json"))
            .map_err(|e| Error::io(&path, e))?;
        let path = dir.join("beta.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format("beta.csv", e))?;
        for row in &self.beta {
            w.write_record(row.iter().map(|v| format!("{v:e}")))
                .map_err(|e| Error::format("beta.csv", e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            topics: Vec<String>,
            alpha: f64,
            eta: f64,
            infer_iters: usize,
            sweeps: usize,
            vocabulary_hash: String,
            vocabulary: Vec<String>,
        }
        let path = dir.join("llda.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let h: Header = serde_json::from_str(&text).map_err(|e| Error::format("llda.json", e))?;
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(dir.join("beta.csv"))
            .map_err(|e| Error::format("beta.csv", e))?;
        let mut beta = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::format("beta.csv", e))?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format("beta.csv", e))?;
            if row.len() != h.vocabulary.len() {
                return Err(Error::DimensionMismatch {
                    expected: h.vocabulary.len(),
                    got: row.len(),
                });
            }
            beta.push(row);
        }
        if beta.len() != h.topics.len() {
            return Err(Error::DimensionMismatch {
                expected: h.topics.len(),
                got: beta.len(),
            });
        }
        let mut m = TopicModel {
            topics: h.topics,
            vocabulary: h.vocabulary,
            beta,
            alpha: h.alpha,
            eta: h.eta,
            infer_iters: h.infer_iters,
            sweeps: h.sweeps,
            index: HashMap::new(),
        };
        if m.vocabulary_hash() != h.vocabulary_hash {
            return Err(Error::VocabularyMismatch("llda.json vocabulary hash".into()));
        }
        m.ensure_index();
        Ok(m)
    }

    /// θ matrix as CSV, one row per document.
    pub fn theta_csv(&self, ids: &[String], thetas: &[TopicMixture]) -> String {
        let mut out = String::from("id");
        for t in &self.topics {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (id, th) in ids.iter().zip(thetas) {
            out.push_str(id);
            for v in &th.theta {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn single_label_beta_is_smoothed_unigram() {
        let docs = vec![toks("a b a"), toks("c d"), toks("b c")];
        let labels = vec![vec![0], vec![1], vec![0]];
        let mut tr = LldaTrainer::new(&docs, &labels, &names(2), LldaParams::default()).unwrap();
        let model = tr.run();
        // vocabulary: a b c d; topic 0 counts: a2 b2 c1; topic 1: c1 d1
        let oracle = |counts: [f64; 4]| {
            let n: f64 = counts.iter().sum();
            counts.map(|c| (c + 0.01) / (n + 4.0 * 0.01))
        };
        for (row, want) in model.beta.iter().zip([oracle([2.0, 2.0, 1.0, 0.0]), oracle([0.0, 0.0, 1.0, 1.0])]) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(tr.responsibilities(1)[0], vec![0.0, 1.0]);
        for d in 0..3 {
            assert_eq!(model.classify(&docs[d]), labels[d][0]);
        }
    }

    #[test]
    fn empty_doc_and_unseen_tokens_are_uniform() {
        let m = llda_train(&[toks("x y")], &[vec![1]], &names(3), LldaParams::default()).unwrap();
        let th = m.infer(&[]).theta;
        assert!(th.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(m.infer(&toks("zzz")).theta, th);
        assert_eq!(m.infer(&[]).argmax(), 0);
    }

    #[test]
    fn empty_label_set_rejected() {
        assert!(llda_train(&[toks("a")], &[vec![]], &names(2), LldaParams::default()).is_err());
        assert!(llda_train(&[toks("a")], &[vec![4]], &names(2), LldaParams::default()).is_err());
    }

    #[test]
    fn multi_label_mass_stays_on_allowed() {
        let docs = vec![toks("a b c"), toks("a d"), toks("b c e")];
        let labels = vec![vec![0, 2], vec![1], vec![0, 1, 2]];
        let mut tr = LldaTrainer::new(&docs, &labels, &names(3), LldaParams::default()).unwrap();
        for _ in 0..5 {
            tr.sweep();
            for d in 0..3 {
                let th = tr.theta(d).theta;
                assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for t in 0..3 {
                    if !tr.allowed(d).contains(&t) {
                        assert_eq!(th[t], 0.0);
                        assert!(tr.responsibilities(d).iter().all(|g| g[t] == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let m = llda_train(&[toks("a b"), toks("c")], &[vec![0], vec![1]], &names(2), LldaParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = TopicModel::load(dir.path()).unwrap();
        assert_eq!(back.vocabulary, m.vocabulary);
        assert_eq!(back.infer(&toks("a")), m.infer(&toks("a")));
    }
}
