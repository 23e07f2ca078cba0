//! The fitted featurizer: dense columns kept by Lasso, tf-idf reduced by
//! T-SVD, then per-column scaling over the combined block.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FrequentTokenList, Scaling, SentimentLexicon, TfIdf, DENSE_COLUMNS};
use crate::linalg::Matrix;
use crate::preprocess::ProcessedMessage;
use crate::reduce::tsvd::DENSE_LIMIT;
use crate::reduce::{default_lambda_grid, lasso_cv, lasso_fit, SvdMethod, TruncatedBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOptions {
    pub svd_rank: usize,
    /// Lower `svd_rank` to the largest rank the training matrix supports
    /// instead of failing.
    pub clamp_rank: bool,
    pub frequent_tokens: usize,
    pub frequent_list: Option<FrequentTokenList>,
    pub lasso: bool,
    pub lasso_lambda: Option<f64>,
    pub cv_folds: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            svd_rank: crate::reduce::tsvd::DEFAULT_RANK,
            clamp_rank: true,
            frequent_tokens: 50,
            frequent_list: None,
            lasso: true,
            lasso_lambda: None,
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub tfidf: TfIdf,
    pub frequent: FrequentTokenList,
    /// Indices into the dense block, ascending.
    pub dense_selected: Vec<usize>,
    /// λ used for each one-vs-rest selection problem.
    pub lasso_lambdas: Vec<f64>,
    #[serde(skip)]
    pub basis: Option<TruncatedBasis>,
    pub scaling: Scaling,
}

/// Largest T-SVD rank the training documents support.
pub fn rank_bound(docs: &[ProcessedMessage]) -> Result<usize> {
    let tfidf = TfIdf::fit(docs)?;
    Ok(docs.len().min(tfidf.len()))
}

fn select_dense(dense: &Matrix, labels: &[usize], n_classes: usize, opts: &FeatureOptions, seed: u64) -> Result<(Vec<usize>, Vec<f64>)> {
    if !opts.lasso {
        return Ok(((0..dense.cols()).collect(), Vec::new()));
    }
    let x = Scaling::fit(dense)?.apply(dense)?;
    // A two-class problem needs only one ±1 target.
    let targets: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    let mut keep = std::collections::BTreeSet::new();
    let mut lambdas = Vec::new();
    for c in targets {
        let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let lambda = match opts.lasso_lambda {
            Some(l) => l,
            None => lasso_cv(&x, &y, &default_lambda_grid(), opts.cv_folds, seed)?.lambda,
        };
        keep.extend(lasso_fit(&x, &y, lambda)?.selected);
        lambdas.push(lambda);
    }
    Ok((keep.into_iter().collect(), lambdas))
}

impl FeaturePipeline {
    /// Fits every table on the training documents and returns the scaled
    /// training matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        texts: &[&str],
        docs: &[ProcessedMessage],
        labels: &[usize],
        n_classes: usize,
        lex: &SentimentLexicon,
        opts: &FeatureOptions,
        seed: u64,
    ) -> Result<(Self, Matrix)> {
        if labels.len() != docs.len() {
            return Err(Error::DimensionMismatch {
                expected: docs.len(),
                got: labels.len(),
            });
        }
        let tfidf = TfIdf::fit(docs)?;
        if tfidf.is_empty() {
            return Err(Error::Empty("training vocabulary"));
        }
        let frequent = opts
            .frequent_list
            .clone()
            .unwrap_or_else(|| FrequentTokenList::top_k(docs, opts.frequent_tokens));
        let fm = FeatureMatrix::build(texts, docs, &tfidf, lex, &frequent)?;
        let (dense_selected, lasso_lambdas) = select_dense(&fm.dense, labels, n_classes, opts, seed)?;
        let bound = fm.rows().min(tfidf.len());
        let rank = if opts.clamp_rank { opts.svd_rank.min(bound) } else { opts.svd_rank };
        let method = if fm.rows() < DENSE_LIMIT && tfidf.len() < DENSE_LIMIT {
            SvdMethod::Dense
        } else {
            SvdMethod::Randomized { seed }
        };
        let basis = TruncatedBasis::fit(&fm.sparse, rank, method)?.with_vocabulary_hash(tfidf.vocabulary_hash());
        let base = fm.dense.select_columns(&dense_selected).hstack(&basis.project(&fm.sparse)?)?;
        let scaling = Scaling::fit(&base)?;
        let train = scaling.apply(&base)?;
        let pipeline = FeaturePipeline {
            tfidf,
            frequent,
            dense_selected,
            lasso_lambdas,
            basis: Some(basis),
            scaling,
        };
        Ok((pipeline, train))
    }

    fn basis(&self) -> Result<&TruncatedBasis> {
        self.basis.as_ref().ok_or(Error::Empty("T-SVD basis"))
    }

    pub fn dims(&self) -> usize {
        self.scaling.dims()
    }

    pub fn rank(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.rank)
    }

    pub fn dense_names(&self) -> Vec<&'static str> {
        self.dense_selected.iter().map(|&j| DENSE_COLUMNS[j]).collect()
    }

    pub fn transform(&self, texts: &[&str], docs: &[ProcessedMessage], lex: &SentimentLexicon) -> Result<Matrix> {
        let fm = FeatureMatrix::build(texts, docs, &self.tfidf, lex, &self.frequent)?;
        let base = fm.dense.select_columns(&self.dense_selected).hstack(&self.basis()?.project(&fm.sparse)?)?;
        self.scaling.apply(&base)
    }

    /// `features.json` plus the basis under `tsvd/`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("features.json");
        let body = serde_json::to_string_pretty(self).expect("pipeline serializes") + "\n";
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        self.basis()?.save(&dir.join("tsvd"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join("features.json");
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let mut fp: FeaturePipeline = serde_json::from_str(&text).map_err(|e| Error::format("features.json", e))?;
        fp.tfidf = fp.tfidf.reindexed();
        fp.frequent = FrequentTokenList::new(fp.frequent.tokens, fp.frequent.source);
        let basis = TruncatedBasis::load(&dir.join("tsvd"))?;
        if basis.vocabulary_hash.as_deref() != Some(fp.tfidf.vocabulary_hash().as_str()) {
            return Err(Error::VocabularyMismatch("basis was fitted on a different vocabulary".into()));
        }
        fp.basis = Some(basis);
        Ok(fp)
    }
}
