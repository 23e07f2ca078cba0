//! SVM features augmented with inferred topic mixtures.

use super::llda::{TopicMixture, TopicModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Infers θ for each document.
pub fn topic_mixtures(model: &TopicModel, docs: &[Vec<String>]) -> Vec<TopicMixture> {
    docs.iter().map(|d| model.infer(d)).collect()
}

/// Appends θ to each base row; θ columns are left unscaled.
pub fn hybrid_featurize(model: &TopicModel, base: &Matrix, docs: &[Vec<String>]) -> Result<Matrix> {
    let thetas = topic_mixtures(model, docs);
    append_mixtures(base, &thetas)
}

pub fn append_mixtures(base: &Matrix, thetas: &[TopicMixture]) -> Result<Matrix> {
    if base.rows() != thetas.len() {
        return Err(Error::DimensionMismatch {
            expected: base.rows(),
            got: thetas.len(),
        });
    }
    let k = thetas.first().map_or(0, |t| t.theta.len());
    let cols = base.cols() + k;
    let mut data = Vec::with_capacity(base.rows() * cols);
    for (row, th) in base.iter_rows().zip(thetas) {
        if th.theta.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: th.theta.len(),
            });
        }
        data.extend_from_slice(row);
        data.extend_from_slice(&th.theta);
    }
    Matrix::from_vec(base.rows(), cols, data)
}
