//! Cross-validated selection of SVM kernel and penalty.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svm::{Kernel, SvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pool::WorkerPool;

/// Fold index per row; each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for (offset, (class, mut idx)) in by_class.into_iter().enumerate() {
        if idx.len() < k {
            return Err(Error::TooFewMembers(
                format!("class {class}"),
                format!("{} members for {k} folds", idx.len()),
            ));
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = (pos + offset) % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub params: SvmParams,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: SvmParams,
    pub cells: Vec<GridCell>,
}

/// The candidate list as the cross product of kernels, C values and gammas
/// (gammas only for non-linear kernels).
pub fn build_grid(kernels: &[&str], cs: &[f64], gammas: &[f64], degree: u32) -> Result<Vec<SvmParams>> {
    let mut out = Vec::new();
    for name in kernels {
        for &c in cs {
            match *name {
                "linear" => out.push(SvmParams::new(Kernel::Linear, c)),
                "rbf" => out.extend(gammas.iter().map(|&g| SvmParams::new(Kernel::Rbf { gamma: g }, c))),
                "poly" | "polynomial" => out.extend(gammas.iter().map(|&g| {
                    SvmParams::new(Kernel::Polynomial { gamma: g, degree, coef0: 1.0 }, c)
                })),
                other => return Err(Error::InvalidInput(format!("unknown kernel {other:?}"))),
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    Ok(out)
}

fn tie_order(a: &SvmParams, b: &SvmParams) -> Ordering {
    let g = |p: &SvmParams| p.kernel.gamma().unwrap_or(f64::NEG_INFINITY);
    a.c.total_cmp(&b.c)
        .then(g(a).total_cmp(&g(b)))
        .then(a.kernel.rank().cmp(&b.kernel.rank()))
}

/// Evaluates every cell by stratified k-fold accuracy and returns the best.
pub fn grid_search(
    x: &Matrix,
    labels: &[usize],
    grid: &[SvmParams],
    folds: usize,
    seed: u64,
    pool: &WorkerPool,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    let fold = stratified_folds(labels, folds, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|k| {
            let train = (0..labels.len()).filter(|&i| fold[i] != k).collect();
            let valid = (0..labels.len()).filter(|&i| fold[i] == k).collect();
            (train, valid)
        })
        .collect();
    let n_tasks = grid.len() * folds;
    let outcomes = pool.run(n_tasks, |t| -> Result<f64> {
        let (cell, k) = (t / folds, t % folds);
        let (train, valid) = &splits[k];
        let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let model = SvmModel::train(&x.select_rows(train), &ytr, &grid[cell])?;
        let pred = model.predict(&x.select_rows(valid))?;
        let correct = valid.iter().zip(&pred).filter(|(&i, &p)| labels[i] == p).count();
        Ok(correct as f64 / valid.len() as f64)
    });
    let mut cells = Vec::with_capacity(grid.len());
    for (c, params) in grid.iter().enumerate() {
        let mut accs = Vec::with_capacity(folds);
        for k in 0..folds {
            match &outcomes[c * folds + k] {
                Ok(Ok(a)) => accs.push(*a),
                Ok(Err(e)) => return Err(Error::Stage {
                    stage: "grid_search".into(),
                    message: e.to_string(),
                }),
                Err(f) => return Err(Error::Stage {
                    stage: "grid_search".into(),
                    message: f.to_string(),
                }),
            }
        }
        cells.push(GridCell {
            params: *params,
            mean_accuracy: accs.iter().sum::<f64>() / folds as f64,
            fold_accuracies: accs,
        });
    }
    let mut best = 0;
    for i in 1..cells.len() {
        let (a, b) = (&cells[i], &cells[best]);
        if a.mean_accuracy > b.mean_accuracy
            || (a.mean_accuracy == b.mean_accuracy && tie_order(&a.params, &b.params) == Ordering::Less)
        {
            best = i;
        }
    }
    Ok(GridResult {
        best: cells[best].params,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Matrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i < 10 { 0.1 } else { 0.9 }, (i % 5) as f64 * 0.02])
            .collect();
        (Matrix::from_rows(&rows).unwrap(), (0..20).map(|i| usize::from(i >= 10)).collect())
    }

    #[test]
    fn singleton_grid() {
        let (x, y) = separable();
        let p = SvmParams::new(Kernel::Rbf { gamma: 0.5 }, 0.5);
        let r = grid_search(&x, &y, &[p], 5, 0, &WorkerPool::serial()).unwrap();
        assert_eq!(r.best, p);
    }

    #[test]
    fn linear_wins_ties() {
        let (x, y) = separable();
        let grid = build_grid(&["rbf", "linear"], &[1.0], &[1.0], 3).unwrap();
        let r = grid_search(&x, &y, &grid, 5, 0, &WorkerPool::new(3).unwrap()).unwrap();
        assert_eq!(r.cells[0].mean_accuracy, r.cells[1].mean_accuracy);
        assert_eq!(r.best.kernel, Kernel::Linear);
    }

    #[test]
    fn smaller_c_then_gamma_wins_ties() {
        let (x, y) = separable();
        let grid = build_grid(&["rbf"], &[10.0, 1.0], &[2.0, 1.0], 3).unwrap();
        let r = grid_search(&x, &y, &grid, 4, 1, &WorkerPool::serial()).unwrap();
        assert!(r.cells.iter().all(|c| c.mean_accuracy == 1.0));
        assert_eq!(r.best, SvmParams::new(Kernel::Rbf { gamma: 1.0 }, 1.0));
    }

    #[test]
    fn small_class_rejected() {
        let (x, mut y) = separable();
        y[0] = 7;
        assert!(grid_search(&x, &y, &build_grid(&["linear"], &[1.0], &[], 3).unwrap(), 5, 0, &WorkerPool::serial()).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let f = stratified_folds(&labels, 5, 9).unwrap();
        for k in 0..5 {
            for c in 0..3 {
                assert_eq!((0..30).filter(|&i| f[i] == k && labels[i] == c).count(), 2);
            }
        }
    }
}
