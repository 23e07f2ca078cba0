//! L1-penalized least squares by cyclic coordinate descent, used to keep or
//! drop dense feature columns.
//!
//! Objective: `(1 / 2n) ‖y − b − Xw‖² + λ‖w‖₁` with an unpenalized intercept.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 200_000;
const KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub selected: BTreeSet<usize>,
    pub sweeps: usize,
}

impl LassoModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }
}

struct Centered {
    cols: Vec<Vec<f64>>,
    col_means: Vec<f64>,
    sq_norms: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

fn center(x: &Matrix, y: &[f64]) -> Result<Centered> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Empty("lasso design matrix"));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let n = x.rows() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut cols = Vec::with_capacity(x.cols());
    let mut col_means = Vec::with_capacity(x.cols());
    let mut sq_norms = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let mut c = x.column(j);
        let m = c.iter().sum::<f64>() / n;
        c.iter_mut().for_each(|v| *v -= m);
        sq_norms.push(c.iter().map(|v| v * v).sum::<f64>() / n);
        col_means.push(m);
        cols.push(c);
    }
    Ok(Centered {
        cols,
        col_means,
        sq_norms,
        y: y.iter().map(|v| v - y_mean).collect(),
        y_mean,
    })
}

/// Smallest λ at which every weight is zero: `max_j |X_jᵀ(y − ȳ)| / n`.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> Result<f64> {
    let c = center(x, y)?;
    let n = x.rows() as f64;
    Ok(c.cols
        .iter()
        .map(|col| (col.iter().zip(&c.y).map(|(a, b)| a * b).sum::<f64>() / n).abs())
        .fold(0.0, f64::max))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Fits the lasso; coordinates are visited in column order every sweep.
pub fn lasso_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<LassoModel> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be >= 0")));
    }
    let c = center(x, y)?;
    let n = x.rows() as f64;
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut resid = c.y.clone();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        for j in 0..d {
            if c.sq_norms[j] == 0.0 {
                continue;
            }
            let col = &c.cols[j];
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n
                + c.sq_norms[j] * w[j];
            let new = soft_threshold(rho, lambda) / c.sq_norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                resid.iter_mut().zip(col).for_each(|(r, a)| *r -= a * delta);
                w[j] = new;
            }
        }
        if kkt_violation_centered(&c, &resid, &w, lambda) <= KKT_TOL {
            break;
        }
    }
    let intercept = c.y_mean - c.col_means.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>();
    let selected = w
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(LassoModel {
        weights: w,
        intercept,
        lambda,
        selected,
        sweeps,
    })
}

fn kkt_violation_centered(c: &Centered, resid: &[f64], w: &[f64], lambda: f64) -> f64 {
    let n = resid.len() as f64;
    let mut worst: f64 = 0.0;
    for (j, col) in c.cols.iter().enumerate() {
        if c.sq_norms[j] == 0.0 {
            continue;
        }
        let grad = -col.iter().zip(resid).map(|(a, r)| a * r).sum::<f64>() / n;
        let v = if w[j] != 0.0 {
            (grad + lambda * w[j].signum()).abs()
        } else {
            (grad.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Gradient of the smooth part of the objective at the fitted model.
pub fn smooth_gradient(x: &Matrix, y: &[f64], model: &LassoModel) -> Vec<f64> {
    let n = x.rows() as f64;
    let resid: Vec<f64> = x
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| yi - model.predict(row))
        .collect();
    (0..x.cols())
        .map(|j| -(0..x.rows()).map(|i| x[(i, j)] * resid[i]).sum::<f64>() / n)
        .collect()
}

pub fn objective(x: &Matrix, y: &[f64], model: &LassoModel) -> f64 {
    let n = x.rows() as f64;
    let rss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| (yi - model.predict(row)).powi(2))
        .sum();
    rss / (2.0 * n) + model.lambda * model.weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// The default λ grid, logarithmic from 1e-4 to 1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoCv {
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub mean_mse: Vec<f64>,
}

/// Picks λ by k-fold validation MSE; ties go to the larger λ.
pub fn lasso_cv(x: &Matrix, y: &[f64], grid: &[f64], folds: usize, seed: u64) -> Result<LassoCv> {
    if grid.is_empty() {
        return Err(Error::Empty("lambda grid"));
    }
    let n = x.rows();
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!(
            "{folds}-fold validation needs at least {folds} rows, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };
    let mut mean_mse = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for k in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
            let valid: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = lasso_fit(&x.select_rows(&train), &ytr, lambda)?;
            let mse = valid
                .iter()
                .map(|&i| (y[i] - model.predict(x.row(i))).powi(2))
                .sum::<f64>()
                / valid.len() as f64;
            total += mse;
        }
        mean_mse.push(total / folds as f64);
    }
    let mut best = 0;
    for (i, &m) in mean_mse.iter().enumerate() {
        if m < mean_mse[best] || (m == mean_mse[best] && grid[i] > grid[best]) {
            best = i;
        }
    }
    Ok(LassoCv {
        lambda: grid[best],
        grid: grid.to_vec(),
        mean_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_problem(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap();
        let y = (0..n).map(|i| if x[(i, 0)] + 0.3 * x[(i, 1)] > 0.6 { 1.0 } else { -1.0 }).collect();
        (x, y)
    }

    fn assert_kkt(x: &Matrix, y: &[f64], m: &LassoModel) {
        let g = smooth_gradient(x, y, m);
        for (j, gj) in g.iter().enumerate() {
            if m.weights[j] == 0.0 {
                assert!(gj.abs() <= m.lambda + 1e-6, "col {j}: |{gj}| > {}", m.lambda);
            } else {
                assert!((gj + m.lambda * m.weights[j].signum()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let (x, y) = random_problem(60, 4, 1);
        let m = lasso_fit(&x, &y, 0.0).unwrap();
        assert_eq!(m.selected.len(), 4);
        assert!(smooth_gradient(&x, &y, &m).iter().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn above_lambda_max_everything_is_zero() {
        let (x, y) = random_problem(50, 5, 2);
        let lmax = lambda_max(&x, &y).unwrap();
        let m = lasso_fit(&x, &y, lmax * 1.0001).unwrap();
        assert!(m.selected.is_empty());
        let just_below = lasso_fit(&x, &y, lmax * 0.99).unwrap();
        assert_eq!(just_below.selected.len(), 1);
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..5 {
            let (x, y) = random_problem(40, 6, seed);
            let lmax = lambda_max(&x, &y).unwrap();
            for frac in [0.01, 0.1, 0.5] {
                let m = lasso_fit(&x, &y, lmax * frac).unwrap();
                assert_kkt(&x, &y, &m);
            }
        }
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(lasso_fit(&Matrix::zeros(0, 3), &[], 0.1).is_err());
        let (x, y) = random_problem(10, 2, 0);
        assert!(lasso_fit(&x, &y, -1.0).is_err());
    }

    #[test]
    fn cv_prefers_larger_lambda_on_ties() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![(i % 2) as f64]).collect::<Vec<_>>()).unwrap();
        let y = vec![1.0; 10];
        let cv = lasso_cv(&x, &y, &[0.001, 0.01, 0.1], 5, 0).unwrap();
        assert_eq!(cv.lambda, 0.1);
    }
}
