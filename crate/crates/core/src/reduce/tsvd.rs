//! Rank-j truncated SVD of the tf-idf block.
//!
//! Matrices with both dimensions under [`DENSE_LIMIT`] are factorized densely
//! and exactly; larger ones go through a seeded randomized range finder with
//! [`OVERSAMPLE`] extra columns and [`POWER_ITERATIONS`] power steps.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, orthonormalize_columns, CsrMatrix, Matrix};

pub const DENSE_LIMIT: usize = 500;
pub const OVERSAMPLE: usize = 10;
pub const POWER_ITERATIONS: usize = 2;
pub const DEFAULT_RANK: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedBasis {
    pub rank: usize,
    /// Non-increasing, all ≥ 0.
    pub singular_values: Vec<f64>,
    /// `n_features × rank`; column k is the k-th right singular vector.
    pub basis: Matrix,
    /// Fraction of the training matrix's squared Frobenius norm captured.
    pub explained: f64,
    pub vocabulary_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMethod {
    Auto,
    Dense,
    Randomized { seed: u64 },
}

fn check_rank(m_rows: usize, m_cols: usize, rank: usize) -> Result<()> {
    let max = m_rows.min(m_cols);
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    Ok(())
}

fn sort_desc(sigma: &mut [f64], cols: &mut [Vec<f64>]) {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let s: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let c: Vec<Vec<f64>> = order.iter().map(|&i| cols[i].clone()).collect();
    sigma.copy_from_slice(&s);
    cols.clone_from_slice(&c);
}

fn basis_from_columns(n_features: usize, cols: &[Vec<f64>]) -> Matrix {
    let mut b = Matrix::zeros(n_features, cols.len());
    for (k, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            b[(i, k)] = *v;
        }
    }
    b
}

impl TruncatedBasis {
    pub fn fit(m: &CsrMatrix, rank: usize, method: SvdMethod) -> Result<Self> {
        check_rank(m.rows(), m.cols(), rank)?;
        match method {
            SvdMethod::Dense => Self::fit_dense(&m.to_dense(), rank),
            SvdMethod::Randomized { seed } => Self::fit_randomized(m, rank, seed),
            SvdMethod::Auto if m.rows() < DENSE_LIMIT && m.cols() < DENSE_LIMIT => {
                Self::fit_dense(&m.to_dense(), rank)
            }
            SvdMethod::Auto => Self::fit_randomized(m, rank, 0),
        }
    }

    /// Exact top-`rank` right singular subspace by one-sided Jacobi.
    pub fn fit_dense(m: &Matrix, rank: usize) -> Result<Self> {
        check_rank(m.rows(), m.cols(), rank)?;
        let total = m.frobenius_sq();
        let (mut sigma, mut right) = if m.rows() >= m.cols() {
            let svd = jacobi_svd(m);
            (svd.sigma, svd.v)
        } else {
            // Left vectors of Mᵀ are the right vectors of M.
            let svd = jacobi_svd(&m.transpose());
            (svd.sigma, svd.u)
        };
        sort_desc(&mut sigma, &mut right);
        sigma.truncate(rank);
        right.truncate(rank);
        orthonormalize_columns(&mut right);
        Ok(Self::assemble(m.cols(), sigma, &right, total))
    }

    pub fn fit_randomized(m: &CsrMatrix, rank: usize, seed: u64) -> Result<Self> {
        check_rank(m.rows(), m.cols(), rank)?;
        let total = m.frobenius_sq();
        let width = (rank + OVERSAMPLE).min(m.rows().min(m.cols()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = Matrix::from_vec(
            m.cols(),
            width,
            (0..m.cols() * width).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )?;
        let mut q = orthonormal(&m.mul_dense(&omega));
        for _ in 0..POWER_ITERATIONS {
            let z = orthonormal(&m.tmul_dense(&q));
            q = orthonormal(&m.mul_dense(&z));
        }
        // Bᵀ = Mᵀ Q; its left singular vectors are the right vectors of B ≈ M.
        let bt = m.tmul_dense(&q);
        let svd = jacobi_svd(&bt);
        let (mut sigma, mut right) = (svd.sigma, svd.u);
        sort_desc(&mut sigma, &mut right);
        sigma.truncate(rank);
        right.truncate(rank);
        orthonormalize_columns(&mut right);
        Ok(Self::assemble(m.cols(), sigma, &right, total))
    }

    fn assemble(n_features: usize, sigma: Vec<f64>, right: &[Vec<f64>], total: f64) -> Self {
        let captured: f64 = sigma.iter().map(|s| s * s).sum();
        TruncatedBasis {
            rank: sigma.len(),
            explained: if total > 0.0 { captured / total } else { 0.0 },
            singular_values: sigma,
            basis: basis_from_columns(n_features, right),
            vocabulary_hash: None,
        }
    }

    pub fn with_vocabulary_hash(mut self, hash: String) -> Self {
        self.vocabulary_hash = Some(hash);
        self
    }

    pub fn n_features(&self) -> usize {
        self.basis.rows()
    }

    /// Projects sparse rows onto the basis (`rows × rank`).
    pub fn project(&self, rows: &CsrMatrix) -> Result<Matrix> {
        if rows.cols() != self.n_features() {
            return Err(Error::VocabularyMismatch(format!(
                "basis has {} features, rows have {}",
                self.n_features(),
                rows.cols()
            )));
        }
        Ok(rows.mul_dense(&self.basis))
    }

    pub fn project_dense(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.n_features() {
            return Err(Error::VocabularyMismatch(format!(
                "basis has {} features, rows have {}",
                self.n_features(),
                rows.cols()
            )));
        }
        rows.matmul(&self.basis)
    }

    /// Maps projected coordinates back to feature space.
    pub fn reconstruct(&self, coords: &Matrix) -> Result<Matrix> {
        coords.matmul(&self.basis.transpose())
    }

    /// Writes `basis.json`, `singular_values.csv` and `basis.csv` (one line per
    /// basis column) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = BasisHeader {
            rank: self.rank,
            n_features: self.n_features(),
            explained: self.explained,
            vocabulary_hash: self.vocabulary_hash.clone(),
        };
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        write(
            "basis.json",
            serde_json::to_string_pretty(&header).expect("header serializes") + "\n",
        )?;
        let sv: String = self.singular_values.iter().map(|s| format!("{s}\n")).collect();
        write("singular_values.csv", sv)?;
        let mut body = String::new();
        for k in 0..self.rank {
            let col: Vec<String> = (0..self.n_features()).map(|i| self.basis[(i, k)].to_string()).collect();
            body.push_str(&col.join(","));
            body.push('\n');
        }
        write("basis.csv", body)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let header: BasisHeader =
            serde_json::from_str(&read("basis.json")?).map_err(|e| Error::format("basis.json", e))?;
        let parse = |s: &str, ctx: &str| s.trim().parse::<f64>().map_err(|e| Error::format(ctx.to_string(), e));
        let singular_values = read("singular_values.csv")?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse(l, "singular_values.csv"))
            .collect::<Result<Vec<_>>>()?;
        let mut basis = Matrix::zeros(header.n_features, header.rank);
        let body = read("basis.csv")?;
        let lines: Vec<&str> = body.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != header.rank || singular_values.len() != header.rank {
            return Err(Error::format("basis.csv", "rank does not match header"));
        }
        for (k, line) in lines.iter().enumerate() {
            let vals = line
                .split(',')
                .map(|v| parse(v, "basis.csv"))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != header.n_features {
                return Err(Error::format("basis.csv", "column length does not match header"));
            }
            for (i, v) in vals.into_iter().enumerate() {
                basis[(i, k)] = v;
            }
        }
        Ok(TruncatedBasis {
            rank: header.rank,
            singular_values,
            basis,
            explained: header.explained,
            vocabulary_hash: header.vocabulary_hash,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisHeader {
    rank: usize,
    n_features: usize,
    explained: f64,
    vocabulary_hash: Option<String>,
}

fn orthonormal(m: &Matrix) -> Matrix {
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    orthonormalize_columns(&mut cols);
    basis_from_columns(m.rows(), &cols)
}
