//! Deterministic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roadsignal::linalg::{CsrMatrix, Matrix};
use roadsignal::preprocess::{process, LexiconTables};
use roadsignal::synthetic::{generate, SyntheticConfig};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("shape matches data")
}

/// Sparse matrix with roughly `per_row` non-zeros in each row.
pub fn random_sparse(rows: usize, cols: usize, per_row: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..rows)
        .map(|_| {
            let mut row: Vec<(usize, f64)> = (0..per_row).map(|_| (rng.random_range(0..cols), rng.random())).collect();
            row.sort_by_key(|e| e.0);
            row.dedup_by_key(|e| e.0);
            row
        })
        .collect();
    CsrMatrix::from_row_entries(cols, entries).expect("indices in range")
}

/// Two shifted Gaussian-ish clouds with ±1 targets.
pub fn binary_problem(n: usize, dims: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let data = (0..n * dims).map(|k| rng.random_range(-1.0..1.0) + 0.5 * y[k / dims]).collect();
    (Matrix::from_vec(n, dims, data).expect("shape matches data"), y)
}

/// Relevant tokens and sub-class indices of the synthetic transportation posts.
pub fn topic_docs(per_class: usize) -> (Vec<Vec<String>>, Vec<usize>) {
    let corpus = generate(&SyntheticConfig {
        per_class,
        non_transportation: 0,
        ..SyntheticConfig::default()
    });
    let lex = LexiconTables::default();
    corpus
        .messages()
        .iter()
        .filter_map(|m| {
            let sub = m.gold_label.and_then(|l| l.tier2)?;
            Some((process(&m.text, &lex).relevant_tokens, sub as usize))
        })
        .unzip()
}

pub fn street_names(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["GRAND", "BRONX", "RIVER", "OCEAN", "KINGS", "EAST", "WEST", "NORTH", "BOSTON", "JEROME"];
    let kinds = ["AVENUE", "STREET", "PARKWAY", "ROAD", "BOULEVARD"];
    (0..n)
        .map(|_| format!("{} {} {}", words[rng.random_range(0..10)], words[rng.random_range(0..10)], kinds[rng.random_range(0..5)]))
        .collect()
}
