//! Classification metrics, group breakdowns and replicate comparison.

pub mod groups;
pub mod metrics;
pub mod wilcoxon;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use groups::{group_report_csv, user_group_report, GroupAccuracy, UserGroups, OTHER_GROUP};
pub use metrics::{confusion, metrics, ClassMetrics, ConfusionMatrix, MetricReport};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, SIGNIFICANCE};

use crate::error::{Error, Result};

/// Per-classifier accuracies over paired replicate runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplicateSet {
    pub seeds: Vec<u64>,
    pub run_accuracies: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub result: std::result::Result<WilcoxonResult, String>,
}

impl ReplicateSet {
    pub fn new(seeds: Vec<u64>) -> Self {
        ReplicateSet {
            seeds,
            run_accuracies: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, accuracies: Vec<f64>) -> Result<()> {
        if accuracies.len() != self.seeds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.seeds.len(),
                got: accuracies.len(),
            });
        }
        self.run_accuracies.insert(name.to_string(), accuracies);
        Ok(())
    }

    pub fn median(&self, name: &str) -> Option<f64> {
        let mut v = self.run_accuracies.get(name)?.clone();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        let v = self.run_accuracies.get(name)?;
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Wilcoxon test for every unordered pair, in name order.
    pub fn compare_all(&self) -> Vec<PairComparison> {
        let names: Vec<&String> = self.run_accuracies.keys().collect();
        let mut out = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let result = wilcoxon_signed_rank(&self.run_accuracies[*a], &self.run_accuracies[*b])
                    .map_err(|e| e.to_string());
                out.push(PairComparison {
                    a: (*a).clone(),
                    b: (*b).clone(),
                    result,
                });
            }
        }
        out
    }

    /// One row per replicate seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,seed");
        for name in self.run_accuracies.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (r, seed) in self.seeds.iter().enumerate() {
            out.push_str(&format!("{r},{seed}"));
            for v in self.run_accuracies.values() {
                out.push_str(&format!(",{}", v[r]));
            }
            out.push('\n');
        }
        out
    }
}
