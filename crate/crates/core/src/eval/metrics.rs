//! Confusion matrices and the derived accuracy / precision / recall / RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// Rows are actual classes, columns predicted.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let c = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::DimensionMismatch {
                expected: classes.len(),
                got: counts.len(),
            });
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Element-wise sum; both matrices must share the class list.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::InvalidInput("confusion matrices have different classes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (name, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies `(actual, predicted)` class-index pairs.
pub fn confusion(actual: &[usize], predicted: &[usize], classes: &[String]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= classes.len() || p >= classes.len() {
            return Err(Error::InvalidInput(format!("label index out of range ({a}, {p})")));
        }
        cm.counts[a][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub rmse: f64,
    pub total: u64,
}

fn pct(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (100.0 * num as f64 / den as f64, false)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 || cm.classes.is_empty() {
        return Err(Error::Empty("confusion matrix"));
    }
    let c = cm.classes.len();
    let trace = cm.trace();
    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.counts[k][k];
        let predicted: u64 = (0..c).map(|i| cm.counts[i][k]).sum();
        let actual: u64 = cm.counts[k].iter().sum();
        let (precision, precision_undefined) = pct(tp, predicted);
        let (recall, recall_undefined) = pct(tp, actual);
        per_class.push(ClassMetrics {
            class: cm.classes[k].clone(),
            precision,
            recall,
            precision_undefined,
            recall_undefined,
            support: actual,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    Ok(MetricReport {
        accuracy: 100.0 * trace as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        rmse: ((total - trace) as f64 / total as f64).sqrt(),
        per_class,
        total,
    })
}

impl MetricReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
