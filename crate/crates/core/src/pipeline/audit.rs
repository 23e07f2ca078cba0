//! Held-out labels that only the evaluation stage may open.

use std::sync::Mutex;

use crate::error::{Error, Result};

pub const EVALUATION_STAGE: &str = "evaluate";

#[derive(Debug)]
pub struct SealedLabels {
    labels: Vec<usize>,
    access: Mutex<Vec<String>>,
}

impl SealedLabels {
    pub fn new(labels: Vec<usize>) -> Self {
        SealedLabels {
            labels,
            access: Mutex::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Every attempt is logged; only the evaluation stage gets the labels.
    pub fn reveal(&self, stage: &str) -> Result<&[usize]> {
        self.access.lock().expect("audit log").push(stage.to_string());
        if stage != EVALUATION_STAGE {
            return Err(Error::InvalidInput(format!("stage {stage:?} may not read test labels")));
        }
        Ok(&self.labels)
    }

    pub fn access_log(&self) -> Vec<String> {
        self.access.lock().expect("audit log").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_evaluation_opens() {
        let s = SealedLabels::new(vec![1, 0]);
        assert!(s.reveal("train").is_err());
        assert_eq!(s.reveal(EVALUATION_STAGE).unwrap(), [1, 0]);
        assert_eq!(s.access_log(), ["train", "evaluate"]);
    }
}
