//! Confusion matrices and F1 scores.

use serde::{Deserialize, Serialize};

use crate::{AnomalyClass, Error, Label, Result};

/// Rows are true labels, columns predictions, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_support: bool,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self { labels, counts: vec![vec![0; n]; n] }
    }

    /// Tallies `(truth, prediction)` pairs over the given label order.
    pub fn from_pairs<T: Copy + PartialEq + ToString>(order: &[T], pairs: &[(T, T)]) -> Result<Self> {
        let mut m = Self::zeros(order.iter().map(|l| l.to_string()).collect());
        let pos = |l: T| {
            order.iter().position(|&o| o == l).ok_or_else(|| Error::invalid(format!("label `{}` not in matrix", l.to_string())))
        };
        for &(t, p) in pairs {
            m.counts[pos(t)?][pos(p)?] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    /// Pooled F1, equal to accuracy for single-label data. Zero when empty.
    pub fn micro_f1(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn per_class(&self) -> Vec<ClassScore> {
        let n = self.counts.len();
        (0..n)
            .map(|i| {
                let tp = self.counts[i][i] as f64;
                let support = self.support(i);
                let predicted: usize = (0..n).map(|r| self.counts[r][i]).sum();
                let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
                let recall = if support == 0 { 0.0 } else { tp / support as f64 };
                let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
                ClassScore { label: self.labels[i].clone(), precision, recall, f1, support, no_support: support == 0 }
            })
            .collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let s = self.per_class();
        let with_support: Vec<&ClassScore> = s.iter().filter(|c| !c.no_support).collect();
        if with_support.is_empty() {
            return 0.0;
        }
        with_support.iter().map(|c| c.f1).sum::<f64>() / with_support.len() as f64
    }

    /// Sums rows and columns that map to the same group.
    pub fn collapse(&self, groups: &[String], group_of: impl Fn(&str) -> Option<String>) -> Result<ConfusionMatrix> {
        let mut m = Self::zeros(groups.to_vec());
        let idx = |l: &str| -> Result<Option<usize>> {
            match group_of(l) {
                None => Ok(None),
                Some(g) => groups
                    .iter()
                    .position(|x| *x == g)
                    .map(Some)
                    .ok_or_else(|| Error::invalid(format!("group `{g}` not listed"))),
            }
        };
        for (i, row) in self.counts.iter().enumerate() {
            let Some(gi) = idx(&self.labels[i])? else { continue };
            for (j, &c) in row.iter().enumerate() {
                let Some(gj) = idx(&self.labels[j])? else { continue };
                m.counts[gi][gj] += c;
            }
        }
        Ok(m)
    }

    /// Merges the growth and decrease directions of each anomaly class.
    pub fn by_class(&self) -> Result<ConfusionMatrix> {
        let groups: Vec<String> = AnomalyClass::ALL.iter().map(|c| c.as_str().to_string()).collect();
        self.collapse(&groups, |l| l.parse::<Label>().ok()?.class().map(|c| c.as_str().to_string()))
    }
}

/// Share of positions where `truth` and `pred` agree.
pub fn accuracy<T: PartialEq>(truth: &[T], pred: &[T]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
