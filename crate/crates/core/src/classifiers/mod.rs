//! Window classifiers: elastic-distance kNN and the supervised interval forest.

pub mod distance;
pub mod features;
pub mod knn;
pub mod stsf;
pub mod tree;

pub use distance::{ddtw, dtw, wdtw, DistanceKind, DistanceSpec};
pub use knn::{KnnConfig, KnnModel, Weighting};
pub use stsf::{StsfConfig, StsfModel};

use serde::{Deserialize, Serialize};

use crate::detector::AnalysisWindow;
use crate::{Error, Label, Result};

/// Equal-length series with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindowSet {
    pub series: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Sorted distinct labels.
    pub classes: Vec<Label>,
}

impl LabeledWindowSet {
    pub fn new(series: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        if series.len() != labels.len() {
            return Err(Error::invalid("series and labels differ in count"));
        }
        let len = series[0].len();
        if len == 0 || series.iter().any(|s| s.len() != len) {
            return Err(Error::invalid("all windows must share one non-zero length"));
        }
        let mut classes = labels.clone();
        classes.sort();
        classes.dedup();
        Ok(Self { series, labels, classes })
    }

    /// Uses the first label of every window.
    pub fn from_windows(windows: &[AnalysisWindow]) -> Result<Self> {
        let labels = windows
            .iter()
            .enumerate()
            .map(|(i, w)| w.primary_label().ok_or_else(|| Error::invalid(format!("window {i} has no label"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(windows.iter().map(|w| w.values.clone()).collect(), labels)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.series[0].len()
    }

    pub fn class_index(&self, label: Label) -> Option<usize> {
        self.classes.binary_search(&label).ok()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(idx.iter().map(|&i| self.series[i].clone()).collect(), idx.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Predicted label and per-class scores summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub scores: Vec<(Label, f64)>,
}

/// Classifier family and hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Knn(KnnConfig),
    Stsf(StsfConfig),
}

impl ClassifierConfig {
    pub fn family(&self) -> &'static str {
        match self {
            ClassifierConfig::Knn(_) => "knn",
            ClassifierConfig::Stsf(_) => "stsf",
        }
    }

    pub fn fit(&self, train: &LabeledWindowSet) -> Result<Model> {
        Ok(match self {
            ClassifierConfig::Knn(c) => Model::Knn(KnnModel::fit(train, *c)?),
            ClassifierConfig::Stsf(c) => Model::Stsf(StsfModel::fit(train, *c)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Knn(KnnModel),
    Stsf(StsfModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            Model::Knn(m) => m.predict(x),
            Model::Stsf(m) => m.predict(x),
        }
    }

    pub fn classes(&self) -> &[Label] {
        match self {
            Model::Knn(m) => &m.train.classes,
            Model::Stsf(m) => &m.classes,
        }
    }
}
