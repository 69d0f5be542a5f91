//! Expanding-window folds, each split into a train prefix and a test tail.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// 1-based fold number.
    pub fold: usize,
    /// Train range `[0, train_end)`.
    pub train_end: usize,
    /// Test range `[train_end, test_end)`.
    pub test_end: usize,
}

impl Split {
    pub fn test_len(&self) -> usize {
        self.test_end - self.train_end
    }
}

/// Fold `k` covers `[0, ceil(len * k / folds))`; its first `train_frac` is
/// train and the rest test. Folds whose train part is shorter than
/// `min_train` are dropped with a warning.
pub fn expanding_splits(len: usize, folds: usize, train_frac: f64, min_train: usize) -> Result<Vec<Split>> {
    if folds == 0 {
        return Err(Error::invalid("folds must be at least 1"));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid("train_frac must lie in (0, 1)"));
    }
    let mut out = Vec::with_capacity(folds);
    for k in 1..=folds {
        let end = (len * k).div_ceil(folds);
        let train_end = (train_frac * end as f64 + 1e-9).floor() as usize;
        if train_end < min_train.max(1) || train_end >= end {
            log::warn!("dropping fold {k}: train holds {train_end} samples, {min_train} required");
            continue;
        }
        out.push(Split { fold: k, train_end, test_end: end });
    }
    if out.is_empty() {
        return Err(Error::insufficient(format!(
            "series of {len} samples leaves no fold with {min_train} training samples"
        )));
    }
    Ok(out)
}
