//! Grid search with stratified cross-validation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::distance::DistanceSpec;
use crate::classifiers::knn::vote;
use crate::classifiers::{ClassifierConfig, LabeledWindowSet};
use crate::evaluation::resample::{effective_folds, stratified_folds};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: ClassifierConfig,
    pub fold_scores: Vec<f64>,
    /// Mean micro F1 over folds, absent when the point could not be fitted.
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ClassifierConfig,
    pub best_score: f64,
    pub folds: usize,
    pub table: Vec<CvRow>,
}

/// Pairwise distances over a set, reused by every kNN grid point that
/// shares the distance.
struct DistanceCache {
    entries: Vec<(DistanceSpec, Vec<f64>)>,
    n: usize,
}

impl DistanceCache {
    fn build(set: &LabeledWindowSet, grid: &[ClassifierConfig]) -> Result<Self> {
        let n = set.len();
        let mut specs: Vec<DistanceSpec> = Vec::new();
        for c in grid {
            if let ClassifierConfig::Knn(k) = c {
                if !specs.contains(&k.spec()) {
                    specs.push(k.spec());
                }
            }
        }
        let entries = specs
            .into_iter()
            .map(|spec| {
                let rows: Vec<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|i| (i + 1..n).map(|j| spec.eval(&set.series[i], &set.series[j])).collect())
                    .collect::<Result<_>>()?;
                let mut m = vec![0.0; n * n];
                for (i, row) in rows.iter().enumerate() {
                    for (off, &d) in row.iter().enumerate() {
                        let j = i + 1 + off;
                        m[i * n + j] = d;
                        m[j * n + i] = d;
                    }
                }
                Ok((spec, m))
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries, n })
    }

    fn get(&self, spec: &DistanceSpec) -> &[f64] {
        &self.entries.iter().find(|(s, _)| s == spec).expect("spec cached").1
    }
}

fn fold_accuracy(
    set: &LabeledWindowSet,
    config: &ClassifierConfig,
    train: &[usize],
    held: &[usize],
    cache: &DistanceCache,
) -> Result<f64> {
    let correct = match config {
        ClassifierConfig::Knn(k) => {
            if k.k > train.len() {
                return Err(Error::invalid(format!("k = {} exceeds fold training size {}", k.k, train.len())));
            }
            let m = cache.get(&k.spec());
            let labels: Vec<_> = train.iter().map(|&j| set.labels[j]).collect();
            held.iter()
                .filter(|&&i| {
                    let d: Vec<f64> = train.iter().map(|&j| m[i * cache.n + j]).collect();
                    vote(&d, &labels, &set.classes, k.k, k.weighting).label == set.labels[i]
                })
                .count()
        }
        ClassifierConfig::Stsf(_) => {
            let model = config.fit(&set.subset(train)?)?;
            let mut c = 0;
            for &i in held {
                if model.predict(&set.series[i])?.label == set.labels[i] {
                    c += 1;
                }
            }
            c
        }
    };
    Ok(correct as f64 / held.len() as f64)
}

/// Scores every grid point by mean micro F1 over the same stratified
/// folds and returns the best one; ties go to the earlier grid point.
pub fn grid_search(set: &LabeledWindowSet, grid: &[ClassifierConfig], cv_folds: usize, seed: u64) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    let k = effective_folds(&set.labels, cv_folds)?;
    let folds = stratified_folds(&set.labels, k, &mut ChaCha8Rng::seed_from_u64(seed));
    let cache = DistanceCache::build(set, grid)?;
    let table: Vec<CvRow> = grid
        .par_iter()
        .map(|config| {
            let scores: Result<Vec<f64>> = (0..k)
                .map(|f| {
                    let train: Vec<usize> = (0..k).filter(|&g| g != f).flat_map(|g| folds[g].iter().copied()).collect();
                    let mut train = train;
                    train.sort_unstable();
                    fold_accuracy(set, config, &train, &folds[f], &cache)
                })
                .collect();
            match scores {
                Ok(s) => {
                    let mean = s.iter().sum::<f64>() / s.len() as f64;
                    CvRow { config: *config, fold_scores: s, mean: Some(mean), skipped: None }
                }
                Err(e) => CvRow { config: *config, fold_scores: Vec::new(), mean: None, skipped: Some(e.to_string()) },
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in table.iter().enumerate() {
        if let Some(m) = row.mean {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
    }
    let (i, best_score) = best.ok_or_else(|| Error::insufficient("no grid point could be evaluated"))?;
    Ok(GridResult { best: table[i].config, best_score, folds: k, table })
}
