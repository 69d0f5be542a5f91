//! k-nearest-neighbour classification under elastic distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::distance::{DistanceKind, DistanceSpec, WDTW_G};
use crate::classifiers::{LabeledWindowSet, Prediction};
use crate::{Error, Label, Result};

/// Added to distances before inverting them for distance weighting.
pub const DISTANCE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
    pub distance: DistanceKind,
    pub weighting: Weighting,
    /// Warping band as a fraction of the longer input (DTW and DDTW).
    pub window_frac: f64,
    /// WDTW weight steepness.
    pub g: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 1, distance: DistanceKind::Dtw, weighting: Weighting::Uniform, window_frac: 1.0, g: WDTW_G }
    }
}

impl KnnConfig {
    pub fn spec(&self) -> DistanceSpec {
        DistanceSpec { kind: self.distance, window_frac: self.window_frac, g: self.g }
    }

    /// The grid of k, distance and weighting values searched by default.
    pub fn default_grid() -> Vec<KnnConfig> {
        let mut out = Vec::new();
        for distance in DistanceKind::ALL {
            for k in [1, 3, 5, 10, 20, 50] {
                for weighting in [Weighting::Uniform, Weighting::Distance] {
                    out.push(KnnConfig { k, distance, weighting, ..KnnConfig::default() });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    pub config: KnnConfig,
    pub train: LabeledWindowSet,
}

impl KnnModel {
    pub fn fit(train: &LabeledWindowSet, config: KnnConfig) -> Result<Self> {
        if config.k == 0 || config.k > train.len() {
            return Err(Error::invalid(format!(
                "k = {} must lie in 1..={} (training size)",
                config.k,
                train.len()
            )));
        }
        Ok(Self { config, train: train.clone() })
    }

    /// Distances from `query` to every training window, in training order.
    pub fn distances(&self, query: &[f64]) -> Result<Vec<f64>> {
        let spec = self.config.spec();
        self.train.series.par_iter().map(|s| spec.eval(query, s)).collect()
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let d = self.distances(query)?;
        Ok(vote(&d, &self.train.labels, &self.train.classes, self.config.k, self.config.weighting))
    }
}

/// Votes among the `k` nearest neighbours. Equal distances keep training
/// order; a tie in votes goes to the class met first among the neighbours.
pub fn vote(distances: &[f64], labels: &[Label], classes: &[Label], k: usize, weighting: Weighting) -> Prediction {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut tally: Vec<(Label, f64)> = Vec::new();
    for &i in order.iter().take(k) {
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::Distance => 1.0 / (distances[i] + DISTANCE_EPS),
        };
        match tally.iter_mut().find(|(l, _)| *l == labels[i]) {
            Some((_, v)) => *v += w,
            None => tally.push((labels[i], w)),
        }
    }
    let mut best = 0;
    for (i, &(_, v)) in tally.iter().enumerate() {
        if v > tally[best].1 {
            best = i;
        }
    }
    let total: f64 = tally.iter().map(|(_, v)| v).sum();
    let scores = classes
        .iter()
        .map(|c| (*c, tally.iter().find(|(l, _)| l == c).map_or(0.0, |(_, v)| v / total)))
        .collect();
    Prediction { label: tally[best].0, scores }
}

/// On-disk form of a kNN model: its configuration plus the window file and
/// the indices of the training windows inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnPersisted {
    pub config: KnnConfig,
    pub windows_path: String,
    pub indices: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> LabeledWindowSet {
        LabeledWindowSet::new(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.1, 0.0, 0.1], vec![5.0, 5.0, 5.0]],
            vec![Label::SinglePointPeak, Label::SinglePointDip, Label::SinglePointPeak, Label::SinglePointDip],
        )
        .unwrap()
    }

    #[test]
    fn exact_match_k1() {
        let m = KnnModel::fit(&set(), KnnConfig::default()).unwrap();
        let p = m.predict(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.label, Label::SinglePointDip);
        assert!((p.scores.iter().map(|s| s.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_distance_tie_goes_to_first() {
        let d = [1.0, 1.0];
        let labels = [Label::LevelShiftGrowth, Label::SinglePointPeak];
        let classes = [Label::SinglePointPeak, Label::LevelShiftGrowth];
        let p = vote(&d, &labels, &classes, 2, Weighting::Uniform);
        assert_eq!(p.label, Label::LevelShiftGrowth);
    }

    #[test]
    fn k_equals_n_is_majority() {
        let mut s = set();
        s.series.push(vec![9.0, 9.0, 9.0]);
        s.labels.push(Label::SinglePointDip);
        let m = KnnModel::fit(&s, KnnConfig { k: 5, ..KnnConfig::default() }).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0, 0.0]).unwrap().label, Label::SinglePointDip);
        assert!(KnnModel::fit(&s, KnnConfig { k: 6, ..KnnConfig::default() }).is_err());
    }

    #[test]
    fn grid_has_every_combination() {
        assert_eq!(KnnConfig::default_grid().len(), 36);
    }
}
