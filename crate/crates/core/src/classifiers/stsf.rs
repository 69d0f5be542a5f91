//! Supervised time series forest.
//!
//! Each tree draws a class-balanced bootstrap and, for every representation,
//! splits the index range at a random cut. Starting from each side, every
//! feature bisects its interval repeatedly, keeping the half whose feature
//! values separate the classes best by Fisher score; each kept half becomes
//! one column. Full-range columns are added for every feature and
//! representation. A CART tree is grown on those columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::features::{fisher_score, Feature, Representation};
use crate::classifiers::tree::DecisionTree;
use crate::classifiers::{LabeledWindowSet, Prediction};
use crate::{Error, Label, Result};

/// Intervals shorter than this are not bisected further.
pub const MIN_BISECT_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StsfConfig {
    pub n_estimators: usize,
    pub seed: u64,
}

impl Default for StsfConfig {
    fn default() -> Self {
        Self { n_estimators: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalColumn {
    pub representation: Representation,
    pub feature: Feature,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsfTree {
    pub columns: Vec<IntervalColumn>,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsfModel {
    pub config: StsfConfig,
    pub classes: Vec<Label>,
    pub length: usize,
    pub trees: Vec<StsfTree>,
}

/// All representations of one series, in [`Representation::ALL`] order.
fn representations(x: &[f64]) -> Result<Vec<Vec<f64>>> {
    Representation::ALL.iter().map(|r| r.apply(x)).collect()
}

fn rep_index(r: Representation) -> usize {
    Representation::ALL.iter().position(|&q| q == r).expect("known representation")
}

impl StsfModel {
    pub fn fit(train: &LabeledWindowSet, config: StsfConfig) -> Result<Self> {
        if config.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        let n_classes = train.classes.len();
        if n_classes < 2 {
            return Err(Error::invalid("forest needs at least two classes"));
        }
        let y: Vec<usize> = train.labels.iter().map(|l| train.class_index(*l).expect("label in vocabulary")).collect();
        let by_class: Vec<Vec<usize>> =
            (0..n_classes).map(|c| (0..y.len()).filter(|&i| y[i] == c).collect()).collect();
        if let Some(c) = by_class.iter().position(|v| v.len() < 2) {
            return Err(Error::invalid(format!("class {} has fewer than 2 windows", train.classes[c])));
        }
        let length = train.window_len();
        if length < 4 {
            return Err(Error::invalid("windows must hold at least 4 points"));
        }
        let reps: Vec<Vec<Vec<f64>>> = train.series.iter().map(|s| representations(s)).collect::<Result<_>>()?;
        let per_class = (y.len() / n_classes).max(1);
        let mut master = ChaCha8Rng::seed_from_u64(config.seed);
        let seeds: Vec<u64> = (0..config.n_estimators).map(|_| master.random()).collect();

        let trees = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rows: Vec<usize> = by_class
                    .iter()
                    .flat_map(|members| {
                        (0..per_class).map(|_| members[rng.random_range(0..members.len())]).collect::<Vec<_>>()
                    })
                    .collect();
                let yb: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
                let mut columns = Vec::new();
                for rep in Representation::ALL {
                    let ri = rep_index(rep);
                    let len = reps[0][ri].len();
                    for feature in Feature::ALL {
                        columns.push(IntervalColumn { representation: rep, feature, start: 0, end: len });
                    }
                    if len < 3 {
                        continue;
                    }
                    let cut = rng.random_range(1..len - 1);
                    for (lo, hi) in [(0, cut), (cut, len)] {
                        for feature in Feature::ALL {
                            let (mut a, mut b) = (lo, hi);
                            while b - a >= MIN_BISECT_LEN {
                                let mid = a + (b - a) / 2;
                                let score = |s: usize, e: usize| {
                                    let v: Vec<f64> = rows.iter().map(|&r| feature.eval(&reps[r][ri][s..e])).collect();
                                    fisher_score(&v, &yb, n_classes)
                                };
                                if score(a, mid) >= score(mid, b) {
                                    b = mid;
                                } else {
                                    a = mid;
                                }
                                columns.push(IntervalColumn { representation: rep, feature, start: a, end: b });
                            }
                        }
                    }
                }
                let x: Vec<f64> = rows.iter().flat_map(|&r| column_values(&columns, &reps[r])).collect();
                StsfTree { tree: DecisionTree::fit(&x, columns.len(), &yb, n_classes), columns }
            })
            .collect();
        Ok(Self { config, classes: train.classes.clone(), length, trees })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.length {
            return Err(Error::invalid(format!("window has {} points, model expects {}", x.len(), self.length)));
        }
        let reps = representations(x)?;
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.tree.predict(&column_values(&t.columns, &reps))] += 1;
        }
        let total = self.trees.len() as f64;
        let mut best = 0;
        for c in 1..votes.len() {
            if votes[c] > votes[best] || (votes[c] == votes[best] && self.classes[c].as_str() < self.classes[best].as_str()) {
                best = c;
            }
        }
        let scores = self.classes.iter().zip(&votes).map(|(&l, &v)| (l, v as f64 / total)).collect();
        Ok(Prediction { label: self.classes[best], scores })
    }
}

fn column_values(columns: &[IntervalColumn], reps: &[Vec<f64>]) -> Vec<f64> {
    columns
        .iter()
        .map(|c| c.feature.eval(&reps[rep_index(c.representation)][c.start..c.end]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> LabeledWindowSet {
        let mut series = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            series.push((0..16).map(|t| 1e-3 * ((i * 7 + t) % 5) as f64).collect());
            labels.push(Label::TemporaryChangeGrowth);
            series.push((0..16).map(|t| 1.0 + 1e-3 * ((i * 3 + t) % 4) as f64).collect());
            labels.push(Label::LevelShiftDecrease);
        }
        LabeledWindowSet::new(series, labels).unwrap()
    }

    #[test]
    fn separable_training_set_is_recovered() {
        let set = separable();
        let m = StsfModel::fit(&set, StsfConfig { n_estimators: 5, seed: 3 }).unwrap();
        for (s, l) in set.series.iter().zip(&set.labels) {
            let p = m.predict(s).unwrap();
            assert_eq!(p.label, *l);
            assert!((p.scores.iter().map(|s| s.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_serialisable() {
        let set = separable();
        let a = StsfModel::fit(&set, StsfConfig { n_estimators: 7, seed: 11 }).unwrap();
        let b = StsfModel::fit(&set, StsfConfig { n_estimators: 7, seed: 11 }).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<StsfModel>(&json).unwrap(), a);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let set = LabeledWindowSet::new(vec![vec![0.0; 8]; 3], vec![Label::SinglePointDip; 3]).unwrap();
        assert!(StsfModel::fit(&set, StsfConfig::default()).is_err());
        let m = StsfModel::fit(&separable(), StsfConfig { n_estimators: 2, seed: 0 }).unwrap();
        assert!(m.predict(&[0.0; 5]).is_err());
    }
}
