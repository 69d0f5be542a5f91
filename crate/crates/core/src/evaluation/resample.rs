//! Class rebalancing, stratified folds and stratified hold-out splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::simulator::Proportions;
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebalanceMode {
    /// Under-sample every class to the smallest class count.
    Balanced,
    /// Sample every class to match target proportions.
    Imbalanced,
}

fn group(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut by: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().push(i);
    }
    by
}

/// Per-class quotas for [`RebalanceMode::Imbalanced`].
///
/// Picks the largest total whose quotas are whole numbers and fit the
/// available counts, so the target ratio holds exactly. When no such total
/// exists the largest feasible total is split by largest remainder.
pub fn imbalanced_quotas(available: &BTreeMap<Label, usize>, targets: &Proportions) -> BTreeMap<Label, usize> {
    let present: Vec<(Label, usize, f64)> = Label::SUBCLASSES
        .iter()
        .filter_map(|&l| {
            let p = targets.get(l);
            let a = available.get(&l).copied().unwrap_or(0);
            (p > 0.0).then_some((l, a, p))
        })
        .collect();
    let mut quotas: BTreeMap<Label, usize> = available.keys().map(|&l| (l, 0)).collect();
    if present.iter().any(|&(_, a, _)| a == 0) {
        for &(l, a, _) in &present {
            if a == 0 {
                log::warn!("class {l} has target share but no windows; quota 0");
            }
        }
    }
    let usable: Vec<(Label, usize, f64)> = present.into_iter().filter(|&(_, a, _)| a > 0).collect();
    if usable.is_empty() {
        return quotas;
    }
    let mass: f64 = usable.iter().map(|u| u.2).sum();
    let cap = usable.iter().map(|&(_, a, p)| (a as f64 * mass / p + 1e-9).floor() as usize).min().unwrap_or(0);
    for total in (1..=cap).rev() {
        let q: Vec<f64> = usable.iter().map(|&(_, _, p)| total as f64 * p / mass).collect();
        if q.iter().zip(&usable).all(|(&v, &(_, a, _))| (v - v.round()).abs() < 1e-9 && v.round() as usize <= a) {
            for (v, &(l, ..)) in q.iter().zip(&usable) {
                quotas.insert(l, v.round() as usize);
            }
            return quotas;
        }
    }
    let raw: Vec<f64> = usable.iter().map(|&(_, _, p)| cap as f64 * p / mass).collect();
    let mut q: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let mut left = cap - q.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(4 * order.len()) {
        if left == 0 {
            break;
        }
        if q[i] < usable[i].1 {
            q[i] += 1;
            left -= 1;
        }
    }
    for (n, &(l, ..)) in q.iter().zip(&usable) {
        quotas.insert(l, *n);
    }
    quotas
}

/// Indices of a class-rebalanced subsample, sorted ascending.
pub fn rebalance<R: Rng + ?Sized>(
    labels: &[Label],
    mode: RebalanceMode,
    targets: &Proportions,
    rng: &mut R,
) -> Vec<usize> {
    let by = group(labels);
    let quotas: BTreeMap<Label, usize> = match mode {
        RebalanceMode::Balanced => {
            let min = by.values().map(Vec::len).min().unwrap_or(0);
            by.keys().map(|&l| (l, min)).collect()
        }
        RebalanceMode::Imbalanced => imbalanced_quotas(&by.iter().map(|(&l, v)| (l, v.len())).collect(), targets),
    };
    let mut out = Vec::new();
    for (label, members) in &by {
        let q = quotas.get(label).copied().unwrap_or(0);
        out.extend(rand::seq::index::sample(rng, members.len(), q).into_iter().map(|k| members[k]));
    }
    out.sort_unstable();
    out
}

/// Folds usable for stratified cross-validation: `requested` reduced to the
/// smallest class count, never below 2.
pub fn effective_folds(labels: &[Label], requested: usize) -> Result<usize> {
    let smallest = group(labels).values().map(Vec::len).min().unwrap_or(0);
    if smallest < 2 || requested < 2 {
        return Err(Error::insufficient(format!(
            "stratified folds need at least 2 samples per class and 2 folds (smallest class {smallest})"
        )));
    }
    if smallest < requested {
        log::warn!("reducing cross-validation folds from {requested} to {smallest}");
    }
    Ok(requested.min(smallest))
}

/// Splits indices into `k` folds. Each class is shuffled and dealt round
/// robin, continuing where the previous class stopped, so per-class counts
/// and fold sizes differ by at most one.
pub fn stratified_folds<R: Rng + ?Sized>(labels: &[Label], k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut members) in group(labels) {
        members.shuffle(rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Stratified hold-out: `round(test_frac * n_c)` of every class goes to the
/// test side. Returns `(train, test)` index lists, each sorted.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[Label], test_frac: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut members) in group(labels) {
        members.shuffle(rng);
        let n_test = ((members.len() as f64 * test_frac).round() as usize).min(members.len());
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn labels(counts: &[(Label, usize)]) -> Vec<Label> {
        counts.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect()
    }

    #[test]
    fn balanced_takes_minimum() {
        let y = labels(&[(Label::SinglePointPeak, 10), (Label::LevelShiftGrowth, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = rebalance(&y, RebalanceMode::Balanced, &Proportions::balanced(), &mut rng);
        assert_eq!(idx.iter().filter(|&&i| y[i] == Label::SinglePointPeak).count(), 4);
        assert_eq!(idx.iter().filter(|&&i| y[i] == Label::LevelShiftGrowth).count(), 4);
        let again = rebalance(&y, RebalanceMode::Balanced, &Proportions::balanced(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(idx, again);
    }

    #[test]
    fn imbalanced_exact_ratio() {
        let mut w = [0.0; 8];
        w[0] = 0.75;
        w[2] = 0.25;
        let targets = Proportions::from_vector(w).unwrap();
        let avail: BTreeMap<Label, usize> =
            [(Label::SinglePointPeak, 100), (Label::TemporaryChangeGrowth, 100)].into_iter().collect();
        let q = imbalanced_quotas(&avail, &targets);
        assert_eq!(q[&Label::SinglePointPeak], 99);
        assert_eq!(q[&Label::TemporaryChangeGrowth], 33);
    }

    #[test]
    fn imbalanced_absent_class_gets_zero() {
        let q = imbalanced_quotas(&[(Label::SinglePointPeak, 50)].into_iter().collect(), &Proportions::imbalanced());
        assert_eq!(q[&Label::SinglePointPeak], 50);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn largest_remainder_fallback() {
        let targets = Proportions::from_vector([0.5, 0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let avail: BTreeMap<Label, usize> =
            [(Label::SinglePointPeak, 1), (Label::SinglePointDip, 1), (Label::TemporaryChangeGrowth, 1)]
                .into_iter()
                .collect();
        let q = imbalanced_quotas(&avail, &targets);
        assert_eq!(q[&Label::SinglePointPeak], 1);
        assert_eq!(q[&Label::SinglePointDip], 1);
        assert_eq!(q[&Label::TemporaryChangeGrowth], 0);
    }

    #[test]
    fn folds_reduce_with_small_classes() {
        let y = labels(&[(Label::SinglePointPeak, 3), (Label::SinglePointDip, 9)]);
        assert_eq!(effective_folds(&y, 5).unwrap(), 3);
        assert!(effective_folds(&labels(&[(Label::SinglePointPeak, 1)]), 5).is_err());
    }

    #[test]
    fn split_keeps_class_shares() {
        let y = labels(&[(Label::SinglePointPeak, 10), (Label::SinglePointDip, 20)]);
        let (tr, te) = stratified_split(&y, 0.3, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(te.iter().filter(|&&i| y[i] == Label::SinglePointPeak).count(), 3);
        assert_eq!(te.iter().filter(|&&i| y[i] == Label::SinglePointDip).count(), 6);
        assert_eq!(tr.len() + te.len(), 30);
    }
}
