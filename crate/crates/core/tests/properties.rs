use std::collections::BTreeMap;

use kpi_anomaly::classifiers::{dtw, wdtw};
use kpi_anomaly::detector::{flag_points, make_windows, ForecastResult};
use kpi_anomaly::evaluation::{accuracy, stratified_folds, stratified_split, ConfusionMatrix};
use kpi_anomaly::preprocess::{clean_gaps, decompose, FillStat, GapOutcome};
use kpi_anomaly::{GapMask, Label, TimeSeries};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seq(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..max_len)
}

fn labels(max_len: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(prop::sample::select(Label::SUBCLASSES.to_vec()), 1..max_len)
}

proptest! {
    #[test]
    fn dtw_is_symmetric(a in seq(30), b in seq(30), frac in 0.5f64..=1.0) {
        match (dtw(&a, &b, frac), dtw(&b, &a, frac)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
        prop_assert_eq!(wdtw(&a, &b, 0.05).unwrap(), wdtw(&b, &a, 0.05).unwrap());
    }

    #[test]
    fn dtw_of_self_is_zero(a in seq(40)) {
        prop_assert_eq!(dtw(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn windows_have_length_2m(
        states in prop::collection::vec(any::<bool>(), 1..300),
        m in 1usize..50,
    ) {
        let values: Vec<f64> = (0..states.len()).map(|i| i as f64).collect();
        let ws = make_windows(&values, &states, m).unwrap();
        let runs = states.iter().enumerate().filter(|&(i, &s)| s && (i == 0 || !states[i - 1])).count();
        prop_assert_eq!(ws.len(), runs);
        for w in &ws {
            prop_assert_eq!(w.values.len(), 2 * m);
            prop_assert!(states[w.anchor]);
            prop_assert_eq!(w.start, w.anchor as i64 - m as i64);
            prop_assert_eq!(w.padded, w.start < 0 || w.start + 2 * m as i64 > values.len() as i64);
        }
    }

    // Dyadic values keep the shifted arithmetic exact.
    #[test]
    fn flags_ignore_a_common_shift(
        pts in prop::collection::vec((-512i32..512, -512i32..512, 0i32..64), 1..200),
        shift in -4096i32..4096,
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 64.0).collect();
        let p: Vec<f64> = pts.iter().map(|p| p.1 as f64 / 64.0).collect();
        let d: Vec<f64> = pts.iter().map(|p| p.2 as f64 / 64.0).collect();
        let c = shift as f64 / 64.0;
        let fc = ForecastResult::new(TimeSeries::from_values(p.clone(), 5).unwrap(), d.clone()).unwrap();
        let shifted_p: Vec<f64> = p.iter().map(|v| v + c).collect();
        let fc2 = ForecastResult::new(TimeSeries::from_values(shifted_p, 5).unwrap(), d).unwrap();
        let shifted_x: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert_eq!(flag_points(&x, &fc).unwrap(), flag_points(&shifted_x, &fc2).unwrap());
    }

    #[test]
    fn micro_f1_is_accuracy(pairs in prop::collection::vec(
        (prop::sample::select(Label::SUBCLASSES.to_vec()), prop::sample::select(Label::SUBCLASSES.to_vec())), 1..200)
    ) {
        let cm = ConfusionMatrix::from_pairs(&Label::SUBCLASSES, &pairs).unwrap();
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.iter().copied().unzip();
        prop_assert_eq!(cm.micro_f1(), accuracy(&t, &p));
        prop_assert_eq!(cm.total(), pairs.len());
    }

    #[test]
    fn stratified_folds_partition(ls in labels(300), k in 2usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let folds = stratified_folds(&ls, k, &mut rng);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ls.len()).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn stratified_split_partitions_per_class(ls in labels(300), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, test) = stratified_split(&ls, 0.3, &mut rng);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ls.len()).collect::<Vec<_>>());
        let mut per: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
        for &i in &test {
            per.entry(ls[i]).or_default().1 += 1;
        }
        for &l in &ls {
            per.entry(l).or_default().0 += 1;
        }
        for (n, t) in per.values() {
            prop_assert_eq!(*t, (0.3 * *n as f64).round() as usize);
        }
    }

    #[test]
    fn decomposition_reconstructs(x in prop::collection::vec(-5.0f64..5.0, 40..200), period in 2usize..20) {
        let s = TimeSeries::from_values(x.clone(), 5).unwrap();
        let d = decompose(&s, period).unwrap();
        for (i, &v) in x.iter().enumerate() {
            let back = d.trend.values()[i] + d.seasonal.values()[i] + d.residual.values()[i];
            prop_assert!((back - v).abs() < 1e-9);
        }
        prop_assert!(d.profile.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn gap_filling_keeps_observed_points(
        x in prop::collection::vec(0.1f64..10.0, 2100..2400),
        holes in prop::collection::vec(any::<prop::sample::Index>(), 0..100),
    ) {
        let mut mask = vec![false; x.len()];
        for h in &holes {
            mask[h.index(x.len())] = true;
        }
        let s = TimeSeries::from_values(x.clone(), 5).unwrap();
        let mask = GapMask(mask);
        match clean_gaps(&s, &mask, FillStat::Mean).unwrap() {
            GapOutcome::Cleaned { series, report } => {
                prop_assert_eq!(report.missing, mask.missing_count());
                for (i, &v) in x.iter().enumerate() {
                    if !mask.is_missing(i) {
                        prop_assert_eq!(series.values()[i], v);
                    } else {
                        prop_assert!(series.values()[i].is_finite());
                    }
                }
            }
            GapOutcome::Rejected { .. } => prop_assert!(mask.missing_fraction() > 0.1),
        }
    }
}
