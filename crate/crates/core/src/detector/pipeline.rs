//! Fold-wise detection: forecast, flag, deseasonalize and window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    expanding_splits, flag_points, make_windows, max_overlap_label, score_detection, AnalysisWindow,
    DetectionCounts, DetectionScore, Forecaster, Split, DEFAULT_MARGIN,
};
use crate::evaluation::NoiseBin;
use crate::preprocess::deseasonalize_test;
use crate::simulator::AnomalyRecord;
use crate::{samples_per, Error, Result, TimeSeries, MINUTES_PER_WEEK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Half-width of analysis windows in samples.
    pub m: usize,
    pub folds: usize,
    pub train_frac: f64,
    /// Forecast horizon between observations, in minutes.
    pub horizon_minutes: u32,
    /// Shortest usable fold train, in minutes. Never below two weeks, which
    /// the deseasonalization step requires.
    pub min_train_minutes: u32,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_MARGIN,
            folds: 10,
            train_frac: 0.7,
            horizon_minutes: MINUTES_PER_WEEK,
            min_train_minutes: 2 * MINUTES_PER_WEEK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub split: Split,
    pub flagged: usize,
    pub windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<DetectionCounts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput {
    /// Windows ordered by fold, then position.
    pub windows: Vec<AnalysisWindow>,
    pub folds: Vec<FoldReport>,
    /// Sum over folds, present when records were given.
    pub score: Option<DetectionScore>,
}

/// Runs every fold: fits a fresh forecaster on the train prefix, forecasts
/// the test span one horizon at a time (observing actual values in
/// between), flags points outside the forecast band, removes the train
/// seasonality and trend from the test span and cuts analysis windows from
/// that residual. With `records`, each fold is scored against the records
/// whose span meets its test range and windows get max-overlap labels.
pub fn detect_pipeline<F, M>(
    x: &TimeSeries,
    make: M,
    cfg: &DetectConfig,
    records: Option<&[AnomalyRecord]>,
    series_id: &str,
    sigma: Option<f64>,
) -> Result<DetectionOutput>
where
    F: Forecaster,
    M: Fn() -> F + Sync,
{
    let week = samples_per(MINUTES_PER_WEEK, x.ts())?;
    let horizon = samples_per(cfg.horizon_minutes, x.ts())?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let min_train = samples_per(cfg.min_train_minutes, x.ts())?.max(2 * week);
    let splits = expanding_splits(x.len(), cfg.folds, cfg.train_frac, min_train)?;
    let noise_bin = sigma.map(NoiseBin::from_sigma).unwrap_or(NoiseBin::Overflow);

    let per_fold: Vec<Result<(FoldReport, Vec<AnalysisWindow>)>> = splits
        .par_iter()
        .map(|split| {
            let train = x.slice(0, split.train_end)?;
            let test = x.slice(split.train_end, split.test_end)?;
            let mut model = make();
            model.fit(&train)?;
            let mut states = Vec::with_capacity(test.len());
            let mut pos = 0;
            while pos < test.len() {
                let h = horizon.min(test.len() - pos);
                let fc = model.predict(h)?;
                let actual = &test.values()[pos..pos + h];
                states.extend(flag_points(actual, &fc)?);
                model.observe(actual)?;
                pos += h;
            }
            let residual = deseasonalize_test(&train, &test, week)?;
            let spans = make_windows(residual.values(), &states, cfg.m)?;
            let offset = split.train_end as i64;
            let windows: Vec<AnalysisWindow> = spans
                .into_iter()
                .map(|w| {
                    let start_index = offset + w.start;
                    let labels = records
                        .and_then(|r| max_overlap_label(r, start_index, start_index + 2 * cfg.m as i64))
                        .into_iter()
                        .collect();
                    AnalysisWindow {
                        series_id: series_id.to_string(),
                        fold: split.fold,
                        start_index,
                        source_index: split.train_end + w.anchor,
                        values: w.values,
                        padded: w.padded,
                        labels,
                        noise_bin,
                        sigma,
                    }
                })
                .collect();
            let counts = records.map(|recs| {
                let in_test: Vec<AnomalyRecord> = recs
                    .iter()
                    .filter(|r| r.intersects(split.train_end as i64, split.test_end as i64))
                    .cloned()
                    .collect();
                let ranges: Vec<(i64, i64)> = windows.iter().map(|w| (w.start_index, w.end_index())).collect();
                let mut c = score_detection(&in_test, &ranges);
                // Windows touching records outside the test range are not spurious.
                c.fp = ranges.iter().filter(|&&(s, e)| !recs.iter().any(|r| r.intersects(s, e))).count();
                c
            });
            let report = FoldReport {
                split: *split,
                flagged: states.iter().filter(|&&s| s).count(),
                windows: windows.len(),
                counts,
            };
            Ok((report, windows))
        })
        .collect();

    let mut folds = Vec::with_capacity(per_fold.len());
    let mut windows = Vec::new();
    for r in per_fold {
        let (report, w) = r?;
        folds.push(report);
        windows.extend(w);
    }
    let score = records.map(|_| {
        let mut total = DetectionCounts::default();
        for f in &folds {
            total += f.counts.unwrap_or_default();
        }
        total.score()
    });
    Ok(DetectionOutput { windows, folds, score })
}
