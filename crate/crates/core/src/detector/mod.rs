//! Forecast-residual point detection, analysis windows and window-based
//! detection scoring.

pub mod forecaster;
pub mod pipeline;
pub mod splits;

pub use forecaster::SeasonalForecaster;
pub use pipeline::{detect_pipeline, DetectConfig, DetectionOutput, FoldReport};
pub use splits::{expanding_splits, Split};

use serde::{Deserialize, Serialize};

use crate::evaluation::NoiseBin;
use crate::simulator::AnomalyRecord;
use crate::{Error, Label, Result, TimeSeries};

/// Default half-width of an analysis window at a 5 minute sampling period.
pub const DEFAULT_MARGIN: usize = 24;
/// Quantile of the standard normal distribution for a 95% interval.
pub const Z_95: f64 = 1.96;

/// Forecast values and their symmetric confidence half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub predicted: TimeSeries,
    pub delta: Vec<f64>,
}

impl ForecastResult {
    pub fn new(predicted: TimeSeries, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != predicted.len() {
            return Err(Error::invalid("delta and prediction differ in length"));
        }
        if delta.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::invalid("delta must be non-negative"));
        }
        Ok(Self { predicted, delta })
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// A model that forecasts the samples following its history.
pub trait Forecaster {
    fn fit(&mut self, train: &TimeSeries) -> Result<()>;

    /// Forecast of the next `horizon` samples. Errors with
    /// [`Error::NotFitted`] before [`Forecaster::fit`].
    fn predict(&self, horizon: usize) -> Result<ForecastResult>;

    /// Appends observed values to the history, so that the next prediction
    /// starts after them.
    fn observe(&mut self, actual: &[f64]) -> Result<()>;
}

/// Point `i` is anomalous iff `|x(i) - predicted(i)| > delta(i)`.
pub fn flag_points(x_test: &[f64], fc: &ForecastResult) -> Result<Vec<bool>> {
    if x_test.len() != fc.len() {
        return Err(Error::invalid(format!(
            "test has {} points, forecast has {}",
            x_test.len(),
            fc.len()
        )));
    }
    Ok(x_test
        .iter()
        .zip(fc.predicted.values())
        .zip(&fc.delta)
        .map(|((x, p), d)| (x - p).abs() > *d)
        .collect())
}

/// Raw window cut from a series: `values` covers `[start, start + 2m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpan {
    /// Index of the first anomalous point of the run.
    pub anchor: usize,
    /// May be negative when the window is padded on the left.
    pub start: i64,
    pub values: Vec<f64>,
    pub padded: bool,
}

/// Scans `states` and emits one window `values[i - m, i + m)` per run of
/// consecutive anomalous points, anchored at the first point of the run.
/// Out-of-range indices repeat the nearest edge value.
pub fn make_windows(values: &[f64], states: &[bool], m: usize) -> Result<Vec<WindowSpan>> {
    if m == 0 {
        return Err(Error::invalid("margin m must be at least 1"));
    }
    if values.len() != states.len() {
        return Err(Error::invalid("values and states differ in length"));
    }
    let n = values.len() as i64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < states.len() {
        if !states[i] {
            i += 1;
            continue;
        }
        let run = states[i..].iter().take_while(|&&s| s).count();
        let start = i as i64 - m as i64;
        let end = i as i64 + m as i64;
        let padded = start < 0 || end > n;
        let w = (start..end).map(|j| values[j.clamp(0, n - 1) as usize]).collect();
        out.push(WindowSpan { anchor: i, start, values: w, padded });
        i += run;
    }
    Ok(out)
}

/// True and false positives and false negatives of window-based detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl DetectionCounts {
    /// `2tp / (2tp + fp + fn)`, or 0 when nothing was expected or found.
    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }

    pub fn score(&self) -> DetectionScore {
        DetectionScore { tp: self.tp, fp: self.fp, fn_: self.fn_, f1: self.f1() }
    }
}

impl std::ops::AddAssign for DetectionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

/// A record counts as detected when its span intersects at least one
/// window; a window is a false positive when it intersects no record.
/// Windows are half-open global index ranges.
pub fn score_detection(records: &[AnomalyRecord], windows: &[(i64, i64)]) -> DetectionCounts {
    let tp = records.iter().filter(|r| windows.iter().any(|&(s, e)| r.intersects(s, e))).count();
    let fp = windows.iter().filter(|&&(s, e)| !records.iter().any(|r| r.intersects(s, e))).count();
    DetectionCounts { tp, fp, fn_: records.len() - tp }
}

/// Fixed-size window handed to the classifiers and the labeling service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub series_id: String,
    pub fold: usize,
    /// Global index of the first value; negative when padded on the left.
    pub start_index: i64,
    /// Global index of the point that opened the window.
    pub source_index: usize,
    pub values: Vec<f64>,
    pub padded: bool,
    #[serde(default)]
    pub labels: Vec<Label>,
    pub noise_bin: NoiseBin,
    /// Noise level of the source series, configured or estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl AnalysisWindow {
    pub fn end_index(&self) -> i64 {
        self.start_index + self.values.len() as i64
    }

    pub fn primary_label(&self) -> Option<Label> {
        self.labels.first().copied()
    }
}

/// Subclass of the record overlapping `[start, end)` the most; ties go to
/// the earlier record.
pub fn max_overlap_label(records: &[AnomalyRecord], start: i64, end: i64) -> Option<Label> {
    let mut best: Option<(usize, Label)> = None;
    for r in records {
        let ov = r.overlap(start, end);
        if ov > 0 && best.is_none_or(|(b, _)| ov > b) {
            best = Some((ov, r.subclass));
        }
    }
    best.map(|(_, l)| l)
}

pub fn read_windows_jsonl(path: impl AsRef<std::path::Path>) -> Result<Vec<AnalysisWindow>> {
    use std::io::BufRead;
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_windows_jsonl(windows: &[AnalysisWindow], path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for win in windows {
        serde_json::to_writer(&mut w, win)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{AnomalyClass, Direction};

    fn record(i_a: usize, lambda: usize) -> AnomalyRecord {
        let class = if lambda == 1 { AnomalyClass::SinglePoint } else { AnomalyClass::TemporaryChange };
        AnomalyRecord {
            subclass: Label::new(class, Direction::Growth),
            class,
            direction: Direction::Growth,
            i_w: 0,
            window_len: 10_000,
            i_a,
            lambda,
            alpha: 0.5,
            daily_amplitude: 1.0,
            breakpoints: None,
            levels: None,
        }
    }

    fn forecast(pred: Vec<f64>, delta: f64) -> ForecastResult {
        let n = pred.len();
        ForecastResult::new(TimeSeries::from_values(pred, 5).unwrap(), vec![delta; n]).unwrap()
    }

    #[test]
    fn flagging_examples() {
        let pred = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(flag_points(&pred, &forecast(pred.clone(), 0.1)).unwrap(), vec![false; 4]);
        let mut x = pred.clone();
        x[2] += 0.2;
        assert_eq!(flag_points(&x, &forecast(pred.clone(), 0.1)).unwrap(), vec![false, false, true, false]);
        x[0] += 1e-6;
        let flags = flag_points(&x, &forecast(pred, 0.0)).unwrap();
        assert_eq!(flags.iter().filter(|&&f| f).count(), 2);
    }

    #[test]
    fn window_examples() {
        let values: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let mut s = vec![false; 300];
        assert!(make_windows(&values, &s, 24).unwrap().is_empty());
        s[100] = true;
        let w = make_windows(&values, &s, 24).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start, 76);
        assert_eq!(w[0].values.first(), Some(&76.0));
        assert_eq!(w[0].values.last(), Some(&123.0));
        assert!(!w[0].padded);
        s[101] = true;
        s[102] = true;
        let w = make_windows(&values, &s, 24).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].anchor, 100);
    }

    #[test]
    fn boundary_windows_are_padded() {
        let values: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut s = vec![false; 30];
        s[2] = true;
        s[29] = true;
        let w = make_windows(&values, &s, 5).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.padded && w.values.len() == 10));
        assert_eq!(w[0].values[..4], [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(w[1].values[5..], [29.0; 5]);
    }

    #[test]
    fn scoring_examples() {
        let c = DetectionCounts { tp: 3, fp: 1, fn_: 1 };
        assert_eq!(c.f1(), 0.75);
        let recs = vec![record(10, 1), record(100, 20)];
        let c = score_detection(&recs, &[(0, 20), (110, 130)]);
        assert_eq!(c, DetectionCounts { tp: 2, fp: 0, fn_: 0 });
        assert_eq!(c.f1(), 1.0);
        let c = score_detection(&recs, &[]);
        assert_eq!(c, DetectionCounts { tp: 0, fp: 0, fn_: 2 });
        assert_eq!(c.f1(), 0.0);
        // A window ending right before a record does not include it.
        let c = score_detection(&recs, &[(0, 10)]);
        assert_eq!(c, DetectionCounts { tp: 0, fp: 1, fn_: 2 });
    }

    #[test]
    fn overlap_labeling() {
        let mut a = record(10, 5);
        a.subclass = Label::LevelShiftGrowth;
        let b = record(30, 20);
        assert_eq!(max_overlap_label(&[a.clone(), b.clone()], 0, 40), Some(b.subclass));
        assert_eq!(max_overlap_label(&[a.clone(), b], 0, 20), Some(Label::LevelShiftGrowth));
        assert_eq!(max_overlap_label(&[a], 50, 60), None);
    }
}
