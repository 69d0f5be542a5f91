//! Seasonal baseline forecaster.
//!
//! The forecast at `t` looks one seasonal period `P` back, where `P` is the
//! longest of four weeks, one week and one day that fits at least twice in
//! the history. With four-week seasonality the values of up to eight past
//! cycles vote: the value agreeing (within `delta`) with the most others
//! wins and the forecast is the mean of its agreeing set, which keeps a
//! single anomalous cycle from leaking into the forecast. Shorter periods
//! use the single previous cycle rescaled by the ratio of the last day's
//! level to the level one period earlier.
//!
//! Observed values deviating from the forecast by more than `delta` are
//! stored as the forecast, so anomalies do not echo one period later.

use crate::detector::{ForecastResult, Forecaster, Z_95};
use crate::preprocess::gaps::median;
use crate::{samples_per, Error, Result, TimeSeries, MINUTES_PER_DAY, MINUTES_PER_MONTH, MINUTES_PER_WEEK};

/// Past cycles consulted under four-week seasonality.
pub const MAX_CYCLES: usize = 8;
/// Whole periods the history must hold before a period is used.
pub const MIN_CYCLES: usize = 2;

#[derive(Debug, Clone)]
pub struct SeasonalForecaster {
    /// Quantile multiplying the robust residual scale.
    pub z: f64,
    /// Replace anomalous observations by their forecast.
    pub clean_history: bool,
    state: Option<State>,
}

#[derive(Debug, Clone)]
struct State {
    history: Vec<f64>,
    t0: i64,
    ts: u32,
    day: usize,
    week: usize,
    month: usize,
    delta: f64,
    sigma: f64,
}

impl Default for SeasonalForecaster {
    fn default() -> Self {
        Self { z: Z_95, clean_history: true, state: None }
    }
}

impl SeasonalForecaster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Half-width fitted on the training data.
    pub fn delta(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.delta)
    }

    /// Robust standard deviation of the one-step seasonal residual.
    pub fn sigma(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.sigma)
    }

    /// Seasonal period in samples chosen for a history of `len` samples.
    pub fn period_for(&self, len: usize) -> Option<usize> {
        self.state.as_ref().map(|s| s.period(len))
    }
}

impl State {
    fn period(&self, len: usize) -> usize {
        [self.month, self.week, self.day].into_iter().find(|&p| len >= MIN_CYCLES * p).unwrap_or(self.day)
    }

    /// Level one period ago relative to now, measured on a short window
    /// centered one day back: `sum buf[t-D-w ..= t-D+w] / sum` of the same
    /// window `lag` earlier.
    fn level_ratio(&self, buf: &[f64], off: usize, t: usize, lag: usize) -> f64 {
        let w = self.ratio_halfwidth();
        if lag <= self.day || t < self.day + w + lag + off {
            return 1.0;
        }
        let c = t - self.day - off;
        let now: f64 = buf[c - w..=c + w].iter().sum();
        let then: f64 = buf[c - w - lag..=c + w - lag].iter().sum();
        if now == then || then == 0.0 || !(now / then).is_finite() {
            1.0
        } else {
            now / then
        }
    }

    fn ratio_halfwidth(&self) -> usize {
        (self.day / 24).min(self.day / 2 - 1)
    }

    /// Forecast at absolute position `t` from values in `buf` (offset `off`)
    /// with period `p`, and the half-width the point needs.
    fn point(&self, buf: &[f64], off: usize, t: usize, p: usize, delta: f64) -> (f64, f64) {
        if p == self.month {
            let candidates: Vec<f64> = (1..=MAX_CYCLES).filter(|k| t >= k * p + off).map(|k| buf[t - k * p - off]).collect();
            self.consensus(buf, off, t, &candidates, delta)
        } else {
            (buf[t - p - off] * self.level_ratio(buf, off, t, p), delta)
        }
    }

    fn forecast(&self, horizon: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.history.len();
        let p = self.period(n);
        // Only the tail reachable by the lags is copied; `off` maps absolute
        // positions into `buf`.
        let off = n.saturating_sub(MAX_CYCLES * p + 3 * self.week);
        let mut buf = self.history[off..].to_vec();
        buf.reserve(horizon);
        let mut deltas = Vec::with_capacity(horizon);
        for t in n..n + horizon {
            let (value, d) = self.point(&buf, off, t, p, self.delta);
            buf.push(value);
            deltas.push(d);
        }
        (buf.split_off(n - off), deltas)
    }

    /// Mean of the largest agreeing set, most recent cycle first on ties.
    /// When no two cycles agree, the cycle closest to the median of recent
    /// weeks is used and the half-width widens to cover every cycle.
    fn consensus(&self, buf: &[f64], off: usize, t: usize, v: &[f64], delta: f64) -> (f64, f64) {
        if v.len() == 1 {
            return (v[0], delta);
        }
        let support = |i: usize| v.iter().filter(|&&w| (w - v[i]).abs() <= delta).count();
        let mut best = 0;
        let mut best_support = support(0);
        for i in 1..v.len() {
            let s = support(i);
            if s > best_support {
                best = i;
                best_support = s;
            }
        }
        if best_support < 2 {
            let refs: Vec<f64> =
                (1..=3).filter(|k| t >= k * self.week + off).map(|k| buf[t - k * self.week - off]).collect();
            let pick = if refs.is_empty() {
                0
            } else {
                let r = median(refs);
                let mut pick = 0;
                for i in 1..v.len() {
                    if (v[i] - r).abs() < (v[pick] - r).abs() {
                        pick = i;
                    }
                }
                pick
            };
            let spread = v.iter().map(|w| (w - v[pick]).abs()).fold(delta, f64::max);
            return (v[pick], spread);
        }
        let anchor = v[best];
        let agreeing: Vec<f64> = v.iter().copied().filter(|&w| (w - anchor).abs() <= delta).collect();
        let base = agreeing[0];
        (base + agreeing.iter().map(|w| w - base).sum::<f64>() / agreeing.len() as f64, delta)
    }
}

fn robust_std(values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let med = median(values.clone());
    1.4826 * median(values.iter().map(|d| (d - med).abs()).collect())
}

impl Forecaster for SeasonalForecaster {
    fn fit(&mut self, train: &TimeSeries) -> Result<()> {
        let ts = train.ts();
        let day = samples_per(MINUTES_PER_DAY, ts)?;
        let week = samples_per(MINUTES_PER_WEEK, ts)?;
        let month = samples_per(MINUTES_PER_MONTH, ts)?;
        if train.len() < day || day < 4 {
            return Err(Error::insufficient(format!(
                "forecaster needs at least one day ({day} samples, at least 4), got {}",
                train.len()
            )));
        }
        let v = train.values();
        let mut state = State {
            history: v.to_vec(),
            t0: train.t0(),
            ts,
            day,
            week,
            month,
            delta: 0.0,
            sigma: 0.0,
        };
        let p = state.period(v.len());
        let floor = 1e-9 * (train.max() - train.min());
        // Provisional band from period-lag differences, used as the agreement
        // tolerance while backtesting the one-step forecast on the train span.
        let lagged = robust_std((p..v.len()).map(|i| v[i] - v[i - p]).collect()) / std::f64::consts::SQRT_2;
        let provisional = (self.z * lagged).max(floor);
        let residuals: Vec<f64> = (p..v.len()).map(|t| v[t] - state.point(v, 0, t, p, provisional).0).collect();
        let sigma = if residuals.len() >= day { robust_std(residuals) / std::f64::consts::SQRT_2 } else { lagged };
        state.sigma = sigma;
        state.delta = (self.z * sigma).max(floor);
        self.state = Some(state);
        Ok(())
    }

    fn predict(&self, horizon: usize) -> Result<ForecastResult> {
        let s = self.state.as_ref().ok_or(Error::NotFitted)?;
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let (values, deltas) = s.forecast(horizon);
        let t0 = s.t0 + (s.history.len() as i64) * s.ts as i64;
        ForecastResult::new(TimeSeries::new(values, t0, s.ts)?, deltas)
    }

    fn observe(&mut self, actual: &[f64]) -> Result<()> {
        let clean = self.clean_history;
        let s = self.state.as_mut().ok_or(Error::NotFitted)?;
        if actual.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observed values must be finite"));
        }
        let (predicted, deltas) = if clean { s.forecast(actual.len()) } else { (Vec::new(), Vec::new()) };
        for (i, &a) in actual.iter().enumerate() {
            let stored = if clean && (a - predicted[i]).abs() > deltas[i] { predicted[i] } else { a };
            s.history.push(stored);
        }
        Ok(())
    }
}
