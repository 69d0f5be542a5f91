//! Additive moving-average decomposition.

use crate::{Error, Result, TimeSeries};

/// `x = trend + seasonal + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: TimeSeries,
    /// Seasonal component tiled over the full input length.
    pub seasonal: TimeSeries,
    pub residual: TimeSeries,
    /// One period of the seasonal component, indexed by `i % period`.
    pub profile: Vec<f64>,
    pub period: usize,
    /// Half-open index range on which the moving average is defined.
    pub defined: (usize, usize),
}

/// Centered moving average over `period` samples. Even periods use
/// `period + 1` points with half weights at both ends. Returns the values
/// and the half-open range where the average is defined.
pub fn centered_moving_average(x: &[f64], period: usize) -> Result<(Vec<f64>, (usize, usize))> {
    if period == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    let half = period / 2;
    if x.len() < 2 * half + 1 {
        return Err(Error::insufficient(format!(
            "moving average of period {period} needs {} samples",
            2 * half + 1
        )));
    }
    let (start, end) = (half, x.len() - half);
    let mut out = vec![0.0; x.len()];
    let p = period as f64;
    for i in start..end {
        out[i] = if period.is_multiple_of(2) {
            let inner: f64 = x[i - half + 1..i + half].iter().sum();
            (inner + 0.5 * (x[i - half] + x[i + half])) / p
        } else {
            x[i - half..=i + half].iter().sum::<f64>() / p
        };
    }
    for i in 0..start {
        out[i] = out[start];
    }
    for i in end..x.len() {
        out[i] = out[end - 1];
    }
    Ok((out, (start, end)))
}

/// Trend by centered moving average, seasonal by per-phase mean of the
/// detrended interior (mean-centered), residual by subtraction. Trend values
/// outside the defined range hold the nearest defined value.
pub fn decompose(x: &TimeSeries, period: usize) -> Result<Decomposition> {
    if period < 2 {
        return Err(Error::invalid("decomposition period must be at least 2"));
    }
    if x.len() < 2 * period {
        return Err(Error::insufficient(format!(
            "decomposition needs two full periods ({} samples), got {}",
            2 * period,
            x.len()
        )));
    }
    let v = x.values();
    let (trend, defined) = centered_moving_average(v, period)?;
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for i in defined.0..defined.1 {
        sums[i % period] += v[i] - trend[i];
        counts[i % period] += 1;
    }
    let mut profile: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mean = profile.iter().sum::<f64>() / period as f64;
    profile.iter_mut().for_each(|p| *p -= mean);

    let seasonal: Vec<f64> = (0..v.len()).map(|i| profile[i % period]).collect();
    let residual: Vec<f64> = (0..v.len()).map(|i| v[i] - trend[i] - seasonal[i]).collect();
    Ok(Decomposition {
        trend: x.with_values(trend)?,
        seasonal: x.with_values(seasonal)?,
        residual: x.with_values(residual)?,
        profile,
        period,
        defined,
    })
}

/// Seasonal profile and trend level fitted on the tail of a training series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalModel {
    /// Profile indexed by phase relative to `phase_origin`.
    pub profile: Vec<f64>,
    pub trend_level: f64,
    /// Timestamp where phase 0 of the profile falls.
    pub phase_origin: i64,
    pub ts: u32,
}

impl SeasonalModel {
    /// Decomposes the last two periods of `train`; the trend level is the mean
    /// trend over the last period.
    pub fn fit(train: &TimeSeries, period: usize) -> Result<Self> {
        if train.len() < 2 * period {
            return Err(Error::insufficient(format!(
                "train holds {} samples, two periods need {}",
                train.len(),
                2 * period
            )));
        }
        let start = train.len() - 2 * period;
        let tail = train.slice(start, train.len())?;
        let d = decompose(&tail, period)?;
        let last = &d.trend.values()[period..];
        let trend_level = last.iter().sum::<f64>() / last.len() as f64;
        Ok(Self { profile: d.profile, trend_level, phase_origin: tail.t0(), ts: train.ts() })
    }

    pub fn period(&self) -> usize {
        self.profile.len()
    }

    /// Seasonal plus trend at timestamp `t`.
    pub fn level_at(&self, t: i64) -> f64 {
        let step = (t - self.phase_origin).div_euclid(self.ts as i64);
        let phase = step.rem_euclid(self.period() as i64) as usize;
        self.profile[phase] + self.trend_level
    }

    /// `x - seasonal - trend` over `x`, phases located by timestamp.
    pub fn residual(&self, x: &TimeSeries) -> Result<TimeSeries> {
        if x.ts() != self.ts {
            return Err(Error::PhaseMisaligned(format!(
                "sampling period {} differs from the fitted {}",
                x.ts(),
                self.ts
            )));
        }
        if (x.t0() - self.phase_origin).rem_euclid(self.ts as i64) != 0 {
            return Err(Error::PhaseMisaligned("timestamps are off the fitted sampling grid".into()));
        }
        let values = (0..x.len()).map(|i| x.values()[i] - self.level_at(x.time_at(i))).collect();
        x.with_values(values)
    }
}

/// Removes the seasonality of the last two periods of `train` and its
/// last-period trend level from `test`, which must start where `train` ends.
pub fn deseasonalize_test(train: &TimeSeries, test: &TimeSeries, period: usize) -> Result<TimeSeries> {
    if test.ts() != train.ts() || test.t0() != train.end_time() {
        return Err(Error::PhaseMisaligned(format!(
            "test starts at {} (ts {}), train ends at {} (ts {})",
            test.t0(),
            test.ts(),
            train.end_time(),
            train.ts()
        )));
    }
    SeasonalModel::fit(train, period)?.residual(test)
}
