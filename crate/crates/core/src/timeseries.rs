//! Uniformly sampled scalar series, min-max scaling, decimation and CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniformly sampled scalar series.
///
/// Point `i` sits at `t0 + i * ts` minutes. Values are always finite and
/// the series is never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    t0: i64,
    ts: u32,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, t0: i64, ts: u32) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must not be empty"));
        }
        if ts == 0 {
            return Err(Error::invalid("sampling period must be at least one minute"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { values, t0, ts })
    }

    /// Series starting at minute 0 with the given sampling period.
    pub fn from_values(values: Vec<f64>, ts: u32) -> Result<Self> {
        Self::new(values, 0, ts)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn ts(&self) -> u32 {
        self.ts
    }

    pub fn time_at(&self, i: usize) -> i64 {
        self.t0 + i as i64 * self.ts as i64
    }

    /// Timestamp one period past the last point, i.e. where a continuation starts.
    pub fn end_time(&self) -> i64 {
        self.time_at(self.len())
    }

    /// Same timing, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.t0, self.ts)
    }

    /// Sub-series `[start, end)` with `t0` shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {end}) out of bounds for length {}",
                self.len()
            )));
        }
        Self::new(self.values[start..end].to_vec(), self.time_at(start), self.ts)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Missing-sample mask kept beside a series; `true` marks a gap.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GapMask(pub Vec<bool>);

impl GapMask {
    pub fn none(len: usize) -> Self {
        GapMask(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.0.len() as f64
        }
    }

    pub fn is_missing(&self, i: usize) -> bool {
        self.0[i]
    }
}

/// Affine map from an observed range onto a target range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub observed_min: f64,
    pub observed_max: f64,
    pub target_lo: f64,
    pub target_hi: f64,
}

impl ScaleParams {
    pub const DEFAULT_TARGET: (f64, f64) = (0.02, 1.0);

    pub fn new(observed_min: f64, observed_max: f64, target_lo: f64, target_hi: f64) -> Result<Self> {
        let p = Self { observed_min, observed_max, target_lo, target_hi };
        p.validate()?;
        Ok(p)
    }

    /// Fits the observed range on `x`, mapping onto `[0.02, 1]`.
    pub fn fit(x: &TimeSeries) -> Result<Self> {
        let (lo, hi) = Self::DEFAULT_TARGET;
        Self::fit_to(x, lo, hi)
    }

    pub fn fit_to(x: &TimeSeries, target_lo: f64, target_hi: f64) -> Result<Self> {
        Self::new(x.min(), x.max(), target_lo, target_hi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.observed_max > self.observed_min) {
            return Err(Error::ConstantSeries(self.observed_min));
        }
        if !(self.target_hi > self.target_lo) {
            return Err(Error::invalid("target_hi must exceed target_lo"));
        }
        Ok(())
    }

    pub fn apply(&self, v: f64) -> f64 {
        self.target_lo
            + (v - self.observed_min) * (self.target_hi - self.target_lo)
                / (self.observed_max - self.observed_min)
    }

    pub fn invert(&self, v: f64) -> f64 {
        self.observed_min
            + (v - self.target_lo) * (self.observed_max - self.observed_min)
                / (self.target_hi - self.target_lo)
    }

    pub fn transform(&self, x: &TimeSeries) -> Result<TimeSeries> {
        self.validate()?;
        x.with_values(x.values().iter().map(|&v| self.apply(v)).collect())
    }

    pub fn inverse_transform(&self, x: &TimeSeries) -> Result<TimeSeries> {
        self.validate()?;
        x.with_values(x.values().iter().map(|&v| self.invert(v)).collect())
    }
}

/// Scales `x` with `p`. The extremes of a fitted range map exactly onto the
/// target bounds.
pub fn min_max_scale(x: &TimeSeries, p: &ScaleParams) -> Result<TimeSeries> {
    p.validate()?;
    let values = x
        .values()
        .iter()
        .map(|&v| {
            if v == p.observed_min {
                p.target_lo
            } else if v == p.observed_max {
                p.target_hi
            } else {
                p.apply(v)
            }
        })
        .collect();
    x.with_values(values)
}

/// Fits on `x` and scales it to `[0.02, 1]`.
pub fn fit_min_max_scale(x: &TimeSeries) -> Result<(TimeSeries, ScaleParams)> {
    let p = ScaleParams::fit(x)?;
    Ok((min_max_scale(x, &p)?, p))
}

/// Keeps every `ts_new / ts`-th point starting at index 0.
pub fn resample(x: &TimeSeries, ts_new: u32) -> Result<TimeSeries> {
    if ts_new == 0 || !ts_new.is_multiple_of(x.ts()) {
        return Err(Error::invalid(format!(
            "new sampling period {ts_new} is not a positive multiple of {}",
            x.ts()
        )));
    }
    let step = (ts_new / x.ts()) as usize;
    let values = x.values().iter().step_by(step).copied().collect();
    TimeSeries::new(values, x.t0(), ts_new)
}

pub const CSV_HEADER: [&str; 2] = ["timestamp_minutes", "value"];

/// Reads the two-column `timestamp_minutes,value` format.
///
/// Empty value fields and skipped timestamps become gaps in the returned
/// mask; gap positions hold `0.0` in the series.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(TimeSeries, GapMask)> {
    let file = std::fs::File::open(path)?;
    read_csv_from(file)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<(TimeSeries, GapMask)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || headers.get(0) != Some(CSV_HEADER[0]) {
        return Err(Error::invalid(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: Vec<(i64, Option<f64>)> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ts_field = record.get(0).unwrap_or("");
        let t: i64 = ts_field
            .parse()
            .map_err(|_| Error::invalid(format!("row {}: bad timestamp `{ts_field}`", line + 2)))?;
        let raw = record.get(1).unwrap_or("");
        let v = if raw.is_empty() {
            None
        } else {
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::invalid(format!("row {}: bad value `{raw}`", line + 2)))?;
            if !v.is_finite() {
                None
            } else {
                Some(v)
            }
        };
        if let Some(&(prev, _)) = rows.last() {
            if t <= prev {
                return Err(Error::invalid(format!(
                    "row {}: timestamps must be strictly increasing ({t} after {prev})",
                    line + 2
                )));
            }
        }
        rows.push((t, v));
    }
    if rows.is_empty() {
        return Err(Error::invalid("CSV contains no rows"));
    }
    let ts = if rows.len() == 1 {
        1
    } else {
        rows.windows(2).map(|w| w[1].0 - w[0].0).min().unwrap_or(1)
    };
    if ts <= 0 || ts > u32::MAX as i64 {
        return Err(Error::invalid("could not infer the sampling period"));
    }
    let t0 = rows[0].0;
    let n = ((rows.last().unwrap().0 - t0) / ts + 1) as usize;
    let mut values = vec![0.0; n];
    let mut mask = vec![true; n];
    for (t, v) in rows {
        let offset = t - t0;
        if offset % ts != 0 {
            return Err(Error::invalid(format!(
                "timestamp {t} is off the {ts}-minute sampling grid"
            )));
        }
        let i = (offset / ts) as usize;
        if let Some(v) = v {
            values[i] = v;
            mask[i] = false;
        }
    }
    Ok((TimeSeries::new(values, t0, ts as u32)?, GapMask(mask)))
}

/// Writes the series; positions flagged in `mask` get an empty value field.
pub fn write_csv(x: &TimeSeries, path: impl AsRef<Path>, mask: Option<&GapMask>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(x, std::io::BufWriter::new(file), mask)
}

pub fn write_csv_to<W: Write>(x: &TimeSeries, writer: W, mask: Option<&GapMask>) -> Result<()> {
    if let Some(m) = mask {
        if m.len() != x.len() {
            return Err(Error::invalid("gap mask length differs from series length"));
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for (i, v) in x.values().iter().enumerate() {
        let missing = mask.map(|m| m.is_missing(i)).unwrap_or(false);
        let value = if missing { String::new() } else { format!("{v:?}") };
        wtr.write_record([x.time_at(i).to_string(), value])?;
    }
    wtr.flush()?;
    Ok(())
}
