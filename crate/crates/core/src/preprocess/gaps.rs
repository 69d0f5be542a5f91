//! Gap rejection and same-weekly-phase filling.

use serde::{Deserialize, Serialize};

use crate::{samples_per, Error, GapMask, Result, TimeSeries, MINUTES_PER_WEEK};

/// Series with more missing points than this fraction are rejected.
pub const MAX_MISSING_FRACTION: f64 = 0.10;
/// Same-phase donors averaged for each missing point.
pub const MAX_DONORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillStat {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub missing: usize,
    pub missing_fraction: f64,
    /// Indices filled with the series median for lack of a same-phase donor.
    pub median_fallback: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GapOutcome {
    Cleaned { series: TimeSeries, report: GapReport },
    Rejected { missing_fraction: f64 },
}

/// Marks exact zeros as missing, in addition to `mask`.
pub fn zeros_as_missing(x: &TimeSeries, mask: &GapMask) -> GapMask {
    GapMask(x.values().iter().zip(&mask.0).map(|(&v, &m)| m || v == 0.0).collect())
}

/// Fills each missing point from up to three non-missing points at the same
/// weekly phase, nearest first, or rejects the series when more than 10% of
/// it is missing.
pub fn clean_gaps(x: &TimeSeries, mask: &GapMask, stat: FillStat) -> Result<GapOutcome> {
    if mask.len() != x.len() {
        return Err(Error::invalid(format!(
            "mask length {} differs from series length {}",
            mask.len(),
            x.len()
        )));
    }
    let missing_fraction = mask.missing_fraction();
    if missing_fraction > MAX_MISSING_FRACTION {
        return Ok(GapOutcome::Rejected { missing_fraction });
    }
    let week = samples_per(MINUTES_PER_WEEK, x.ts())?;
    let v = x.values();
    let present: Vec<f64> = v.iter().zip(&mask.0).filter(|(_, &m)| !m).map(|(&x, _)| x).collect();
    if present.is_empty() && mask.missing_count() > 0 {
        return Err(Error::insufficient("series has no observed values"));
    }
    let series_median = median(present);

    let mut out = v.to_vec();
    let mut median_fallback = Vec::new();
    for i in (0..v.len()).filter(|&i| mask.is_missing(i)) {
        let mut donors = Vec::with_capacity(MAX_DONORS);
        let mut k = 1;
        while donors.len() < MAX_DONORS {
            let back = i.checked_sub(k * week);
            let fwd = Some(i + k * week).filter(|&j| j < v.len());
            if back.is_none() && fwd.is_none() {
                break;
            }
            for j in [back, fwd].into_iter().flatten() {
                if donors.len() < MAX_DONORS && !mask.is_missing(j) {
                    donors.push(v[j]);
                }
            }
            k += 1;
        }
        out[i] = if donors.is_empty() {
            median_fallback.push(i);
            series_median
        } else {
            match stat {
                FillStat::Mean => donors.iter().sum::<f64>() / donors.len() as f64,
                FillStat::Median => median(donors),
            }
        };
    }
    Ok(GapOutcome::Cleaned {
        series: x.with_values(out)?,
        report: GapReport { missing: mask.missing_count(), missing_fraction, median_fallback },
    })
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
