//! Series representations, interval features and the Fisher score.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Original,
    Periodogram,
    FirstDifference,
}

impl Representation {
    pub const ALL: [Representation; 3] =
        [Representation::Original, Representation::Periodogram, Representation::FirstDifference];

    pub fn apply(self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Representation::Original => Ok(x.to_vec()),
            Representation::Periodogram => periodogram(x),
            Representation::FirstDifference => {
                if x.len() < 2 {
                    return Err(Error::invalid("first difference needs at least 2 points"));
                }
                Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Mean,
    Median,
    Std,
    Slope,
    Iqr,
    Min,
    Max,
}

impl Feature {
    pub const ALL: [Feature; 7] =
        [Feature::Mean, Feature::Median, Feature::Std, Feature::Slope, Feature::Iqr, Feature::Min, Feature::Max];

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Feature::Mean => mean(x),
            Feature::Median => percentile(x, 50.0),
            Feature::Std => {
                let m = mean(x);
                (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
            }
            Feature::Slope => slope(x),
            Feature::Iqr => percentile(x, 75.0) - percentile(x, 25.0),
            Feature::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            Feature::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// One-sided power spectrum at bins `1..=n/2` by direct DFT, scaled so that
/// `|X_0|^2 + sum = n * sum x^2`: bins strictly between 0 and `n/2` count twice.
pub fn periodogram(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::invalid(format!("periodogram needs at least 4 points, got {n}")));
    }
    let out = (1..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let phase = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            let p = re * re + im * im;
            if 2 * k == n {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    Ok(out)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Least-squares slope against `0..n`.
pub fn slope(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let tm = (n - 1) as f64 / 2.0;
    let ym = mean(x);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, &y) in x.iter().enumerate() {
        let dt = t as f64 - tm;
        num += dt * (y - ym);
        den += dt * dt;
    }
    num / den
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(x: &[f64], q: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Between-class over within-class variance of one feature column:
/// `sum n_c (mu_c - mu)^2 / (sum n_c var_c + 1e-12)`.
///
/// `classes[i]` indexes the class of `values[i]` in `0..n_classes`.
pub fn fisher_score(values: &[f64], classes: &[usize], n_classes: usize) -> f64 {
    let mut sum = vec![0.0; n_classes];
    let mut cnt = vec![0usize; n_classes];
    for (&v, &c) in values.iter().zip(classes) {
        sum[c] += v;
        cnt[c] += 1;
    }
    let mu = mean(values);
    let mut var = vec![0.0; n_classes];
    let means: Vec<f64> = (0..n_classes).map(|c| if cnt[c] > 0 { sum[c] / cnt[c] as f64 } else { 0.0 }).collect();
    for (&v, &c) in values.iter().zip(classes) {
        var[c] += (v - means[c]).powi(2);
    }
    let between: f64 = (0..n_classes).map(|c| cnt[c] as f64 * (means[c] - mu).powi(2)).sum();
    let within: f64 = var.iter().sum();
    between / (within + 1e-12)
}
