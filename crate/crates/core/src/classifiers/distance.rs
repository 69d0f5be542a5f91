//! Elastic distances: DTW, derivative DTW and weighted DTW.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Dtw,
    Ddtw,
    Wdtw,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::Dtw, DistanceKind::Ddtw, DistanceKind::Wdtw];
}

/// Default steepness of the WDTW weight.
pub const WDTW_G: f64 = 0.05;

/// DTW with squared pointwise cost. Cells with `|i - j| >= window_frac *
/// max(len)` are excluded; `window_frac = 1` leaves the alignment free.
pub fn dtw(a: &[f64], b: &[f64], window_frac: f64) -> Result<f64> {
    accumulate(a, b, window_frac, |_| 1.0)
}

/// DTW on the derivative transform of both inputs.
pub fn ddtw(a: &[f64], b: &[f64], window_frac: f64) -> Result<f64> {
    dtw(&derivative(a)?, &derivative(b)?, window_frac)
}

/// Unconstrained DTW with the squared cost of cell `(i, j)` multiplied by
/// `1 / (1 + exp(-g (|i - j| - max(len) / 2)))`.
pub fn wdtw(a: &[f64], b: &[f64], g: f64) -> Result<f64> {
    let half = a.len().max(b.len()) as f64 / 2.0;
    let weights: Vec<f64> =
        (0..a.len().max(b.len())).map(|d| 1.0 / (1.0 + (-g * (d as f64 - half)).exp())).collect();
    accumulate(a, b, 1.0, |d| weights[d])
}

/// `d(i) = ((a[i] - a[i-1]) + (a[i+1] - a[i-1]) / 2) / 2` on interior points;
/// the first and last values repeat their neighbours.
pub fn derivative(a: &[f64]) -> Result<Vec<f64>> {
    if a.len() < 3 {
        return Err(Error::invalid(format!("derivative needs at least 3 points, got {}", a.len())));
    }
    let n = a.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = ((a[i] - a[i - 1]) + (a[i + 1] - a[i - 1]) / 2.0) / 2.0;
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    Ok(d)
}

fn accumulate(a: &[f64], b: &[f64], window_frac: f64, weight: impl Fn(usize) -> f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("distance inputs must be non-empty"));
    }
    if !(window_frac > 0.0) {
        return Err(Error::invalid("window_frac must be positive"));
    }
    let (n, m) = (a.len(), b.len());
    let band = window_frac * n.max(m) as f64;
    let allowed = |i: usize, j: usize| (i.abs_diff(j) as f64) < band;
    if !allowed(n - 1, m - 1) {
        return Err(Error::invalid(format!(
            "warping band {band} cannot align sequences of length {n} and {m}"
        )));
    }
    let inf = f64::INFINITY;
    let mut prev = vec![inf; m];
    let mut cur = vec![inf; m];
    for i in 0..n {
        for j in 0..m {
            if !allowed(i, j) {
                cur[j] = inf;
                continue;
            }
            let d = a[i] - b[j];
            let c = weight(i.abs_diff(j)) * (d * d);
            cur[j] = if i == 0 && j == 0 {
                c
            } else {
                let up = if i > 0 { prev[j] } else { inf };
                let left = if j > 0 { cur[j - 1] } else { inf };
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { inf };
                c + up.min(left).min(diag)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let out = prev[m - 1];
    if !out.is_finite() {
        return Err(Error::invalid("warping band leaves no alignment path"));
    }
    Ok(out)
}

/// Distance of the given kind with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    pub window_frac: f64,
    pub g: f64,
}

impl DistanceSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self.kind {
            DistanceKind::Dtw => dtw(a, b, self.window_frac),
            DistanceKind::Ddtw => ddtw(a, b, self.window_frac),
            DistanceKind::Wdtw => wdtw(a, b, self.g),
        }
    }
}
