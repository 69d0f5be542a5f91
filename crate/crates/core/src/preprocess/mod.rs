//! Cleaning, noise estimation and decomposition of KPI traces.

pub mod butterworth;
pub mod decompose;
pub mod gaps;

pub use butterworth::{butter_highpass, TransferFunction};
pub use decompose::{centered_moving_average, decompose, deseasonalize_test, Decomposition, SeasonalModel};
pub use gaps::{clean_gaps, zeros_as_missing, FillStat, GapOutcome, GapReport};

use crate::{Error, Result, TimeSeries};

/// Filter order of the noise estimator.
pub const NOISE_FILTER_ORDER: usize = 5;
/// Cutoff as a fraction of Nyquist (one eighth of the sampling frequency).
pub const NOISE_FILTER_CUTOFF: f64 = 0.25;
/// Shortest series accepted by [`estimate_noise_level`].
pub const MIN_NOISE_SAMPLES: usize = 50;

/// Standard deviation (ddof 1) of the zero-phase high-passed series.
pub fn estimate_noise_level(x: &TimeSeries) -> Result<f64> {
    if x.len() < MIN_NOISE_SAMPLES {
        return Err(Error::insufficient(format!(
            "noise estimation needs at least {MIN_NOISE_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    let tf = butter_highpass(NOISE_FILTER_ORDER, NOISE_FILTER_CUTOFF)?;
    let y = tf.filtfilt(x.values())?;
    Ok(sample_std(&y))
}

pub(crate) fn sample_std(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
