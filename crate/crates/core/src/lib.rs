//! Simulation, detection and classification of anomalies in network KPI
//! time series.
//!
//! The crate is organised as a pipeline:
//!
//! * [`timeseries`] holds the uniformly sampled series type, scaling,
//!   resampling and the CSV format.
//! * [`simulator`] builds synthetic latency-like series with labelled,
//!   injected anomalies.
//! * [`preprocess`] cleans real traces, estimates their noise level and
//!   performs moving-average decomposition.
//! * [`detector`] flags points against a forecast, cuts fixed-size analysis
//!   windows around them and scores detection.
//! * [`classifiers`] assigns an anomaly subclass to each window (DTW-family
//!   kNN and a supervised interval forest).
//! * [`evaluation`] runs the simulated/simulated and simulated/real
//!   experiments and produces reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classifiers;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod labels;
pub mod preprocess;
pub mod simulator;
pub mod timeseries;

pub use error::{Error, Result};
pub use labels::{AnomalyClass, Direction, Label};
pub use timeseries::{GapMask, ScaleParams, TimeSeries};

/// Minutes in a day.
pub const MINUTES_PER_DAY: u32 = 1440;
/// Minutes in a week.
pub const MINUTES_PER_WEEK: u32 = 7 * MINUTES_PER_DAY;
/// Minutes in the four-week "month" used by the base signal.
pub const MINUTES_PER_MONTH: u32 = 4 * MINUTES_PER_WEEK;

/// Number of samples covering `minutes` at sampling period `ts`.
///
/// Returns an error when `minutes` is not a multiple of `ts`.
pub fn samples_per(minutes: u32, ts: u32) -> Result<usize> {
    if ts == 0 || !minutes.is_multiple_of(ts) {
        return Err(Error::InvalidInput(format!(
            "period of {minutes} minutes is not a multiple of the sampling period {ts}"
        )));
    }
    Ok((minutes / ts) as usize)
}
