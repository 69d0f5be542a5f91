//! Noise-level bins for grouping simulated and real windows.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Bin edges; bin `k` is `[EDGES[k], EDGES[k + 1])`.
pub const NOISE_EDGES: [f64; 6] = [0.0, 0.01, 0.03, 0.05, 0.07, 0.09];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBin {
    Asim1,
    Asim2,
    Asim3,
    Asim4,
    Asim5,
    /// Anything at or above the last edge, or negative.
    Overflow,
}

impl NoiseBin {
    pub const BINNED: [NoiseBin; 5] = [NoiseBin::Asim1, NoiseBin::Asim2, NoiseBin::Asim3, NoiseBin::Asim4, NoiseBin::Asim5];

    pub fn from_sigma(sigma: f64) -> NoiseBin {
        (0..5)
            .find(|&k| sigma >= NOISE_EDGES[k] && sigma < NOISE_EDGES[k + 1])
            .map(|k| NoiseBin::BINNED[k])
            .unwrap_or(NoiseBin::Overflow)
    }

    /// `[lo, hi)` bounds, `None` for overflow.
    pub fn bounds(self) -> Option<(f64, f64)> {
        let k = NoiseBin::BINNED.iter().position(|&b| b == self)?;
        Some((NOISE_EDGES[k], NOISE_EDGES[k + 1]))
    }

    /// Name of the real-data bin covering the same noise range.
    pub fn real_name(self) -> Option<&'static str> {
        match self {
            NoiseBin::Asim2 => Some("areal1"),
            NoiseBin::Asim3 => Some("areal2"),
            NoiseBin::Asim4 => Some("areal3"),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseBin::Asim1 => "asim1",
            NoiseBin::Asim2 => "asim2",
            NoiseBin::Asim3 => "asim3",
            NoiseBin::Asim4 => "asim4",
            NoiseBin::Asim5 => "asim5",
            NoiseBin::Overflow => "overflow",
        }
    }
}

impl fmt::Display for NoiseBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Groups items by the bin of their noise level.
pub fn bin_by_noise<T: Clone>(items: &[T], sigma: impl Fn(&T) -> f64) -> std::collections::BTreeMap<NoiseBin, Vec<T>> {
    let mut out = std::collections::BTreeMap::new();
    for item in items {
        out.entry(NoiseBin::from_sigma(sigma(item))).or_insert_with(Vec::new).push(item.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_bins() {
        assert_eq!(NoiseBin::from_sigma(0.0), NoiseBin::Asim1);
        assert_eq!(NoiseBin::from_sigma(0.01), NoiseBin::Asim2);
        assert_eq!(NoiseBin::from_sigma(0.0299), NoiseBin::Asim2);
        assert_eq!(NoiseBin::from_sigma(0.08), NoiseBin::Asim5);
        assert_eq!(NoiseBin::from_sigma(0.09), NoiseBin::Overflow);
        assert_eq!(NoiseBin::from_sigma(-0.01), NoiseBin::Overflow);
    }

    #[test]
    fn real_pairing() {
        assert_eq!(NoiseBin::Asim2.real_name(), Some("areal1"));
        assert_eq!(NoiseBin::Asim3.real_name(), Some("areal2"));
        assert_eq!(NoiseBin::Asim4.real_name(), Some("areal3"));
        assert_eq!(NoiseBin::Asim1.real_name(), None);
        assert_eq!(NoiseBin::Asim5.real_name(), None);
    }
}
