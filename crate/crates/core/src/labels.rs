//! Anomaly classes, directions and the closed label vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// The four simulated anomaly types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyClass {
    SinglePoint,
    TemporaryChange,
    LevelShift,
    VariationChange,
}

impl AnomalyClass {
    pub const ALL: [AnomalyClass; 4] = [
        AnomalyClass::SinglePoint,
        AnomalyClass::TemporaryChange,
        AnomalyClass::LevelShift,
        AnomalyClass::VariationChange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyClass::SinglePoint => "single_point",
            AnomalyClass::TemporaryChange => "temporary_change",
            AnomalyClass::LevelShift => "level_shift",
            AnomalyClass::VariationChange => "variation_change",
        }
    }

    /// Minimum anomaly length in samples.
    pub fn min_length(self) -> usize {
        match self {
            AnomalyClass::SinglePoint => 1,
            _ => 3,
        }
    }

    /// Bounds `(l_min, l_max)` of the half window size `Y`, in samples.
    pub fn half_window_bounds(self) -> (usize, usize) {
        match self {
            AnomalyClass::SinglePoint => (120, 480),
            AnomalyClass::TemporaryChange => (240, 960),
            AnomalyClass::LevelShift | AnomalyClass::VariationChange => (1440, 2160),
        }
    }
}

impl fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign of an anomaly. `Growth` covers peaks, `Decrease` covers dips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Growth,
    Decrease,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Growth => 1.0,
            Direction::Decrease => -1.0,
        }
    }
}

/// Closed label vocabulary: the eight anomaly subclasses plus `Other`.
///
/// Declaration order follows the subclass order used by proportion vectors
/// (single point peak/dip, temporary change growth/decrease, level shift
/// growth/decrease, variation change growth/decrease).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    SinglePointPeak,
    SinglePointDip,
    TemporaryChangeGrowth,
    TemporaryChangeDecrease,
    LevelShiftGrowth,
    LevelShiftDecrease,
    VariationChangeGrowth,
    VariationChangeDecrease,
    Other,
}

impl Label {
    pub const SUBCLASSES: [Label; 8] = [
        Label::SinglePointPeak,
        Label::SinglePointDip,
        Label::TemporaryChangeGrowth,
        Label::TemporaryChangeDecrease,
        Label::LevelShiftGrowth,
        Label::LevelShiftDecrease,
        Label::VariationChangeGrowth,
        Label::VariationChangeDecrease,
    ];

    pub const ALL: [Label; 9] = [
        Label::SinglePointPeak,
        Label::SinglePointDip,
        Label::TemporaryChangeGrowth,
        Label::TemporaryChangeDecrease,
        Label::LevelShiftGrowth,
        Label::LevelShiftDecrease,
        Label::VariationChangeGrowth,
        Label::VariationChangeDecrease,
        Label::Other,
    ];

    pub fn new(class: AnomalyClass, direction: Direction) -> Label {
        use AnomalyClass::*;
        use Direction::*;
        match (class, direction) {
            (SinglePoint, Growth) => Label::SinglePointPeak,
            (SinglePoint, Decrease) => Label::SinglePointDip,
            (TemporaryChange, Growth) => Label::TemporaryChangeGrowth,
            (TemporaryChange, Decrease) => Label::TemporaryChangeDecrease,
            (LevelShift, Growth) => Label::LevelShiftGrowth,
            (LevelShift, Decrease) => Label::LevelShiftDecrease,
            (VariationChange, Growth) => Label::VariationChangeGrowth,
            (VariationChange, Decrease) => Label::VariationChangeDecrease,
        }
    }

    /// Class and direction, or `None` for `Other`.
    pub fn subclass(self) -> Option<(AnomalyClass, Direction)> {
        use AnomalyClass::*;
        use Direction::*;
        Some(match self {
            Label::SinglePointPeak => (SinglePoint, Growth),
            Label::SinglePointDip => (SinglePoint, Decrease),
            Label::TemporaryChangeGrowth => (TemporaryChange, Growth),
            Label::TemporaryChangeDecrease => (TemporaryChange, Decrease),
            Label::LevelShiftGrowth => (LevelShift, Growth),
            Label::LevelShiftDecrease => (LevelShift, Decrease),
            Label::VariationChangeGrowth => (VariationChange, Growth),
            Label::VariationChangeDecrease => (VariationChange, Decrease),
            Label::Other => return None,
        })
    }

    pub fn class(self) -> Option<AnomalyClass> {
        self.subclass().map(|(c, _)| c)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::SinglePointPeak => "single_point_peak",
            Label::SinglePointDip => "single_point_dip",
            Label::TemporaryChangeGrowth => "temporary_change_growth",
            Label::TemporaryChangeDecrease => "temporary_change_decrease",
            Label::LevelShiftGrowth => "level_shift_growth",
            Label::LevelShiftDecrease => "level_shift_decrease",
            Label::VariationChangeGrowth => "variation_change_growth",
            Label::VariationChangeDecrease => "variation_change_decrease",
            Label::Other => "other",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}
