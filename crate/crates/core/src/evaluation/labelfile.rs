//! Human label assignments exported by the labeling service.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::AnalysisWindow;
use crate::{Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    /// Position of the window in its window file.
    pub id: usize,
    pub series_id: String,
    pub start_index: i64,
    pub labels: Vec<Label>,
    /// Times the entry was written.
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub windows: Vec<LabelEntry>,
}

impl LabelFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Copies labels onto `windows`; returns how many windows were touched.
    /// Entries must point at an existing window with matching series and
    /// start index.
    pub fn apply(&self, windows: &mut [AnalysisWindow]) -> Result<usize> {
        for e in &self.windows {
            let w = windows
                .get_mut(e.id)
                .ok_or_else(|| Error::invalid(format!("label entry for unknown window {}", e.id)))?;
            if w.series_id != e.series_id || w.start_index != e.start_index {
                return Err(Error::invalid(format!(
                    "label entry {} names {}@{}, window file has {}@{}",
                    e.id, e.series_id, e.start_index, w.series_id, w.start_index
                )));
            }
            w.labels = e.labels.clone();
        }
        Ok(self.windows.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::NoiseBin;

    fn window(start: i64) -> AnalysisWindow {
        AnalysisWindow {
            series_id: "s".into(),
            fold: 1,
            start_index: start,
            source_index: start as usize + 3,
            values: vec![0.0; 4],
            padded: false,
            labels: vec![],
            noise_bin: NoiseBin::Asim2,
            sigma: Some(0.02),
        }
    }

    #[test]
    fn apply_checks_identity() {
        let mut ws = vec![window(0), window(10)];
        let f = LabelFile {
            windows: vec![LabelEntry {
                id: 1,
                series_id: "s".into(),
                start_index: 10,
                labels: vec![Label::SinglePointPeak, Label::Other],
                version: 1,
            }],
        };
        assert_eq!(f.apply(&mut ws).unwrap(), 1);
        assert_eq!(ws[1].labels.len(), 2);
        let bad = LabelFile { windows: vec![LabelEntry { start_index: 11, ..f.windows[0].clone() }] };
        assert!(bad.apply(&mut ws).is_err());
    }
}
