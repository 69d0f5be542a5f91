//! End-to-end experiments on simulated and human-labeled windows.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierConfig, KnnConfig, LabeledWindowSet, StsfConfig};
use crate::detector::{detect_pipeline, AnalysisWindow, DetectConfig, DetectionScore, SeasonalForecaster};
use crate::evaluation::grid::{grid_search, GridResult};
use crate::evaluation::metrics::{ClassScore, ConfusionMatrix};
use crate::evaluation::resample::{rebalance, stratified_split, RebalanceMode};
use crate::evaluation::NoiseBin;
use crate::simulator::{simulate, Proportions, SimConfig};
use crate::{AnomalyClass, Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    SimSim,
    SimReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierFamily {
    Knn,
    Stsf,
}

impl ClassifierFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierFamily::Knn => "knn",
            ClassifierFamily::Stsf => "stsf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Anomalies per simulated series.
    pub n: usize,
    pub ts: u32,
    /// One simulated series per noise level.
    pub sigmas: Vec<f64>,
    pub proportions: Proportions,
    pub rebalance: RebalanceMode,
    pub detect: DetectConfig,
    pub classifiers: Vec<ClassifierFamily>,
    pub knn_grid: Vec<KnnConfig>,
    pub stsf_grid: Vec<StsfConfig>,
    pub test_frac: f64,
    pub cv_folds: usize,
    pub seed: u64,
    /// Labeled real windows (JSONL), used in `sim_real` mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_windows: Option<String>,
    /// Label file applied on top of `real_windows`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_labels: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::SimSim,
            n: 250,
            ts: 5,
            sigmas: vec![0.0, 0.02, 0.04, 0.06, 0.08],
            proportions: Proportions::balanced(),
            rebalance: RebalanceMode::Balanced,
            detect: DetectConfig::default(),
            classifiers: vec![ClassifierFamily::Stsf],
            knn_grid: KnnConfig::default_grid(),
            stsf_grid: [5, 25, 50, 100, 200].map(|n| StsfConfig { n_estimators: n, seed: 0 }).to_vec(),
            test_frac: 0.3,
            cv_folds: 5,
            seed: 0,
            real_windows: None,
            real_labels: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::invalid("sigmas is empty"));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid("sigmas must be finite and non-negative"));
        }
        if self.classifiers.is_empty() {
            return Err(Error::invalid("no classifier family selected"));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(Error::invalid("test_frac must lie in (0, 1)"));
        }
        self.proportions.validate()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self, family: ClassifierFamily) -> Vec<ClassifierConfig> {
        match family {
            ClassifierFamily::Knn => self.knn_grid.iter().map(|&c| ClassifierConfig::Knn(c)).collect(),
            ClassifierFamily::Stsf => self.stsf_grid.iter().map(|&c| ClassifierConfig::Stsf(c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub series_id: String,
    pub sigma: f64,
    pub bin: NoiseBin,
    pub sim_seed: u64,
    pub length: usize,
    pub records: usize,
    pub windows: usize,
    pub labeled: usize,
    pub detection: Option<DetectionScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub family: ClassifierFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridResult>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    /// Scores with growth and decrease merged per anomaly class.
    pub class_level: Vec<ClassScore>,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: NoiseBin,
    /// Paired real-data bin in `sim_real` mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_bin: Option<String>,
    /// Labeled simulated windows before rebalancing.
    pub available: usize,
    pub class_counts: BTreeMap<Label, usize>,
    pub train: usize,
    pub test: usize,
    /// Real windows carrying only the `other` label.
    pub other: usize,
    /// Real windows without any label.
    pub unlabeled: usize,
    pub classifiers: Vec<ClassifierReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: ExperimentMode,
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetReport>,
    pub bins: Vec<BinReport>,
}

impl EvaluationReport {
    pub fn bin(&self, bin: NoiseBin) -> Option<&BinReport> {
        self.bins.iter().find(|b| b.bin == bin)
    }

    pub fn classifier(&self, bin: NoiseBin, family: ClassifierFamily) -> Option<&ClassifierReport> {
        self.bin(bin)?.classifiers.iter().find(|c| c.family == family)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat `(bin, classifier, config, metric, value)` rows.
    pub fn csv_rows(&self) -> Result<Vec<[String; 5]>> {
        let mut rows = Vec::new();
        for b in &self.bins {
            for c in &b.classifiers {
                let config = match &c.grid {
                    Some(g) => serde_json::to_string(&g.best)?,
                    None => String::new(),
                };
                let mut push = |metric: String, value: f64| {
                    rows.push([b.bin.to_string(), c.family.as_str().to_string(), config.clone(), metric, value.to_string()])
                };
                push("micro_f1".into(), c.micro_f1);
                push("macro_f1".into(), c.macro_f1);
                if let Some(g) = &c.grid {
                    push("cv_micro_f1".into(), g.best_score);
                }
                for s in &c.per_class {
                    push(format!("f1:{}", s.label), s.f1);
                }
                for s in &c.class_level {
                    push(format!("class_f1:{}", s.label), s.f1);
                }
            }
        }
        Ok(rows)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin", "classifier", "config", "metric", "value"])?;
        for r in self.csv_rows()? {
            w.write_record(&r)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Internal(e.to_string()))?)
            .map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Simulated windows of every configured noise level, with a per-dataset
/// summary. Windows repeated by overlapping folds are kept once, from the
/// latest fold.
pub fn simulate_windows(cfg: &ExperimentConfig) -> Result<(Vec<AnalysisWindow>, Vec<DatasetReport>)> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = cfg.sigmas.iter().map(|_| master.random()).collect();
    let runs: Vec<Result<(Vec<AnalysisWindow>, DatasetReport)>> = cfg
        .sigmas
        .par_iter()
        .zip(&seeds)
        .enumerate()
        .map(|(i, (&sigma, &seed))| {
            let sim_cfg = SimConfig {
                n: cfg.n,
                ts: cfg.ts,
                noise_sigma: sigma,
                proportions: cfg.proportions.clone(),
                seed,
                ..SimConfig::default()
            };
            let sim = simulate(&sim_cfg)?;
            let series_id = format!("sim{i}");
            let out =
                detect_pipeline(&sim.series, SeasonalForecaster::new, &cfg.detect, Some(&sim.records), &series_id, Some(sigma))?;
            let windows = dedupe(out.windows);
            let labeled = windows.iter().filter(|w| !w.labels.is_empty()).count();
            let report = DatasetReport {
                series_id,
                sigma,
                bin: NoiseBin::from_sigma(sigma),
                sim_seed: seed,
                length: sim.series.len(),
                records: sim.records.len(),
                windows: windows.len(),
                labeled,
                detection: out.score,
            };
            Ok((windows, report))
        })
        .collect();
    let mut windows = Vec::new();
    let mut reports = Vec::new();
    for r in runs {
        let (w, rep) = r?;
        windows.extend(w);
        reports.push(rep);
    }
    Ok((windows, reports))
}

fn dedupe(windows: Vec<AnalysisWindow>) -> Vec<AnalysisWindow> {
    let mut latest: BTreeMap<i64, AnalysisWindow> = BTreeMap::new();
    for w in windows {
        match latest.get(&w.start_index) {
            Some(prev) if prev.fold > w.fold => {}
            _ => {
                latest.insert(w.start_index, w);
            }
        }
    }
    latest.into_values().collect()
}

fn bin_seed(seed: u64, bin: NoiseBin) -> u64 {
    let k = NoiseBin::BINNED.iter().position(|&b| b == bin).unwrap_or(NoiseBin::BINNED.len()) as u64;
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1))
}

fn class_counts(labels: &[Label]) -> BTreeMap<Label, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Trains the best grid point and scores `(truth, prediction)` pairs.
fn train_and_score(
    cfg: &ExperimentConfig,
    family: ClassifierFamily,
    train: &LabeledWindowSet,
    test: &[(Vec<f64>, Vec<Label>)],
    order: &[Label],
    seed: u64,
) -> ClassifierReport {
    let run = || -> Result<(GridResult, ConfusionMatrix)> {
        let grid = grid_search(train, &cfg.grid(family), cfg.cv_folds, seed)?;
        let model = grid.best.fit(train)?;
        let mut pairs = Vec::with_capacity(test.len());
        for (x, labels) in test {
            let p = model.predict(x)?.label;
            let truth = if labels.contains(&p) { p } else { labels[0] };
            pairs.push((truth, p));
        }
        Ok((grid, ConfusionMatrix::from_pairs(order, &pairs)?))
    };
    match run() {
        Ok((grid, confusion)) => summarize(family, Some(grid), confusion, None),
        Err(e) => summarize(family, None, ConfusionMatrix::zeros(order.iter().map(|l| l.to_string()).collect()), Some(e)),
    }
}

fn summarize(family: ClassifierFamily, grid: Option<GridResult>, confusion: ConfusionMatrix, error: Option<Error>) -> ClassifierReport {
    let class_level = match confusion.by_class() {
        Ok(c) => c.per_class(),
        Err(_) => Vec::new(),
    };
    ClassifierReport {
        family,
        grid,
        micro_f1: confusion.micro_f1(),
        macro_f1: confusion.macro_f1(),
        per_class: confusion.per_class(),
        class_level,
        confusion,
        error: error.map(|e| e.to_string()),
    }
}

fn rebalanced(cfg: &ExperimentConfig, windows: &[&AnalysisWindow], seed: u64) -> (Vec<usize>, Vec<Label>) {
    let labels: Vec<Label> = windows.iter().map(|w| w.labels[0]).collect();
    let idx = rebalance(&labels, cfg.rebalance, &cfg.proportions, &mut ChaCha8Rng::seed_from_u64(seed));
    (idx, labels)
}

fn sim_by_bin(windows: &[AnalysisWindow]) -> BTreeMap<NoiseBin, Vec<&AnalysisWindow>> {
    let mut m: BTreeMap<NoiseBin, Vec<&AnalysisWindow>> = BTreeMap::new();
    for w in windows.iter().filter(|w| !w.labels.is_empty()) {
        m.entry(w.noise_bin).or_default().push(w);
    }
    m
}

/// Simulate, detect, label from ground truth, rebalance, hold out a
/// stratified test share, grid-search on the rest and score per noise bin.
pub fn run_sim_sim(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let (windows, datasets) = simulate_windows(cfg)?;
    let bins: Vec<BinReport> = sim_by_bin(&windows)
        .into_par_iter()
        .map(|(bin, ws)| {
            let seed = bin_seed(cfg.seed, bin);
            let (idx, labels) = rebalanced(cfg, &ws, seed);
            let kept: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            let (tr, te) = stratified_split(&kept, cfg.test_frac, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
            let pick = |v: &[usize]| v.iter().map(|&k| idx[k]).collect::<Vec<_>>();
            let (tr, te) = (pick(&tr), pick(&te));
            let mut report = BinReport {
                bin,
                real_bin: None,
                available: ws.len(),
                class_counts: class_counts(&labels),
                train: tr.len(),
                test: te.len(),
                other: 0,
                unlabeled: 0,
                classifiers: Vec::new(),
                note: (bin == NoiseBin::Overflow).then(|| "outside the binned noise range".to_string()),
            };
            let train = match LabeledWindowSet::new(
                tr.iter().map(|&i| ws[i].values.clone()).collect(),
                tr.iter().map(|&i| labels[i]).collect(),
            ) {
                Ok(t) => t,
                Err(e) => {
                    report.note = Some(format!("no training set: {e}"));
                    return report;
                }
            };
            let test: Vec<(Vec<f64>, Vec<Label>)> = te.iter().map(|&i| (ws[i].values.clone(), vec![labels[i]])).collect();
            report.classifiers = cfg
                .classifiers
                .iter()
                .map(|&f| train_and_score(cfg, f, &train, &test, &Label::SUBCLASSES, seed))
                .collect();
            report
        })
        .collect();
    Ok(EvaluationReport { mode: ExperimentMode::SimSim, config: cfg.clone(), datasets, bins })
}

/// Train on the rebalanced simulated windows of each paired noise bin and
/// evaluate on the human-labeled real windows of the same noise range. A
/// prediction counts as correct when it matches any label of the window;
/// windows labeled only `other` are counted but not scored.
pub fn run_sim_real(cfg: &ExperimentConfig, real: &[AnalysisWindow]) -> Result<EvaluationReport> {
    cfg.validate()?;
    let (windows, datasets) = simulate_windows(cfg)?;
    let by_bin = sim_by_bin(&windows);
    let order = Label::ALL;
    let bins: Vec<BinReport> = NoiseBin::BINNED
        .into_par_iter()
        .filter_map(|bin| bin.real_name().map(|name| (bin, name)))
        .map(|(bin, name)| {
            let seed = bin_seed(cfg.seed, bin);
            let ws: Vec<&AnalysisWindow> = by_bin.get(&bin).cloned().unwrap_or_default();
            let real_in: Vec<&AnalysisWindow> = real.iter().filter(|w| w.noise_bin == bin).collect();
            let unlabeled = real_in.iter().filter(|w| w.labels.is_empty()).count();
            let other = real_in
                .iter()
                .filter(|w| !w.labels.is_empty() && w.labels.iter().all(|&l| l == Label::Other))
                .count();
            let test: Vec<(Vec<f64>, Vec<Label>)> = real_in
                .iter()
                .filter_map(|w| {
                    let labels: Vec<Label> = w.labels.iter().copied().filter(|&l| l != Label::Other).collect();
                    (!labels.is_empty()).then(|| (w.values.clone(), labels))
                })
                .collect();
            let (idx, labels) = rebalanced(cfg, &ws, seed);
            let mut report = BinReport {
                bin,
                real_bin: Some(name.to_string()),
                available: ws.len(),
                class_counts: class_counts(&labels),
                train: idx.len(),
                test: test.len(),
                other,
                unlabeled,
                classifiers: Vec::new(),
                note: None,
            };
            if test.is_empty() {
                log::warn!("no labeled real windows in {name}; bin skipped");
                report.note = Some("zero support: no labeled real windows in this bin".into());
                return report;
            }
            let train = match LabeledWindowSet::new(
                idx.iter().map(|&i| ws[i].values.clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
            ) {
                Ok(t) => t,
                Err(e) => {
                    report.note = Some(format!("no training set: {e}"));
                    return report;
                }
            };
            report.classifiers =
                cfg.classifiers.iter().map(|&f| train_and_score(cfg, f, &train, &test, &order, seed)).collect();
            report
        })
        .collect();
    Ok(EvaluationReport { mode: ExperimentMode::SimReal, config: cfg.clone(), datasets, bins })
}

/// Class-level F1 of one anomaly class, if scored.
pub fn class_f1(report: &ClassifierReport, class: AnomalyClass) -> Option<f64> {
    report.class_level.iter().find(|s| s.label == class.as_str()).map(|s| s.f1)
}
