//! `kpi` command-line tool: simulation, detection, preprocessing,
//! classification, experiments, plotting and the labeling service.

pub mod manifest;
pub mod plot;
pub mod service;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};
use kpi_anomaly::classifiers::knn::KnnPersisted;
use kpi_anomaly::classifiers::{ClassifierConfig, KnnConfig, LabeledWindowSet, Model, Prediction, StsfConfig};
use kpi_anomaly::detector::{
    detect_pipeline, read_windows_jsonl, write_windows_jsonl, AnalysisWindow, DetectConfig, SeasonalForecaster,
};
use kpi_anomaly::evaluation::{
    grid_search, run_sim_real, run_sim_sim, ConfusionMatrix, EvaluationReport, ExperimentConfig, ExperimentMode,
    GridResult, LabelFile, NoiseBin,
};
use kpi_anomaly::preprocess::{clean_gaps, estimate_noise_level, zeros_as_missing, FillStat, GapOutcome};
use kpi_anomaly::simulator::{read_records_json, simulate, write_records_json, SimConfig};
use kpi_anomaly::timeseries::{read_csv, write_csv};
use kpi_anomaly::{Label, TimeSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::{manifest_path, FileHash, Manifest};

#[derive(Debug, Parser)]
#[command(name = "kpi", version, about = "KPI time-series anomaly simulation, detection and classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Knn,
    Stsf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Mean,
    Median,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a series with injected anomalies and its ground-truth records.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Flag anomalies and cut analysis windows.
    Detect {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Noise level stamped on the windows; estimated when omitted.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        series_id: Option<String>,
    },
    /// Fill gaps or reject a series with too many missing points.
    Preprocess {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Treat exact zeros as missing.
        #[arg(long)]
        zeros_missing: bool,
        #[arg(long, value_enum, default_value = "mean")]
        stat: StatArg,
    },
    /// Print the noise level of a series.
    Noise {
        #[arg(long)]
        series: PathBuf,
    },
    /// Grid-search a classifier on labeled windows and score a test set.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// JSON array of configurations for the chosen model.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        cv: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Run a SIM-SIM or SIM-REAL experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render F1 against noise level from a report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve windows for manual labeling.
    Label {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = service::PORT_ENV, default_value_t = service::DEFAULT_PORT)]
        port: u16,
        /// Directory with the labeler UI build.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { kind: &'static str, message: String, detail: Option<Value> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Usage(m) => json!({ "error": "usage", "message": m }),
            CliError::Data { kind, message, detail } => {
                let mut v = json!({ "error": kind, "message": message });
                if let Some(d) = detail {
                    v["detail"] = d.clone();
                }
                v
            }
        }
    }

    fn data(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::Data { kind, message: message.into(), detail: None }
    }
}

impl From<kpi_anomaly::Error> for CliError {
    fn from(e: kpi_anomaly::Error) -> Self {
        use kpi_anomaly::Error as E;
        let kind = match &e {
            E::InvalidInput(_) => "invalid_input",
            E::ConstantSeries(_) => "constant_series",
            E::InsufficientData(_) => "insufficient_data",
            E::PhaseMisaligned(_) => "phase_misaligned",
            E::UnknownLabel(_) => "unknown_label",
            E::NotFitted => "not_fitted",
            E::Internal(_) => "internal",
            E::Io(_) => "io",
            E::Csv(_) => "csv",
            E::Json(_) => "json",
        };
        CliError::data(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data("json", e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr as one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let rest: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli.command, &rest, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let (x, mask) = read_csv(path)?;
    if mask.missing_count() > 0 {
        return Err(CliError::Data {
            kind: "missing_values",
            message: format!("{} has {} missing values; run `kpi preprocess` first", path.display(), mask.missing_count()),
            detail: Some(json!({ "missing_fraction": mask.missing_fraction() })),
        });
    }
    Ok(x)
}

fn print_json(w: &mut dyn Write, v: &impl Serialize) -> CliResult<()> {
    writeln!(w, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into())
}

struct RunRecord {
    command: &'static str,
    seed: Option<u64>,
    config: Option<Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
}

fn write_manifest(rec: RunRecord, args: &[String]) -> CliResult<Manifest> {
    let hash = |ps: &[PathBuf]| ps.iter().map(|p| FileHash::of(p)).collect::<std::io::Result<Vec<_>>>();
    let m = Manifest {
        tool: "kpi".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: rec.command.into(),
        args: args.to_vec(),
        seed: rec.seed,
        config: rec.config,
        inputs: hash(&rec.inputs)?,
        outputs: hash(&rec.outputs)?,
    };
    m.write(&rec.manifest)?;
    Ok(m)
}

/// Runs one command, writing its summary to `w`.
pub fn run(command: Command, args: &[String], w: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = match &config {
                Some(p) => SimConfig::from_json_file(p)?,
                None => SimConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            std::fs::create_dir_all(&out)?;
            let sim = simulate(&cfg)?;
            let series = out.join("series.csv");
            let records = out.join("records.json");
            write_csv(&sim.series, &series, None)?;
            write_records_json(&sim.records, &records)?;
            write_manifest(
                RunRecord {
                    command: "simulate",
                    seed: Some(cfg.seed),
                    config: Some(serde_json::to_value(&cfg)?),
                    inputs: config.into_iter().collect(),
                    outputs: vec![series, records],
                    manifest: manifest_path(&out, true),
                },
                args,
            )?;
            print_json(w, &json!({ "length": sim.series.len(), "records": sim.records.len(), "out": out }))
        }
        Command::Detect { series, records, out, m, folds, sigma, series_id } => {
            let x = read_series(&series)?;
            let recs = records.as_ref().map(read_records_json).transpose()?;
            let sigma = match sigma {
                Some(s) => s,
                None => estimate_noise_level(&x)?,
            };
            let cfg = DetectConfig { m, folds, ..DetectConfig::default() };
            let id = series_id.unwrap_or_else(|| stem(&series));
            let res = detect_pipeline(&x, SeasonalForecaster::new, &cfg, recs.as_deref(), &id, Some(sigma))?;
            write_windows_jsonl(&res.windows, &out)?;
            let mut inputs = vec![series.clone()];
            inputs.extend(records);
            write_manifest(
                RunRecord {
                    command: "detect",
                    seed: None,
                    config: Some(serde_json::to_value(&cfg)?),
                    inputs,
                    outputs: vec![out.clone()],
                    manifest: manifest_path(&out, false),
                },
                args,
            )?;
            print_json(w, &json!({
                "series_id": id,
                "windows": res.windows.len(),
                "sigma": sigma,
                "noise_bin": NoiseBin::from_sigma(sigma),
                "folds": res.folds.len(),
                "score": res.score,
            }))
        }
        Command::Preprocess { series, out, report, zeros_missing, stat } => {
            let (x, mut mask) = read_csv(&series)?;
            if zeros_missing {
                mask = zeros_as_missing(&x, &mask);
            }
            let stat = match stat {
                StatArg::Mean => FillStat::Mean,
                StatArg::Median => FillStat::Median,
            };
            let id = stem(&series);
            match clean_gaps(&x, &mask, stat)? {
                GapOutcome::Cleaned { series: clean, report: rep } => {
                    write_csv(&clean, &out, None)?;
                    let body = json!({
                        "status": "cleaned",
                        "series_id": id,
                        "missing": rep.missing,
                        "missing_fraction": rep.missing_fraction,
                        "median_fallback": rep.median_fallback,
                    });
                    write_json(&report, &body)?;
                    write_manifest(
                        RunRecord {
                            command: "preprocess",
                            seed: None,
                            config: None,
                            inputs: vec![series],
                            outputs: vec![out.clone(), report],
                            manifest: manifest_path(&out, false),
                        },
                        args,
                    )?;
                    print_json(w, &body)
                }
                GapOutcome::Rejected { missing_fraction } => {
                    let body = json!({ "status": "rejected", "series_id": id, "missing_fraction": missing_fraction });
                    write_json(&report, &body)?;
                    print_json(w, &body)?;
                    Err(CliError::Data {
                        kind: "rejected",
                        message: format!("{id}: {:.1}% of points missing", 100.0 * missing_fraction),
                        detail: Some(body),
                    })
                }
            }
        }
        Command::Noise { series } => {
            let x = read_series(&series)?;
            writeln!(w, "{}", estimate_noise_level(&x)?)?;
            Ok(())
        }
        Command::Classify { train, test, model, grid, out, cv, seed, save_model } => {
            classify(&train, &test, model, grid.as_deref(), &out, cv, seed, save_model.as_deref(), args, w)
        }
        Command::Experiment { config, out, seed } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            std::fs::create_dir_all(&out)?;
            let mut inputs = vec![config.clone()];
            let report = match cfg.mode {
                ExperimentMode::SimSim => run_sim_sim(&cfg)?,
                ExperimentMode::SimReal => {
                    let path = cfg
                        .real_windows
                        .clone()
                        .ok_or_else(|| CliError::data("invalid_input", "sim_real mode needs `real_windows`"))?;
                    let mut real = read_windows_jsonl(&path)?;
                    inputs.push(PathBuf::from(&path));
                    if let Some(lp) = &cfg.real_labels {
                        LabelFile::read(lp)?.apply(&mut real)?;
                        inputs.push(PathBuf::from(lp));
                    }
                    run_sim_real(&cfg, &real)?
                }
            };
            let json_path = out.join("report.json");
            let csv_path = out.join("report.csv");
            std::fs::write(&json_path, report.to_json()?)?;
            std::fs::write(&csv_path, report.to_csv()?)?;
            write_manifest(
                RunRecord {
                    command: "experiment",
                    seed: Some(cfg.seed),
                    config: Some(serde_json::to_value(&cfg)?),
                    inputs,
                    outputs: vec![json_path.clone(), csv_path],
                    manifest: manifest_path(&out, true),
                },
                args,
            )?;
            let summary: Vec<Value> = report
                .bins
                .iter()
                .flat_map(|b| {
                    b.classifiers.iter().map(move |c| json!({ "bin": b.bin, "classifier": c.family, "micro_f1": c.micro_f1 }))
                })
                .collect();
            print_json(w, &json!({ "report": json_path, "results": summary }))
        }
        Command::Plot { report, out } => {
            let r: EvaluationReport = serde_json::from_slice(&std::fs::read(&report)?)?;
            std::fs::write(&out, plot::render(&r))?;
            write_manifest(
                RunRecord {
                    command: "plot",
                    seed: None,
                    config: None,
                    inputs: vec![report],
                    outputs: vec![out.clone()],
                    manifest: manifest_path(&out, false),
                },
                args,
            )?;
            Ok(())
        }
        Command::Label { windows, out, port, static_dir } => {
            let ws = read_windows_jsonl(&windows)?;
            let store = Arc::new(Mutex::new(service::LabelStore::open(ws, &out)?));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(store, port, static_dir))?;
            Ok(())
        }
        Command::Replay { manifest } => {
            let recorded = Manifest::read(&manifest)?;
            let changed = recorded.changed_inputs();
            if !changed.is_empty() {
                return Err(CliError::Data {
                    kind: "inputs_changed",
                    message: "recorded inputs no longer match their hashes".into(),
                    detail: Some(json!({ "paths": changed })),
                });
            }
            let mut argv = vec!["kpi".to_string()];
            argv.extend(recorded.args.iter().cloned());
            let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
            if matches!(cli.command, Command::Replay { .. } | Command::Label { .. }) {
                return Err(CliError::Usage("manifest does not record a replayable command".into()));
            }
            run(cli.command, &recorded.args, &mut std::io::sink())?;
            let fresh = Manifest::read(&manifest)?;
            let differing = fresh.differing_outputs(&recorded);
            print_json(w, &json!({ "command": recorded.command, "identical": differing.is_empty(), "differing": differing }))?;
            if differing.is_empty() {
                Ok(())
            } else {
                Err(CliError::Data {
                    kind: "not_reproduced",
                    message: "replayed outputs differ from the manifest".into(),
                    detail: Some(json!({ "paths": differing })),
                })
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct PredictionRow {
    index: usize,
    series_id: String,
    start_index: i64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    truth: Vec<Label>,
    #[serde(flatten)]
    prediction: Prediction,
}

#[derive(Debug, Serialize)]
struct ClassifyReport {
    model: &'static str,
    train: usize,
    test: usize,
    grid: GridResult,
    predictions: Vec<PredictionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<Value>,
}

#[allow(clippy::too_many_arguments)]
fn classify(
    train_path: &Path,
    test_path: &Path,
    model: ModelArg,
    grid_path: Option<&Path>,
    out: &Path,
    cv: usize,
    seed: Option<u64>,
    save_model: Option<&Path>,
    args: &[String],
    w: &mut dyn Write,
) -> CliResult<()> {
    let train_windows = read_windows_jsonl(train_path)?;
    let test_windows = read_windows_jsonl(test_path)?;
    let kept: Vec<usize> = (0..train_windows.len())
        .filter(|&i| train_windows[i].primary_label().is_some_and(|l| l != Label::Other))
        .collect();
    let picked: Vec<AnalysisWindow> = kept.iter().map(|&i| train_windows[i].clone()).collect();
    let set = LabeledWindowSet::from_windows(&picked)?;
    let seed_v = seed.unwrap_or(0);
    let grid: Vec<ClassifierConfig> = match (model, grid_path) {
        (ModelArg::Knn, Some(p)) => {
            serde_json::from_slice::<Vec<KnnConfig>>(&std::fs::read(p)?)?.into_iter().map(ClassifierConfig::Knn).collect()
        }
        (ModelArg::Knn, None) => KnnConfig::default_grid().into_iter().map(ClassifierConfig::Knn).collect(),
        (ModelArg::Stsf, g) => {
            let base: Vec<StsfConfig> = match g {
                Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
                None => ExperimentConfig::default().stsf_grid,
            };
            base.into_iter()
                .map(|c| ClassifierConfig::Stsf(StsfConfig { seed: seed.unwrap_or(c.seed), ..c }))
                .collect()
        }
    };
    let result = grid_search(&set, &grid, cv, seed_v)?;
    let fitted = result.best.fit(&set)?;
    let mut predictions = Vec::with_capacity(test_windows.len());
    let mut pairs = Vec::new();
    for (i, w) in test_windows.iter().enumerate() {
        let p = fitted.predict(&w.values)?;
        let truth: Vec<Label> = w.labels.iter().copied().filter(|&l| l != Label::Other).collect();
        if !truth.is_empty() {
            let t = if truth.contains(&p.label) { p.label } else { truth[0] };
            pairs.push((t, p.label));
        }
        predictions.push(PredictionRow {
            index: i,
            series_id: w.series_id.clone(),
            start_index: w.start_index,
            truth,
            prediction: p,
        });
    }
    let metrics = if pairs.is_empty() {
        None
    } else {
        let cm = ConfusionMatrix::from_pairs(&Label::SUBCLASSES, &pairs)?;
        let by_class = cm.by_class()?;
        Some(json!({
            "scored": pairs.len(),
            "micro_f1": cm.micro_f1(),
            "macro_f1": cm.macro_f1(),
            "per_class": cm.per_class(),
            "class_level": by_class.per_class(),
            "confusion": cm,
        }))
    };
    let report = ClassifyReport {
        model: match model {
            ModelArg::Knn => "knn",
            ModelArg::Stsf => "stsf",
        },
        train: set.len(),
        test: test_windows.len(),
        grid: result,
        predictions,
        metrics,
    };
    write_json(out, &report)?;
    let mut outputs = vec![out.to_path_buf()];
    if let Some(p) = save_model {
        match &fitted {
            Model::Stsf(m) => write_json(p, m)?,
            Model::Knn(m) => write_json(
                p,
                &KnnPersisted { config: m.config, windows_path: train_path.display().to_string(), indices: kept.clone() },
            )?,
        }
        outputs.push(p.to_path_buf());
    }
    let mut inputs = vec![train_path.to_path_buf(), test_path.to_path_buf()];
    inputs.extend(grid_path.map(Path::to_path_buf));
    write_manifest(
        RunRecord {
            command: "classify",
            seed: Some(seed_v),
            config: Some(serde_json::to_value(&grid)?),
            inputs,
            outputs,
            manifest: manifest_path(out, false),
        },
        args,
    )?;
    if let Some(m) = &report.metrics {
        print_json(w, &json!({ "best": report.grid.best, "cv_micro_f1": report.grid.best_score, "micro_f1": m["micro_f1"] }))
    } else {
        print_json(w, &json!({ "best": report.grid.best, "cv_micro_f1": report.grid.best_score }))
    }
}
