//! Python bindings: simulation, noise estimation, detection, distances,
//! classifiers and experiments. Structured results come back as plain
//! dicts and lists.

use kpi_anomaly::classifiers::{self, ClassifierConfig, LabeledWindowSet, Model};
use kpi_anomaly::detector::{self, DetectConfig, SeasonalForecaster};
use kpi_anomaly::evaluation::{run_sim_sim, ExperimentConfig, ExperimentMode};
use kpi_anomaly::preprocess::{self, FillStat, GapOutcome};
use kpi_anomaly::simulator::{self, AnomalyRecord, SimConfig};
use kpi_anomaly::{GapMask, Label};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

fn err(e: kpi_anomaly::Error) -> PyErr {
    use kpi_anomaly::Error as E;
    match e {
        E::Io(e) => PyIOError::new_err(e.to_string()),
        E::Internal(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_py_any(py)?,
            (None, Some(u)) => u.into_py_any(py)?,
            _ => n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?,
        },
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(to_py(py, x)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn serialize(py: Python<'_>, v: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(json_err)?)
}

/// Regularly sampled series.
#[pyclass(name = "TimeSeries", module = "kpi_anomaly_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTimeSeries {
    inner: kpi_anomaly::TimeSeries,
}

#[pymethods]
impl PyTimeSeries {
    #[new]
    #[pyo3(signature = (values, ts = 5, t0 = 0))]
    fn new(values: Vec<f64>, ts: u32, t0: i64) -> PyResult<Self> {
        Ok(Self { inner: kpi_anomaly::TimeSeries::new(values, t0, ts).map_err(err)? })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn ts(&self) -> u32 {
        self.inner.ts()
    }

    #[getter]
    fn t0(&self) -> i64 {
        self.inner.t0()
    }

    fn timestamps(&self) -> Vec<i64> {
        (0..self.inner.len()).map(|i| self.inner.time_at(i)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("TimeSeries(len={}, ts={}, t0={})", self.inner.len(), self.inner.ts(), self.inner.t0())
    }
}

/// Simulated series with its ground truth.
#[pyclass(name = "Simulation", module = "kpi_anomaly_py")]
pub struct PySimulation {
    inner: simulator::Simulation,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn series(&self) -> PyTimeSeries {
        PyTimeSeries { inner: self.inner.series.clone() }
    }

    #[getter]
    fn base(&self) -> PyTimeSeries {
        PyTimeSeries { inner: self.inner.base.clone() }
    }

    #[getter]
    fn anomalous(&self) -> PyTimeSeries {
        PyTimeSeries { inner: self.inner.anomalous.clone() }
    }

    /// Ground-truth anomaly records as dicts.
    #[getter]
    fn records(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &self.inner.records)
    }

    fn records_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.records).map_err(json_err)
    }
}

/// Simulates a series. `config` is a JSON object with the simulator
/// settings; `seed` and `noise_sigma` override it.
#[pyfunction]
#[pyo3(signature = (config = None, seed = None, noise_sigma = None))]
fn simulate(config: Option<&str>, seed: Option<u64>, noise_sigma: Option<f64>) -> PyResult<PySimulation> {
    let mut cfg: SimConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = noise_sigma {
        cfg.noise_sigma = s;
    }
    Ok(PySimulation { inner: simulator::simulate(&cfg).map_err(err)? })
}

#[pyfunction]
fn estimate_noise_level(series: &PyTimeSeries) -> PyResult<f64> {
    preprocess::estimate_noise_level(&series.inner).map_err(err)
}

/// Fills missing points (`None` or NaN) from the same weekly phase.
/// Returns `(series, report)`; `series` is `None` when rejected.
#[pyfunction]
#[pyo3(signature = (values, ts = 5, stat = "mean"))]
fn clean_gaps(py: Python<'_>, values: Vec<Option<f64>>, ts: u32, stat: &str) -> PyResult<(Option<PyTimeSeries>, Py<PyAny>)> {
    let stat = match stat {
        "mean" => FillStat::Mean,
        "median" => FillStat::Median,
        other => return Err(PyValueError::new_err(format!("unknown statistic `{other}`"))),
    };
    let mask = GapMask(values.iter().map(|v| !v.is_some_and(f64::is_finite)).collect());
    let filled: Vec<f64> = values.iter().map(|v| v.filter(|x| x.is_finite()).unwrap_or(0.0)).collect();
    let x = kpi_anomaly::TimeSeries::from_values(filled, ts).map_err(err)?;
    Ok(match preprocess::clean_gaps(&x, &mask, stat).map_err(err)? {
        GapOutcome::Cleaned { series, report } => {
            let mut r = serde_json::to_value(&report).map_err(json_err)?;
            r["status"] = "cleaned".into();
            (Some(PyTimeSeries { inner: series }), to_py(py, &r)?)
        }
        GapOutcome::Rejected { missing_fraction } => (
            None,
            to_py(py, &serde_json::json!({ "status": "rejected", "missing_fraction": missing_fraction }))?,
        ),
    })
}

/// Runs the expanding-fold detection pipeline. Returns a dict with
/// `windows`, `folds` and, when `records_json` is given, `score`.
#[pyfunction]
#[pyo3(signature = (series, records_json = None, m = 24, folds = 10, sigma = None, series_id = "series"))]
fn detect(
    py: Python<'_>,
    series: &PyTimeSeries,
    records_json: Option<&str>,
    m: usize,
    folds: usize,
    sigma: Option<f64>,
    series_id: &str,
) -> PyResult<Py<PyAny>> {
    let records: Option<Vec<AnomalyRecord>> =
        records_json.map(serde_json::from_str).transpose().map_err(json_err)?;
    let cfg = DetectConfig { m, folds, ..DetectConfig::default() };
    let out = detector::detect_pipeline(&series.inner, SeasonalForecaster::new, &cfg, records.as_deref(), series_id, sigma)
        .map_err(err)?;
    let v = serde_json::json!({ "windows": out.windows, "folds": out.folds, "score": out.score });
    to_py(py, &v)
}

type RawWindow = (usize, i64, Vec<f64>, bool);

/// Cuts one window `values[i - m, i + m)` per run of flagged points.
/// Returns `(anchor, start, values, padded)` tuples.
#[pyfunction]
fn make_windows(values: Vec<f64>, states: Vec<bool>, m: usize) -> PyResult<Vec<RawWindow>> {
    Ok(detector::make_windows(&values, &states, m)
        .map_err(err)?
        .into_iter()
        .map(|w| (w.anchor, w.start, w.values, w.padded))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (a, b, window_frac = 1.0))]
fn dtw(a: Vec<f64>, b: Vec<f64>, window_frac: f64) -> PyResult<f64> {
    classifiers::dtw(&a, &b, window_frac).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, window_frac = 1.0))]
fn ddtw(a: Vec<f64>, b: Vec<f64>, window_frac: f64) -> PyResult<f64> {
    classifiers::ddtw(&a, &b, window_frac).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, g = classifiers::distance::WDTW_G))]
fn wdtw(a: Vec<f64>, b: Vec<f64>, g: f64) -> PyResult<f64> {
    classifiers::wdtw(&a, &b, g).map_err(err)
}

/// kNN or STSF classifier over fixed-length windows.
///
/// `config` is a JSON object such as `{"model": "knn", "k": 3}` or
/// `{"model": "stsf", "n_estimators": 50}`.
#[pyclass(name = "Classifier", module = "kpi_anomaly_py")]
pub struct PyClassifier {
    config: ClassifierConfig,
    model: Option<Model>,
}

#[pymethods]
impl PyClassifier {
    #[new]
    #[pyo3(signature = (config = r#"{"model": "stsf"}"#))]
    fn new(config: &str) -> PyResult<Self> {
        Ok(Self { config: serde_json::from_str(config).map_err(json_err)?, model: None })
    }

    fn fit(&mut self, windows: Vec<Vec<f64>>, labels: Vec<String>) -> PyResult<()> {
        let labels = labels.iter().map(|s| s.parse::<Label>()).collect::<kpi_anomaly::Result<Vec<_>>>().map_err(err)?;
        let set = LabeledWindowSet::new(windows, labels).map_err(err)?;
        self.model = Some(self.config.fit(&set).map_err(err)?);
        Ok(())
    }

    /// Predicted label of each window.
    fn predict(&self, windows: Vec<Vec<f64>>) -> PyResult<Vec<String>> {
        let model = self.model.as_ref().ok_or_else(|| err(kpi_anomaly::Error::NotFitted))?;
        windows.iter().map(|w| Ok(model.predict(w).map_err(err)?.label.to_string())).collect()
    }

    /// Per-class scores of one window, as `{label: score}`.
    fn scores(&self, window: Vec<f64>) -> PyResult<Vec<(String, f64)>> {
        let model = self.model.as_ref().ok_or_else(|| err(kpi_anomaly::Error::NotFitted))?;
        Ok(model.predict(&window).map_err(err)?.scores.into_iter().map(|(l, s)| (l.to_string(), s)).collect())
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.model.as_ref().map(|m| m.classes().iter().map(|l| l.to_string()).collect()).unwrap_or_default()
    }
}

/// Runs a SIM-SIM experiment from a JSON config and returns the report.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let cfg: ExperimentConfig = serde_json::from_str(config).map_err(json_err)?;
    if cfg.mode != ExperimentMode::SimSim {
        return Err(PyValueError::new_err("only sim_sim experiments run from Python; use the CLI for sim_real"));
    }
    let report = py.detach(|| run_sim_sim(&cfg)).map_err(err)?;
    serialize(py, &report)
}

/// Label vocabulary.
#[pyfunction]
fn labels() -> Vec<&'static str> {
    Label::ALL.iter().map(|l| l.as_str()).collect()
}

#[pymodule]
fn kpi_anomaly_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyClassifier>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_noise_level, m)?)?;
    m.add_function(wrap_pyfunction!(clean_gaps, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(make_windows, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(ddtw, m)?)?;
    m.add_function(wrap_pyfunction!(wdtw, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
