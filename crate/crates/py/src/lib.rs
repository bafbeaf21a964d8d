//! Python bindings: `import lgs`.
//!
//! Matrices, codecs and trained models are opaque handles; rows cross the
//! boundary as dicts and reports as JSON text.

use std::path::PathBuf;

use lgs_core::codec::{fit_codec, Codec};
use lgs_core::covariates::CovariateSet;
use lgs_core::evaluate::{build_report, AgeGroup};
use lgs_core::ingest::{self, EventRecord, IngestOptions};
use lgs_core::simulate::{self, PopulationConfig};
use lgs_core::temporalize::{self, FeatureRow, SleepVector};
use lgs_core::wgan::{self, WganError};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn wgan_err(e: WganError) -> PyErr {
    match e {
        WganError::NonFiniteGradient { .. } => PyArithmeticError::new_err(e.to_string()),
        WganError::Io(_) => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn parse_groups(groups: &[String]) -> PyResult<Vec<AgeGroup>> {
    groups.iter().map(|g| g.parse().map_err(value_err)).collect()
}

fn row_dict<'py>(py: Python<'py>, row: &FeatureRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let bins: Vec<u32> = row.sleep.bins().iter().map(|&b| u32::from(b)).collect();
    d.set_item("sleep", bins)?;
    d.set_item("age", row.covariates.age)?;
    d.set_item("sex", row.covariates.sex.to_string())?;
    d.set_item("day_of_week", row.covariates.day_of_week.to_string())?;
    d.set_item("month", row.covariates.month.to_string())?;
    Ok(d)
}

fn row_from_dict(d: &Bound<'_, PyDict>) -> PyResult<FeatureRow> {
    let get = |k: &str| {
        d.get_item(k)?
            .ok_or_else(|| PyValueError::new_err(format!("row is missing `{k}`")))
    };
    let bins: Vec<u8> = get("sleep")?.extract()?;
    let bins: [u8; 30] = bins
        .try_into()
        .map_err(|v: Vec<u8>| PyValueError::new_err(format!("sleep needs 30 values, got {}", v.len())))?;
    let sleep = SleepVector::new(bins).ok_or_else(|| PyValueError::new_err("sleep values must lie in [0, 60]"))?;
    let token = |k: &str| -> PyResult<String> { get(k)?.extract() };
    Ok(FeatureRow {
        sleep,
        covariates: CovariateSet {
            age: get("age")?.extract()?,
            sex: token("sex")?.parse().map_err(value_err)?,
            day_of_week: token("day_of_week")?.parse().map_err(value_err)?,
            month: token("month")?.parse().map_err(value_err)?,
        },
    })
}

/// The 34-column cross-sectional matrix.
#[pyclass(name = "FeatureMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFeatureMatrix {
    inner: temporalize::FeatureMatrix,
}

#[pymethods]
impl PyFeatureMatrix {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        temporalize::FeatureMatrix::from_csv(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn column_names() -> Vec<String> {
        temporalize::column_names()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn row<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyDict>> {
        let row = self
            .inner
            .rows
            .get(index)
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(index))?;
        row_dict(py, row)
    }

    /// Total sleep minutes per row.
    fn totals(&self) -> Vec<u32> {
        self.inner.rows.iter().map(temporalize::total_sleep_minutes).collect()
    }

    fn __repr__(&self) -> String {
        format!("FeatureMatrix(rows={})", self.inner.len())
    }
}

/// Reversible mapping between matrix rows and the 52-wide GAN space.
#[pyclass(name = "Codec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCodec {
    inner: Codec,
}

#[pymethods]
impl PyCodec {
    #[staticmethod]
    fn for_schema() -> Self {
        Self {
            inner: Codec::for_schema(),
        }
    }

    #[staticmethod]
    fn fit(matrix: &PyFeatureMatrix) -> PyResult<Self> {
        fit_codec(&matrix.inner).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Codec::from_json(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn encoded_width(&self) -> usize {
        self.inner.encoded_width()
    }

    fn encode(&self, row: &Bound<'_, PyDict>) -> PyResult<Vec<f64>> {
        self.inner.encode(&row_from_dict(row)?).map_err(value_err)
    }

    fn decode<'py>(&self, py: Python<'py>, vector: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let row = self.inner.decode(&vector).map_err(value_err)?;
        row_dict(py, &row)
    }
}

/// WGAN hyperparameters; keyword arguments override the defaults.
#[pyclass(name = "GanConfig", from_py_object)]
#[derive(Clone)]
struct PyGanConfig {
    inner: wgan::GanConfig,
}

#[pymethods]
impl PyGanConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut doc = serde_json::to_value(wgan::GanConfig::default()).map_err(value_err)?;
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let value = if let Ok(list) = v.extract::<Vec<usize>>() {
                    serde_json::json!(list)
                } else if let Ok(int) = v.extract::<u64>() {
                    serde_json::json!(int)
                } else {
                    serde_json::json!(v.extract::<f64>()?)
                };
                doc[key.as_str()] = value;
            }
        }
        let inner: wgan::GanConfig = serde_json::from_value(doc).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: wgan::GanConfig = serde_json::from_str(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

/// A trained (or freshly initialized) generator/critic pair with its codec.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    checkpoint: wgan::ModelCheckpoint,
    codec: Codec,
}

#[pymethods]
impl PyModel {
    /// Load a checkpoint; the codec defaults to `<path>.codec.json`.
    #[staticmethod]
    #[pyo3(signature = (path, codec_path=None))]
    fn load(path: PathBuf, codec_path: Option<PathBuf>) -> PyResult<Self> {
        let checkpoint = wgan::load_checkpoint(&path).map_err(wgan_err)?;
        let codec_path = codec_path.unwrap_or_else(|| {
            let mut p = path.into_os_string();
            p.push(".codec.json");
            PathBuf::from(p)
        });
        let text = std::fs::read_to_string(&codec_path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let codec = Codec::from_json(&text).map_err(value_err)?;
        Ok(Self { checkpoint, codec })
    }

    /// Save the checkpoint and, next to it, the codec JSON.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        wgan::save_checkpoint(&self.checkpoint, &path).map_err(wgan_err)?;
        let mut codec_path = path.into_os_string();
        codec_path.push(".codec.json");
        std::fs::write(PathBuf::from(codec_path), self.codec.to_json()).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn iteration(&self) -> u64 {
        self.checkpoint.iteration
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, pyo3::types::PyBytes> {
        pyo3::types::PyBytes::new(py, &self.checkpoint.to_bytes())
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<PyFeatureMatrix> {
        let inner = py
            .detach(|| wgan::sample(&self.checkpoint, &self.codec, n, seed))
            .map_err(wgan_err)?;
        Ok(PyFeatureMatrix { inner })
    }
}

/// Simulated population as event CSV text. Defaults to the built-in
/// population; `config_json` replaces it.
#[pyfunction]
#[pyo3(signature = (n_persons=None, seed=None, config_json=None))]
fn simulate_events(n_persons: Option<usize>, seed: Option<u64>, config_json: Option<&str>) -> PyResult<String> {
    let mut cfg = match config_json {
        Some(text) => PopulationConfig::from_json(text).map_err(value_err)?,
        None => simulate::default_population(),
    };
    if let Some(n) = n_persons {
        cfg.n_persons = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let persons = simulate::simulate_population(&cfg).map_err(value_err)?;
    Ok(ingest::write_events_csv(&persons))
}

#[pyfunction]
fn default_population_json() -> String {
    simulate::default_population().to_json()
}

type ParsedPerson<'py> = (String, Bound<'py, PyDict>, Vec<(u32, u32)>);

/// Parsed persons as `(person_id, covariates dict, [(start, duration), ...])`.
#[pyfunction]
#[pyo3(signature = (text, sleep_activity="sleep"))]
fn parse_events<'py>(
    py: Python<'py>,
    text: &str,
    sleep_activity: &str,
) -> PyResult<Vec<ParsedPerson<'py>>> {
    let opts = IngestOptions {
        sleep_activity: sleep_activity.to_string(),
    };
    let parsed = ingest::parse_events(text, &opts).map_err(value_err)?;
    parsed
        .persons
        .into_iter()
        .map(|p| {
            let c = PyDict::new(py);
            c.set_item("age", p.covariates.age)?;
            c.set_item("sex", p.covariates.sex.to_string())?;
            c.set_item("day_of_week", p.covariates.day_of_week.to_string())?;
            c.set_item("month", p.covariates.month.to_string())?;
            let events = p.events.iter().map(|e| (e.start_min, e.duration_min)).collect();
            Ok((p.person_id, c, events))
        })
        .collect()
}

/// Minutes asleep in each of the 30 hourly bins for `(start, duration)`
/// episodes.
#[pyfunction]
fn bin_sleep_minutes(events: Vec<(u32, u32)>) -> PyResult<Vec<u32>> {
    let records: Vec<EventRecord> = events
        .into_iter()
        .map(|(start_min, duration_min)| EventRecord {
            person_id: String::new(),
            activity: ingest::DEFAULT_SLEEP_ACTIVITY.to_string(),
            start_min,
            duration_min,
        })
        .collect();
    if let Some(bad) = records.iter().find(|e| !e.is_valid()) {
        return Err(PyValueError::new_err(format!(
            "invalid episode start {} duration {}",
            bad.start_min, bad.duration_min
        )));
    }
    Ok(temporalize::bin_sleep_minutes(&records)
        .bins()
        .iter()
        .map(|&b| u32::from(b))
        .collect())
}

/// Event CSV text to feature matrix.
#[pyfunction]
#[pyo3(signature = (text, sleep_activity="sleep"))]
fn temporalize_events(text: &str, sleep_activity: &str) -> PyResult<PyFeatureMatrix> {
    let opts = IngestOptions {
        sleep_activity: sleep_activity.to_string(),
    };
    let parsed = ingest::parse_events(text, &opts).map_err(value_err)?;
    let inner = temporalize::build_feature_matrix(&parsed.persons).map_err(value_err)?;
    Ok(PyFeatureMatrix { inner })
}

#[pyfunction]
fn awake_fraction_at(text: &str, t_min: u32) -> PyResult<f64> {
    let parsed = ingest::parse_events(text, &IngestOptions::default()).map_err(value_err)?;
    ingest::awake_fraction_at(&parsed.persons, t_min).map_err(value_err)
}

/// Fit a codec on `matrix` and train for `config.iterations`. Returns the
/// model and the per-iteration Wasserstein estimates.
#[pyfunction]
#[pyo3(signature = (matrix, config=None))]
fn train(py: Python<'_>, matrix: &PyFeatureMatrix, config: Option<PyGanConfig>) -> PyResult<(PyModel, Vec<f64>)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let codec = fit_codec(&matrix.inner).map_err(value_err)?;
    let data = wgan::encode_training_matrix(&codec, &matrix.inner).map_err(wgan_err)?;
    let hash = codec.hash();
    let outcome = py.detach(|| wgan::train(&data, &cfg, &hash)).map_err(wgan_err)?;
    let losses = outcome.loss_log.iter().map(|e| e.wasserstein_estimate).collect();
    Ok((
        PyModel {
            checkpoint: outcome.checkpoint,
            codec,
        },
        losses,
    ))
}

/// Evaluation report as JSON text; writes the report and figure CSVs
/// when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (real, synth, groups=vec!["15-24".to_string()], out_dir=None))]
fn evaluate(
    real: &PyFeatureMatrix,
    synth: &PyFeatureMatrix,
    groups: Vec<String>,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let groups = parse_groups(&groups)?;
    let report = build_report(&real.inner, &synth.inner, &groups).map_err(value_err)?;
    if let Some(dir) = out_dir {
        report
            .write_to_dir(dir)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
    }
    Ok(report.to_json())
}

#[pymodule]
fn lgs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFeatureMatrix>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PyGanConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate_events, m)?)?;
    m.add_function(wrap_pyfunction!(default_population_json, m)?)?;
    m.add_function(wrap_pyfunction!(parse_events, m)?)?;
    m.add_function(wrap_pyfunction!(bin_sleep_minutes, m)?)?;
    m.add_function(wrap_pyfunction!(temporalize_events, m)?)?;
    m.add_function(wrap_pyfunction!(awake_fraction_at, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("WINDOW_MINUTES", lgs_core::WINDOW_MINUTES)?;
    Ok(())
}
