//! Python bindings for the competing-risks toolkit.
//!
//! ```python
//! import competing_risks as cr
//! data, truth = cr.simulate(n=2000, seed=1)
//! fg = cr.Model.fit("finegray", data, cause=1)
//! fg.predict_all(data, 1.0)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use competing_risks::config::StudyConfig;
use competing_risks::dataset::{event_time_quantile, EventCode, Subject, SurvivalDataset};
use competing_risks::discrepancy;
use competing_risks::error::Error;
use competing_risks::estimators::{self, CifModel, FittedModel, ModelKind};
use competing_risks::io;
use competing_risks::metrics;
use competing_risks::pipeline;
use competing_risks::sim::{self, GroundTruthRow, SimConfig};
use competing_risks::step::StepFunction;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn step_pair(step: &StepFunction) -> (Vec<f64>, Vec<f64>) {
    (step.jump_times().to_vec(), step.values().to_vec())
}

/// Survival dataset: observed times, event codes (0 = censored), binary
/// groups and covariate rows.
#[pyclass(name = "Dataset", module = "competing_risks", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: SurvivalDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (times, events, covariates=None, groups=None))]
    fn new(
        times: Vec<f64>,
        events: Vec<u8>,
        covariates: Option<Vec<Vec<f64>>>,
        groups: Option<Vec<u8>>,
    ) -> PyResult<Self> {
        let n = times.len();
        if events.len() != n {
            return Err(PyValueError::new_err("times and events differ in length"));
        }
        let covariates = covariates.unwrap_or_else(|| vec![Vec::new(); n]);
        let groups = groups.unwrap_or_else(|| vec![0; n]);
        if covariates.len() != n || groups.len() != n {
            return Err(PyValueError::new_err("covariates/groups do not match the number of subjects"));
        }
        let p = covariates.first().map_or(0, Vec::len);
        let n_risks = events.iter().copied().max().unwrap_or(0);
        let subjects = (0..n)
            .map(|i| Subject {
                id: i.to_string(),
                covariates: covariates[i].clone(),
                group: groups[i],
                time: times[i],
                event: EventCode(events[i]),
            })
            .collect();
        let inner = SurvivalDataset::new(subjects, n_risks, p).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        let inner = io::load_dataset(&path, None).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        io::save_dataset(&self.inner, None, &path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_risks(&self) -> u8 {
        self.inner.n_risks()
    }

    #[getter]
    fn n_covariates(&self) -> usize {
        self.inner.n_covariates()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn events(&self) -> Vec<u8> {
        self.inner.events()
    }

    #[getter]
    fn groups(&self) -> Vec<u8> {
        self.inner.groups()
    }

    #[getter]
    fn covariates(&self) -> Vec<Vec<f64>> {
        self.inner.subjects().iter().map(|s| s.covariates.clone()).collect()
    }

    /// Lower quantile of the uncensored event times.
    fn event_time_quantile(&self, q: f64) -> PyResult<f64> {
        event_time_quantile(&self.inner, q).map(|h| h.t).map_err(py_err)
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.subset(&indices).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, covariates={}, risks={})",
            self.inner.len(),
            self.inner.n_covariates(),
            self.inner.n_risks()
        )
    }
}

/// Per-subject parameters of the data-generating process.
#[pyclass(name = "Truth", module = "competing_risks", skip_from_py_object)]
#[derive(Clone)]
struct PyTruth {
    rows: Vec<GroundTruthRow>,
}

#[pymethods]
impl PyTruth {
    fn __len__(&self) -> usize {
        self.rows.len()
    }

    #[getter]
    fn w1(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.w1).collect()
    }

    #[getter]
    fn w2(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.w2).collect()
    }

    #[getter]
    fn ws(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ws).collect()
    }

    #[getter]
    fn wc(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.wc).collect()
    }

    /// True cumulative incidence of `cause` at `t` for every subject.
    fn cif(&self, cause: u8, t: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.cif(cause, t)).collect()
    }

    /// True marginal distribution of the latent `cause` time at `t`.
    fn marginal(&self, cause: u8, t: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.marginal(cause, t)).collect()
    }

    /// Discrepancy implied by the data-generating process, per subject.
    fn theoretical_discrepancy(&self, cause: u8, t: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| discrepancy::theoretical_discrepancy(r, cause, t))
            .collect()
    }
}

/// A fitted cumulative incidence model: `cox`, `finegray`, `km` or `aj`.
#[pyclass(name = "Model", module = "competing_risks", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: FittedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (kind, data, cause=1))]
    fn fit(kind: &str, data: &PyDataset, cause: u8) -> PyResult<Self> {
        let kind: ModelKind = kind.parse().map_err(py_err)?;
        let inner = FittedModel::fit(kind, &data.inner, cause).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn cause(&self) -> u8 {
        self.inner.cause()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta().to_vec()
    }

    #[getter]
    fn iterations(&self) -> Option<usize> {
        self.inner.diagnostics().map(|d| d.iterations)
    }

    fn predict(&self, x: Vec<f64>, t: f64) -> f64 {
        self.inner.predict_cif(&x, t)
    }

    fn predict_all(&self, data: &PyDataset, t: f64) -> Vec<f64> {
        estimators::predict_all(&self.inner, &data.inner, t)
    }

    fn to_json(&self) -> PyResult<String> {
        io::model_to_json(&self.inner, None).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let loaded = io::model_from_json(text).map_err(py_err)?;
        Ok(Self { inner: loaded.model })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_model(&self.inner, None, &path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let loaded = io::load_model(&path).map_err(py_err)?;
        Ok(Self { inner: loaded.model })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, cause={})", self.inner.kind(), self.inner.cause())
    }
}

/// Simulates one replication of the two-group, two-cause Gompertz design.
#[pyfunction]
#[pyo3(signature = (n=30000, seed=0, replication=0, p=10))]
fn simulate(n: usize, seed: u64, replication: u64, p: usize) -> PyResult<(PyDataset, PyTruth)> {
    let config = SimConfig {
        n,
        p,
        seed,
        ..SimConfig::default()
    };
    let (data, truth) = sim::generate_replication(&config, replication).map_err(py_err)?;
    Ok((PyDataset { inner: data }, PyTruth { rows: truth.rows }))
}

/// Kaplan-Meier survival for `cause`, treating other events as censoring.
#[pyfunction]
fn kaplan_meier(data: &PyDataset, cause: u8) -> (Vec<f64>, Vec<f64>) {
    step_pair(&estimators::kaplan_meier(&data.inner, cause))
}

#[pyfunction]
fn aalen_johansen(data: &PyDataset, cause: u8) -> (Vec<f64>, Vec<f64>) {
    step_pair(&estimators::aalen_johansen(&data.inner, cause))
}

/// Reverse Kaplan-Meier estimate of the censoring survival function.
#[pyfunction]
fn censoring_survival(data: &PyDataset) -> (Vec<f64>, Vec<f64>) {
    step_pair(&estimators::censoring_survival(&data.inner))
}

#[pyfunction]
fn relative_discrepancy(f_naive: f64, f_competing: f64) -> f64 {
    discrepancy::relative_discrepancy(f_naive, f_competing)
}

#[pyfunction]
fn td_brier(predictions: Vec<f64>, data: &PyDataset, t: f64, cause: u8) -> PyResult<f64> {
    metrics::td_brier(&predictions, &data.inner, t, cause).map_err(py_err)
}

#[pyfunction]
fn td_c_index(predictions: Vec<f64>, data: &PyDataset, t: f64, cause: u8) -> PyResult<f64> {
    metrics::td_c_index(&predictions, &data.inner, t, cause).map_err(py_err)
}

/// Runs the full study into `out_dir` and returns the report as JSON text.
/// `config` is the TOML text of a study configuration (defaults when omitted).
#[pyfunction]
#[pyo3(signature = (out_dir, config=None, jobs=None))]
fn run_study(py: Python<'_>, out_dir: PathBuf, config: Option<&str>, jobs: Option<usize>) -> PyResult<String> {
    let config = StudyConfig::from_toml(config.unwrap_or("")).map_err(py_err)?;
    let jobs = jobs.or(config.study.jobs).unwrap_or_else(pipeline::default_jobs);
    let outcome = py
        .detach(|| pipeline::run_study(&config, &out_dir, jobs))
        .map_err(py_err)?;
    serde_json::to_string(&outcome.report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "competing_risks")]
fn competing_risks_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTruth>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kaplan_meier, m)?)?;
    m.add_function(wrap_pyfunction!(aalen_johansen, m)?)?;
    m.add_function(wrap_pyfunction!(censoring_survival, m)?)?;
    m.add_function(wrap_pyfunction!(relative_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(td_brier, m)?)?;
    m.add_function(wrap_pyfunction!(td_c_index, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
