//! Python bindings. Reports cross the boundary as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dsfm::attribution::{attribute_dataset, AttributionMatrix};
use dsfm::config::ConfigBundle;
use dsfm::data::{load_csv, save_csv, FeatureSchema, MultiDomainDataset};
use dsfm::memory::{count_flops, Kernel, MemoryModel};
use dsfm::nn::BaseDnn;
use dsfm::sensitivity::{rank_features, DiscreteMeasure, Selection, SensitivityReport};
use dsfm::train::{evaluate, memory_config, split_data, synthetic_for_seed, train_base, train_memory, Flags};
use dsfm::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingArtifact { .. } => PyIOError::new_err(e.to_string()),
        Error::Training { .. } | Error::Stage { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Every stage's settings; defaults match the CLI.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ConfigBundle,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml_text = None))]
    fn new(toml_text: Option<&str>) -> PyResult<Self> {
        let inner = match toml_text {
            Some(t) => ConfigBundle::from_toml_str(t).map_err(py_err)?,
            None => {
                let mut c = ConfigBundle::default();
                c.resolve();
                c
            }
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ConfigBundle::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }
}

#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: MultiDomainDataset,
}

#[pymethods]
impl PyDataset {
    /// Synthetic planted-feature data for `config`, drawn with `seed`.
    #[staticmethod]
    #[pyo3(signature = (config, seed = None))]
    fn synthetic(config: &PyConfig, seed: Option<u64>) -> PyResult<Self> {
        let inner = synthetic_for_seed(&config.inner, seed.unwrap_or(config.inner.seed)).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, schema_path: PathBuf) -> PyResult<Self> {
        let schema = FeatureSchema::load(&schema_path).map_err(py_err)?;
        Ok(PyDataset {
            inner: load_csv(&path, &schema).map_err(py_err)?,
        })
    }

    fn save_csv(&self, path: PathBuf, schema_path: PathBuf) -> PyResult<()> {
        save_csv(&self.inner, &path).map_err(py_err)?;
        self.inner.schema.save(&schema_path).map_err(py_err)
    }

    /// `(train, valid, test)` using the config's fractions and `seed`.
    fn split(&self, config: &PyConfig, seed: u64) -> PyResult<(Self, Self, Self)> {
        let (a, b, c) = split_data(&config.inner, &self.inner, seed).map_err(py_err)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }, PyDataset { inner: c }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_domains(&self) -> usize {
        self.inner.num_domains()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema.features.iter().map(|f| f.name.clone()).collect()
    }

    fn domain_counts(&self) -> Vec<usize> {
        self.inner.domain_counts()
    }

    fn labels(&self) -> Vec<u8> {
        self.inner.labels()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

#[pyclass(name = "BaseModel", from_py_object)]
#[derive(Clone)]
struct PyBaseModel {
    inner: BaseDnn,
}

#[pymethods]
impl PyBaseModel {
    /// Trains the shared DNN with early stopping on `valid`.
    #[staticmethod]
    #[pyo3(signature = (config, train, valid, seed = None))]
    fn train(py: Python<'_>, config: &PyConfig, train: &PyDataset, valid: &PyDataset, seed: Option<u64>) -> PyResult<Self> {
        let seed = seed.unwrap_or(config.inner.seed);
        let (model, _) = py
            .detach(|| train_base(&config.inner, &train.inner, &valid.inner, seed))
            .map_err(py_err)?;
        Ok(PyBaseModel { inner: model })
    }

    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyAny>> {
        let report = evaluate(&self.inner, &data.inner).map_err(py_err)?;
        to_py(py, &report)
    }

    /// Integrated-gradients scores, one row per sample.
    #[pyo3(signature = (data, steps = None))]
    fn attribute(&self, py: Python<'_>, data: &PyDataset, steps: Option<usize>) -> PyResult<PyAttribution> {
        let mut cfg = dsfm::attribution::IgConfig::default();
        if let Some(s) = steps {
            cfg.steps = s;
        }
        let inner = py.detach(|| attribute_dataset(&self.inner, &data.inner, &cfg)).map_err(py_err)?;
        Ok(PyAttribution { inner })
    }
}

#[pyclass(name = "Attribution", from_py_object)]
#[derive(Clone)]
struct PyAttribution {
    inner: AttributionMatrix,
}

#[pymethods]
impl PyAttribution {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.num_samples, self.inner.num_features)
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.num_samples {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyAttribution {
            inner: AttributionMatrix::load(&path).map_err(py_err)?,
        })
    }
}

#[pyclass(name = "SensitivityReport", from_py_object)]
#[derive(Clone)]
struct PyReport {
    inner: SensitivityReport,
}

#[pymethods]
impl PyReport {
    fn selected(&self) -> Vec<String> {
        self.inner.selected()
    }

    fn last_k(&self) -> Vec<String> {
        self.inner.select(Selection::LastK)
    }

    fn table(&self) -> String {
        self.inner.render_table()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

/// Ranks features of `data` by domain sensitivity.
#[pyfunction]
fn rank(config: &PyConfig, data: &PyDataset, attribution: &PyAttribution) -> PyResult<PyReport> {
    let inner = rank_features(&data.inner, &attribution.inner, &config.inner.rank).map_err(py_err)?;
    Ok(PyReport { inner })
}

#[pyclass(name = "MemoryModel", from_py_object)]
#[derive(Clone)]
struct PyMemoryModel {
    inner: MemoryModel,
}

#[pymethods]
impl PyMemoryModel {
    #[staticmethod]
    #[pyo3(signature = (config, train, valid, sensitive, seed = None, emb_attn = true, hidden_attn = true, aux_logit = true))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        config: &PyConfig,
        train: &PyDataset,
        valid: &PyDataset,
        sensitive: Vec<String>,
        seed: Option<u64>,
        emb_attn: bool,
        hidden_attn: bool,
        aux_logit: bool,
    ) -> PyResult<Self> {
        let seed = seed.unwrap_or(config.inner.seed);
        let flags = Flags {
            emb_attn,
            hidden_attn,
            aux_logit,
        };
        let cfg = memory_config(&config.inner, sensitive, flags);
        let (model, _) = py
            .detach(|| train_memory(&config.inner, &train.inner, &valid.inner, cfg, seed))
            .map_err(py_err)?;
        Ok(PyMemoryModel { inner: model })
    }

    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyAny>> {
        let report = evaluate(&self.inner, &data.inner).map_err(py_err)?;
        to_py(py, &report)
    }
}

#[pyfunction]
fn wasserstein(locations_p: Vec<f64>, p: Vec<f64>, locations_q: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let a = DiscreteMeasure::new(locations_p, p).map_err(py_err)?;
    let b = DiscreteMeasure::new(locations_q, q).map_err(py_err)?;
    dsfm::sensitivity::wasserstein_1d(&a, &b).map_err(py_err)
}

#[pyfunction]
fn js_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    dsfm::sensitivity::js_divergence(&p, &q).map_err(py_err)
}

#[pyfunction]
fn auc(labels: Vec<u8>, scores: Vec<f64>) -> PyResult<f64> {
    dsfm::train::auc(&labels, &scores).map_err(py_err)
}

/// Forward FLOPs of the memory model for `num_features` inputs.
#[pyfunction]
#[pyo3(signature = (config, num_features, num_sensitive, kernel = "linear"))]
fn flops<'py>(
    py: Python<'py>,
    config: &PyConfig,
    num_features: usize,
    num_sensitive: usize,
    kernel: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kernel: Kernel = kernel.parse().map_err(py_err)?;
    let sensitive = (0..num_sensitive).map(|i| format!("f{i}")).collect();
    let mut cfg = memory_config(&config.inner, sensitive, Flags::of(&config.inner.memory));
    cfg.kernel = kernel;
    to_py(py, &count_flops(&cfg, num_features))
}

#[pymodule]
fn dsfm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyBaseModel>()?;
    m.add_class::<PyAttribution>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyMemoryModel>()?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(js_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(flops, m)?)?;
    Ok(())
}
