//! Python bindings: truth values, the pattern pool, metrics, string
//! similarity and the benchmark runner.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use icelink_core::baseline;
use icelink_core::bench;
use icelink_core::config::RunConfig;
use icelink_core::engine::snapshot::{read_snapshot, write_snapshot};
use icelink_core::engine::{Judgment, JudgmentSet, PatternPool};
use icelink_core::featurize::{normalize_record, pair_judgments as featurize_pair, AgeDisparityThreshold};
use icelink_core::metrics;
use icelink_core::synth::{generate, write_dataset, SynthConfig};
use icelink_core::{Error, NalConfig, Truth};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn nal(k: f64) -> PyResult<NalConfig> {
    NalConfig::new(k).map_err(py_err)
}

fn judgment_set(items: Vec<String>) -> PyResult<JudgmentSet> {
    items.iter().map(|s| s.parse::<Judgment>()).collect::<Result<JudgmentSet, _>>().map_err(py_err)
}

fn strings(set: &JudgmentSet) -> Vec<String> {
    set.iter().map(|j| j.to_string()).collect()
}

/// Evidence-count truth value `(w_plus, w_minus)`.
#[pyclass(name = "Truth", module = "icelink", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyTruth(Truth);

#[pymethods]
impl PyTruth {
    #[new]
    fn new(w_plus: f64, w_minus: f64) -> PyResult<Self> {
        Truth::new(w_plus, w_minus).map(PyTruth).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (f, c, k = 1.0))]
    fn from_fc(f: f64, c: f64, k: f64) -> PyResult<Self> {
        Truth::from_fc(f, c, &nal(k)?).map(PyTruth).map_err(py_err)
    }

    #[getter]
    fn w_plus(&self) -> f64 {
        self.0.w_plus
    }

    #[getter]
    fn w_minus(&self) -> f64 {
        self.0.w_minus
    }

    fn frequency(&self) -> PyResult<f64> {
        self.0.frequency().map_err(py_err)
    }

    #[pyo3(signature = (k = 1.0))]
    fn confidence(&self, k: f64) -> PyResult<f64> {
        Ok(self.0.confidence(&nal(k)?))
    }

    #[pyo3(signature = (k = 1.0))]
    fn expectation(&self, k: f64) -> PyResult<f64> {
        Ok(self.0.expectation(&nal(k)?))
    }

    fn revise(&self, other: &PyTruth) -> PyTruth {
        PyTruth(self.0.revise(&other.0))
    }

    fn __eq__(&self, other: &PyTruth) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Truth(w_plus={}, w_minus={})", self.0.w_plus, self.0.w_minus)
    }
}

/// Bounded pool of judgment patterns. Judgments are `kind:value` strings.
#[pyclass(name = "PatternPool", module = "icelink")]
struct PyPatternPool(PatternPool);

#[pymethods]
impl PyPatternPool {
    #[new]
    #[pyo3(signature = (capacity = 10_000, k = 1.0))]
    fn new(capacity: usize, k: f64) -> PyResult<Self> {
        PatternPool::new(capacity, nal(k)?).map(PyPatternPool).map_err(py_err)
    }

    /// Adds the pattern observed from one labeled pair and its inferences.
    #[pyo3(signature = (judgments, label, source, inference_budget = 3))]
    fn learn(&mut self, judgments: Vec<String>, label: bool, source: u64, inference_budget: usize) -> PyResult<()> {
        self.0.learn(judgment_set(judgments)?, label, source, inference_budget).map_err(py_err)
    }

    #[pyo3(signature = (judgments, n_reference = 10))]
    fn score(&self, judgments: Vec<String>, n_reference: usize) -> PyResult<f64> {
        self.0.score(&judgment_set(judgments)?, n_reference).map_err(py_err)
    }

    /// `(judgments, truth)` pairs in ascending order of expectation.
    fn patterns(&self) -> Vec<(Vec<String>, PyTruth)> {
        self.0.iter().map(|p| (strings(&p.judgments), PyTruth(p.truth))).collect()
    }

    #[pyo3(signature = (n_reference = 10))]
    fn references(&self, n_reference: usize) -> Vec<(Vec<String>, PyTruth)> {
        self.0.references(n_reference).into_iter().map(|p| (strings(&p.judgments), PyTruth(p.truth))).collect()
    }

    /// Snapshot text, one pattern per line.
    fn snapshot(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_snapshot(&self.0, &mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    #[pyo3(signature = (text, capacity = 10_000, k = 1.0))]
    fn from_snapshot(text: &str, capacity: usize, k: f64) -> PyResult<Self> {
        read_snapshot(text.as_bytes(), "snapshot", capacity, nal(k)?).map(PyPatternPool).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn jaro(s1: &str, s2: &str) -> f64 {
    baseline::jaro(s1, s2)
}

#[pyfunction]
#[pyo3(signature = (s1, s2, prefix_weight = 0.1))]
fn jaro_winkler(s1: &str, s2: &str, prefix_weight: f64) -> PyResult<f64> {
    baseline::jaro_winkler(s1, s2, prefix_weight).map_err(py_err)
}

/// Judgments comparing two raw census rows given as column -> value maps.
#[pyfunction]
fn pair_judgments(r1: HashMap<String, String>, r2: HashMap<String, String>, age_threshold: u32) -> PyResult<Vec<String>> {
    let a = normalize_record(r1).map_err(py_err)?;
    let b = normalize_record(r2).map_err(py_err)?;
    Ok(strings(&featurize_pair(&a, &b, AgeDisparityThreshold(age_threshold))))
}

#[pyfunction]
fn ari(pred: Vec<i64>, truth: Vec<i64>) -> PyResult<f64> {
    metrics::ari(&pred, &truth).map_err(py_err)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    metrics::auc(&scores, &labels).map_err(py_err)
}

/// `(threshold, f1)` maximizing F1 over the 101-point grid.
#[pyfunction]
fn best_threshold(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    metrics::best_threshold(&scores, &labels).map_err(py_err)
}

/// Precision, recall, F1 and accuracy at a threshold.
#[pyfunction]
fn pairwise_metrics(scores: Vec<f64>, labels: Vec<bool>, threshold: f64) -> PyResult<(f64, f64, f64, f64)> {
    let m = metrics::pairwise_metrics(&scores, &labels, threshold).map_err(py_err)?;
    Ok((m.precision, m.recall, m.f1, m.accuracy))
}

/// Writes a synthetic labeled census dataset and returns its manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, persons = 500, seed = 42, missing_rate = 0.3))]
fn synthesize(out_dir: PathBuf, persons: usize, seed: u64, missing_rate: f64) -> PyResult<PathBuf> {
    let records = generate(&SynthConfig { persons, seed, missing_rate, ..Default::default() }).map_err(py_err)?;
    write_dataset(&records, &out_dir).map_err(py_err)
}

/// Runs the benchmark from a JSON config file and returns the summary CSV.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir = None))]
fn run_benchmark(py: Python<'_>, config_path: PathBuf, out_dir: Option<PathBuf>) -> PyResult<String> {
    let mut cfg = RunConfig::load(&config_path).map_err(py_err)?;
    if let Some(out) = out_dir {
        cfg.out = out;
    }
    let out = py.detach(|| bench::run_benchmark(&cfg)).map_err(py_err)?.out;
    std::fs::read_to_string(out.join("summary.csv")).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Human-readable listing of a pool snapshot file.
#[pyfunction]
#[pyo3(signature = (path, k = 1.0))]
fn inspect_pool(path: PathBuf, k: f64) -> PyResult<String> {
    let file = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    bench::inspect_pool(std::io::BufReader::new(file), &path.display().to_string(), &nal(k)?).map_err(py_err)
}

#[pymodule]
fn icelink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTruth>()?;
    m.add_class::<PyPatternPool>()?;
    m.add_function(wrap_pyfunction!(jaro, m)?)?;
    m.add_function(wrap_pyfunction!(jaro_winkler, m)?)?;
    m.add_function(wrap_pyfunction!(pair_judgments, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(best_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_pool, m)?)?;
    Ok(())
}
