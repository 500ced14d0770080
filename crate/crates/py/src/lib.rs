//! Python bindings: copulas, datasets, the two-step fit, bootstrap, model
//! selection and the simulation designs.

use std::fs::File;

use cchr_core::data::{infer_schema, load_dataset, write_dataset, Dataset, Observation};
use cchr_core::fit::{bootstrap_from, select_model};
use cchr_core::sim::{generate_dataset, run_mc, Estimator, Group, SimDesign};
use cchr_core::{
    CensoringFamily, Copula, CopulaFamily, FitOptions, FitResult, KernelConfig, OptimizerConfig, WeightScheme,
    WeightVector,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<CopulaFamily> {
    name.parse().map_err(value_err)
}

fn censoring(name: &str) -> PyResult<CensoringFamily> {
    name.parse().map_err(value_err)
}

#[pyclass(name = "Copula", module = "cchr", frozen)]
struct PyCopula {
    inner: Copula,
}

#[pymethods]
impl PyCopula {
    /// A copula of `family` with Kendall's tau `tau`.
    #[new]
    fn new(family_name: &str, tau: f64) -> PyResult<Self> {
        let inner = Copula::from_tau(family(family_name)?, tau).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_xi(family_name: &str, xi: f64) -> PyResult<Self> {
        let inner = Copula::new(family(family_name)?, xi).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.name()
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        self.inner.cdf(u, v)
    }

    fn partial_u(&self, u: f64, v: f64) -> f64 {
        self.inner.partial_u(u, v)
    }

    fn partial_v(&self, u: f64, v: f64) -> f64 {
        self.inner.partial_v(u, v)
    }

    fn density(&self, u: f64, v: f64) -> f64 {
        self.inner.density(u, v)
    }

    /// `n` pairs drawn with a seeded generator.
    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| self.inner.sample_pair(&mut rng).map_err(value_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Copula({}, xi={}, tau={})", self.inner.family, self.inner.xi, self.inner.tau())
    }
}

#[pyclass(name = "Dataset", module = "cchr", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Reads a CSV with columns y, delta1, delta2, z, w and covariates.
    /// `schema` is `name:kind,...`; inferred when omitted.
    #[staticmethod]
    #[pyo3(signature = (path, schema=None))]
    fn from_csv(path: &str, schema: Option<&str>) -> PyResult<Self> {
        let open = || File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")));
        let schema = match schema {
            Some(s) => s.parse().map_err(value_err)?,
            None => infer_schema(open()?, 10).map_err(value_err)?,
        };
        let inner = load_dataset(open()?, &schema).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Builds a dataset from columns; `x` holds one list per row.
    #[staticmethod]
    fn from_columns(
        y: Vec<f64>,
        delta1: Vec<bool>,
        delta2: Vec<bool>,
        z: Vec<bool>,
        w: Vec<bool>,
        x: Vec<Vec<f64>>,
        schema: &str,
    ) -> PyResult<Self> {
        let n = y.len();
        if [delta1.len(), delta2.len(), z.len(), w.len(), x.len()].iter().any(|&l| l != n) {
            return Err(PyValueError::new_err("all columns must have the same length"));
        }
        let obs = (0..n)
            .map(|i| Observation {
                y: y[i],
                delta1: delta1[i],
                delta2: delta2[i],
                z: z[i],
                w: w[i],
                x: x[i].clone(),
            })
            .collect();
        let inner = Dataset::new(obs, schema.parse().map_err(value_err)?).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        write_dataset(&self.inner, f).map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn covariates(&self) -> Vec<String> {
        self.inner.schema().names.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }
}

#[pyclass(name = "FitResult", module = "cchr", frozen)]
struct PyFitResult {
    inner: FitResult,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.theta.names()
    }

    #[getter]
    fn estimates(&self) -> Vec<f64> {
        self.inner.theta.to_vec()
    }

    /// `{name: estimate}`.
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.names().into_iter().zip(self.estimates()) {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// `exp(alpha)`.
    #[getter]
    fn cchr(&self) -> f64 {
        self.inner.theta.ph.cchr()
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn n_outer(&self) -> usize {
        self.inner.n_outer
    }

    #[getter]
    fn hazard_times(&self) -> Vec<f64> {
        self.inner.hazard.times().to_vec()
    }

    #[getter]
    fn hazard_increments(&self) -> Vec<f64> {
        self.inner.hazard.increments().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights_used.kappa.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(alpha={:.4}, loglik={:.4}, converged={})",
            self.inner.theta.ph.alpha, self.inner.loglik, self.inner.converged
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn options(
    copula: &str,
    cens: &str,
    weights: &str,
    starts: usize,
    seed: u64,
    h1: Option<f64>,
    h2: Option<f64>,
    oracle: Option<Vec<f64>>,
) -> PyResult<FitOptions> {
    let scheme = match weights {
        "proposed" => WeightScheme::Proposed(KernelConfig {
            fixed_h1: h1,
            fixed_h2: h2,
            cv_seed: seed,
            ..KernelConfig::default()
        }),
        "naive" => WeightScheme::Naive,
        "oracle" => {
            let k = oracle.ok_or_else(|| PyValueError::new_err("weights='oracle' needs the oracle argument"))?;
            WeightScheme::Given(WeightVector::new(k).map_err(value_err)?)
        }
        other => return Err(PyValueError::new_err(format!("unknown weights '{other}'"))),
    };
    let mut o = FitOptions::new(family(copula)?, censoring(cens)?, scheme);
    o.optimizer = OptimizerConfig {
        n_starts: starts,
        seed,
        ..OptimizerConfig::default()
    };
    Ok(o)
}

/// Two-step fit. `weights` is proposed, naive or oracle; oracle takes the
/// per-row complier indicator in `oracle`.
#[pyfunction]
#[pyo3(signature = (data, copula="frank", censoring="weibull", weights="proposed", starts=100, seed=0, h1=None, h2=None, oracle=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &PyDataset,
    copula: &str,
    censoring: &str,
    weights: &str,
    starts: usize,
    seed: u64,
    h1: Option<f64>,
    h2: Option<f64>,
    oracle: Option<Vec<f64>>,
) -> PyResult<PyFitResult> {
    let opts = options(copula, censoring, weights, starts, seed, h1, h2, oracle)?;
    let inner = py.detach(|| cchr_core::fit::fit(&data.inner, &opts)).map_err(value_err)?;
    Ok(PyFitResult { inner })
}

/// Fit plus `b` bootstrap resamples; returns a dict with names, estimate,
/// se, p_values, failures and degenerate.
#[pyfunction]
#[pyo3(signature = (data, b=200, copula="frank", censoring="weibull", weights="proposed", starts=100, seed=0, h1=None, h2=None, oracle=None))]
#[allow(clippy::too_many_arguments)]
fn bootstrap<'py>(
    py: Python<'py>,
    data: &PyDataset,
    b: usize,
    copula: &str,
    censoring: &str,
    weights: &str,
    starts: usize,
    seed: u64,
    h1: Option<f64>,
    h2: Option<f64>,
    oracle: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = options(copula, censoring, weights, starts, seed, h1, h2, oracle)?;
    let r = py
        .detach(|| {
            let f = cchr_core::fit::fit(&data.inner, &opts)?;
            bootstrap_from(&data.inner, &opts, &f, b, seed, None)
        })
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("names", r.names)?;
    d.set_item("estimate", r.estimate)?;
    d.set_item("se", r.se)?;
    d.set_item("p_values", r.p_values)?;
    d.set_item("failures", r.failures)?;
    d.set_item("degenerate", r.degenerate)?;
    Ok(d)
}

/// All 21 copula / censoring combinations, best first, as
/// `(copula, censoring, loglik or None)`.
#[pyfunction]
#[pyo3(signature = (data, weights="proposed", starts=100, seed=0, h1=None, h2=None, oracle=None))]
#[allow(clippy::too_many_arguments)]
fn select(
    py: Python<'_>,
    data: &PyDataset,
    weights: &str,
    starts: usize,
    seed: u64,
    h1: Option<f64>,
    h2: Option<f64>,
    oracle: Option<Vec<f64>>,
) -> PyResult<Vec<(String, String, Option<f64>)>> {
    let opts = options("frank", "weibull", weights, starts, seed, h1, h2, oracle)?;
    let sel = py.detach(|| select_model(&data.inner, &opts, None)).map_err(value_err)?;
    Ok(sel
        .candidates
        .into_iter()
        .map(|c| (c.copula.name().to_string(), c.censoring.name().to_string(), c.loglik))
        .collect())
}

#[pyclass(name = "SimDesign", module = "cchr")]
struct PyDesign {
    inner: SimDesign,
}

#[pymethods]
impl PyDesign {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SimDesign::preset(name).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[getter]
    fn get_n(&self) -> usize {
        self.inner.n
    }

    #[setter]
    fn set_n(&mut self, n: usize) {
        self.inner.n = n;
    }

    #[getter]
    fn get_replications(&self) -> usize {
        self.inner.replications
    }

    #[setter]
    fn set_replications(&mut self, r: usize) {
        self.inner.replications = r;
    }

    #[getter]
    fn get_complier_prob(&self) -> f64 {
        self.inner.complier_prob
    }

    #[setter]
    fn set_complier_prob(&mut self, p: f64) {
        self.inner.complier_prob = p;
    }

    #[getter]
    fn get_estimator(&self) -> &'static str {
        self.inner.estimator.name()
    }

    #[setter]
    fn set_estimator(&mut self, e: &str) -> PyResult<()> {
        self.inner.estimator = e.parse::<Estimator>().map_err(value_err)?;
        Ok(())
    }

    #[getter]
    fn get_starts(&self) -> usize {
        self.inner.optimizer.n_starts
    }

    #[setter]
    fn set_starts(&mut self, j: usize) {
        self.inner.optimizer.n_starts = j;
    }

    /// Complier truth in fitted-parameter order.
    fn truth(&self) -> Vec<f64> {
        self.inner.truth()
    }

    /// One dataset and its complier indicators.
    #[pyo3(signature = (seed=0))]
    fn generate(&self, seed: u64) -> PyResult<(PyDataset, Vec<bool>)> {
        let s = generate_dataset(&self.inner, seed).map_err(value_err)?;
        let g = s.groups.iter().map(|g| *g == Group::Complier).collect();
        Ok((PyDataset { inner: s.data }, g))
    }

    /// Monte Carlo run; returns `{parameter: {truth, bias, esd, rmse}}`
    /// plus `replications` and `failures`.
    #[pyo3(signature = (seed=0))]
    fn run<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let mc = py.detach(|| run_mc(&self.inner, seed)).map_err(value_err)?;
        let d = PyDict::new(py);
        for p in &mc.report.parameters {
            let row = PyDict::new(py);
            row.set_item("truth", p.truth)?;
            row.set_item("bias", p.bias)?;
            row.set_item("esd", p.esd)?;
            row.set_item("rmse", p.rmse)?;
            d.set_item(&p.name, row)?;
        }
        d.set_item("replications", mc.report.replications)?;
        d.set_item("failures", mc.report.failures)?;
        Ok(d)
    }
}

/// Kendall's tau of two equal-length samples.
#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("samples differ in length"));
    }
    Ok(cchr_core::numeric::kendall_tau(&x, &y))
}

#[pymodule]
fn cchr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCopula>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyDesign>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add("COPULAS", CopulaFamily::PARAMETRIC.iter().map(|f| f.name()).collect::<Vec<_>>())?;
    m.add("CENSORING", CensoringFamily::ALL.iter().map(|f| f.name()).collect::<Vec<_>>())?;
    Ok(())
}
