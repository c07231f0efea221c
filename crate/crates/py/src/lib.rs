//! Python bindings: the distribution toolkit, order-statistic lemma checks,
//! pricing rules, offline oracles, closed-form bounds and the simulation
//! engine, exposed as one `ppmlab` module. Structured results cross the
//! boundary as plain dicts/lists (JSON-shaped), so no Python-side schema is
//! needed.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ppm_lab::mechanism::{Mechanism, MechanismConfig};
use ppm_lab::sim::{OracleKind, SimOptions};
use ppm_lab::{self as core, Distribution as CoreDist, ValuationModel};

fn to_py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Domain(_)
        | core::Error::Validation(_)
        | core::Error::Config(_)
        | core::Error::Usage(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// A continuous non-negative MHR distribution: exp(rate), unif(a, b) or
/// weibull(shape >= 1, scale).
#[pyclass(name = "Distribution", from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: CoreDist,
}

#[pymethods]
impl PyDistribution {
    #[staticmethod]
    fn exponential(rate: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreDist::exponential(rate).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn uniform(lo: f64, hi: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreDist::uniform(lo, hi).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn weibull(shape: f64, scale: f64) -> PyResult<Self> {
        Ok(Self { inner: CoreDist::weibull(shape, scale).map_err(to_py_err)? })
    }

    /// Parses `exp(rate)`, `unif(a,b)` or `weibull(k,scale)`.
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreDist::parse(spec).map_err(to_py_err)? })
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn hazard(&self, x: f64) -> f64 {
        self.inner.hazard(x)
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        self.inner.quantile(q).map_err(to_py_err)
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    /// `count` inverse-transform samples from the seeded stream.
    fn sample(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.inner.sample(&mut rng)).collect()
    }

    /// Hazard monotonicity on a grid; returns (ok, first_violation_or_None).
    fn hazard_monotone_check(&self, grid_size: usize) -> (bool, Option<f64>) {
        core::hazard_monotone_check(&self.inner, grid_size)
    }

    fn __repr__(&self) -> String {
        format!("Distribution({})", self.inner)
    }
}

#[pyfunction]
fn harmonic(n: usize) -> f64 {
    core::numeric::harmonic(n)
}

#[pyfunction]
fn order_stat_mean(dist: &PyDistribution, n: usize, k: usize) -> PyResult<f64> {
    core::order_stat_mean(&dist.inner, n, k).map_err(to_py_err)
}

#[pyfunction]
fn max_expectation(dist: &PyDistribution, n: usize) -> PyResult<f64> {
    core::max_expectation(&dist.inner, n).map_err(to_py_err)
}

#[pyfunction]
fn check_quantiles1(dist: &PyDistribution, n: usize, j: usize, q: f64) -> PyResult<bool> {
    core::check_quantiles1(&dist.inner, n, j, q).map_err(to_py_err)
}

#[pyfunction]
fn check_quantiles2(dist: &PyDistribution, n: usize, q: f64) -> PyResult<bool> {
    core::check_quantiles2(&dist.inner, n, q).map_err(to_py_err)
}

#[pyfunction]
fn check_quantile_maximum(dist: &PyDistribution, z: f64, k: usize, alpha: f64) -> PyResult<bool> {
    core::check_quantile_maximum(&dist.inner, z, k, alpha).map_err(to_py_err)
}

#[pyfunction]
fn check_babaioff_ratio(dist: &PyDistribution, n_small: usize, n_large: usize) -> PyResult<bool> {
    core::check_babaioff_ratio(&dist.inner, n_small, n_large).map_err(to_py_err)
}

#[pyfunction]
fn single_item_ladder(dist: &PyDistribution, n: usize) -> Vec<f64> {
    core::single_item_ladder(&dist.inner, n)
}

/// Returns `(prices, expected_welfare)` of the optimal single-item dynamic
/// policy.
#[pyfunction]
fn mdp_optimal_prices(dist: &PyDistribution, n: usize) -> PyResult<(Vec<f64>, f64)> {
    let t = core::mdp_optimal_prices(&dist.inner, n).map_err(to_py_err)?;
    Ok((t.prices, t.expected_welfare))
}

#[pyfunction]
fn virtual_value(dist: &PyDistribution, t: f64) -> PyResult<f64> {
    core::virtual_value(&dist.inner, t).map_err(to_py_err)
}

#[pyfunction]
fn exante_item_bound(dist: &PyDistribution, q1: f64, n: usize) -> PyResult<f64> {
    core::exante_item_bound(&dist.inner, q1, n).map_err(to_py_err)
}

#[pyfunction]
fn exp_static_welfare(n: usize, p: f64) -> f64 {
    core::exp_static_welfare(n, p)
}

#[pyfunction]
fn exp_static_best(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    serialize_to_py(py, &core::exp_static_best(n))
}

#[pyfunction]
fn mdp_bound_check(py: Python<'_>, n_max: usize) -> PyResult<Py<PyAny>> {
    let r = core::mdp_bound_check(n_max).map_err(to_py_err)?;
    serialize_to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (ns, ratios, model = "one-over-log"))]
fn ratio_trend_fit(py: Python<'_>, ns: Vec<usize>, ratios: Vec<f64>, model: &str) -> PyResult<Py<PyAny>> {
    let m = match model {
        "one-over-log" => core::TrendModel::OneOverLog,
        "logloglog-over-log" => core::TrendModel::LogLogLogOverLog,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown trend model `{other}`"
            )))
        }
    };
    let fit = core::ratio_trend_fit(&ns, &ratios, m).map_err(to_py_err)?;
    serialize_to_py(py, &fit)
}

/// Exact maximum-weight matching of a rectangular value matrix (list of
/// rows); returns a dict with assignment, welfare and per-item flags.
#[pyfunction]
fn max_weight_matching(py: Python<'_>, values: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let n = values.len();
    let m = values.first().map_or(0, |r| r.len());
    let mut flat = Vec::with_capacity(n * m);
    for row in &values {
        if row.len() != m {
            return Err(PyValueError::new_err("ragged value matrix"));
        }
        flat.extend_from_slice(row);
    }
    let r = core::max_weight_matching(&flat, n, m).map_err(to_py_err)?;
    serialize_to_py(py, &r)
}

#[pyfunction]
fn separable_optimum(alphas: Vec<f64>, types: Vec<f64>) -> f64 {
    core::separable_optimum(&alphas, &types)
}

#[pyfunction]
fn vcg_separable(py: Python<'_>, alphas: Vec<f64>, types: Vec<f64>) -> PyResult<Py<PyAny>> {
    serialize_to_py(py, &core::vcg_separable(&alphas, &types))
}

/// Runs trials of a mechanism against a model spec (same grammar as the
/// CLI) and returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (model, mech, n, trials = 10_000, seed = 0, track_alloc = false))]
fn simulate(
    py: Python<'_>,
    model: &str,
    mech: &str,
    n: usize,
    trials: usize,
    seed: u64,
    track_alloc: bool,
) -> PyResult<Py<PyAny>> {
    let model = ValuationModel::parse(model).map_err(to_py_err)?;
    let (mechanism, effective) =
        Mechanism::build(mech, &model, n, MechanismConfig::default()).map_err(to_py_err)?;
    let options = SimOptions {
        track_allocations: track_alloc,
        ..Default::default()
    };
    let summary = core::run_trials(
        &effective,
        &mechanism,
        n,
        OracleKind::Auto,
        trials,
        seed,
        &options,
    )
    .map_err(to_py_err)?;
    serialize_to_py(py, &summary)
}

/// One summary dict per n, sharing the master seed across rows.
#[pyfunction]
#[pyo3(signature = (model, mech, ns, trials = 10_000, seed = 0))]
fn sweep(
    py: Python<'_>,
    model: &str,
    mech: &str,
    ns: Vec<usize>,
    trials: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let model = ValuationModel::parse(model).map_err(to_py_err)?;
    let rows = core::sweep(
        &model,
        mech,
        &MechanismConfig::default(),
        &ns,
        OracleKind::Auto,
        trials,
        seed,
        &SimOptions::default(),
    )
    .map_err(to_py_err)?;
    serialize_to_py(py, &rows)
}

/// Runs the named verification claims (all when the filter is empty);
/// returns a list of {id, pass, detail, seconds} dicts.
#[pyfunction]
#[pyo3(signature = (claims = None))]
fn run_verify(py: Python<'_>, claims: Option<Vec<String>>) -> PyResult<Py<PyAny>> {
    let filter = claims.unwrap_or_default();
    let results = core::verify::run_claims(&filter).map_err(to_py_err)?;
    serialize_to_py(py, &results)
}

#[pymodule]
fn ppmlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_function(wrap_pyfunction!(harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(order_stat_mean, m)?)?;
    m.add_function(wrap_pyfunction!(max_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(check_quantiles1, m)?)?;
    m.add_function(wrap_pyfunction!(check_quantiles2, m)?)?;
    m.add_function(wrap_pyfunction!(check_quantile_maximum, m)?)?;
    m.add_function(wrap_pyfunction!(check_babaioff_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(single_item_ladder, m)?)?;
    m.add_function(wrap_pyfunction!(mdp_optimal_prices, m)?)?;
    m.add_function(wrap_pyfunction!(virtual_value, m)?)?;
    m.add_function(wrap_pyfunction!(exante_item_bound, m)?)?;
    m.add_function(wrap_pyfunction!(exp_static_welfare, m)?)?;
    m.add_function(wrap_pyfunction!(exp_static_best, m)?)?;
    m.add_function(wrap_pyfunction!(mdp_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_trend_fit, m)?)?;
    m.add_function(wrap_pyfunction!(max_weight_matching, m)?)?;
    m.add_function(wrap_pyfunction!(separable_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(vcg_separable, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add("MECHANISM_IDS", core::MECHANISM_IDS.to_vec())?;
    Ok(())
}
