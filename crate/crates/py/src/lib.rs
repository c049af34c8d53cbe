//! Python bindings: prime sets, exact counts, the Poisson-type sum and the
//! order-statistic estimators, plus the experiment and verification runners.

use divlab::acceptance::{self, Fixtures};
use divlab::config::ExperimentConfig;
use divlab::counting::{self, AqMethod, HqMethod};
use divlab::divisors;
use divlab::experiments;
use divlab::order_stats::{self, BarrierSpec};
use divlab::poisson;
use divlab::prime_sets::{self, PrimeKind};
use divlab::rng::McEstimate;
use divlab::LabError;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A set of primes up to a fixed limit.
#[pyclass(name = "PrimeSet", module = "divlab", frozen)]
struct PyPrimeSet {
    inner: prime_sets::PrimeSet,
}

#[pymethods]
impl PyPrimeSet {
    /// `spec` is `"all"`, `"congruence:4:1"` or `"thinned:0.4:7"`.
    #[new]
    fn new(spec: &str, limit: u64) -> PyResult<Self> {
        let kind: PrimeKind = divlab::config::parse_prime_kind(spec).map_err(err)?;
        Ok(PyPrimeSet {
            inner: prime_sets::PrimeSet::new(kind, limit).map_err(err)?,
        })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn limit(&self) -> u64 {
        self.inner.limit()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.kind().label()
    }

    fn members(&self) -> Vec<u64> {
        self.inner.members().to_vec()
    }

    fn contains(&self, p: u64) -> PyResult<bool> {
        self.inner.contains(p).map_err(err)
    }

    fn pi_q(&self, x: u64) -> PyResult<u64> {
        self.inner.pi_q(x).map_err(err)
    }

    fn mertens_sum(&self, x: u64) -> PyResult<f64> {
        self.inner.mertens_sum(x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("PrimeSet({}, limit={})", self.inner.kind().label(), self.inner.limit())
    }
}

fn hq_method(name: &str) -> PyResult<HqMethod> {
    match name {
        "exhaustive" => Ok(HqMethod::Exhaustive),
        "divisor-multiples" => Ok(HqMethod::DivisorMultiples),
        other => Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
}

#[pyfunction]
#[pyo3(signature = (q, x, y, z, method = "divisor-multiples"))]
fn count_hq(q: &PyPrimeSet, x: u64, y: u64, z: u64, method: &str) -> PyResult<u64> {
    Ok(counting::count_hq(&q.inner, x, y, z, hq_method(method)?).map_err(err)?.value)
}

#[pyfunction]
#[pyo3(signature = (q, x, y, z, method = "divisor-multiples"))]
fn count_hq_star(q: &PyPrimeSet, x: u64, y: u64, z: u64, method: &str) -> PyResult<u64> {
    Ok(counting::count_hq_star(&q.inner, x, y, z, hq_method(method)?).map_err(err)?.value)
}

#[pyfunction]
fn count_aq(q: &PyPrimeSet, n: u64) -> PyResult<u64> {
    counting::count_aq(&q.inner, n, AqMethod::Bitmap).map_err(err)
}

#[pyfunction]
fn count_sq(q: &PyPrimeSet, x: u64) -> PyResult<u64> {
    counting::count_sq(&q.inner, x).map_err(err)
}

#[pyfunction]
fn count_rough(q: &PyPrimeSet, x: u64, z: f64) -> PyResult<u64> {
    counting::count_rough(&q.inner, x, z).map_err(err)
}

#[pyfunction]
fn divisors_of(n: u64) -> PyResult<Vec<u64>> {
    divisors::divisors(n).map_err(err)
}

/// `L(a)`, the measure of `⋃_{d|a} (log d − log 2, log d]`.
#[pyfunction]
fn l_measure(a: u64) -> PyResult<f64> {
    Ok(divisors::l_interval_union(a).map_err(err)?.measure)
}

#[pyfunction]
fn w_count(a: u64) -> PyResult<u64> {
    divisors::w_count(a).map_err(err)
}

#[pyfunction]
fn poisson_sum(lambda: f64, v: u64) -> f64 {
    poisson::poisson_sum(lambda, v)
}

#[pyfunction]
fn poisson_sum_ln(lambda: f64, v: u64) -> f64 {
    poisson::poisson_sum_ln(lambda, v)
}

#[pyfunction]
fn key_identity_rhs(lambda: f64, v: u64) -> f64 {
    poisson::key_identity_rhs(lambda, v)
}

#[pyfunction]
fn partial_poisson(lambda: f64, z: f64) -> PyResult<f64> {
    poisson::partial_poisson(lambda, z).map_err(err)
}

#[pyfunction]
fn g_exponent(delta: f64) -> PyResult<f64> {
    poisson::g_exponent(delta).map_err(err)
}

#[pyfunction]
fn e_factor(loglog_y: f64, delta: f64) -> PyResult<f64> {
    poisson::e_factor(loglog_y, delta).map_err(err)
}

#[pyfunction]
fn main_term(x: f64, y: f64, delta: f64) -> PyResult<f64> {
    poisson::main_term(x, y, delta).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (lambda, v, epsilon = 0.1))]
fn classify_regime<'py>(py: Python<'py>, lambda: f64, v: u64, epsilon: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = poisson::classify_regime(lambda, v, epsilon).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("regime", r.regime.label())?;
    d.set_item("theta", r.theta)?;
    d.set_item("envelope_ln", r.envelope_ln)?;
    d.set_item("exact_sum_ln", r.exact_sum_ln)?;
    d.set_item("ratio", r.ratio)?;
    Ok(d)
}

#[pyfunction]
fn h_k(lambda: f64, k: u64) -> u64 {
    poisson::h_k(lambda, k)
}

#[pyfunction]
fn v_sequence(lambda: f64, v: u64) -> Vec<u64> {
    poisson::v_sequence(lambda, v)
}

fn estimate<'py>(py: Python<'py>, e: &McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("estimate", e.estimate)?;
    d.set_item("std_error", e.std_error)?;
    d.set_item("n_samples", e.n_samples)?;
    d.set_item("seed", e.seed)?;
    Ok(d)
}

#[pyfunction]
fn qk_exact(u: f64, v: f64, k: usize) -> PyResult<f64> {
    order_stats::qk_exact(u, v, k).map_err(err)
}

#[pyfunction]
fn qk_mc<'py>(py: Python<'py>, u: f64, v: f64, k: usize, n_samples: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    estimate(py, &py.detach(|| order_stats::qk_mc(u, v, k, n_samples, seed)))
}

#[pyfunction]
#[pyo3(signature = (k, v, c, n_samples, seed, mu = 1.0 / 7.0))]
fn barrier_events_mc<'py>(
    py: Python<'py>,
    k: usize,
    v: f64,
    c: f64,
    n_samples: u64,
    seed: u64,
    mu: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = BarrierSpec { k, v, c, m: 0, mu };
    let r = py.detach(|| order_stats::barrier_events_mc(&spec, n_samples, seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("p_b", estimate(py, &r.p_b)?)?;
    d.set_item("p_strong", estimate(py, &r.p_scr_b)?)?;
    d.set_item(
        "p_strong_given_b",
        r.p_scr_b_given_b.map(|e| estimate(py, &e)).transpose()?,
    )?;
    d.set_item("containment_violations", r.containment_violations)?;
    Ok(d)
}

#[pyfunction]
fn vol_yk_mc<'py>(
    py: Python<'py>,
    k: usize,
    v_tilde: f64,
    c: f64,
    m: usize,
    n_samples: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    estimate(py, &py.detach(|| order_stats::vol_yk_mc(k, v_tilde, c, m, n_samples, seed)))
}

#[pyfunction]
fn uk_mc<'py>(py: Python<'py>, k: usize, v: f64, n_samples: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    estimate(py, &py.detach(|| order_stats::uk_mc(k, v, n_samples, seed)))
}

#[pyfunction]
fn uk_envelope(k: usize, v: f64) -> f64 {
    order_stats::uk_envelope(k, v)
}

/// Runs an experiment from TOML text; returns `{table name: CSV text}`.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let report = py.detach(|| experiments::run(&cfg)).map_err(err)?;
    let d = PyDict::new(py);
    for t in &report.tables {
        d.set_item(&t.name, t.to_csv_string().map_err(err)?)?;
    }
    Ok(d)
}

/// Runs the verification criteria matching `filter`; returns
/// `[(label, passed, line)]`.
#[pyfunction]
#[pyo3(signature = (filter = None))]
fn verify(py: Python<'_>, filter: Option<String>) -> PyResult<Vec<(String, bool, String)>> {
    let outcomes = py
        .detach(|| acceptance::run_selected(filter.as_deref(), &Fixtures::builtin()))
        .map_err(err)?;
    Ok(outcomes.iter().map(|o| (o.label(), o.passed, o.line())).collect())
}

#[pymodule]
#[pyo3(name = "divlab")]
fn divlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPrimeSet>()?;
    m.add("DELTA_CRITICAL", poisson::DELTA_CRITICAL)?;
    m.add_function(wrap_pyfunction!(count_hq, m)?)?;
    m.add_function(wrap_pyfunction!(count_hq_star, m)?)?;
    m.add_function(wrap_pyfunction!(count_aq, m)?)?;
    m.add_function(wrap_pyfunction!(count_sq, m)?)?;
    m.add_function(wrap_pyfunction!(count_rough, m)?)?;
    m.add_function(wrap_pyfunction!(divisors_of, m)?)?;
    m.add_function(wrap_pyfunction!(l_measure, m)?)?;
    m.add_function(wrap_pyfunction!(w_count, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_sum, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_sum_ln, m)?)?;
    m.add_function(wrap_pyfunction!(key_identity_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(partial_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(g_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(e_factor, m)?)?;
    m.add_function(wrap_pyfunction!(main_term, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(h_k, m)?)?;
    m.add_function(wrap_pyfunction!(v_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(qk_exact, m)?)?;
    m.add_function(wrap_pyfunction!(qk_mc, m)?)?;
    m.add_function(wrap_pyfunction!(barrier_events_mc, m)?)?;
    m.add_function(wrap_pyfunction!(vol_yk_mc, m)?)?;
    m.add_function(wrap_pyfunction!(uk_mc, m)?)?;
    m.add_function(wrap_pyfunction!(uk_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
