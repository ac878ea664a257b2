//! Python bindings for the vinehedge core library.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use vinehedge_core::bicop::{empirical_tau, CopulaFamily, FittedBicop};
use vinehedge_core::ga::{self, GaConfig, RecourseMode};
use vinehedge_core::harness::frontier as solve_frontier;
use vinehedge_core::model::{cvar_objective, Instance};
use vinehedge_core::overlay::{build_ternary, cost_of_carry as carry};
use vinehedge_core::panel::load_panel;
use vinehedge_core::rvine::SelectOptions;
use vinehedge_core::scenarios::{generate_mvn, generate_rvc, Method, ScenarioSet};

create_exception!(vinehedge, VinehedgeError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    VinehedgeError::new_err(e.to_string())
}

fn copula(family: &str, theta: f64, nu: Option<f64>) -> PyResult<FittedBicop> {
    let family: CopulaFamily = family.parse().map_err(err)?;
    FittedBicop::new(family, theta, nu).map_err(err)
}

fn to_python(py: Python<'_>, value: serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = value.to_string();
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn ga_config(population: usize, generations: usize, seed: u64, mode: &str) -> PyResult<GaConfig> {
    Ok(GaConfig {
        population,
        generations,
        seed,
        mode: mode.parse::<RecourseMode>().map_err(err)?,
        ..GaConfig::default()
    })
}

/// Net carry of per-currency forward positions at the given rates.
#[pyfunction]
fn cost_of_carry(positions: Vec<f64>, rates: Vec<f64>) -> PyResult<f64> {
    if positions.len() != rates.len() {
        return Err(err("positions and rates differ in length"));
    }
    Ok(carry(&positions, &rates))
}

/// Rows of the currency-pair matrix for `c` currencies.
#[pyfunction]
fn ternary(c: usize) -> PyResult<Vec<Vec<i8>>> {
    let t = build_ternary(c).map_err(err)?;
    Ok((0..t.n_pairs()).map(|k| t.row(k)).collect())
}

#[pyfunction]
#[pyo3(signature = (family, theta, u, v, nu=None))]
fn h_func(family: &str, theta: f64, u: f64, v: f64, nu: Option<f64>) -> PyResult<f64> {
    copula(family, theta, nu)?.h_func(u, v).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (family, theta, w, v, nu=None))]
fn inv_h(family: &str, theta: f64, w: f64, v: f64, nu: Option<f64>) -> PyResult<f64> {
    copula(family, theta, nu)?.inv_h(w, v).map_err(err)
}

#[pyfunction]
fn kendall_tau(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    empirical_tau(&u, &v).map_err(err)
}

/// `(alpha, cvar)` of equally weighted losses.
#[pyfunction]
#[pyo3(signature = (losses, beta=0.95))]
fn cvar(losses: Vec<f64>, beta: f64) -> PyResult<(f64, f64)> {
    let p = vec![1.0 / losses.len().max(1) as f64; losses.len()];
    let r = cvar_objective(&losses, &p, beta).map_err(err)?;
    Ok((r.alpha, r.cvar))
}

/// Scenario column names and rows generated from the first `in_sample`
/// rows of a return panel.
#[pyfunction]
#[pyo3(signature = (panel, n, seed, method="rvc", in_sample=None, base_currency="USD"))]
fn generate_scenarios(
    panel: PathBuf,
    n: usize,
    seed: u64,
    method: &str,
    in_sample: Option<usize>,
    base_currency: &str,
) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let raw = load_panel(&panel, base_currency).map_err(err)?;
    let end = in_sample.unwrap_or(raw.len()).min(raw.len());
    let adjusted = raw.slice(0, end).adjust_returns().map_err(err)?;
    let set = match method.parse::<Method>().map_err(err)? {
        Method::Rvc => generate_rvc(&adjusted, n, &SelectOptions::default(), seed),
        Method::Mvn => generate_mvn(&adjusted, n, seed),
    }
    .map_err(err)?;
    Ok((set.names, set.values))
}

/// Solves an instance (JSON text) at its return target over the given
/// scenarios and returns the solution and its evaluation.
#[pyfunction]
#[pyo3(signature = (instance, names, rows, mu=None, population=100, generations=100, seed=0, mode="no-recourse-trades"))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    instance: &str,
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    mu: Option<f64>,
    population: usize,
    generations: usize,
    seed: u64,
    mode: &str,
) -> PyResult<Py<PyAny>> {
    let mut inst = Instance::from_json(instance).map_err(err)?;
    if let Some(mu) = mu {
        inst.params.mu = mu;
    }
    let set = ScenarioSet::new(names, rows).map_err(err)?;
    let cfg = ga_config(population, generations, seed, mode)?;
    let res = py.detach(|| ga::run(&inst, &set, &cfg)).map_err(err)?;
    let out = serde_json::json!({
        "solution": res.solution,
        "evaluation": res.evaluation,
        "trace": res.trace.iter().map(|t| t.best_fitness).collect::<Vec<_>>(),
    });
    to_python(py, out)
}

/// Frontier points for each target in `mus`.
#[pyfunction]
#[pyo3(signature = (instance, names, rows, mus, population=100, generations=100, seed=0, mode="no-recourse-trades"))]
#[allow(clippy::too_many_arguments)]
fn frontier(
    py: Python<'_>,
    instance: &str,
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    mus: Vec<f64>,
    population: usize,
    generations: usize,
    seed: u64,
    mode: &str,
) -> PyResult<Py<PyAny>> {
    let inst = Instance::from_json(instance).map_err(err)?;
    let set = ScenarioSet::new(names, rows).map_err(err)?;
    let cfg = ga_config(population, generations, seed, mode)?;
    let points = py
        .detach(|| solve_frontier(&inst, &set, &mus, &cfg))
        .map_err(err)?;
    to_python(py, serde_json::to_value(&points).map_err(err)?)
}

#[pymodule]
fn vinehedge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VinehedgeError", m.py().get_type::<VinehedgeError>())?;
    m.add_function(wrap_pyfunction!(cost_of_carry, m)?)?;
    m.add_function(wrap_pyfunction!(ternary, m)?)?;
    m.add_function(wrap_pyfunction!(h_func, m)?)?;
    m.add_function(wrap_pyfunction!(inv_h, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(cvar, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(frontier, m)?)?;
    Ok(())
}
