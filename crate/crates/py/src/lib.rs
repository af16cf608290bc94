//! Python bindings. Instances and traces cross the boundary as JSON text;
//! rationals stay exact as `"a/b"` strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use taplab::adversary::{gen_dtap_levels, gen_geometric, gen_mrt_cheap_expensive, gen_random, golden_seed, GenParams};
use taplab::engine::{simulate as run_sim, validate_trace, EngineConfig};
use taplab::metrics::metrics_from_trace;
use taplab::oracle::{opt_awake_exhaustive, opt_trt_lower, DEFAULT_MAX_EVALS};
use taplab::registry::{default_requirements, make_scheduler, SchedOptions, SCHEDULERS};
use taplab::verify::{run_battery, VerifyConfig};
use taplab::{Rational, Tap};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(tap_json: &str) -> PyResult<Tap> {
    Tap::from_json(tap_json).map_err(err)
}

/// Scheduler names.
#[pyfunction]
fn schedulers() -> Vec<&'static str> {
    SCHEDULERS.to_vec()
}

/// Runs `scheduler` on an instance and returns `(record_json, trace_json)`.
#[pyfunction]
#[pyo3(signature = (tap_json, scheduler, speed="1", budget_factor=None, allow_cancel=None))]
fn simulate(
    tap_json: &str,
    scheduler: &str,
    speed: &str,
    budget_factor: Option<usize>,
    allow_cancel: Option<bool>,
) -> PyResult<(String, String)> {
    let tap = load(tap_json)?;
    let (need, cancel) = default_requirements(scheduler).map_err(err)?;
    let speed: Rational = speed.parse().map_err(err)?;
    let cfg = EngineConfig::new(tap.p())
        .with_budget_factor(tap.p(), budget_factor.unwrap_or(need))
        .with_speed(speed)
        .with_cancel(allow_cancel.unwrap_or(cancel));
    let mut s = make_scheduler(scheduler, &SchedOptions::default()).map_err(err)?;
    let trace = run_sim(&tap, &mut s, cfg.clone()).map_err(err)?;
    let m = metrics_from_trace(&trace, &tap).map_err(err)?;
    let violations: Vec<String> = validate_trace(&trace, &tap, &cfg).iter().map(|v| v.to_string()).collect();
    let rec = serde_json::json!({
        "scheduler": trace.scheduler,
        "instance_hash": format!("{:016x}", tap.instance_hash()),
        "p": tap.p(),
        "n": tap.len(),
        "awake": m.awake.to_string(),
        "trt": m.trt.to_string(),
        "mrt": m.mrt.to_string(),
        "cancellations": trace.cancellations.len(),
        "violations": violations,
    });
    Ok((rec.to_string(), trace.to_json()))
}

/// Generated instance as JSON. `name` is one of `random`, `golden-seed`,
/// `geometric`, `cheap-expensive`, `dtap-levels`.
#[pyfunction]
#[pyo3(signature = (name, p, seed=0, n=8))]
fn generate(name: &str, p: usize, seed: u64, n: usize) -> PyResult<String> {
    let tap = match name {
        "random" => gen_random(&GenParams::new(p, n, seed)),
        "golden-seed" => golden_seed(p),
        "geometric" => gen_geometric(p),
        "cheap-expensive" => gen_mrt_cheap_expensive(p, seed),
        "dtap-levels" => gen_dtap_levels(p, seed),
        other => return Err(err(format!("unknown generator {other:?}"))),
    }
    .map_err(err)?;
    Ok(tap.to_json())
}

/// Exact optimal awake time.
#[pyfunction]
fn opt_awake(tap_json: &str) -> PyResult<String> {
    let (v, _) = opt_awake_exhaustive(&load(tap_json)?, DEFAULT_MAX_EVALS).map_err(err)?;
    Ok(v.to_string())
}

/// Lower bound on total response time.
#[pyfunction]
fn trt_lower(tap_json: &str) -> PyResult<String> {
    Ok(opt_trt_lower(&load(tap_json)?).to_string())
}

/// Runs the acceptance battery; returns `(all_passed, report)`.
#[pyfunction]
#[pyo3(signature = (only=Vec::new()))]
fn verify(py: Python<'_>, only: Vec<String>) -> (bool, String) {
    let report = py.detach(|| run_battery(&VerifyConfig { only, ..VerifyConfig::default() }, &mut Vec::new()));
    (report.passed(), report.render())
}

#[pymodule]
fn taplab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(schedulers, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(opt_awake, m)?)?;
    m.add_function(wrap_pyfunction!(trt_lower, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
