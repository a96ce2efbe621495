//! Python bindings: systems, decompositions, estimates, grid solves and the batch pipeline.

use std::sync::Arc;

use polydec_core::ddp::{self, DdpConfig, TrajectoryBundle};
use polydec_core::decomp::{self, SolverBudget};
use polydec_core::gps::{self, ComposedPolicy, GpsConfig};
use polydec_core::lqr;
use polydec_core::pipeline::{run_pipeline, RunConfig};
use polydec_core::{BenchmarkId, ControlSystem, Decomposition};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        Some(t) => serde_json::from_str(t).map_err(value_err),
        None => Ok(T::default()),
    }
}

/// A discounted optimal control problem.
#[pyclass(name = "System", module = "polydec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: Arc<ControlSystem>,
}

#[pymethods]
impl PySystem {
    /// One of "cartpole", "biped", "manip2", "manip3".
    #[staticmethod]
    fn benchmark(name: &str) -> PyResult<Self> {
        let id: BenchmarkId = name.parse().map_err(value_err)?;
        Ok(PySystem { inner: Arc::new(polydec_core::load_benchmark(id)) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySystem { inner: Arc::new(ControlSystem::from_json(text).map_err(value_err)?) })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn with_grid_scale(&self, scale: f64) -> PyResult<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(PyValueError::new_err("scale must be positive"));
        }
        Ok(PySystem { inner: Arc::new((*self.inner).clone().with_grid_scale(scale)) })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn grid_shape(&self) -> Vec<usize> {
        self.inner.grid_shape.clone()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.axis_names()
    }

    #[getter]
    fn input_names(&self) -> Vec<String> {
        self.inner.input_names()
    }

    /// State derivative at `(x, u)`.
    fn dynamics(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.eval_dynamics(&x, &u).map_err(value_err)
    }

    fn cost(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.n() || u.len() != self.inner.m() {
            return Err(PyValueError::new_err("dimension mismatch"));
        }
        Ok(self.inner.eval_cost(&x, &u))
    }

    fn __repr__(&self) -> String {
        format!("System({:?}, n={}, m={})", self.inner.name, self.inner.n(), self.inner.m())
    }
}

/// A pure decoupled or cascaded policy decomposition.
#[pyclass(name = "Decomposition", module = "polydec", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyDecomposition {
    inner: Decomposition,
}

#[pymethods]
impl PyDecomposition {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDecomposition { inner: Decomposition::from_json(text).map_err(value_err)? })
    }

    #[staticmethod]
    fn undecomposed(system: &PySystem) -> Self {
        PyDecomposition { inner: Decomposition::undecomposed(&system.inner) }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn describe(&self, system: &PySystem) -> String {
        self.inner.describe(&system.inner)
    }

    fn is_undecomposed(&self) -> bool {
        self.inner.is_undecomposed()
    }

    /// Violated invariants as messages; empty when valid.
    fn violations(&self, system: &PySystem) -> Vec<String> {
        match self.inner.validate(&system.inner) {
            Ok(()) => Vec::new(),
            Err(v) => v.iter().map(ToString::to_string).collect(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Decomposition({})", self.inner.to_json())
    }
}

/// Sub-policies solved by grid-based policy iteration.
#[pyclass(name = "GridPolicy", module = "polydec", frozen)]
struct PyGridPolicy {
    system: Arc<ControlSystem>,
    inner: ComposedPolicy,
}

#[pymethods]
impl PyGridPolicy {
    /// Clamped control at full state `x`.
    fn control(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.system.n() {
            return Err(PyValueError::new_err("dimension mismatch"));
        }
        Ok(gps::eval_composed(&self.system, &self.inner, &x))
    }

    #[getter]
    fn solve_seconds(&self) -> f64 {
        self.inner.solve_seconds()
    }

    /// Backup time step of each node, innermost first.
    #[getter]
    fn dts(&self) -> Vec<f64> {
        self.inner.nodes.iter().map(|n| n.stats.dt).collect()
    }

    /// Policy-improvement steps of each node, innermost first.
    #[getter]
    fn improvements(&self) -> Vec<usize> {
        self.inner.nodes.iter().map(|n| n.stats.improvements).collect()
    }

    /// Mean of `V^self − V^reference` over the grid points in `S_eval`, both
    /// evaluated with the reference's time step.
    fn value_error(&self, reference: &PyGridPolicy, py: Python<'_>) -> PyResult<f64> {
        let sys = &self.system;
        let dt = reference.inner.nodes[0].stats.dt;
        let cfg = GpsConfig::default();
        py.detach(|| {
            let vs = gps::evaluate_policy_value(sys, &reference.inner, dt, &cfg).map_err(runtime_err)?;
            let vd = gps::evaluate_policy_value(sys, &self.inner, dt, &cfg).map_err(runtime_err)?;
            Ok(gps::value_error(sys, &vd.value, &vs.value))
        })
    }
}

/// Trajectory bundle of the undecomposed system, reused across `err_ddp` calls.
#[pyclass(name = "DdpBaseline", module = "polydec", frozen)]
struct PyDdpBaseline {
    system: Arc<ControlSystem>,
    config: DdpConfig,
    inner: Arc<TrajectoryBundle>,
}

#[pymethods]
impl PyDdpBaseline {
    /// Discounted cost of each corner trajectory.
    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.trajectories.iter().map(|t| t.cost).collect()
    }

    #[getter]
    fn stalled(&self) -> usize {
        self.inner.stalled_count()
    }
}

#[pyfunction]
fn count_pure(n: u32, m: u32) -> PyResult<u128> {
    decomp::count_pure(n, m).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (system, cap=None))]
fn enumerate(system: &PySystem, cap: Option<usize>) -> PyResult<Vec<PyDecomposition>> {
    Ok(decomp::enumerate_pure(&system.inner, cap)
        .map_err(value_err)?
        .into_iter()
        .map(|inner| PyDecomposition { inner })
        .collect())
}

/// Indices of the non-dominated `(error, cost)` pairs.
#[pyfunction]
fn pareto_front(points: Vec<(f64, f64)>) -> Vec<usize> {
    decomp::pareto_front(&points)
}

#[pyfunction]
fn err_lqr(system: &PySystem, decomposition: &PyDecomposition) -> PyResult<f64> {
    lqr::err_lqr(&system.inner, &decomposition.inner).map_err(value_err)
}

/// Predicted compute time relative to the undecomposed system.
#[pyfunction]
fn compute_time_estimate(system: &PySystem, decomposition: &PyDecomposition) -> f64 {
    decomp::estimate_compute_time(&system.inner, &decomposition.inner, &SolverBudget::default()).relative_cost
}

/// Solves every sub-policy on the system grid. `config` is GpsConfig JSON.
#[pyfunction]
#[pyo3(signature = (system, decomposition, config=None))]
fn solve(
    py: Python<'_>,
    system: &PySystem,
    decomposition: &PyDecomposition,
    config: Option<&str>,
) -> PyResult<PyGridPolicy> {
    let cfg: GpsConfig = parse_json(config)?;
    let sys = system.inner.clone();
    let inner = py
        .detach(|| gps::solve_decomposition(&sys, &decomposition.inner, &cfg))
        .map_err(runtime_err)?;
    Ok(PyGridPolicy { system: sys, inner })
}

/// DDP trajectories of the undecomposed system from every corner of `S_eval`.
/// `config` is DdpConfig JSON.
#[pyfunction]
#[pyo3(signature = (system, config=None))]
fn ddp_baseline(py: Python<'_>, system: &PySystem, config: Option<&str>) -> PyResult<PyDdpBaseline> {
    let cfg: DdpConfig = parse_json(config)?;
    let sys = system.inner.clone();
    let inner = py.detach(|| ddp::build_baseline(&sys, &cfg)).map_err(runtime_err)?;
    Ok(PyDdpBaseline { system: sys, config: cfg, inner: Arc::new(inner) })
}

#[pyfunction]
fn err_ddp(py: Python<'_>, baseline: &PyDdpBaseline, decomposition: &PyDecomposition) -> PyResult<f64> {
    py.detach(|| ddp::err_ddp(&baseline.system, &decomposition.inner, &baseline.inner, &baseline.config))
        .map(|e| e.err)
        .map_err(runtime_err)
}

/// Runs the batch pipeline from RunConfig JSON; returns the report as JSON.
#[pyfunction]
fn run(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config).map_err(value_err)?;
    py.detach(|| run_pipeline(&cfg)).map(|r| r.to_json()).map_err(runtime_err)
}

#[pymodule]
fn polydec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyGridPolicy>()?;
    m.add_class::<PyDdpBaseline>()?;
    m.add_function(wrap_pyfunction!(count_pure, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(err_lqr, m)?)?;
    m.add_function(wrap_pyfunction!(compute_time_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(ddp_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(err_ddp, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
