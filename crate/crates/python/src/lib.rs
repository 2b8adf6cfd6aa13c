//! Python bindings: the learning-rate memory, the optimizers over named
//! parameter groups, the Rosenbrock objective and the experiment runner.

use lrmem::harness::{self, ExperimentPlan, OptimizerKind, OptimizerSettings};
use lrmem::models::rosenbrock_eval;
use lrmem::optim::{MetaOptimizer, Optimizer as _};
use lrmem::{GroupShape, LearningRateMemory, MemorySnapshot, ParamSet};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Memory", module = "lrmem_py", from_py_object)]
#[derive(Clone)]
struct PyMemory(LearningRateMemory);

#[pymethods]
impl PyMemory {
    #[new]
    #[pyo3(signature = (count, clip_bound, eta_init, overlap = 1.0))]
    fn new(count: usize, clip_bound: f64, eta_init: f64, overlap: f64) -> PyResult<Self> {
        LearningRateMemory::new(count, clip_bound, eta_init, overlap).map(PyMemory).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let snap = MemorySnapshot::from_json(text).map_err(err)?;
        LearningRateMemory::restore(&snap).map(PyMemory).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.snapshot().to_json().map_err(err)
    }

    fn predict(&self, z: f64) -> f64 {
        self.0.predict_rate(z)
    }

    fn rates(&self) -> Vec<f64> {
        self.0.rates().to_vec()
    }

    fn set_rates(&mut self, rates: Vec<f64>) -> PyResult<()> {
        self.0.set_rates(&rates).map_err(err)
    }

    fn centers(&self) -> Vec<f64> {
        self.0.centers().to_vec()
    }

    #[getter]
    fn width(&self) -> f64 {
        self.0.width()
    }

    #[getter]
    fn clip_bound(&self) -> f64 {
        self.0.clip_bound()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

enum Inner {
    Meta(MetaOptimizer),
    Plain(Box<dyn lrmem::optim::Optimizer>),
}

/// Steps dictionaries of named parameter groups in place of a framework
/// optimizer. Group order is fixed at construction.
#[pyclass(name = "Optimizer", module = "lrmem_py", unsendable)]
struct PyOptimizer {
    inner: Inner,
    shapes: Vec<GroupShape>,
}

fn param_set(shapes: &[GroupShape], values: &Bound<'_, PyDict>) -> PyResult<ParamSet> {
    let mut set = ParamSet::new();
    for s in shapes {
        let item = values
            .get_item(&s.name)?
            .ok_or_else(|| PyKeyError::new_err(format!("missing group `{}`", s.name)))?;
        set.push(s.name.clone(), item.extract::<Vec<f64>>()?);
    }
    Ok(set)
}

#[pymethods]
impl PyOptimizer {
    #[new]
    #[pyo3(signature = (groups, kind = "MetaGD", eta = 0.001, xi = 0.005, memory_size = 100, clip = 10.0, overlap = 1.0))]
    fn new(
        groups: Vec<(String, usize)>,
        kind: &str,
        eta: f64,
        xi: f64,
        memory_size: usize,
        clip: f64,
        overlap: f64,
    ) -> PyResult<Self> {
        let kind: OptimizerKind = kind.parse().map_err(err)?;
        let settings = OptimizerSettings { xi, memory_size, clip, overlap, ..OptimizerSettings::new(kind, eta) };
        settings.validate().map_err(err)?;
        let shapes: Vec<GroupShape> = groups.into_iter().map(|(name, dim)| GroupShape { name, dim }).collect();
        let inner = match settings.meta_config() {
            Some(cfg) => Inner::Meta(MetaOptimizer::new(cfg, &shapes).map_err(err)?),
            None => {
                let zeros = ParamSet::zeros_like(&shapes);
                Inner::Plain(settings.build(&zeros, None).map_err(err)?)
            }
        };
        Ok(PyOptimizer { inner, shapes })
    }

    /// Returns the updated parameters as a new dictionary.
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        params: &Bound<'py, PyDict>,
        grads: &Bound<'py, PyDict>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut p = param_set(&self.shapes, params)?;
        let g = param_set(&self.shapes, grads)?;
        match &mut self.inner {
            Inner::Meta(o) => o.step(&mut p, &g),
            Inner::Plain(o) => o.step(&mut p, &g),
        }
        .map_err(err)?;
        let out = PyDict::new(py);
        for group in p.groups() {
            out.set_item(&group.name, group.values.clone())?;
        }
        Ok(out)
    }

    /// The memory of one group, or `None` for optimizers without one.
    fn memory(&self, group: &str) -> PyResult<Option<PyMemory>> {
        match &self.inner {
            Inner::Meta(o) => o
                .memory(group)
                .map(|m| Some(PyMemory(m.clone())))
                .ok_or_else(|| PyKeyError::new_err(format!("unknown group `{group}`"))),
            Inner::Plain(_) => Ok(None),
        }
    }

    fn groups(&self) -> Vec<String> {
        self.shapes.iter().map(|s| s.name.clone()).collect()
    }
}

/// Value and gradient of the Rosenbrock function at `(x, y)`.
#[pyfunction]
fn rosenbrock(x: f64, y: f64) -> (f64, (f64, f64)) {
    let (v, g) = rosenbrock_eval([x, y]);
    let flat = g.flatten();
    (v, (flat[0], flat[1]))
}

/// Runs a TOML plan and returns the summary as JSON text; with `out_dir`
/// the full report is written there as well.
#[pyfunction]
#[pyo3(signature = (plan_toml, out_dir = None))]
fn run_experiment(py: Python<'_>, plan_toml: &str, out_dir: Option<String>) -> PyResult<String> {
    let plan = ExperimentPlan::from_toml_str(plan_toml).map_err(err)?;
    let report = py.detach(|| harness::run_experiment(&plan)).map_err(err)?;
    if let Some(dir) = out_dir {
        harness::write_report(&report, dir).map_err(err)?;
    }
    serde_json::to_string(&report.summary()).map_err(err)
}

/// The built-in Rosenbrock plan as TOML, a starting point for custom plans.
#[pyfunction]
#[pyo3(signature = (kind = "MetaGD", runs = 2))]
fn rosenbrock_plan(kind: &str, runs: usize) -> PyResult<String> {
    let kind: OptimizerKind = kind.parse().map_err(err)?;
    let s = harness::suites::rosenbrock_settings(kind);
    Ok(harness::suites::rosenbrock_plan(s, runs).to_toml_string())
}

#[pymodule]
pub fn lrmem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMemory>()?;
    m.add_class::<PyOptimizer>()?;
    m.add_function(wrap_pyfunction!(rosenbrock, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(rosenbrock_plan, m)?)?;
    Ok(())
}
