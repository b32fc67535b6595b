//! Python bindings: graphs move across as `(n, r, edges)` or JSON-lines text, and
//! certificates come back as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use refab::exactdecomp::DEFAULT_BUDGET;
use refab::pipeline::{decompose, PipelineConfig, Strategy};
use refab::refinery::export::export_refiner;
use refab::refinery::omni::{build_omni_absorber, OmniConfig};
use refab::refinery::{verify_omni_absorber, VerifyConfig};
use refab::rmh::{build_rmh, verify_rmh as rmh_check};
use refab::{MultiHypergraph, SearchOutcome, Vertex};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// An r-uniform multi-hypergraph with instance ids 0, 1, ... in edge order.
#[pyclass(name = "Hypergraph", module = "refab_py")]
struct PyHypergraph {
    inner: MultiHypergraph,
}

#[pymethods]
impl PyHypergraph {
    #[new]
    fn new(n: u32, r: usize, edges: Vec<Vec<Vertex>>) -> PyResult<Self> {
        Ok(Self { inner: MultiHypergraph::from_supports(n, r, edges).map_err(value_err)? })
    }

    #[staticmethod]
    fn complete(n: u32, r: usize) -> Self {
        Self { inner: MultiHypergraph::complete(n, r) }
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Ok(Self { inner: MultiHypergraph::parse(text).map_err(value_err)? })
    }

    fn to_jsonl(&self) -> String {
        self.inner.serialize()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    fn __len__(&self) -> usize {
        self.inner.e()
    }

    fn edges(&self) -> Vec<Vec<Vertex>> {
        self.inner.instances().map(|(_, v)| v.to_vec()).collect()
    }

    fn degree(&self, s: Vec<Vertex>) -> usize {
        self.inner.degree(&s)
    }

    fn delta(&self) -> usize {
        self.inner.delta()
    }

    fn link(&self, s: Vec<Vertex>) -> PyResult<Self> {
        Ok(Self { inner: self.inner.link(&s).map_err(value_err)? })
    }

    fn is_divisible(&self, q: usize) -> PyResult<bool> {
        Ok(refab::is_divisible(&self.inner, q).map_err(value_err)?.divisible)
    }

    fn __repr__(&self) -> String {
        format!("Hypergraph(n={}, r={}, e={})", self.inner.n(), self.inner.r(), self.inner.e())
    }
}

#[pyfunction]
fn modulus_m(q: usize, r: usize) -> PyResult<u64> {
    refab::modulus_m(q, r).map_err(value_err)
}

/// Clique blocks of an exact decomposition, or None when the search proves there is none.
#[pyfunction]
#[pyo3(signature = (graph, q, budget = DEFAULT_BUDGET))]
fn find_decomposition(graph: &PyHypergraph, q: usize, budget: u64) -> PyResult<Option<Vec<Vec<Vertex>>>> {
    match refab::find_decomposition(&graph.inner, q, budget).map_err(value_err)? {
        SearchOutcome::Found(d) => Ok(Some(d.cliques)),
        SearchOutcome::Infeasible(_) => Ok(None),
        SearchOutcome::Indeterminate { nodes } => Err(runtime_err(format!("budget exhausted after {nodes} nodes"))),
    }
}

#[pyfunction]
fn verify_decomposition(graph: &PyHypergraph, q: usize, blocks: Vec<Vec<Vertex>>) -> PyResult<bool> {
    let d = refab::pipeline::decomposition_from_cliques(&graph.inner, &blocks);
    Ok(d.is_ok_and(|d| refab::verify_decomposition(&graph.inner, q, &d, &graph.inner.iid_set())))
}

/// A verified K_q^r-decomposition of K_n^r from the pipeline.
#[pyfunction]
#[pyo3(signature = (n, q = 3, r = 2, strategy = "hybrid", seed = 1))]
fn decompose_complete(n: u32, q: usize, r: usize, strategy: &str, seed: u64) -> PyResult<Vec<Vec<Vertex>>> {
    let strategy: Strategy = strategy.parse().map_err(value_err)?;
    let cfg = PipelineConfig { q, r, strategy, seed, ..PipelineConfig::default() };
    let g = MultiHypergraph::complete(n, r);
    let run = decompose(&g, q, &cfg).map_err(|e| match e {
        refab::pipeline::PipelineError::NotDivisible(_) => value_err(e),
        e => runtime_err(e),
    })?;
    Ok(run.decomposition.cliques)
}

/// The rainbow matching hypergraph on inputs 0..m as JSON, with vertex roles.
#[pyfunction]
fn rmh_json(q: usize, m: usize) -> PyResult<String> {
    let xs: Vec<Vertex> = (0..m as Vertex).collect();
    let inst = build_rmh(&xs, q, m as Vertex).map_err(value_err)?;
    Ok(inst.to_json().to_string())
}

#[pyfunction]
fn verify_rmh(q: usize, m: usize) -> PyResult<bool> {
    let xs: Vec<Vertex> = (0..m as Vertex).collect();
    let inst = build_rmh(&xs, q, m as Vertex).map_err(value_err)?;
    rmh_check(&inst, 20).map_err(value_err)
}

/// Builds an omni-absorber of `x` inside `host`, verifies it, and returns
/// `{"audit", "verify", "certificate"}` as JSON.
#[pyfunction]
#[pyo3(signature = (host, x, q = 3, seed = 1))]
fn omni_absorber_json(host: &PyHypergraph, x: &PyHypergraph, q: usize, seed: u64) -> PyResult<String> {
    let cfg = OmniConfig { seed, ..OmniConfig::default() };
    let built = build_omni_absorber(&host.inner, &x.inner, q, &cfg).map_err(runtime_err)?;
    let vcfg = VerifyConfig::default();
    let rep = verify_omni_absorber(&built.omni, &vcfg);
    let cert = export_refiner(built.omni.as_refiner(), &vcfg).map_err(runtime_err)?;
    let value = serde_json::json!({ "audit": built.audit, "verify": rep, "certificate": cert });
    Ok(value.to_string())
}

#[pymodule]
fn refab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHypergraph>()?;
    m.add_function(wrap_pyfunction!(modulus_m, m)?)?;
    m.add_function(wrap_pyfunction!(find_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(verify_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_complete, m)?)?;
    m.add_function(wrap_pyfunction!(rmh_json, m)?)?;
    m.add_function(wrap_pyfunction!(verify_rmh, m)?)?;
    m.add_function(wrap_pyfunction!(omni_absorber_json, m)?)?;
    Ok(())
}
