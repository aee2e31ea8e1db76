//! Python bindings: programs, the solver, logic tests, queries,
//! explanations and replayed loop runs. Structured results come back as
//! plain dicts and lists.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use logic_critic::actor::{PromptAssets, ReplayActor};
use logic_critic::benchmark::{load_folio as load_folio_file, run_benchmark};
use logic_critic::explain::{explain_entailment, minimal_unsat_core as core_of, render_feedback, ExplainError};
use logic_critic::harness::{parse_tests as parse_test_doc, run_suite_with, HarnessOptions};
use logic_critic::literal::Literal;
use logic_critic::orchestrator::{run_problem as run_loop, LoopConfig, Problem};
use logic_critic::program::{parse_program, render_program, splice, LogicProgram};
use logic_critic::query::{evaluate as evaluate_plan, parse_query as parse_plan, EvalError};
use logic_critic::solver::{ConsequenceMode, Solver, SolverConfig, DEFAULT_MODEL_CAP};

create_exception!(logic_critic_py, SolverError, PyRuntimeError);
create_exception!(logic_critic_py, ActorError, PyRuntimeError);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_error(e: impl std::fmt::Display) -> PyErr {
    SolverError::new_err(e.to_string())
}

/// Serializes through JSON so Python receives builtin dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_literal(text: &str) -> PyResult<Literal> {
    text.parse().map_err(value_error)
}

#[pyclass(name = "Program", frozen, module = "logic_critic_py")]
struct PyProgram {
    inner: LogicProgram,
}

#[pymethods]
impl PyProgram {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyProgram { inner: parse_program(text).map_err(value_error)? })
    }

    #[getter]
    fn rule_ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_string).collect()
    }

    /// `(id, text)` pairs in program order.
    fn rules(&self) -> Vec<(String, String)> {
        self.inner.rules().iter().map(|r| (r.id.clone(), r.text.clone())).collect()
    }

    #[pyo3(signature = (include_ids = false))]
    fn render(&self, include_ids: bool) -> String {
        render_program(&self.inner, include_ids)
    }

    #[pyo3(signature = (add_facts = Vec::new(), remove_ids = Vec::new()))]
    fn splice(&self, add_facts: Vec<String>, remove_ids: Vec<String>) -> PyResult<Self> {
        let facts = add_facts.iter().map(|f| parse_literal(f)).collect::<PyResult<Vec<_>>>()?;
        let remove: BTreeSet<String> = remove_ids.into_iter().collect();
        Ok(PyProgram { inner: splice(&self.inner, &facts, &remove).map_err(value_error)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Program({} rules)", self.inner.len())
    }
}

#[pyclass(name = "Solver", frozen, module = "logic_critic_py")]
struct PySolver {
    inner: Solver,
}

#[pymethods]
impl PySolver {
    /// `command` defaults to the discovered solver; `model_cap` 0 means all
    /// answer sets.
    #[new]
    #[pyo3(signature = (command = None, model_cap = DEFAULT_MODEL_CAP, timeout_secs = 10.0))]
    fn new(command: Option<Vec<String>>, model_cap: usize, timeout_secs: f64) -> PyResult<Self> {
        if !timeout_secs.is_finite() || timeout_secs <= 0.0 {
            return Err(value_error("timeout_secs must be positive"));
        }
        let mut config = SolverConfig { model_cap, timeout: Duration::from_secs_f64(timeout_secs), ..SolverConfig::default() };
        if let Some(c) = command {
            if c.is_empty() {
                return Err(value_error("command is empty"));
            }
            config.command = c;
        }
        Ok(PySolver { inner: Solver::new(config) })
    }

    /// Returns `{"status", "answer_sets", "truncated"}`.
    #[pyo3(signature = (program, max_models = 0))]
    fn solve(&self, py: Python<'_>, program: &str, max_models: usize) -> PyResult<Py<PyAny>> {
        let result = py.detach(|| self.inner.solve(program, max_models)).map_err(solver_error)?;
        to_py(py, &result)
    }

    /// `mode` is `"cautious"` or `"brave"`; `None` when there is no answer set.
    fn consequences(&self, py: Python<'_>, program: &str, mode: &str) -> PyResult<Option<Vec<String>>> {
        let mode = match mode {
            "cautious" => ConsequenceMode::Cautious,
            "brave" => ConsequenceMode::Brave,
            other => return Err(value_error(format!("unknown mode `{other}`"))),
        };
        let set = py.detach(|| self.inner.consequences(program, mode)).map_err(solver_error)?;
        Ok(set.map(|s| s.iter().map(Literal::to_string).collect()))
    }

    fn diagnostics(&self, py: Python<'_>, program: &str) -> PyResult<Py<PyAny>> {
        let errors = py.detach(|| self.inner.diagnostics(program)).map_err(solver_error)?;
        to_py(py, &errors)
    }
}

/// Parses and normalizes a JSON test document.
#[pyfunction]
fn parse_tests(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &parse_test_doc(text).map_err(value_error)?)
}

/// Runs a JSON test document; returns the suite report.
#[pyfunction]
#[pyo3(signature = (program, tests, solver, evidence = true))]
fn run_tests(py: Python<'_>, program: &PyProgram, tests: &str, solver: &PySolver, evidence: bool) -> PyResult<Py<PyAny>> {
    let tests = parse_test_doc(tests).map_err(value_error)?;
    let report = py.detach(|| run_suite_with(&program.inner, &tests, &solver.inner, HarnessOptions { evidence }));
    to_py(py, &report)
}

/// Critic feedback text for a JSON test document.
#[pyfunction]
fn feedback(py: Python<'_>, program: &PyProgram, tests: &str, solver: &PySolver) -> PyResult<String> {
    let tests = parse_test_doc(tests).map_err(value_error)?;
    let report = py.detach(|| run_suite_with(&program.inner, &tests, &solver.inner, HarnessOptions::default()));
    Ok(render_feedback(&report, &[]))
}

/// Canonical rendering of a structured query.
#[pyfunction]
fn parse_query(text: &str) -> PyResult<String> {
    Ok(parse_plan(text).map_err(value_error)?.to_string())
}

/// Returns `{"value", "basis", "note"}`.
#[pyfunction]
fn evaluate(py: Python<'_>, program: &PyProgram, query: &str, solver: &PySolver) -> PyResult<Py<PyAny>> {
    let plan = parse_plan(query).map_err(value_error)?;
    match py.detach(|| evaluate_plan(&program.inner, &plan, &solver.inner)) {
        Ok(v) => to_py(py, &v),
        Err(e @ (EvalError::ProgramUnsatisfiable | EvalError::Undecided)) => Err(value_error(e)),
        Err(e) => Err(solver_error(e)),
    }
}

/// Minimal rule set entailing `literal`.
#[pyfunction]
fn explain(py: Python<'_>, program: &PyProgram, literal: &str, solver: &PySolver) -> PyResult<Py<PyAny>> {
    let lit = parse_literal(literal)?;
    match py.detach(|| explain_entailment(&program.inner, &lit, &solver.inner)) {
        Ok(e) => to_py(py, &e),
        Err(e @ ExplainError::NotEntailed(_)) => Err(value_error(e)),
        Err(e) => Err(solver_error(e)),
    }
}

#[pyfunction]
fn minimal_unsat_core(py: Python<'_>, program: &PyProgram, solver: &PySolver) -> PyResult<Vec<String>> {
    match py.detach(|| core_of(&program.inner, &BTreeSet::new(), &solver.inner)) {
        Ok(core) => Ok(core),
        Err(e @ ExplainError::NotUnsat) => Err(value_error(e)),
        Err(e) => Err(solver_error(e)),
    }
}

#[pyfunction]
fn load_folio(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &load_folio_file(Path::new(path)).map_err(value_error)?)
}

/// Runs the self-correction loop with replayed Actor responses from
/// `replay_dir/<problem_id>/<iteration>.txt`.
#[pyfunction]
#[pyo3(signature = (problem_id, premises, conclusion, replay_dir, max_iterations = 4))]
fn run_problem(
    py: Python<'_>,
    problem_id: &str,
    premises: Vec<String>,
    conclusion: &str,
    replay_dir: &str,
    max_iterations: usize,
) -> PyResult<Py<PyAny>> {
    let problem = Problem { id: problem_id.to_string(), premises, conclusion: conclusion.to_string() };
    let config = LoopConfig { max_iterations, ..LoopConfig::default() };
    let actor = ReplayActor::new(replay_dir);
    let outcome = py
        .detach(|| run_loop(&problem, &actor, &PromptAssets::embedded(), &config, &config.solver(None)))
        .map_err(value_error)?;
    to_py(py, &outcome)
}

/// Benchmarks a FOLIO-style file against replayed responses; returns the
/// report.
#[pyfunction]
#[pyo3(signature = (problems_path, replay_dir, workers = 1))]
fn benchmark(py: Python<'_>, problems_path: &str, replay_dir: &str, workers: usize) -> PyResult<Py<PyAny>> {
    let problems = load_folio_file(Path::new(problems_path)).map_err(value_error)?;
    let actor = ReplayActor::new(replay_dir);
    let config = LoopConfig::default();
    let (report, outcomes) = py
        .detach(|| run_benchmark(&problems, &actor, &PromptAssets::embedded(), &config, &config.solver(None), workers))
        .map_err(value_error)?;
    let actor_errors: BTreeMap<String, String> = outcomes
        .iter()
        .filter_map(|o| o.iterations.last().and_then(|r| r.actor_error.clone()).map(|e| (o.problem_id.clone(), e)))
        .collect();
    if !actor_errors.is_empty() && actor_errors.len() == outcomes.len() {
        return Err(ActorError::new_err(format!("every problem failed in the actor: {actor_errors:?}")));
    }
    to_py(py, &report)
}

#[pymodule]
fn logic_critic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_class::<PySolver>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("ActorError", m.py().get_type::<ActorError>())?;
    m.add_function(wrap_pyfunction!(parse_tests, m)?)?;
    m.add_function(wrap_pyfunction!(run_tests, m)?)?;
    m.add_function(wrap_pyfunction!(feedback, m)?)?;
    m.add_function(wrap_pyfunction!(parse_query, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_unsat_core, m)?)?;
    m.add_function(wrap_pyfunction!(load_folio, m)?)?;
    m.add_function(wrap_pyfunction!(run_problem, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
