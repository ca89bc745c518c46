//! Python bindings for `optcar`.
//!
//! Problems are loaded from the same JSON files as the command-line tool;
//! reports come back as objects with read-only attributes, or as the JSON
//! text the CLI writes.

use optcar::io::{parse_problem, parse_problem_str, write_trajectory_csv, Problem, RunOutput};
use optcar::{Halfspace, Polyhedron, RefinementReport, Trajectory};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(optcar_py, OptcarError, PyException, "Raised for any failure inside optcar.");

fn to_py(e: optcar::Error) -> PyErr {
    OptcarError::new_err(e.to_string())
}

/// A validated synthesis problem.
#[pyclass(name = "Problem", frozen, module = "optcar_py")]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        parse_problem(path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_problem_str(text, "<string>").map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.inner.x0.clone()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.system.state_dim()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.system.input_dim()
    }

    #[getter]
    fn num_pieces(&self) -> usize {
        self.inner.system.pieces.len()
    }

    #[getter]
    fn propositions(&self) -> Vec<String> {
        self.inner.system.proposition_names()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Replays `inputs` from `x0` (the problem's start by default).
    #[pyo3(signature = (inputs, x0=None))]
    fn simulate(&self, inputs: Vec<Vec<f64>>, x0: Option<Vec<f64>>) -> PyResult<PyTrajectory> {
        let start = x0.unwrap_or_else(|| self.inner.x0.clone());
        optcar::simulate(&self.inner.system, &start, &inputs)
            .map(|inner| PyTrajectory { inner })
            .map_err(to_py)
    }

    /// Runs the refinement loop; `iterations` overrides the file's count.
    #[pyo3(signature = (iterations=None))]
    fn synthesize(&self, py: Python<'_>, iterations: Option<usize>) -> PyResult<PyRun> {
        let mut config = self.inner.config.clone();
        if let Some(k) = iterations {
            config.max_iterations = k;
        }
        let p = &self.inner;
        let reports = py
            .detach(|| optcar::optcar(&p.system, &p.automaton, &p.x0, &config))
            .map_err(to_py)?;
        Ok(PyRun {
            inner: RunOutput {
                problem: p.name.clone(),
                seed: 0,
                reports,
            },
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, state_dim={}, pieces={})",
            self.inner.name,
            self.inner.system.state_dim(),
            self.inner.system.pieces.len()
        )
    }
}

/// A concrete run: states, inputs and per-step costs.
#[pyclass(name = "Trajectory", frozen, module = "optcar_py")]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states.clone()
    }

    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        self.inner.inputs.clone()
    }

    #[getter]
    fn pieces(&self) -> Vec<usize> {
        self.inner.pieces.clone()
    }

    #[getter]
    fn stage_costs(&self) -> Vec<f64> {
        self.inner.stage_costs.clone()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        self.inner.total_cost
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &self.inner).map_err(to_py)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    fn __len__(&self) -> usize {
        self.inner.states.len()
    }
}

/// One refinement iteration.
#[pyclass(name = "Report", frozen, module = "optcar_py")]
struct PyReport {
    inner: RefinementReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn iteration(&self) -> usize {
        self.inner.iteration
    }

    /// Grid widths as exact fractions, e.g. `"1/10"`.
    #[getter]
    fn epsilon(&self) -> Vec<String> {
        self.inner.epsilon.iter().map(|r| r.to_string()).collect()
    }

    #[getter]
    fn state_cells(&self) -> Vec<usize> {
        self.inner.state_cells.clone()
    }

    #[getter]
    fn abstract_cost(&self) -> f64 {
        self.inner.abstract_cost
    }

    #[getter]
    fn concrete_cost(&self) -> Option<f64> {
        self.inner.concrete_cost
    }

    #[getter]
    fn winning(&self) -> bool {
        self.inner.winning
    }

    #[getter]
    fn trajectory(&self) -> Option<PyTrajectory> {
        self.inner.trajectory.clone().map(|inner| PyTrajectory { inner })
    }

    #[getter]
    fn solve_seconds(&self) -> f64 {
        self.inner.timings.solve
    }
}

/// The reports of one `synthesize` call.
#[pyclass(name = "Run", frozen, module = "optcar_py")]
struct PyRun {
    inner: RunOutput,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn reports(&self) -> Vec<PyReport> {
        self.inner
            .reports
            .iter()
            .map(|r| PyReport { inner: r.clone() })
            .collect()
    }

    /// The same JSON the command-line tool writes to `report.json`.
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.reports.len()
    }
}

/// Solves a game file; returns `(cost, value_iterations)`.
#[pyfunction]
fn solve_game(path: &str) -> PyResult<(f64, usize)> {
    let (game, start) = optcar::io::load_game(path).map_err(to_py)?;
    let solution = optcar::solve_finite_game(&game, start).map_err(to_py)?;
    Ok((solution.cost, solution.iterations))
}

/// Maximizes `objective . x` subject to `a x <= b`; returns `(value, x)`.
#[pyfunction]
fn lp_maximize(objective: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    if a.len() != b.len() || a.iter().any(|row| row.len() != objective.len()) {
        return Err(OptcarError::new_err("constraint rows must match the objective length"));
    }
    let rows = a.into_iter().zip(b).map(|(n, o)| Halfspace::new(n, o)).collect();
    let poly = Polyhedron::new(objective.len(), rows);
    let sol = optcar::lp_maximize(&objective, &poly).map_err(to_py)?;
    Ok((sol.value, sol.argmax))
}

#[pymodule]
fn optcar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(solve_game, m)?)?;
    m.add_function(wrap_pyfunction!(lp_maximize, m)?)?;
    m.add("OptcarError", m.py().get_type::<OptcarError>())?;
    Ok(())
}
