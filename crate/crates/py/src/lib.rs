//! Python bindings: `import pphpc`.

use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pphpc::bench;
use pphpc::io as formats;
use pphpc::sim::{self, Column, Ruleset};
use pphpc::stats::{self, CompareConfig, Pca};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Model parameters. Construct with keyword arguments or `SimParams.from_values`.
#[pyclass(name = "SimParams", module = "pphpc", from_py_object)]
#[derive(Clone)]
struct PySimParams {
    inner: pphpc::SimParams,
}

#[pymethods]
impl PySimParams {
    #[new]
    #[pyo3(signature = (
        grid_x, grid_y, init_prey, init_predators, iterations, prey_gain, predator_gain,
        prey_loss, predator_loss, prey_repro_threshold, predator_repro_threshold,
        prey_repro_prob, predator_repro_prob, cell_food_restart
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        grid_x: u32,
        grid_y: u32,
        init_prey: u32,
        init_predators: u32,
        iterations: u32,
        prey_gain: u32,
        predator_gain: u32,
        prey_loss: u32,
        predator_loss: u32,
        prey_repro_threshold: u32,
        predator_repro_threshold: u32,
        prey_repro_prob: u32,
        predator_repro_prob: u32,
        cell_food_restart: u32,
    ) -> PyResult<Self> {
        Self::from_values(vec![
            grid_x,
            grid_y,
            init_prey,
            init_predators,
            iterations,
            prey_gain,
            predator_gain,
            prey_loss,
            predator_loss,
            prey_repro_threshold,
            predator_repro_threshold,
            prey_repro_prob,
            predator_repro_prob,
            cell_food_restart,
        ])
    }

    #[staticmethod]
    fn from_values(values: Vec<u32>) -> PyResult<Self> {
        pphpc::SimParams::from_values(&values)
            .map(|inner| PySimParams { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn read(path: std::path::PathBuf) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(value_error)?;
        formats::read_param_file(file)
            .map(|inner| PySimParams { inner })
            .map_err(value_error)
    }

    fn values(&self) -> Vec<u32> {
        self.inner.values().to_vec()
    }

    fn with_iterations(&self, iterations: u32) -> Self {
        PySimParams {
            inner: self.inner.with_iterations(iterations),
        }
    }

    #[getter]
    fn iterations(&self) -> u32 {
        self.inner.iterations
    }

    fn __repr__(&self) -> String {
        format!("SimParams({})", self.inner)
    }
}

/// Output of one run: `iterations + 1` rows of six statistics.
#[pyclass(name = "SimOutput", module = "pphpc", from_py_object)]
#[derive(Clone)]
struct PySimOutput {
    inner: sim::SimOutput,
}

#[pymethods]
impl PySimOutput {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        formats::read_output_csv(text.as_bytes(), None)
            .map(|inner| PySimOutput { inner })
            .map_err(value_error)
    }

    fn to_csv(&self) -> String {
        formats::output_csv_string(&self.inner)
    }

    /// One output series by column name, e.g. `"total_prey"`.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let col = Column::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown column `{name}`")))?;
        Ok(self.inner.column(col))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (params, seed, predation = true))]
fn run_simulation(params: &PySimParams, seed: u64, predation: bool) -> PyResult<PySimOutput> {
    sim::run_simulation_with(&params.inner, seed, Ruleset { predation })
        .map(|inner| PySimOutput { inner })
        .map_err(value_error)
}

#[pyfunction]
fn standardize_series(values: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::standardize_series(&values).map_err(value_error)
}

/// Two-sample energy statistic; rows are observations.
#[pyfunction]
fn energy_statistic(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<f64> {
    stats::energy_statistic(&to_matrix(&x)?, &to_matrix(&y)?).map_err(value_error)
}

/// Returns `(statistic, p_value)`.
#[pyfunction]
#[pyo3(signature = (x, y, n_permutations = 1000, seed = 0))]
fn energy_test(
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    n_permutations: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let test = stats::EnergyTest::new(&to_matrix(&x)?, &to_matrix(&y)?).map_err(value_error)?;
    let p = test.p_value(n_permutations, seed).map_err(value_error)?;
    Ok((test.observed(), p))
}

#[pyfunction]
fn bh_adjust(p_values: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::bh_adjust(&p_values).map_err(value_error)
}

/// Returns `(scores, explained_ratios)` for the fewest components reaching
/// `min_variance`.
#[pyfunction]
#[pyo3(signature = (matrix, min_variance = 0.8))]
fn pca_project(matrix: Vec<Vec<f64>>, min_variance: f64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(min_variance > 0.0 && min_variance <= 1.0) {
        return Err(PyValueError::new_err("min_variance must be in (0, 1]"));
    }
    let pca = Pca::fit(&to_matrix(&matrix)?).map_err(value_error)?;
    let k = pca.components_for(min_variance);
    let scores = pca.scores.columns(0, k).into_owned();
    Ok((from_matrix(&scores), pca.explained_ratios[..k].to_vec()))
}

/// Compares two implementations. `runs_a[i]` and `runs_b[i]` are the runs
/// for parameter set `i`. Returns `(score, [(k, p_raw, p_adjusted, significant)])`.
#[pyfunction]
#[pyo3(signature = (runs_a, runs_b, alpha = 0.01, min_variance = 0.8, n_permutations = 1000, seed = 0))]
fn compare_models(
    runs_a: Vec<Vec<PySimOutput>>,
    runs_b: Vec<Vec<PySimOutput>>,
    alpha: f64,
    min_variance: f64,
    n_permutations: usize,
    seed: u64,
) -> PyResult<(u8, Vec<(usize, f64, f64, bool)>)> {
    let unwrap = |groups: Vec<Vec<PySimOutput>>| -> Vec<Vec<sim::SimOutput>> {
        groups
            .into_iter()
            .map(|g| g.into_iter().map(|o| o.inner).collect())
            .collect()
    };
    let config = CompareConfig {
        alpha,
        min_variance,
        n_permutations,
        seed,
    };
    let result =
        stats::compare_models(&unwrap(runs_a), &unwrap(runs_b), &config).map_err(value_error)?;
    let rows = result
        .paramsets
        .iter()
        .map(|v| (v.test.k, v.test.p_raw, v.p_adjusted, v.significant))
        .collect();
    Ok((result.overall_score, rows))
}

/// Returns `(mean, s_rel_pct, ratio)`; the last two may be `None`.
#[pyfunction]
#[pyo3(signature = (times, reference_mean = None))]
fn summarize_times(
    times: Vec<f64>,
    reference_mean: Option<f64>,
) -> PyResult<(f64, Option<f64>, Option<f64>)> {
    let s = bench::summarize_times(&times, reference_mean).map_err(value_error)?;
    Ok((s.mean, s.s_rel, s.ratio_to_reference))
}

#[pyfunction]
fn success_rate(scores: Vec<u8>) -> PyResult<f64> {
    stats::success_rate(&scores).map_err(value_error)
}

#[pymodule]
#[pyo3(name = "pphpc")]
fn pphpc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimParams>()?;
    m.add_class::<PySimOutput>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(standardize_series, m)?)?;
    m.add_function(wrap_pyfunction!(energy_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(energy_test, m)?)?;
    m.add_function(wrap_pyfunction!(bh_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(pca_project, m)?)?;
    m.add_function(wrap_pyfunction!(compare_models, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_times, m)?)?;
    m.add_function(wrap_pyfunction!(success_rate, m)?)?;
    Ok(())
}
