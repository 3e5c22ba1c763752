//! Python bindings for the wildfire simulator, controllers and training loop.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wildfire_core::aircraft::{Action, AircraftState};
use wildfire_core::dqn::{run_training, select_action_multi, TrainingConfig};
use wildfire_core::env::World;
use wildfire_core::error::Error;
use wildfire_core::fire_sim::{Cell, FireGrid, PropagationParams, Wind};
use wildfire_core::harness::{evaluate, run_episode_with, Policy};
use wildfire_core::neuralnet::{io as weights, QNetwork};
use wildfire_core::rng::rng_for;
use wildfire_core::scenario::{Approach, ControllerSpec, Scenario};
use wildfire_core::sensing::PolarSensor;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn approach(name: &str) -> PyResult<Approach> {
    match name {
        "observation" => Ok(Approach::Observation),
        "belief" => Ok(Approach::Belief),
        other => Err(PyValueError::new_err(format!("unknown approach {other:?}"))),
    }
}

fn action(index: usize) -> PyResult<Action> {
    if index < 2 {
        Ok(Action::from_index(index))
    } else {
        Err(PyValueError::new_err(format!("action must be 0 or 1, got {index}")))
    }
}

/// Episode and learning configuration.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// Small preset that runs in seconds.
    #[staticmethod]
    fn desk() -> Self {
        PyScenario { inner: Scenario::desk() }
    }

    /// Full-size preset.
    #[staticmethod]
    fn full() -> Self {
        PyScenario { inner: Scenario::full() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = Scenario::from_json(text).map_err(py_err)?;
        inner.validate().map_err(py_err)?;
        Ok(PyScenario { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn horizon_steps(&self) -> usize {
        self.inner.horizon_steps()
    }

    #[getter]
    fn aircraft_count(&self) -> usize {
        self.inner.aircraft_count
    }

    #[getter]
    fn grid_shape(&self) -> (usize, usize) {
        (self.inner.grid.width, self.inner.grid.height)
    }
}

/// Fuel and burning state on a square-cell grid.
#[pyclass(name = "FireGrid", from_py_object)]
#[derive(Clone)]
struct PyFireGrid {
    inner: FireGrid,
}

#[pymethods]
impl PyFireGrid {
    #[new]
    #[pyo3(signature = (width, height, cell_size, fuel = 0.0))]
    fn new(width: usize, height: usize, cell_size: f64, fuel: f64) -> PyResult<Self> {
        let mut inner = FireGrid::empty(width, height, cell_size).map_err(py_err)?;
        for y in 0..height {
            for x in 0..width {
                inner.set_fuel(Cell::new(x, y), fuel).map_err(py_err)?;
            }
        }
        Ok(PyFireGrid { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.width(), self.inner.height())
    }

    fn set_fuel(&mut self, x: usize, y: usize, fuel: f64) -> PyResult<()> {
        self.inner.set_fuel(Cell::new(x, y), fuel).map_err(py_err)
    }

    /// Returns whether the cell is burning afterwards.
    fn ignite(&mut self, x: usize, y: usize) -> PyResult<bool> {
        self.inner.ignite(Cell::new(x, y)).map_err(py_err)
    }

    fn fuel(&self, x: usize, y: usize) -> PyResult<f64> {
        let c = Cell::new(x, y);
        if !self.inner.contains(c) {
            return Err(PyValueError::new_err("cell outside the grid"));
        }
        Ok(self.inner.fuel(c))
    }

    fn is_burning(&self, x: usize, y: usize) -> PyResult<bool> {
        let c = Cell::new(x, y);
        if !self.inner.contains(c) {
            return Err(PyValueError::new_err("cell outside the grid"));
        }
        Ok(self.inner.is_burning(c))
    }

    fn burning_count(&self) -> usize {
        self.inner.burning_count()
    }

    /// Row-major burning flags.
    fn burning(&self) -> Vec<bool> {
        self.inner.burning_slice().to_vec()
    }

    #[pyo3(signature = (x, y, alpha = 0.09, wind_direction = 0.0, wind_strength = 0.0))]
    fn ignition_probability(&self, x: usize, y: usize, alpha: f64, wind_direction: f64, wind_strength: f64) -> PyResult<f64> {
        let params = PropagationParams { alpha, ..Default::default() };
        let wind = Wind { direction: wind_direction, strength: wind_strength };
        self.inner.ignition_probability(&params, &wind, Cell::new(x, y)).map_err(py_err)
    }

    /// One synchronous fire step, returned as a new grid.
    #[pyo3(signature = (seed, alpha = 0.09, beta = 1.0, wind_direction = 0.0, wind_strength = 0.0))]
    fn step(&self, seed: u64, alpha: f64, beta: f64, wind_direction: f64, wind_strength: f64) -> PyResult<Self> {
        let params = PropagationParams { alpha, beta, ..Default::default() };
        params.validate().map_err(py_err)?;
        let wind = Wind { direction: wind_direction, strength: wind_strength };
        Ok(PyFireGrid { inner: self.inner.step(&params, &wind, &mut rng_for(seed, 0)) })
    }
}

/// Banked-turn aircraft pose: position (m), heading and bank (rad).
#[pyclass(name = "Aircraft", from_py_object)]
#[derive(Clone, Copy)]
struct PyAircraft {
    inner: AircraftState,
}

#[pymethods]
impl PyAircraft {
    #[new]
    #[pyo3(signature = (x, y, psi, phi = 0.0))]
    fn new(x: f64, y: f64, psi: f64, phi: f64) -> Self {
        PyAircraft { inner: AircraftState::new(x, y, psi, phi) }
    }

    #[getter]
    fn pose(&self) -> (f64, f64, f64, f64) {
        let s = &self.inner;
        (s.x, s.y, s.psi, s.phi)
    }

    /// Action 0 lowers the bank angle by one step, action 1 raises it.
    fn apply_action(&self, action_index: usize) -> PyResult<Self> {
        Ok(PyAircraft { inner: self.inner.apply_action(action(action_index)?) })
    }

    #[pyo3(signature = (dt, speed = 20.0))]
    fn integrate(&self, dt: f64, speed: f64) -> Self {
        PyAircraft { inner: self.inner.integrate(dt, speed) }
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!("Aircraft(x={}, y={}, psi={}, phi={})", s.x, s.y, s.psi, s.phi)
    }
}

/// Polar fire observation: range bins by angle sectors of booleans.
#[pyfunction]
#[pyo3(signature = (grid, aircraft, range_bins = 40, angle_bins = 30))]
fn observe(grid: &PyFireGrid, aircraft: &PyAircraft, range_bins: usize, angle_bins: usize) -> PyResult<Vec<Vec<bool>>> {
    let spec = wildfire_core::sensing::PolarSpec { range_bins, angle_bins, ..Default::default() };
    let sensor = PolarSensor::new(&spec).map_err(py_err)?;
    let obs = sensor.render(&grid.inner, &aircraft.inner);
    Ok((0..range_bins).map(|i| (0..angle_bins).map(|j| obs.get(i, j)).collect()).collect())
}

/// A running episode.
#[pyclass(name = "World")]
struct PyWorld {
    inner: World,
}

#[pymethods]
impl PyWorld {
    #[new]
    fn new(scenario: &PyScenario, seed: u64) -> PyResult<Self> {
        Ok(PyWorld { inner: World::new(&scenario.inner, seed).map_err(py_err)? })
    }

    /// Advances every aircraft by one decision step. Returns
    /// `(newly discovered cells, team reward, done)`.
    fn step(&mut self, actions: Vec<usize>) -> PyResult<(usize, f64, bool)> {
        let actions = actions.into_iter().map(action).collect::<PyResult<Vec<_>>>()?;
        let out = self.inner.step(&actions).map_err(py_err)?;
        Ok((out.discovered, out.score, out.done))
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.inner.step_index()
    }

    fn aircraft(&self) -> Vec<PyAircraft> {
        self.inner.aircraft().iter().map(|&inner| PyAircraft { inner }).collect()
    }

    fn grid(&self) -> PyFireGrid {
        PyFireGrid { inner: self.inner.grid().clone() }
    }

    /// Row-major believed-fire flags.
    fn belief_fire(&self) -> Vec<bool> {
        self.inner.belief().fire_slice().to_vec()
    }

    /// Row-major steps since each cell was last visited, capped at 255.
    fn belief_staleness(&self) -> Vec<u8> {
        self.inner.belief().time_slice().to_vec()
    }
}

/// Q-network loaded from a weight file.
#[pyclass(name = "QNetwork")]
struct PyQNetwork {
    inner: Arc<QNetwork<f32>>,
}

#[pymethods]
impl PyQNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyQNetwork { inner: Arc::new(weights::load(&path).map_err(py_err)?) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        weights::save(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn image_shape(&self) -> [usize; 3] {
        self.inner.spec().image_shape
    }

    /// Greedy action for aircraft `index` of `world`.
    #[pyo3(signature = (world, index, approach_name = "observation"))]
    fn act(&self, world: &PyWorld, index: usize, approach_name: &str) -> PyResult<usize> {
        if index >= world.inner.aircraft().len() {
            return Err(PyValueError::new_err("aircraft index out of range"));
        }
        let input = world.inner.agent_input(index, approach(approach_name)?);
        select_action_multi(&self.inner, &input.image, &input.pairs).map_err(py_err)
    }
}

fn policy(controller: &str, scenario: &Scenario, weights_path: Option<PathBuf>) -> PyResult<Policy> {
    let spec = match (controller, weights_path) {
        ("random", _) => ControllerSpec::Random,
        ("receding-horizon", _) => ControllerSpec::RecedingHorizon,
        ("observation-net", Some(weights)) => ControllerSpec::ObservationNet { weights },
        ("belief-net", Some(weights)) => ControllerSpec::BeliefNet { weights },
        ("observation-net" | "belief-net", None) => return Err(PyValueError::new_err("network controllers need weights")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown controller {other:?}"))),
    };
    Policy::from_spec(&spec, scenario).map_err(py_err)
}

/// Runs one episode and returns its record as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, controller, seed, weights = None))]
fn run_episode(scenario: &PyScenario, controller: &str, seed: u64, weights: Option<PathBuf>) -> PyResult<String> {
    let p = policy(controller, &scenario.inner, weights)?;
    Ok(run_episode_with(&scenario.inner, &p, seed).map_err(py_err)?.to_json())
}

/// Mean and standard error of the team score over seeded episodes.
/// Returns `(mean, stderr, scores)`.
#[pyfunction]
#[pyo3(name = "evaluate", signature = (scenario, controller, episodes, seed, weights = None))]
fn py_evaluate(
    scenario: &PyScenario,
    controller: &str,
    episodes: usize,
    seed: u64,
    weights: Option<PathBuf>,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let p = policy(controller, &scenario.inner, weights)?;
    let e = evaluate(&p, &scenario.inner, episodes, seed).map_err(py_err)?;
    Ok((e.mean, e.stderr, e.scores))
}

/// Trains a network with the desk training preset, optionally overridden by
/// a training JSON. Returns the network and the curve as
/// `(iteration, mean, stderr, epsilon, loss)` tuples.
#[pyfunction]
#[pyo3(signature = (scenario, seed, iterations = None, training_json = None))]
fn train(
    scenario: &PyScenario,
    seed: u64,
    iterations: Option<u64>,
    training_json: Option<&str>,
) -> PyResult<(PyQNetwork, Vec<(u64, f64, f64, f64, f64)>)> {
    let mut cfg = match training_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => TrainingConfig::desk(),
    };
    if let Some(n) = iterations {
        cfg.total_iterations = n;
    }
    let out = run_training(&scenario.inner, &cfg, seed).map_err(py_err)?;
    let curve = out.curve.iter().map(|p| (p.iteration, p.mean_reward, p.stderr, p.epsilon, p.loss)).collect();
    Ok((PyQNetwork { inner: Arc::new(out.network) }, curve))
}

#[pymodule]
fn wildfire_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyFireGrid>()?;
    m.add_class::<PyAircraft>()?;
    m.add_class::<PyWorld>()?;
    m.add_class::<PyQNetwork>()?;
    m.add_function(wrap_pyfunction!(observe, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(py_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
