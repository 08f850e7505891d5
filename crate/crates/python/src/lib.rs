//! Python bindings for `ebtrain`.
//!
//! Channels are passed as two equal-length sequences: power gains and phase
//! shifts in radians. Algorithms are named `"a1"` or `"a2"`.

use std::collections::HashMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ebtrain::adapt::{self, Algorithm};
use ebtrain::bounds;
use ebtrain::config::KeyValues;
use ebtrain::lab::{self, ExperimentSpec, Figure, ScenarioConfig, Value};
use ebtrain::phasor::{self, FixedPhases, LinkChannel};
use ebtrain::protocols::{self, ParallelPlan, RppPlan, SequentialPlan};
use ebtrain::{Error, PhaseAssignment, RolePartition, SplitPower, SystemConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn or_py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for ebtrain::Result<T> {
    fn or_py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn channels(gains: &[f64], shifts: &[f64]) -> PyResult<Vec<LinkChannel>> {
    if gains.len() != shifts.len() {
        return Err(PyValueError::new_err(format!(
            "{} gains but {} phase shifts",
            gains.len(),
            shifts.len()
        )));
    }
    gains.iter().zip(shifts).map(|(&b, &t)| LinkChannel::new(b, t).or_py()).collect()
}

fn system(m: usize, tx_power: f64) -> PyResult<SystemConfig> {
    SystemConfig::new(m).and_then(|c| c.with_tx_power(tx_power)).or_py()
}

fn algorithm(name: &str) -> PyResult<Algorithm> {
    name.parse().or_py()
}

/// Outcome of a training protocol.
#[pyclass(name = "ProtocolRun", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProtocolRun {
    #[pyo3(get)]
    final_phases: Vec<f64>,
    /// Power at the ER in every training slot.
    #[pyo3(get)]
    trajectory: Vec<f64>,
    #[pyo3(get)]
    final_power: f64,
    #[pyo3(get)]
    optimal_power: f64,
    #[pyo3(get)]
    intervals: usize,
}

#[pymethods]
impl PyProtocolRun {
    #[getter]
    fn efficiency(&self) -> f64 {
        self.final_power / self.optimal_power
    }

    #[getter]
    fn training_slots(&self) -> usize {
        self.trajectory.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ProtocolRun(slots={}, final_power={:e}, efficiency={:.6})",
            self.trajectory.len(),
            self.final_power,
            self.efficiency()
        )
    }
}

impl From<protocols::ProtocolRun> for PyProtocolRun {
    fn from(run: protocols::ProtocolRun) -> Self {
        Self {
            intervals: run.intervals.len(),
            final_phases: run.final_phases.into_vec(),
            trajectory: run.trajectory,
            final_power: run.final_power,
            optimal_power: run.optimal_power,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (gains, shifts, phases, tx_power = 1.0))]
fn harvested_power(gains: Vec<f64>, shifts: Vec<f64>, phases: Vec<f64>, tx_power: f64) -> PyResult<f64> {
    let ch = channels(&gains, &shifts)?;
    let cfg = system(ch.len(), tx_power)?;
    phasor::harvested_power(&ch, &PhaseAssignment::new(phases), &cfg).or_py()
}

#[pyfunction]
#[pyo3(signature = (gains, shifts, tx_power = 1.0))]
fn optimal_power(gains: Vec<f64>, shifts: Vec<f64>, tx_power: f64) -> PyResult<f64> {
    let ch = channels(&gains, &shifts)?;
    phasor::optimal_power(&ch, &system(ch.len(), tx_power)?).or_py()
}

/// Common phase for the `adapting` ETs that maximizes power given the
/// `fixed` phases (ET index to phase) of the others.
#[pyfunction]
fn target_phase(gains: Vec<f64>, shifts: Vec<f64>, adapting: Vec<usize>, fixed: HashMap<usize, f64>) -> PyResult<f64> {
    let ch = channels(&gains, &shifts)?;
    let mut non: Vec<usize> = fixed.keys().copied().collect();
    non.sort_unstable();
    let roles = RolePartition::new(ch.len(), &adapting, &non).or_py()?;
    let fp: FixedPhases = fixed.into_iter().collect();
    SplitPower::new(&ch, &roles, &fp, &system(ch.len(), 1.0)?)
        .and_then(|s| s.target_phase())
        .or_py()
}

/// Run one adaptation interval against `measure(phase) -> power`.
#[pyfunction]
#[pyo3(signature = (measure, windows, bits = 1, algorithm = "a2"))]
fn run_interval<'py>(
    py: Python<'py>,
    measure: Bound<'py, PyAny>,
    windows: usize,
    bits: u32,
    algorithm: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let alg = self::algorithm(algorithm)?;
    let mut failure = None;
    let out = adapt::run_interval(bits, windows, alg, |psi| {
        if failure.is_some() {
            return 0.0;
        }
        match measure.call1((psi,)).and_then(|v| v.extract::<f64>()) {
            Ok(q) => q,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let out = out.or_py()?;
    let d = PyDict::new(py);
    d.set_item("final_phase", out.final_phase)?;
    d.set_item("probes", out.probes)?;
    d.set_item("powers", out.powers)?;
    d.set_item("feedback", out.feedback.iter().map(|f| (f.best_index, f.improved)).collect::<Vec<_>>())?;
    d.set_item("arcs", out.arcs.iter().map(|a| (a.start(), a.length())).collect::<Vec<_>>())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (gains, shifts, slots_per_interval, bits = 1, algorithm = "a2", noise_std = 0.0, seed = 0))]
fn run_sequential(
    gains: Vec<f64>,
    shifts: Vec<f64>,
    slots_per_interval: usize,
    bits: u32,
    algorithm: &str,
    noise_std: f64,
    seed: u64,
) -> PyResult<PyProtocolRun> {
    let ch = channels(&gains, &shifts)?;
    let plan = SequentialPlan::new(ch.len(), slots_per_interval, bits, self::algorithm(algorithm)?)
        .or_py()?
        .with_noise(noise_std, seed);
    protocols::run_sequential(&ch, &plan, &system(ch.len(), 1.0)?).map(Into::into).or_py()
}

#[pyfunction]
#[pyo3(signature = (gains, shifts, adapt_prob, intervals, slots_per_interval, bits = 1, algorithm = "a2", noise_std = 0.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_parallel(
    gains: Vec<f64>,
    shifts: Vec<f64>,
    adapt_prob: f64,
    intervals: usize,
    slots_per_interval: usize,
    bits: u32,
    algorithm: &str,
    noise_std: f64,
    seed: u64,
) -> PyResult<PyProtocolRun> {
    let ch = channels(&gains, &shifts)?;
    let plan = ParallelPlan::new(adapt_prob, intervals, slots_per_interval, bits, self::algorithm(algorithm)?, seed)
        .or_py()?
        .with_noise(noise_std);
    protocols::run_parallel(&ch, &plan, &system(ch.len(), 1.0)?).map(Into::into).or_py()
}

#[pyfunction]
#[pyo3(signature = (gains, shifts, slots, scale = RppPlan::DEFAULT_SCALE, seed = 0))]
fn run_rpp(gains: Vec<f64>, shifts: Vec<f64>, slots: usize, scale: f64, seed: u64) -> PyResult<PyProtocolRun> {
    let ch = channels(&gains, &shifts)?;
    let plan = RppPlan::new(slots, scale, seed).or_py()?;
    protocols::run_rpp(&ch, &plan, &system(ch.len(), 1.0)?).map(Into::into).or_py()
}

#[pyfunction]
#[pyo3(signature = (slots, bits = 1, algorithm = "a2"))]
fn error_bound(slots: usize, bits: u32, algorithm: &str) -> PyResult<f64> {
    adapt::error_bound(self::algorithm(algorithm)?, slots, bits).or_py()
}

#[pyfunction]
#[pyo3(signature = (gains, slots, bits = 1, algorithm = "a2"))]
fn efficiency_lower_bound(gains: Vec<f64>, slots: usize, bits: u32, algorithm: &str) -> PyResult<f64> {
    bounds::efficiency_lower_bound(&gains, slots, bits, self::algorithm(algorithm)?).or_py()
}

#[pyfunction]
#[pyo3(signature = (gains, target, bits = 1, algorithm = "a2"))]
fn required_slots(gains: Vec<f64>, target: f64, bits: u32, algorithm: &str) -> PyResult<f64> {
    bounds::required_slots(&gains, bits, target, self::algorithm(algorithm)?).or_py()
}

#[pyfunction]
fn equal_gain_required_slots(num_ets: usize, target: f64) -> PyResult<f64> {
    bounds::equal_gain_required_slots(num_ets, target).or_py()
}

/// Draw one deployment: returns `(distances, gains, shifts)`.
#[pyfunction]
#[pyo3(signature = (num_ets, seed = 0, trial = 0))]
fn draw_scenario(num_ets: usize, seed: u64, trial: u64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rng = lab::trial_rng(seed, trial);
    let s = lab::draw_scenario(&ScenarioConfig::default().with_ets(num_ets), &mut rng).or_py()?;
    Ok((s.distances.clone(), s.gains(), s.phase_shifts()))
}

/// Run a named experiment. Extra settings use the configuration-file keys.
/// Returns a dict with `columns`, `rows`, `comments` and `csv`.
#[pyfunction]
#[pyo3(signature = (figure, trials = None, seed = 0, settings = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    figure: &str,
    trials: Option<usize>,
    seed: u64,
    settings: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let fig: Figure = figure.parse().or_py()?;
    let mut spec = ExperimentSpec::new(fig).with_seed(seed);
    if let Some(n) = trials {
        spec = spec.with_trials(n);
    }
    if let Some(settings) = settings {
        let mut kv = KeyValues::default();
        for (k, v) in settings {
            kv.insert(k, v);
        }
        spec.apply(&kv).or_py()?;
    }
    let table = py.detach(|| lab::run_experiment(&spec)).or_py()?;
    let rows = table
        .rows
        .iter()
        .map(|row| row.iter().map(|v| value_to_py(py, v)).collect::<PyResult<Vec<_>>>())
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("columns", &table.columns)?;
    d.set_item("rows", rows)?;
    d.set_item("comments", &table.comments)?;
    d.set_item("csv", table.to_csv_string())?;
    Ok(d)
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Int(i) => i.into_pyobject(py)?.into_any().unbind(),
        Value::Float(x) => x.into_pyobject(py)?.into_any().unbind(),
        Value::Text(s) => s.into_pyobject(py)?.into_any().unbind(),
    })
}

#[pymodule]
fn pyebtrain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocolRun>()?;
    m.add_function(wrap_pyfunction!(harvested_power, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_power, m)?)?;
    m.add_function(wrap_pyfunction!(target_phase, m)?)?;
    m.add_function(wrap_pyfunction!(run_interval, m)?)?;
    m.add_function(wrap_pyfunction!(run_sequential, m)?)?;
    m.add_function(wrap_pyfunction!(run_parallel, m)?)?;
    m.add_function(wrap_pyfunction!(run_rpp, m)?)?;
    m.add_function(wrap_pyfunction!(error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(required_slots, m)?)?;
    m.add_function(wrap_pyfunction!(equal_gain_required_slots, m)?)?;
    m.add_function(wrap_pyfunction!(draw_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("RPP_DEFAULT_SCALE", RppPlan::DEFAULT_SCALE)?;
    Ok(())
}
