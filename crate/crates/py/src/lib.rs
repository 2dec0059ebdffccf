//! Python bindings: the acoustic channel, the environment, training and
//! evaluation. Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use auv_hmappo::acoustics::{self, AcousticParams, CovertnessParams};
use auv_hmappo::envsim::{self, LowLevelAction, WorldConfig};
use auv_hmappo::harness::{self, CliOverrides, ExperimentSpec};
use auv_hmappo::hmappo::{self, Delegation, EvalOptions};
use auv_hmappo::ocean::Vec3;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn spec_from(config: Option<&str>, seed: Option<u64>, episodes: Option<usize>, out: Option<PathBuf>) -> PyResult<ExperimentSpec> {
    let cli = CliOverrides {
        seed,
        episodes,
        out,
        ..Default::default()
    };
    harness::parse_config(config.unwrap_or(""), &cli).map_err(value_err)
}

fn parse_policy(name: &str) -> PyResult<Delegation> {
    match name {
        "h-mappo" => Ok(Delegation::Learned),
        "flat-mappo" => Ok(Delegation::All),
        "random" => Ok(Delegation::Random),
        other => Err(PyValueError::new_err(format!(
            "policy must be h-mappo, flat-mappo or random, got {other}"
        ))),
    }
}

#[pyfunction]
fn thorp_absorption(f_khz: f64) -> PyResult<f64> {
    acoustics::thorp_absorption(f_khz).map_err(value_err)
}

/// Path loss at the default acoustic parameters.
#[pyfunction]
fn path_loss(distance: f64) -> PyResult<f64> {
    acoustics::path_loss(distance, &AcousticParams::default()).map_err(value_err)
}

#[pyfunction]
fn channel_gain(distance: f64) -> PyResult<f64> {
    acoustics::channel_gain(distance, &AcousticParams::default()).map_err(value_err)
}

#[pyfunction]
fn noise_power() -> f64 {
    acoustics::noise_power(&AcousticParams::default())
}

#[pyfunction]
fn kl_divergence(gamma_e: f64) -> PyResult<f64> {
    acoustics::kl_divergence(gamma_e).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (kl, epsilon_c = 0.05))]
fn is_covert(kl: f64, epsilon_c: f64) -> bool {
    acoustics::covertness_satisfied(kl, &CovertnessParams { epsilon_c })
}

/// The default experiment document as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    let spec = spec_from(None, None, None, Some("runs".into()))?;
    spec.snapshot_toml(spec.train.seed).map_err(runtime_err)
}

/// The dual-timescale environment. `config` is an experiment TOML document;
/// only its `[world]` table is used.
#[pyclass(unsendable)]
struct Env {
    inner: envsim::Env,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<&str>) -> PyResult<Self> {
        let spec = spec_from(config, None, None, Some("runs".into()))?;
        Ok(Self {
            inner: envsim::Env::new(spec.world).map_err(value_err)?,
        })
    }

    #[getter]
    fn num_auvs(&self) -> usize {
        self.inner.config().num_auvs
    }

    fn reset(&mut self, py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
        let state = self.inner.reset(seed);
        to_py(py, &state)
    }

    fn high_state(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.high_state())
    }

    fn begin_slot(&mut self, py: Python<'_>, selection: Vec<bool>) -> PyResult<Py<PyAny>> {
        let obs = self.inner.begin_slot(&selection).map_err(value_err)?;
        to_py(py, &obs)
    }

    /// `actions` holds one `(power, vx, vy, vz)` tuple per selected AUV.
    fn low_step(&mut self, py: Python<'_>, actions: Vec<(f64, f64, f64, f64)>) -> PyResult<Py<PyAny>> {
        let actions: Vec<LowLevelAction> = actions
            .into_iter()
            .map(|(power, vx, vy, vz)| LowLevelAction {
                power,
                velocity: Vec3::new(vx, vy, vz),
            })
            .collect();
        let step = self.inner.low_step(&actions).map_err(value_err)?;
        to_py(py, &step)
    }

    fn end_slot(&mut self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let out = self.inner.end_slot().map_err(value_err)?;
        to_py(py, &out)
    }

    fn auvs(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.auvs())
    }

    fn energy_ledger(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.energy_ledger())
    }
}

/// Episode-by-episode trainer kept in memory.
#[pyclass(unsendable)]
struct Trainer {
    inner: hmappo::Trainer,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (config = None, seed = 0, episodes = None))]
    fn new(config: Option<&str>, seed: u64, episodes: Option<usize>) -> PyResult<Self> {
        let spec = spec_from(config, Some(seed), episodes, Some("runs".into()))?;
        let inner = hmappo::Trainer::new(spec.world, spec.train).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn episodes_done(&self) -> usize {
        self.inner.episodes_done()
    }

    /// Runs one episode and returns its metrics.
    fn run_episode(&mut self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let m = self.inner.run_episode().map_err(runtime_err)?;
        to_py(py, &m)
    }

    fn buffer_lens(&self) -> (usize, usize) {
        self.inner.buffer_lens()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.checkpoint().save(&path).map_err(runtime_err)
    }

    /// Greedy evaluation of the current policies.
    #[pyo3(signature = (episodes = 10, policy = "h-mappo", seed = 1))]
    fn evaluate(&self, py: Python<'_>, episodes: usize, policy: &str, seed: u64) -> PyResult<Py<PyAny>> {
        let opts = EvalOptions {
            episodes,
            seed,
            delegation: parse_policy(policy)?,
            record_trace: false,
        };
        let (summary, _) =
            hmappo::evaluate(&self.inner.policies(), self.inner.world(), &opts).map_err(runtime_err)?;
        to_py(py, &summary)
    }
}

/// Runs the `train` command and returns the run directories.
#[pyfunction]
#[pyo3(signature = (out, config = None, seed = None, episodes = None))]
fn train(out: PathBuf, config: Option<&str>, seed: Option<u64>, episodes: Option<usize>) -> PyResult<Vec<PathBuf>> {
    let spec = spec_from(config, seed, episodes, Some(out))?;
    let runs = harness::cmd_train(&spec).map_err(runtime_err)?;
    Ok(runs.into_iter().map(|r| r.dir).collect())
}

/// Evaluates a checkpoint file or run directory; returns the summary dict.
#[pyfunction]
#[pyo3(signature = (checkpoint, policy = "h-mappo", episodes = 10, seed = 1))]
fn evaluate(py: Python<'_>, checkpoint: PathBuf, policy: &str, episodes: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let ckpt = harness::load_checkpoint(&checkpoint).map_err(value_err)?;
    let opts = EvalOptions {
        episodes,
        seed,
        delegation: parse_policy(policy)?,
        record_trace: false,
    };
    let (summary, _) = hmappo::evaluate(&ckpt.policies(), &ckpt.world, &opts).map_err(runtime_err)?;
    to_py(py, &summary)
}

/// Default world parameters as a dict.
#[pyfunction]
fn default_world(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &WorldConfig::default())
}

#[pymodule]
fn auv_hmappo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(thorp_absorption, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(channel_gain, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(is_covert, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(default_world, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Env>()?;
    m.add_class::<Trainer>()?;
    Ok(())
}
