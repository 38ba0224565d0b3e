//! Python bindings. Configs are passed as the same `key = value` text the
//! CLI reads, plus a list of `key=value` overrides.

use align_rudder::alignment::progressive_msa;
use align_rudder::envs::Environment;
use align_rudder::events::{event_frequencies, EventSequence};
use align_rudder::harness::{
    build_model, build_scoring, cell_setup, mann_whitney as mw, run_pipeline, with_env, EnvTask, ExperimentConfig,
    ModelArtifacts,
};
use align_rudder::redistribution::redistribute;
use align_rudder::util::derived_rng;
use align_rudder::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(align_rudder_py, AlignRudderError, PyException, "Raised with args (category, message).");

fn to_py(e: Error) -> PyErr {
    AlignRudderError::new_err((e.category().as_str(), e.to_string()))
}

fn config(text: &str, overrides: Option<Vec<String>>) -> PyResult<ExperimentConfig> {
    let mut c = ExperimentConfig::from_toml_str(text).map_err(to_py)?;
    for o in overrides.unwrap_or_default() {
        c.apply_override(&o).map_err(to_py)?;
    }
    c.validate().map_err(to_py)?;
    Ok(c)
}

fn sequences(letters: &[String], returns: &[f64]) -> PyResult<Vec<EventSequence>> {
    if letters.len() != returns.len() {
        return Err(to_py(Error::InvalidInput(format!(
            "{} sequences but {} returns",
            letters.len(),
            returns.len()
        ))));
    }
    letters
        .iter()
        .zip(returns)
        .enumerate()
        .map(|(i, (l, &r))| EventSequence::from_letters(format!("seq{i}"), l, r).map_err(to_py))
        .collect()
}

/// Runs the configured experiment grid. Returns one dict per
/// (method, demo count, seed) row.
#[pyfunction]
#[pyo3(signature = (config_text = "", overrides = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_text: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(config_text, overrides)?;
    let table = py.detach(|| run_pipeline(&cfg)).map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method.name())?;
            d.set_item("demos", r.demos)?;
            d.set_item("seed", r.seed)?;
            d.set_item("episodes", r.episodes)?;
            d.set_item("censored", r.censored)?;
            d.set_item("threshold", r.threshold)?;
            d.set_item("error", r.error.as_deref())?;
            Ok(d)
        })
        .collect()
}

/// Mann-Whitney U test; returns `(u, p, p_less, exact)`.
#[pyfunction]
fn mann_whitney(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64, bool)> {
    let t = mw(&a, &b).map_err(to_py)?;
    Ok((t.u, t.p, t.p_less, t.exact))
}

/// Aligns letter-encoded event sequences under the configured scoring
/// scheme and returns the alignment as FASTA.
#[pyfunction]
#[pyo3(signature = (letters, returns, config_text = "", overrides = None))]
fn align(letters: Vec<String>, returns: Vec<f64>, config_text: &str, overrides: Option<Vec<String>>) -> PyResult<String> {
    let cfg = config(config_text, overrides)?;
    let seqs = sequences(&letters, &returns)?;
    let n = seqs
        .iter()
        .filter_map(EventSequence::max_event)
        .max()
        .map_or(1, |m| m + 1);
    let bg = event_frequencies(&seqs, n).map_err(to_py)?;
    let scoring = build_scoring(&bg, &cfg).map_err(to_py)?;
    Ok(progressive_msa(&seqs, &scoring).map_err(to_py)?.to_fasta())
}

/// A redistribution model fitted on the demonstrations of one
/// (demo count, seed) cell.
#[pyclass(module = "align_rudder_py", frozen)]
struct Model {
    artifacts: ModelArtifacts,
    demo_rewards: Vec<Vec<f64>>,
    threshold: f64,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (demos, seed = 0, config_text = "", overrides = None))]
    fn fit(py: Python<'_>, demos: usize, seed: usize, config_text: &str, overrides: Option<Vec<String>>) -> PyResult<Self> {
        struct Task<'a>(&'a ExperimentConfig, usize, usize);
        impl EnvTask for Task<'_> {
            type Output = Model;
            fn run<E: Environment>(self, env: &E) -> align_rudder::Result<Model> {
                let setup = cell_setup(env, self.0, self.1, self.2)?;
                let artifacts = build_model(env, &setup.demos, self.0, &mut derived_rng(setup.model_seed, &[]))?;
                let ctx = artifacts.rudder_context();
                let demo_rewards = setup
                    .demos
                    .iter()
                    .map(|d| ctx.step_rewards(d))
                    .collect::<align_rudder::Result<_>>()?;
                Ok(Model {
                    artifacts,
                    demo_rewards,
                    threshold: setup.threshold,
                })
            }
        }
        let cfg = config(config_text, overrides)?;
        py.detach(|| with_env(&cfg, Task(&cfg, demos, seed))).map_err(to_py)
    }

    #[getter]
    fn n_events(&self) -> usize {
        self.artifacts.alphabet.len()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Letter-encoded event sequences of the demonstrations.
    #[getter]
    fn sequences(&self) -> Vec<String> {
        self.artifacts.sequences.iter().map(EventSequence::letters).collect()
    }

    #[getter]
    fn msa_fasta(&self) -> String {
        self.artifacts.msa.to_fasta()
    }

    #[getter]
    fn scoring_csv(&self) -> String {
        self.artifacts.scoring.to_csv()
    }

    #[getter]
    fn pssm_csv(&self) -> String {
        self.artifacts.pssm.to_csv()
    }

    /// Per-step redistributed rewards of each demonstration.
    #[getter]
    fn demo_rewards(&self) -> Vec<Vec<f64>> {
        self.demo_rewards.clone()
    }

    /// Redistributes `ret` over a letter-encoded event sequence; returns
    /// `(per-event rewards, correction)`.
    fn redistribute(&self, letters: &str, ret: f64) -> PyResult<(Vec<f64>, f64)> {
        let seq = EventSequence::from_letters("query", letters, ret).map_err(to_py)?;
        let ep = redistribute(&seq, &self.artifacts.model, ret).map_err(to_py)?;
        Ok((ep.rewards, ep.correction))
    }
}

#[pymodule]
fn align_rudder_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AlignRudderError", m.py().get_type::<AlignRudderError>())?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    Ok(())
}
