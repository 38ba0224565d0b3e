//! Experiment orchestration: seeded (method, demo count, seed) cells run in
//! parallel, episodes-to-threshold metrics, rank-sum tests and CSV export.

mod config;
mod export;
mod metrics;
mod pipeline;
mod stats;

use rand::RngCore;
use rayon::prelude::*;

pub use config::{EnvKind, ExperimentConfig, ScoringScheme};
pub use export::{export, write_artifacts, RAW_FILE, SUMMARY_FILE};
pub use metrics::{
    curve_episodes_to_threshold, detection_rate, episodes_to_threshold, key_event_detection_rate,
    uncorrected_step_rewards, ThresholdResult,
};
pub use pipeline::{
    build_model, build_model_from_sequences, build_scoring, cluster_states, clustering_transitions, demonstrations,
    ModelArtifacts,
};
pub use stats::{mann_whitney, mann_whitney_exact, mann_whitney_normal, mann_whitney_u, wilcoxon_rank_sum, MannWhitney};

use crate::envs::{Environment, KeyChestEnv, RoomsEnv};
use crate::error::Result;
use crate::events::Trajectory;
use crate::learning::{train, LearningCurve, Method, QTable, TrainSchedule};
use crate::util::derived_rng;

/// Environment variable naming the root directory for relative output paths.
pub const OUTPUT_ROOT_VAR: &str = "ALIGN_RUDDER_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub demos: usize,
    pub seed: usize,
    /// `None` when a component failed; see `error`.
    pub episodes: Option<usize>,
    pub censored: bool,
    pub threshold: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub demos: usize,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub censored: usize,
    pub failed: usize,
}

/// Align-RUDDER against one baseline at one demo count.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub demos: usize,
    pub baseline: Method,
    pub test: MannWhitney,
}

/// Serialized intermediate products of one (demo count, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellArtifacts {
    pub demos: usize,
    pub seed: usize,
    pub msa_fasta: String,
    pub scoring_csv: String,
    pub pssm_csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<Summary>,
    pub comparisons: Vec<Comparison>,
    pub artifacts: Vec<CellArtifacts>,
    pub eval_every: usize,
    pub budget: usize,
    pub env: EnvKind,
    pub slip: f64,
}

impl ResultTable {
    pub fn row(&self, method: Method, demos: usize, seed: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.demos == demos && r.seed == seed)
    }

    pub fn summary(&self, method: Method, demos: usize) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method && s.demos == demos)
    }

    pub fn comparison(&self, demos: usize, baseline: Method) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.demos == demos && c.baseline == baseline)
    }

    /// Episodes-to-threshold of successful runs, ordered by seed.
    pub fn episodes(&self, method: Method, demos: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.demos == demos)
            .filter_map(|r| r.episodes.map(|e| e as f64))
            .collect()
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// Work that is generic over the environment type. See [`with_env`].
pub trait EnvTask {
    type Output;
    fn run<E: Environment>(self, env: &E) -> Result<Self::Output>;
}

/// Builds the configured environment and hands it to `task`.
pub fn with_env<T: EnvTask>(config: &ExperimentConfig, task: T) -> Result<T::Output> {
    match config.env {
        EnvKind::FourRooms => task.run(&RoomsEnv::four_rooms(config.slip)?.with_observation(config.observation)),
        EnvKind::EightRooms => task.run(&RoomsEnv::eight_rooms(config.slip)?.with_observation(config.observation)),
        EnvKind::KeyChest => task.run(&KeyChestEnv::default()),
    }
}

/// Runs every (demo count, seed) cell for the configured environment.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ResultTable> {
    struct Pipeline<'a>(&'a ExperimentConfig);
    impl EnvTask for Pipeline<'_> {
        type Output = ResultTable;
        fn run<E: Environment>(self, env: &E) -> Result<ResultTable> {
            run_on(env, self.0)
        }
    }
    config.validate()?;
    with_env(config, Pipeline(config))
}

struct CellOutput {
    rows: Vec<ResultRow>,
    artifacts: Option<CellArtifacts>,
}

fn failed_rows(config: &ExperimentConfig, demos: usize, seed: usize, msg: &str) -> Vec<ResultRow> {
    config
        .methods
        .iter()
        .map(|&method| ResultRow {
            method,
            demos,
            seed,
            episodes: None,
            censored: false,
            threshold: f64::NAN,
            error: Some(msg.to_string()),
        })
        .collect()
}

/// What every method in one (demo count, seed) cell shares.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub demos: Vec<Trajectory>,
    /// `threshold_fraction` times the mean demonstration return.
    pub threshold: f64,
    pub model_seed: u64,
    pub train_seed: u64,
}

/// Demonstrations, threshold and seeds of one cell. Everything is derived
/// from `(master_seed, demos_n, seed)`, so a single cell can be rerun
/// outside an experiment with identical results.
pub fn cell_setup<E: Environment>(env: &E, config: &ExperimentConfig, demos_n: usize, seed: usize) -> Result<CellSetup> {
    let mut rng = derived_rng(config.master_seed, &[demos_n as u64, seed as u64]);
    let demos = demonstrations(env, demos_n, config, &mut rng)?;
    let mean_return = demos.iter().map(|d| d.terminal_return()).sum::<f64>() / demos.len() as f64;
    Ok(CellSetup {
        demos,
        threshold: config.threshold_fraction * mean_return,
        model_seed: rng.next_u64(),
        train_seed: rng.next_u64(),
    })
}

/// Trains one method of one cell; Align-RUDDER builds its model first.
pub fn run_method<E: Environment>(
    env: &E,
    config: &ExperimentConfig,
    setup: &CellSetup,
    method: Method,
) -> Result<(LearningCurve, QTable, Option<ModelArtifacts>)> {
    let model = match method {
        Method::AlignRudder => Some(build_model(env, &setup.demos, config, &mut derived_rng(setup.model_seed, &[]))?),
        _ => None,
    };
    let ctx = model.as_ref().map(ModelArtifacts::rudder_context);
    let (curve, q) = train(env, &config.learner(method), ctx.as_ref(), &setup.demos, schedule(config, setup), setup.train_seed)?;
    Ok((curve, q, model))
}

fn schedule(config: &ExperimentConfig, setup: &CellSetup) -> TrainSchedule {
    TrainSchedule {
        budget: config.budget,
        eval_every: config.eval_every,
        stop_at: Some(setup.threshold),
    }
}

fn run_cell<E: Environment>(env: &E, config: &ExperimentConfig, demos_n: usize, seed: usize) -> CellOutput {
    let setup = match cell_setup(env, config, demos_n, seed) {
        Ok(s) => s,
        Err(e) => {
            return CellOutput {
                rows: failed_rows(config, demos_n, seed, &e.to_string()),
                artifacts: None,
            }
        }
    };
    let CellSetup {
        ref demos,
        threshold,
        model_seed,
        train_seed,
    } = setup;
    let model = config
        .methods
        .contains(&Method::AlignRudder)
        .then(|| build_model(env, demos, config, &mut derived_rng(model_seed, &[])).map_err(|e| e.to_string()));
    let artifacts = match &model {
        Some(Ok(m)) => Some(CellArtifacts {
            demos: demos_n,
            seed,
            msa_fasta: m.msa.to_fasta(),
            scoring_csv: m.scoring.to_csv(),
            pssm_csv: m.pssm.to_csv(),
        }),
        _ => None,
    };
    let context = match &model {
        Some(Ok(m)) => Some(m.rudder_context()),
        _ => None,
    };
    let schedule = schedule(config, &setup);

    let rows = config
        .methods
        .par_iter()
        .map(|&method| {
            let outcome = match (&model, method) {
                (Some(Err(e)), Method::AlignRudder) => Err(e.clone()),
                _ => {
                    let ctx = if method == Method::AlignRudder { context.as_ref() } else { None };
                    train(env, &config.learner(method), ctx, demos, schedule, train_seed)
                        .and_then(|(curve, _)| curve_episodes_to_threshold(&curve, threshold, config.budget))
                        .map_err(|e| e.to_string())
                }
            };
            match outcome {
                Ok(t) => ResultRow {
                    method,
                    demos: demos_n,
                    seed,
                    episodes: Some(t.episodes),
                    censored: t.censored,
                    threshold,
                    error: None,
                },
                Err(e) => ResultRow {
                    method,
                    demos: demos_n,
                    seed,
                    episodes: None,
                    censored: false,
                    threshold,
                    error: Some(e),
                },
            }
        })
        .collect();
    CellOutput { rows, artifacts }
}

fn run_on<E: Environment>(env: &E, config: &ExperimentConfig) -> Result<ResultTable> {
    let cells: Vec<(usize, usize)> = config
        .demo_counts
        .iter()
        .flat_map(|&d| (0..config.seeds).map(move |s| (d, s)))
        .collect();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(d, s)| run_cell(env, config, d, s))
        .collect();

    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        artifacts.extend(out.artifacts);
    }
    let key = |m: Method| Method::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.demos, key(r.method), r.seed));

    let mut table = ResultTable {
        rows,
        summaries: Vec::new(),
        comparisons: Vec::new(),
        artifacts,
        eval_every: config.eval_every,
        budget: config.budget,
        env: config.env,
        slip: config.slip,
    };
    for &demos in &config.demo_counts {
        for &method in &config.methods {
            let mut eps = table.episodes(method, demos);
            eps.sort_by(f64::total_cmp);
            let cell = table.rows.iter().filter(|r| r.method == method && r.demos == demos);
            table.summaries.push(Summary {
                method,
                demos,
                n: eps.len(),
                mean: if eps.is_empty() {
                    f64::NAN
                } else {
                    eps.iter().sum::<f64>() / eps.len() as f64
                },
                median: median(&eps),
                censored: cell.clone().filter(|r| r.censored).count(),
                failed: cell.filter(|r| r.error.is_some()).count(),
            });
        }
        if !config.methods.contains(&Method::AlignRudder) {
            continue;
        }
        let ours = table.episodes(Method::AlignRudder, demos);
        for &baseline in config.methods.iter().filter(|&&m| m != Method::AlignRudder) {
            let theirs = table.episodes(baseline, demos);
            if ours.is_empty() || theirs.is_empty() {
                continue;
            }
            let test = mann_whitney(&ours, &theirs)?;
            table.comparisons.push(Comparison { demos, baseline, test });
        }
    }
    Ok(table)
}
