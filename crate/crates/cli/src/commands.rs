use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use align_rudder::alignment::{progressive_msa, Msa, ScoringMatrix};
use align_rudder::envs::{read_trajectory_csv, write_trajectory_csv, Environment};
use align_rudder::events::io::{read_sequences, write_assignment_csv, write_sequences};
use align_rudder::events::{event_frequencies, map_to_event_runs, EventAlphabet, EventSequence, Trajectory};
use align_rudder::harness::{
    build_scoring, cell_setup, cluster_states, clustering_transitions, curve_episodes_to_threshold, export,
    mann_whitney, run_method, run_pipeline, with_env, write_artifacts, EnvTask, ExperimentConfig, OUTPUT_ROOT_VAR,
};
use align_rudder::learning::Method;
use align_rudder::profile::{build_pssm, column_frequencies, default_pseudocount, Pssm};
use align_rudder::redistribution::{self, fit_redistribution, mean_correction};
use align_rudder::util::derived_rng;
use align_rudder::{Error, Result};

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
    }
    fs::write(&path, body).map_err(|e| with_path(&path, e))?;
    Ok(path)
}

/// `output_dir`, placed under `$ALIGN_RUDDER_OUT` when relative.
pub fn output_root(config: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if config.output_dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(&config.output_dir),
        _ => config.output_dir.clone(),
    }
}

pub fn demos(config: &ExperimentConfig, out: &Path, n: usize, seed: usize) -> Result<Vec<PathBuf>> {
    struct Task<'a>(&'a ExperimentConfig, usize, usize);
    impl EnvTask for Task<'_> {
        type Output = (Vec<Trajectory>, f64);
        fn run<E: Environment>(self, env: &E) -> Result<Self::Output> {
            let setup = cell_setup(env, self.0, self.1, self.2)?;
            Ok((setup.demos, setup.threshold))
        }
    }
    let (trajectories, threshold) = with_env(config, Task(config, n, seed))?;
    println!("{} demonstrations, threshold {threshold}", trajectories.len());
    let dir = out.join("demos");
    trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| write(dir.join(format!("demo{i:03}.csv")), &write_trajectory_csv(t)))
        .collect()
}

/// Trajectory files named directly, plus every `*.csv` inside named
/// directories, in sorted order.
fn trajectory_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| with_path(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidInput("no trajectory files given".into()));
    }
    Ok(files)
}

pub fn cluster(config: &ExperimentConfig, out: &Path, paths: &[PathBuf], seed: u64) -> Result<Vec<PathBuf>> {
    struct Task<'a> {
        config: &'a ExperimentConfig,
        demos: Vec<(String, Trajectory)>,
        seed: u64,
    }
    impl EnvTask for Task<'_> {
        type Output = (String, String);
        fn run<E: Environment>(self, env: &E) -> Result<Self::Output> {
            for (name, d) in &self.demos {
                d.validate(env.n_states())
                    .map_err(|e| Error::InvalidInput(format!("{name}: {e}")))?;
            }
            let trajectories: Vec<Trajectory> = self.demos.iter().map(|(_, d)| d.clone()).collect();
            let mut rng = derived_rng(self.seed, &[]);
            let transitions = clustering_transitions(env, &trajectories, self.config.random_rollouts, &mut rng)?;
            let assignment = cluster_states(env, &transitions, self.config)?;
            let alphabet = EventAlphabet::new(assignment.n_clusters())?;
            let mut sequences = Vec::new();
            for (name, d) in &self.demos {
                let mut s = map_to_event_runs(d, &assignment, &alphabet)?.sequence;
                s.name = name.clone();
                sequences.push(s);
            }
            println!("{} events", alphabet.len());
            Ok((write_assignment_csv(&assignment), write_sequences(&sequences)))
        }
    }
    let mut demos = Vec::new();
    for f in trajectory_files(paths)? {
        let name = f.file_stem().map_or("demo".into(), |s| s.to_string_lossy().into_owned());
        demos.push((name, read_trajectory_csv(&read(&f)?)?));
    }
    let (assignment, sequences) = with_env(config, Task { config, demos, seed })?;
    Ok(vec![
        write(out.join("assignment.csv"), &assignment)?,
        write(out.join("events.fasta"), &sequences)?,
    ])
}

fn alphabet_size(seqs: &[EventSequence]) -> Result<usize> {
    seqs.iter()
        .filter_map(EventSequence::max_event)
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| Error::InvalidInput("no events in the input sequences".into()))
}

pub fn align(config: &ExperimentConfig, out: &Path, sequences: &Path) -> Result<Vec<PathBuf>> {
    let seqs = read_sequences(&read(sequences)?)?;
    let n = EventAlphabet::new(alphabet_size(&seqs)?)?.len();
    let background = event_frequencies(&seqs, n)?;
    let scoring = build_scoring(&background, config)?;
    let msa = progressive_msa(&seqs, &scoring)?;
    println!("{} rows, {} columns, sum-of-pairs score {}", msa.n_rows(), msa.len(), msa.score);
    Ok(vec![
        write(out.join("scoring.csv"), &scoring.to_csv())?,
        write(out.join("msa.fasta"), &msa.to_fasta())?,
    ])
}

pub fn pssm(config: &ExperimentConfig, out: &Path, msa: &Path, scoring: &Path) -> Result<Vec<PathBuf>> {
    let scoring = ScoringMatrix::from_csv(&read(scoring)?)?;
    let msa = Msa::from_fasta(&read(msa)?, &scoring)?;
    let pc = config.pseudocount.unwrap_or_else(|| default_pseudocount(msa.n_rows()));
    let profile = column_frequencies(&msa, scoring.n_events(), pc)?;
    let pssm = build_pssm(&profile, &scoring.background)?;
    Ok(vec![write(out.join("pssm.csv"), &pssm.to_csv())?])
}

pub fn redistribute(out: &Path, pssm: &Path, demos: &Path, sequences: Option<&Path>) -> Result<Vec<PathBuf>> {
    let pssm = Pssm::from_csv(&read(pssm)?)?;
    let demos = read_sequences(&read(demos)?)?;
    let model = fit_redistribution(&demos, &pssm)?;
    println!(
        "scale {}, mean demo correction {:e}",
        model.scale,
        mean_correction(&demos, &model)?
    );
    let queries = match sequences {
        Some(p) => read_sequences(&read(p)?)?,
        None => demos,
    };
    let alphabet = EventAlphabet::new(pssm.n_events())?;
    let dir = out.join("redistribution");
    queries
        .iter()
        .map(|q| {
            let ep = redistribution::redistribute(q, &model, q.source_return)?;
            write(dir.join(format!("{}.csv", q.name)), &ep.to_csv(q, &alphabet))
        })
        .collect()
}

pub fn train(config: &ExperimentConfig, out: &Path, method: &str, n: usize, seed: usize) -> Result<Vec<PathBuf>> {
    struct Task<'a>(&'a ExperimentConfig, Method, usize, usize);
    impl EnvTask for Task<'_> {
        type Output = (String, String, usize, bool);
        fn run<E: Environment>(self, env: &E) -> Result<Self::Output> {
            let Task(config, method, n, seed) = self;
            let setup = cell_setup(env, config, n, seed)?;
            let (curve, q, _) = run_method(env, config, &setup, method)?;
            let t = curve_episodes_to_threshold(&curve, setup.threshold, config.budget)?;
            Ok((curve.to_csv(), q.to_csv(), t.episodes, t.censored))
        }
    }
    let method = Method::parse(method)?;
    let (curve, q, episodes, censored) = with_env(config, Task(config, method, n, seed))?;
    println!(
        "{} episodes to threshold{}",
        episodes,
        if censored { " (censored)" } else { "" }
    );
    let stem = format!("{}_demos{n}_seed{seed}", method.name());
    Ok(vec![
        write(out.join(format!("curve_{stem}.csv")), &curve)?,
        write(out.join(format!("qtable_{stem}.csv")), &q)?,
    ])
}

pub fn experiment(config: &ExperimentConfig, out: &Path, artifacts: bool) -> Result<Vec<PathBuf>> {
    let table = run_pipeline(config)?;
    for s in &table.summaries {
        println!(
            "{:<13} demos={:<4} mean={:<8.1} median={:<8.1} censored={} failed={}",
            s.method.name(),
            s.demos,
            s.mean,
            s.median,
            s.censored,
            s.failed
        );
    }
    let mut written = export(&table, out)?;
    if artifacts {
        written.extend(write_artifacts(&table, out)?);
    }
    Ok(written)
}

fn numbers(path: &Path) -> Result<Vec<f64>> {
    read(path)?
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse { line: 0, msg: format!("{}: bad number {t:?}: {e}", path.display()) })
        })
        .collect()
}

pub fn stats(a: &Path, b: &Path) -> Result<()> {
    let (a, b) = (numbers(a)?, numbers(b)?);
    let t = mann_whitney(&a, &b)?;
    let body = serde_json::json!({
        "n_a": a.len(),
        "n_b": b.len(),
        "u": t.u,
        "p": t.p,
        "p_less": t.p_less,
        "exact": t.exact,
    });
    println!("{body}");
    Ok(())
}
