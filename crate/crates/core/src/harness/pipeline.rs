use rand::Rng;

use super::config::{ExperimentConfig, ScoringScheme};
use crate::alignment::{
    build_scoring_matrix_karlin, build_scoring_matrix_simple, progressive_msa, Msa, ScoringMatrix,
};
use crate::envs::{generate_demonstrations, optimal_policy, run_from, Environment};
use crate::error::{invalid, Result};
use crate::events::{
    affinity_propagation, build_successor_representation, event_frequencies, map_to_event_runs, merge_clusters,
    successor_similarity, ApConfig, ClusterAssignment, EventAlphabet, EventBackground, EventSequence, Trajectory,
};
use crate::learning::RudderContext;
use crate::matrix::{euclidean, Matrix};
use crate::profile::{build_pssm, column_frequencies, default_pseudocount, ProfileModel, Pssm};
use crate::redistribution::{fit_redistribution, RedistributionModel};

/// Every intermediate product of the five redistribution steps.
#[derive(Debug, Clone)]
pub struct ModelArtifacts {
    pub assignment: ClusterAssignment,
    pub alphabet: EventAlphabet,
    pub sequences: Vec<EventSequence>,
    pub background: EventBackground,
    pub scoring: ScoringMatrix,
    pub msa: Msa,
    pub profile: ProfileModel,
    pub pssm: Pssm,
    pub model: RedistributionModel,
}

impl ModelArtifacts {
    pub fn rudder_context(&self) -> RudderContext {
        RudderContext {
            model: self.model.clone(),
            assignment: self.assignment.clone(),
            alphabet: self.alphabet,
        }
    }
}

/// Transitions over cluster keys from the demos plus random-policy
/// rollouts started in random states.
pub fn clustering_transitions<E: Environment, R: Rng + ?Sized>(
    env: &E,
    demos: &[Trajectory],
    random_rollouts: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for d in demos {
        out.extend(d.transitions().into_iter().map(|(a, b)| (env.cluster_key(a), env.cluster_key(b))));
    }
    let n_actions = env.n_actions();
    for _ in 0..random_rollouts {
        let start = env.random_state(rng);
        let (traj, _) = run_from(env, start, rng, |_, r| r.random_range(0..n_actions))?;
        out.extend(traj.transitions().into_iter().map(|(a, b)| (env.cluster_key(a), env.cluster_key(b))));
    }
    Ok(out)
}

/// Successor representation over cluster keys, affinity propagation on the
/// keys that occur in `transitions`, merging down to `max_clusters`, and
/// expansion to observed states. Keys never seen join the cluster whose
/// center row is nearest to theirs.
pub fn cluster_states<E: Environment>(
    env: &E,
    transitions: &[(usize, usize)],
    config: &ExperimentConfig,
) -> Result<ClusterAssignment> {
    let n_keys = env.n_cluster_keys();
    let sr = build_successor_representation(n_keys, transitions, config.sr_learning_rate, config.sr_discount, config.sr_sweeps)?;
    let mut seen = vec![false; n_keys];
    for &(a, b) in transitions {
        seen[a] = true;
        seen[b] = true;
    }
    let keys: Vec<usize> = (0..n_keys).filter(|&k| seen[k]).collect();
    let embedding = Matrix::from_fn(keys.len(), n_keys, |i, j| sr.matrix[(keys[i], j)]);
    let sub = crate::events::SuccessorMatrix {
        matrix: embedding.clone(),
        learning_rate: sr.learning_rate,
        discount: sr.discount,
    };
    let ap_config = ApConfig {
        preference: config.ap_preference,
        ..ApConfig::default()
    };
    let ap = affinity_propagation(&successor_similarity(&sub), &ap_config)?;
    let merged = merge_clusters(&ap, &embedding, config.max_clusters)?;
    let mut labels = vec![0; n_keys];
    for (i, &k) in keys.iter().enumerate() {
        labels[k] = merged.labels[i];
    }
    for k in (0..n_keys).filter(|&k| !seen[k]) {
        labels[k] = merged
            .centers
            .iter()
            .enumerate()
            .map(|(c, &ci)| (c, euclidean(sr.matrix.row(k), embedding.row(ci))))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map_or(0, |(c, _)| c);
    }
    let centers = merged.centers.iter().map(|&ci| keys[ci]).collect();
    let by_key = ClusterAssignment::new(labels, centers)?;
    by_key.expand(env.n_states(), |s| env.cluster_key(s))
}

pub fn build_scoring(background: &EventBackground, config: &ExperimentConfig) -> Result<ScoringMatrix> {
    let s = match config.scoring {
        ScoringScheme::Simple { alpha } => build_scoring_matrix_simple(background, alpha)?,
        ScoringScheme::Karlin { epsilon, off_diagonal } => build_scoring_matrix_karlin(background, epsilon, off_diagonal)?,
    };
    s.with_gaps(config.gap_open, config.gap_extend)
}

/// Steps (II) to (V) for demos already mapped to events.
pub fn build_model_from_sequences(
    assignment: ClusterAssignment,
    alphabet: EventAlphabet,
    sequences: Vec<EventSequence>,
    config: &ExperimentConfig,
) -> Result<ModelArtifacts> {
    let background = event_frequencies(&sequences, alphabet.len())?;
    let scoring = build_scoring(&background, config)?;
    let msa = progressive_msa(&sequences, &scoring)?;
    let pc = config.pseudocount.unwrap_or_else(|| default_pseudocount(msa.n_rows()));
    let profile = column_frequencies(&msa, alphabet.len(), pc)?;
    let pssm = build_pssm(&profile, &background)?;
    let model = fit_redistribution(&sequences, &pssm)?;
    Ok(ModelArtifacts {
        assignment,
        alphabet,
        sequences,
        background,
        scoring,
        msa,
        profile,
        pssm,
        model,
    })
}

/// The full five-step construction from demonstrations.
pub fn build_model<E: Environment, R: Rng + ?Sized>(
    env: &E,
    demos: &[Trajectory],
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<ModelArtifacts> {
    if demos.len() < 2 {
        return invalid("alignment needs at least 2 demonstrations");
    }
    let transitions = clustering_transitions(env, demos, config.random_rollouts, rng)?;
    let assignment = cluster_states(env, &transitions, config)?;
    let alphabet = EventAlphabet::new(assignment.n_clusters())?;
    let sequences = demos
        .iter()
        .enumerate()
        .map(|(i, d)| {
            map_to_event_runs(d, &assignment, &alphabet).map(|r| {
                let mut s = r.sequence;
                s.name = format!("demo{i}");
                s
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_model_from_sequences(assignment, alphabet, sequences, config)
}

/// Demonstrations from the optimal policy with the configured exploration.
pub fn demonstrations<E: Environment, R: Rng + ?Sized>(
    env: &E,
    n: usize,
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let policy = optimal_policy(env)?;
    generate_demonstrations(env, &policy, config.demo_exploration, n, rng)
}
