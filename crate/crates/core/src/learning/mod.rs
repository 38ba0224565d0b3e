//! Tabular learners: Align-RUDDER's direct estimation of Q from the
//! redistributed reward, and the BC+Q and SQIL baselines.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::envs::Environment;
use crate::error::{invalid, Result};
use crate::events::{map_to_event_runs, ClusterAssignment, EventAlphabet, Trajectory};
use crate::matrix::Matrix;
use crate::redistribution::{redistribute, step_rewards, RedistributionModel};

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub q: Matrix,
    pub counts: Vec<u64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            q: Matrix::zeros(n_states, n_actions),
            counts: vec![0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.q.rows()
    }

    pub fn n_actions(&self) -> usize {
        self.q.cols()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[(s, a)]
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions() + a]
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, s: usize) -> usize {
        let row = self.q.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn touch(&mut self, s: usize, a: usize) {
        let n = self.n_actions();
        self.counts[s * n + a] += 1;
    }

    /// CSV `state,action,q,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action,q,count\n");
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                let _ = writeln!(out, "{s},{a},{},{}", self.get(s, a), self.count(s, a));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    AlignRudder,
    BcQ,
    Sqil,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::AlignRudder, Method::BcQ, Method::Sqil];

    pub fn name(self) -> &'static str {
        match self {
            Method::AlignRudder => "align-rudder",
            Method::BcQ => "bc-q",
            Method::Sqil => "sqil",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "align-rudder" | "align_rudder" => Ok(Method::AlignRudder),
            "bc-q" | "bcq" | "bc_q" => Ok(Method::BcQ),
            "sqil" => Ok(Method::Sqil),
            other => invalid(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub discount: f64,
    pub bc_noise_mean: f64,
    pub bc_noise_std: f64,
    pub eval_episodes: usize,
}

impl LearnerConfig {
    /// Defaults: lr 0.1 for Align-RUDDER and 0.01 for the Q-learning
    /// baselines, epsilon 0.2, undiscounted except for SQIL.
    pub fn for_method(method: Method) -> Self {
        let (learning_rate, discount) = match method {
            Method::AlignRudder => (0.1, 1.0),
            Method::BcQ => (0.01, 1.0),
            // a constant +1 on absorbing demo steps diverges without discounting
            Method::Sqil => (0.01, 0.99),
        };
        Self {
            method,
            learning_rate,
            epsilon: 0.2,
            discount,
            bc_noise_mean: 0.0,
            bc_noise_std: 0.1,
            eval_episodes: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return invalid(format!("learning rate {} not in (0, 1]", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid(format!("epsilon {} not in [0, 1]", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return invalid(format!("discount {} not in [0, 1]", self.discount));
        }
        if !(self.bc_noise_std >= 0.0) {
            return invalid(format!("noise std {} must be >= 0", self.bc_noise_std));
        }
        if self.eval_episodes == 0 {
            return invalid("need at least one evaluation episode");
        }
        Ok(())
    }
}

/// Behavioral-cloning initialization. A demo-visited state gets
/// `0.5 + 0.5 * freq(a)` for each demo action `a`; every other entry is
/// drawn from `Normal(mean, std)` in row-major order.
pub fn bc_initialize<R: Rng + ?Sized>(
    q: &mut QTable,
    demos: &[Trajectory],
    mean: f64,
    std: f64,
    rng: &mut R,
) -> Result<()> {
    if !(std >= 0.0 && std.is_finite()) {
        return invalid(format!("noise std {std} must be finite and >= 0"));
    }
    let (ns, na) = (q.n_states(), q.n_actions());
    let mut freq = vec![0u64; ns * na];
    for d in demos {
        for st in &d.steps {
            if st.state >= ns || st.action >= na {
                return invalid(format!("demo pair ({}, {}) outside the table", st.state, st.action));
            }
            freq[st.state * na + st.action] += 1;
        }
    }
    let normal = Normal::new(mean, std).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    for s in 0..ns {
        let row = &freq[s * na..(s + 1) * na];
        let total: u64 = row.iter().sum();
        for a in 0..na {
            q.q[(s, a)] = if row[a] > 0 {
                0.5 + 0.5 * row[a] as f64 / total as f64
            } else if std == 0.0 {
                mean
            } else {
                normal.sample(rng)
            };
        }
    }
    Ok(())
}

/// `Q(s,a) += lr * (r - Q(s,a))`.
pub fn rudder_q_update(q: &mut QTable, s: usize, a: usize, reward: f64, lr: f64) {
    let v = q.q[(s, a)];
    q.q[(s, a)] = v + lr * (reward - v);
    q.touch(s, a);
}

/// One Q-learning backup.
#[allow(clippy::too_many_arguments)]
pub fn q_learning_update(q: &mut QTable, s: usize, a: usize, r: f64, next: usize, done: bool, lr: f64, discount: f64) {
    let target = if done { r } else { r + discount * q.max_value(next) };
    let v = q.q[(s, a)];
    q.q[(s, a)] = v + lr * (target - v);
    q.touch(s, a);
}

/// `(state, action, next_state, done)`.
pub type Transition = (usize, usize, usize, bool);

pub fn demo_transitions(demos: &[Trajectory]) -> Vec<Transition> {
    let mut out = Vec::new();
    for d in demos {
        let states: Vec<usize> = d.states().collect();
        let last = d.len() - 1;
        for (t, st) in d.steps.iter().enumerate() {
            out.push((st.state, st.action, states[t + 1], t == last));
        }
    }
    out
}

/// SQIL in tabular form: the agent transition is backed up with reward 0,
/// then one uniformly drawn demo transition with reward 1.
pub fn sqil_update<R: Rng + ?Sized>(
    q: &mut QTable,
    agent: Transition,
    demo_buffer: &[Transition],
    lr: f64,
    discount: f64,
    rng: &mut R,
) -> Result<()> {
    if demo_buffer.is_empty() {
        return invalid("empty demonstration buffer");
    }
    let (s, a, n, d) = agent;
    q_learning_update(q, s, a, 0.0, n, d, lr, discount);
    let (s, a, n, d) = demo_buffer[rng.random_range(0..demo_buffer.len())];
    q_learning_update(q, s, a, 1.0, n, d, lr, discount);
    Ok(())
}

pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions())
    } else {
        q.greedy(s)
    }
}

/// What Align-RUDDER needs to redistribute an agent episode.
#[derive(Debug, Clone)]
pub struct RudderContext {
    pub model: RedistributionModel,
    pub assignment: ClusterAssignment,
    pub alphabet: EventAlphabet,
}

impl RudderContext {
    /// Per-step redistributed rewards of a finished episode, with the
    /// correction added to the last step.
    pub fn step_rewards(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let runs = map_to_event_runs(traj, &self.assignment, &self.alphabet)?;
        let ep = redistribute(&runs.sequence, &self.model, traj.terminal_return())?;
        step_rewards(&runs, &ep, traj.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    /// `(training episodes completed, mean greedy evaluation return)`.
    pub points: Vec<(usize, f64)>,
    pub episodes_run: usize,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,eval_return\n");
        for (e, r) in &self.points {
            let _ = writeln!(out, "{e},{r}");
        }
        out
    }
}

/// Mean return of greedy rollouts.
pub fn evaluate<E: Environment, R: Rng + ?Sized>(env: &E, q: &QTable, episodes: usize, rng: &mut R) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let (traj, _) = crate::envs::run_episode(env, rng, |s, _| q.greedy(s))?;
        total += traj.terminal_return();
    }
    Ok(total / episodes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub budget: usize,
    pub eval_every: usize,
    /// Stop once an evaluation reaches this return.
    pub stop_at: Option<f64>,
}

/// Trains a fresh BC-initialized Q-table. Evaluation runs before training
/// and after every `eval_every` episodes on its own random stream.
pub fn train<E: Environment>(
    env: &E,
    config: &LearnerConfig,
    rudder: Option<&RudderContext>,
    demos: &[Trajectory],
    schedule: TrainSchedule,
    seed: u64,
) -> Result<(LearningCurve, QTable)> {
    config.validate()?;
    if schedule.budget == 0 || schedule.eval_every == 0 {
        return invalid("budget and evaluation cadence must be positive");
    }
    if config.method == Method::AlignRudder && rudder.is_none() {
        return invalid("Align-RUDDER needs a redistribution model");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let mut q = QTable::zeros(env.n_states(), env.n_actions());
    bc_initialize(&mut q, demos, config.bc_noise_mean, config.bc_noise_std, &mut rng)?;
    let buffer = demo_transitions(demos);
    if config.method == Method::Sqil && buffer.is_empty() {
        return invalid("SQIL needs demonstrations");
    }

    let mut points = vec![(0, evaluate(env, &q, config.eval_episodes, &mut eval_rng)?)];
    let reached = |v: f64| schedule.stop_at.is_some_and(|t| v >= t);
    if reached(points[0].1) {
        return Ok((LearningCurve { points, episodes_run: 0 }, q));
    }
    let (lr, gamma) = (config.learning_rate, config.discount);
    let mut episodes_run = 0;
    for episode in 1..=schedule.budget {
        let mut state = env.reset(&mut rng);
        let mut steps = Vec::with_capacity(env.horizon());
        loop {
            let s = env.observe(&state);
            let a = epsilon_greedy(&q, s, config.epsilon, &mut rng);
            let (r, done) = env.step(&mut state, a, &mut rng)?;
            let next = env.observe(&state);
            match config.method {
                Method::BcQ => q_learning_update(&mut q, s, a, r, next, done, lr, gamma),
                Method::Sqil => sqil_update(&mut q, (s, a, next, done), &buffer, lr, gamma, &mut rng)?,
                Method::AlignRudder => {}
            }
            steps.push(crate::events::Step {
                state: s,
                action: a,
                reward: r,
            });
            if done {
                break;
            }
        }
        if let Some(ctx) = rudder.filter(|_| config.method == Method::AlignRudder) {
            let traj = Trajectory::new(steps, env.observe(&state))?;
            let rewards = ctx.step_rewards(&traj)?;
            for (st, r) in traj.steps.iter().zip(rewards) {
                rudder_q_update(&mut q, st.state, st.action, r, lr);
            }
        }
        episodes_run = episode;
        if episode % schedule.eval_every == 0 {
            let v = evaluate(env, &q, config.eval_episodes, &mut eval_rng)?;
            points.push((episode, v));
            if reached(v) {
                break;
            }
        }
    }
    Ok((LearningCurve { points, episodes_run }, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Step;
    use crate::util::derived_rng;

    fn demo(pairs: &[(usize, usize)]) -> Trajectory {
        let steps = pairs
            .iter()
            .map(|&(state, action)| Step {
                state,
                action,
                reward: 0.0,
            })
            .collect();
        Trajectory::new(steps, 0).unwrap()
    }

    #[test]
    fn bc_reproduces_demo_majority() {
        let mut q = QTable::zeros(3, 4);
        let d = demo(&[(0, 3), (0, 3), (0, 0), (0, 3), (1, 2)]);
        bc_initialize(&mut q, &[d], 0.0, 0.0, &mut derived_rng(1, &[])).unwrap();
        assert_eq!(q.greedy(0), 3);
        assert_eq!(q.greedy(1), 2);
        assert_eq!(q.q.row(2), &[0.0; 4]);
        assert_eq!(q.get(0, 1), 0.0);
    }

    #[test]
    fn bc_noise_is_seeded() {
        let d = demo(&[(0, 1)]);
        let run = || {
            let mut q = QTable::zeros(5, 4);
            bc_initialize(&mut q, &[d.clone()], 0.0, 0.1, &mut derived_rng(2, &[])).unwrap();
            q
        };
        assert_eq!(run(), run());
        assert!(bc_initialize(&mut QTable::zeros(1, 1), &[], 0.0, -1.0, &mut derived_rng(0, &[])).is_err());
    }

    #[test]
    fn rudder_update_decays_geometrically() {
        let mut q = QTable::zeros(1, 1);
        rudder_q_update(&mut q, 0, 0, 1.0, 0.1);
        assert!((q.get(0, 0) - 0.1).abs() < 1e-15);
        let mut q = QTable::zeros(1, 1);
        for k in 1..=50 {
            rudder_q_update(&mut q, 0, 0, 2.0, 0.1);
            let closed = 2.0 * (1.0 - 0.9f64.powi(k));
            assert!((q.get(0, 0) - closed).abs() < 1e-12);
        }
        assert_eq!(q.count(0, 0), 50);
    }

    #[test]
    fn q_learning_terminal_backup() {
        let mut q = QTable::zeros(2, 1);
        q_learning_update(&mut q, 0, 0, 1.0, 1, true, 0.5, 1.0);
        assert_eq!(q.get(0, 0), 0.5);
        q_learning_update(&mut q, 1, 0, 0.0, 0, false, 0.5, 1.0);
        assert_eq!(q.get(1, 0), 0.25);
    }

    #[test]
    fn sqil_hand_replay() {
        // agent transition 0 -> 1, demo transition 1 -> terminal
        let mut q = QTable::zeros(2, 1);
        let buffer = [(1, 0, 1, true)];
        let mut rng = derived_rng(4, &[]);
        sqil_update(&mut q, (0, 0, 1, false), &buffer, 0.5, 1.0, &mut rng).unwrap();
        assert_eq!((q.get(0, 0), q.get(1, 0)), (0.0, 0.5));
        sqil_update(&mut q, (0, 0, 1, false), &buffer, 0.5, 1.0, &mut rng).unwrap();
        assert_eq!((q.get(0, 0), q.get(1, 0)), (0.25, 0.75));
        assert!(sqil_update(&mut q, (0, 0, 1, false), &[], 0.5, 1.0, &mut rng).is_err());
    }

    #[test]
    fn epsilon_greedy_ties_and_shift() {
        let mut q = QTable::zeros(1, 3);
        let mut rng = derived_rng(5, &[]);
        assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 0);
        q.q[(0, 2)] = 1.0;
        assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 2);
        for a in 0..3 {
            q.q[(0, a)] += 7.5;
        }
        assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 2);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[epsilon_greedy(&q, 0, 1.0, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 1e4 - 1.0 / 3.0).abs() < 0.02));
    }
}
