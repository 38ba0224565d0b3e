//! Gridworld benchmarks (four and eight rooms with a portal), the 1D
//! key-chest task, an explicit-model value iteration oracle and
//! demonstration generation.

mod keychest;
pub mod layout;
mod mdp;
mod rooms;

use std::fmt::Write as _;

use rand::Rng;

pub use keychest::{KeyChestEnv, KeyChestState};
pub use layout::Layout;
pub use mdp::{value_iteration, TabularMdp, TabularPolicy};
pub use rooms::{PortalObservation, RoomsEnv, RoomsState, ACTIONS as ROOM_ACTIONS};

use crate::error::{invalid, Error, Result};
use crate::events::{Step, Trajectory};

/// Episodic environment with a fixed horizon and a tabular observation.
pub trait Environment: Sync {
    type State: Clone + std::fmt::Debug;

    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    /// A random non-terminal state, used to cover the state space when
    /// collecting transitions for clustering.
    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    /// Advances one step; returns `(reward, done)`.
    fn step<R: Rng + ?Sized>(&self, state: &mut Self::State, action: usize, rng: &mut R) -> Result<(f64, bool)>;
    fn observe(&self, state: &Self::State) -> usize;
    fn is_success(&self, state: &Self::State) -> bool;
    /// Explicit model where reaching the goal pays 1 and terminates.
    fn mdp(&self) -> TabularMdp;

    /// Key under which observed states are clustered. Defaults to the
    /// observation itself.
    fn cluster_key(&self, obs: usize) -> usize {
        obs
    }

    fn n_cluster_keys(&self) -> usize {
        self.n_states()
    }
}

/// Plays one episode from `start` with actions chosen by `choose`.
pub fn run_from<E: Environment, R: Rng + ?Sized>(
    env: &E,
    mut state: E::State,
    rng: &mut R,
    mut choose: impl FnMut(usize, &mut R) -> usize,
) -> Result<(Trajectory, E::State)> {
    let mut steps = Vec::with_capacity(env.horizon());
    loop {
        let obs = env.observe(&state);
        let action = choose(obs, rng);
        let (reward, done) = env.step(&mut state, action, rng)?;
        steps.push(Step {
            state: obs,
            action,
            reward,
        });
        if done {
            let final_state = env.observe(&state);
            return Ok((Trajectory::new(steps, final_state)?, state));
        }
    }
}

pub fn run_episode<E: Environment, R: Rng + ?Sized>(
    env: &E,
    rng: &mut R,
    choose: impl FnMut(usize, &mut R) -> usize,
) -> Result<(Trajectory, E::State)> {
    let start = env.reset(rng);
    run_from(env, start, rng, choose)
}

/// Samples episodes that follow `policy` except for uniformly random
/// actions with probability `exploration`, keeping the successful ones
/// until `n` are collected. Fails when fewer than 1% of a budget of
/// `100 n` attempts succeed.
pub fn generate_demonstrations<E: Environment, R: Rng + ?Sized>(
    env: &E,
    policy: &TabularPolicy,
    exploration: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    if !(0.0..=1.0).contains(&exploration) {
        return invalid(format!("exploration {exploration} not in [0, 1]"));
    }
    if policy.n_states() != env.n_states() {
        return invalid("policy does not cover the state space");
    }
    policy.validate(env.n_actions())?;
    let budget = 100 * n.max(1);
    let n_actions = env.n_actions();
    let mut demos = Vec::with_capacity(n);
    for _ in 0..budget {
        if demos.len() == n {
            break;
        }
        let (traj, last) = run_episode(env, rng, |obs, rng| {
            if exploration > 0.0 && rng.random::<f64>() < exploration {
                rng.random_range(0..n_actions)
            } else {
                policy.action(obs, rng)
            }
        })?;
        if env.is_success(&last) {
            demos.push(traj);
        }
    }
    if demos.len() < n {
        return Err(Error::GenerationFailed(format!(
            "only {} of {n} successful demonstrations in {budget} attempts",
            demos.len()
        )));
    }
    Ok(demos)
}

/// Optimal policy for the environment's success model. A discount just
/// below one makes the fastest route strictly preferred.
pub fn optimal_policy<E: Environment>(env: &E) -> Result<TabularPolicy> {
    Ok(value_iteration(&env.mdp(), 0.99, 1e-10)?.1)
}

/// CSV `t,state,action,reward`; a last row `T,final_state,,` closes the
/// trajectory.
pub fn write_trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,state,action,reward\n");
    for (t, s) in traj.steps.iter().enumerate() {
        let _ = writeln!(out, "{t},{},{},{}", s.state, s.action, s.reward);
    }
    let _ = writeln!(out, "{},{},,", traj.len(), traj.final_state);
    out
}

pub fn read_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut steps = Vec::new();
    let mut final_state = None;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("t,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let perr = |msg: String| Error::Parse { line: ln, msg };
        if f.len() != 4 {
            return Err(perr(format!("expected 4 fields, got {}", f.len())));
        }
        if final_state.is_some() {
            return Err(perr("row after the final state".into()));
        }
        let state = f[1].parse::<usize>().map_err(|e| perr(format!("bad state: {e}")))?;
        if f[2].is_empty() {
            final_state = Some(state);
            continue;
        }
        steps.push(Step {
            state,
            action: f[2].parse().map_err(|e| perr(format!("bad action: {e}")))?,
            reward: f[3].parse().map_err(|e| perr(format!("bad reward: {e}")))?,
        });
    }
    let final_state = final_state.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing final state row".into(),
    })?;
    Trajectory::new(steps, final_state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derived_rng;

    #[test]
    fn demos_without_exploration_are_shortest_paths() {
        let env = RoomsEnv::four_rooms(0.0).unwrap();
        let pi = optimal_policy(&env).unwrap();
        let mut rng = derived_rng(7, &[]);
        let demos = generate_demonstrations(&env, &pi, 0.0, 20, &mut rng).unwrap();
        for d in &demos {
            assert_eq!(d.len(), 200);
            assert_eq!(d.terminal_return(), 1.0);
            d.validate(env.n_states()).unwrap();
            let (_, entry) = env.decode(d.steps[0].state);
            let target_step = d
                .states()
                .position(|s| env.decode(s).0 == env.layout.target)
                .unwrap();
            assert_eq!(target_step, env.shortest_path(entry));
        }
    }

    #[test]
    fn keychest_demos() {
        let env = KeyChestEnv::default();
        let pi = optimal_policy(&env).unwrap();
        let mut rng = derived_rng(8, &[]);
        let demos = generate_demonstrations(&env, &pi, 0.0, 3, &mut rng).unwrap();
        let states: Vec<usize> = demos[0].states().collect();
        assert_eq!(env.key_event_steps(&states), vec![3, 11]);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let env = KeyChestEnv::default();
        let mut rng = derived_rng(9, &[]);
        let (traj, _) = run_episode(&env, &mut rng, |_, r| r.random_range(0..2)).unwrap();
        assert_eq!(read_trajectory_csv(&write_trajectory_csv(&traj)).unwrap(), traj);
    }

    #[test]
    fn seeds_reproduce() {
        let env = RoomsEnv::four_rooms(0.1).unwrap();
        let run = |seed| {
            let mut rng = derived_rng(seed, &[1]);
            run_episode(&env, &mut rng, |_, r| r.random_range(0..4)).unwrap().0
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
