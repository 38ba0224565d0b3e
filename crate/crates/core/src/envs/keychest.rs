use rand::Rng;

use super::{Environment, TabularMdp};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyChestState {
    pub pos: usize,
    pub has_key: bool,
    pub opened: bool,
    pub t: usize,
}

/// 1D track: fetch the key at one end, then open the chest at the other.
/// Actions are left (0) and right (1). Reward 1 at the last step if the
/// chest was opened.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyChestEnv {
    pub length: usize,
    pub key: usize,
    pub chest: usize,
    pub start: usize,
    pub horizon: usize,
}

impl Default for KeyChestEnv {
    fn default() -> Self {
        Self {
            length: 9,
            key: 0,
            chest: 8,
            start: 4,
            horizon: 32,
        }
    }
}

impl KeyChestEnv {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 || self.key >= self.length || self.chest >= self.length || self.start >= self.length {
            return invalid("key, chest and start must lie on the track");
        }
        if self.key == self.chest {
            return invalid("key and chest share a cell");
        }
        if self.horizon == 0 {
            return invalid("horizon must be positive");
        }
        Ok(())
    }

    /// 0: no key, 1: key held, 2: chest opened.
    pub fn phase(&self, obs: usize) -> usize {
        obs / self.length
    }

    fn encode(&self, pos: usize, has_key: bool, opened: bool) -> usize {
        let phase = if opened {
            2
        } else {
            usize::from(has_key)
        };
        pos + self.length * phase
    }

    fn advance(&self, pos: usize, has_key: bool, opened: bool, action: usize) -> (usize, bool, bool) {
        let pos = if action == 0 {
            pos.saturating_sub(1)
        } else {
            (pos + 1).min(self.length - 1)
        };
        let has_key = has_key || pos == self.key;
        let opened = opened || (has_key && pos == self.chest);
        (pos, has_key, opened)
    }

    /// Steps whose action picked up the key or opened the chest, read from
    /// the observed state sequence (`states` includes the final state).
    pub fn key_event_steps(&self, states: &[usize]) -> Vec<usize> {
        states
            .windows(2)
            .enumerate()
            .filter(|(_, w)| self.phase(w[1]) > self.phase(w[0]))
            .map(|(i, _)| i)
            .collect()
    }
}

impl Environment for KeyChestEnv {
    type State = KeyChestState;

    fn n_states(&self) -> usize {
        self.length * 3
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset<R: Rng + ?Sized>(&self, _rng: &mut R) -> KeyChestState {
        KeyChestState {
            pos: self.start,
            has_key: self.start == self.key,
            opened: false,
            t: 0,
        }
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> KeyChestState {
        let pos = rng.random_range(0..self.length);
        let has_key = pos == self.key || rng.random::<bool>();
        KeyChestState {
            pos,
            has_key,
            opened: false,
            t: 0,
        }
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut KeyChestState, action: usize, _rng: &mut R) -> Result<(f64, bool)> {
        if state.t >= self.horizon {
            return Err(Error::Contract("step on a finished episode".into()));
        }
        if action >= 2 {
            return invalid(format!("action {action} out of range"));
        }
        let (pos, has_key, opened) = self.advance(state.pos, state.has_key, state.opened, action);
        state.pos = pos;
        state.has_key = has_key;
        state.opened = opened;
        state.t += 1;
        let done = state.t == self.horizon;
        Ok((if done && state.opened { 1.0 } else { 0.0 }, done))
    }

    fn observe(&self, state: &KeyChestState) -> usize {
        self.encode(state.pos, state.has_key, state.opened)
    }

    /// Events are the task phases; the position along the track carries no
    /// information about progress.
    fn cluster_key(&self, obs: usize) -> usize {
        self.phase(obs)
    }

    fn n_cluster_keys(&self) -> usize {
        3
    }

    fn is_success(&self, state: &KeyChestState) -> bool {
        state.opened
    }

    fn mdp(&self) -> TabularMdp {
        let n = self.n_states();
        let mut transitions = vec![Vec::new(); n];
        let mut terminal = vec![false; n];
        for (obs, per_action) in transitions.iter_mut().enumerate() {
            let (pos, phase) = (obs % self.length, self.phase(obs));
            if phase == 2 {
                terminal[obs] = true;
                continue;
            }
            *per_action = (0..2)
                .map(|a| {
                    let (p, k, o) = self.advance(pos, phase == 1, false, a);
                    vec![(self.encode(p, k, o), 1.0, if o { 1.0 } else { 0.0 })]
                })
                .collect();
        }
        TabularMdp {
            n_states: n,
            n_actions: 2,
            transitions,
            terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derived_rng;

    fn play(env: &KeyChestEnv, actions: impl Fn(usize) -> usize) -> (f64, Vec<usize>) {
        let mut rng = derived_rng(0, &[]);
        let mut s = env.reset(&mut rng);
        let mut states = vec![env.observe(&s)];
        let mut total = 0.0;
        loop {
            let a = actions(s.t);
            let (r, done) = env.step(&mut s, a, &mut rng).unwrap();
            states.push(env.observe(&s));
            total += r;
            if done {
                assert_eq!(s.t, 32);
                return (total, states);
            }
        }
    }

    #[test]
    fn key_then_chest_pays() {
        let env = KeyChestEnv::default();
        let (r, states) = play(&env, |t| usize::from(t >= 4));
        assert_eq!(r, 1.0);
        assert_eq!(env.key_event_steps(&states), vec![3, 11]);
    }

    #[test]
    fn chest_without_key_pays_nothing() {
        let env = KeyChestEnv::default();
        assert_eq!(play(&env, |_| 1).0, 0.0);
    }

    #[test]
    fn cluster_keys_are_phases() {
        let env = KeyChestEnv::default();
        let (_, states) = play(&env, |t| usize::from(t >= 4));
        let keys: Vec<usize> = states.iter().map(|&s| env.cluster_key(s)).collect();
        assert_eq!(keys[3], 0);
        assert_eq!(keys[4], 1);
        assert_eq!(keys[13], 2);
        assert_eq!(env.n_cluster_keys(), 3);
    }

    #[test]
    fn dithering_times_out() {
        let env = KeyChestEnv::default();
        assert_eq!(play(&env, |t| t % 2).0, 0.0);
    }
}
