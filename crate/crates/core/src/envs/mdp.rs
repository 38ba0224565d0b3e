use rand::Rng;

use crate::error::{invalid, Result};

/// Explicit tabular model. `transitions[s][a]` lists `(next, prob, reward)`;
/// terminal states have value 0 and need no transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<(usize, f64, f64)>>>,
    pub terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_states || self.terminal.len() != self.n_states {
            return invalid("transition table does not match the state count");
        }
        for (s, per_action) in self.transitions.iter().enumerate() {
            if self.terminal[s] {
                continue;
            }
            if per_action.len() != self.n_actions {
                return invalid(format!("state {s} has {} actions", per_action.len()));
            }
            for (a, outs) in per_action.iter().enumerate() {
                let total: f64 = outs.iter().map(|o| o.1).sum();
                if (total - 1.0).abs() > 1e-9 || outs.iter().any(|o| o.0 >= self.n_states || o.1 < 0.0) {
                    return invalid(format!("bad transition distribution at ({s}, {a})"));
                }
            }
        }
        Ok(())
    }

    pub fn q_value(&self, values: &[f64], s: usize, a: usize, discount: f64) -> f64 {
        if self.terminal[s] {
            return 0.0;
        }
        self.transitions[s][a]
            .iter()
            .map(|&(n, p, r)| p * (r + discount * values[n]))
            .sum()
    }
}

/// Per-state action choice: deterministic or a distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularPolicy {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
}

impl TabularPolicy {
    pub fn n_states(&self) -> usize {
        match self {
            Self::Deterministic(a) => a.len(),
            Self::Stochastic(d) => d.len(),
        }
    }

    pub fn validate(&self, n_actions: usize) -> Result<()> {
        match self {
            Self::Deterministic(a) => {
                if let Some(x) = a.iter().find(|&&x| x >= n_actions) {
                    return invalid(format!("action {x} out of range"));
                }
            }
            Self::Stochastic(d) => {
                for (s, dist) in d.iter().enumerate() {
                    let total: f64 = dist.iter().sum();
                    if dist.len() != n_actions || (total - 1.0).abs() > 1e-9 || dist.iter().any(|&p| p < 0.0) {
                        return invalid(format!("state {s} has an invalid action distribution"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn action<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        match self {
            Self::Deterministic(a) => a[state],
            Self::Stochastic(d) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, &p) in d[state].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return a;
                    }
                }
                d[state].len() - 1
            }
        }
    }
}

/// Bellman-optimality sweeps until the largest change is below `tolerance`.
/// The greedy policy breaks ties towards the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, discount: f64, tolerance: f64) -> Result<(Vec<f64>, TabularPolicy)> {
    mdp.validate()?;
    if !(0.0..=1.0).contains(&discount) {
        return invalid(format!("discount {discount} not in [0, 1]"));
    }
    let mut v = vec![0.0; mdp.n_states];
    for _ in 0..1_000_000 {
        let mut delta = 0.0f64;
        for s in 0..mdp.n_states {
            if mdp.terminal[s] {
                continue;
            }
            let best = (0..mdp.n_actions)
                .map(|a| mdp.q_value(&v, s, a, discount))
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < tolerance {
            break;
        }
    }
    let policy = (0..mdp.n_states)
        .map(|s| {
            let mut best = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let q = mdp.q_value(&v, s, a, discount);
                // small slack so rounding noise does not break ties
                if q > best_q + 1e-12 {
                    best_q = q;
                    best = a;
                }
            }
            best
        })
        .collect();
    Ok((v, TabularPolicy::Deterministic(policy)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_terminal_reward() {
        let mdp = TabularMdp {
            n_states: 2,
            n_actions: 1,
            transitions: vec![vec![vec![(1, 1.0, 1.0)]], vec![]],
            terminal: vec![false, true],
        };
        let (v, _) = value_iteration(&mdp, 1.0, 1e-10).unwrap();
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn corridor_goes_right() {
        // cells 0, 1 then the goal (terminal) at 2; actions left, right
        let mv = |c: usize, a: usize| if a == 0 { c.saturating_sub(1) } else { c + 1 };
        let transitions = (0..3)
            .map(|c| {
                if c == 2 {
                    vec![]
                } else {
                    (0..2)
                        .map(|a| {
                            let n = mv(c, a);
                            vec![(n, 1.0, if n == 2 { 1.0 } else { 0.0 })]
                        })
                        .collect()
                }
            })
            .collect();
        let mdp = TabularMdp {
            n_states: 3,
            n_actions: 2,
            transitions,
            terminal: vec![false, false, true],
        };
        let (_, pi) = value_iteration(&mdp, 0.9, 1e-10).unwrap();
        let TabularPolicy::Deterministic(a) = pi else { unreachable!() };
        assert_eq!(&a[..2], &[1, 1]);
    }
}
