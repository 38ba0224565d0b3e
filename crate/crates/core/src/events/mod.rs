//! Discrete events from state trajectories.
//!
//! States are embedded by their successor representation, clustered with
//! affinity propagation, and every trajectory is rewritten as the sequence of
//! cluster letters it passes through.

mod affinity;
pub mod io;
mod successor;

pub use affinity::{affinity_propagation, merge_clusters, ApConfig, Preference};
pub use successor::{build_successor_representation, successor_similarity, SuccessorMatrix};

use crate::error::{invalid, Result};

/// One environment step: the state the action was taken in, the action and
/// the reward received for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// A state-action-reward trajectory plus the state reached after the last
/// action.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub final_state: usize,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>, final_state: usize) -> Result<Self> {
        if steps.is_empty() {
            return invalid("trajectory must contain at least one step");
        }
        Ok(Self { steps, final_state })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of the original rewards.
    pub fn terminal_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Visited states including the final one: `len() + 1` entries.
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps
            .iter()
            .map(|s| s.state)
            .chain(std::iter::once(self.final_state))
    }

    /// `(state, next_state)` pairs for successor-representation training.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        let states: Vec<usize> = self.states().collect();
        states.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Checks state bounds and the episodic-reward constraint.
    pub fn validate(&self, n_states: usize) -> Result<()> {
        if self.steps.is_empty() {
            return invalid("empty trajectory");
        }
        if let Some(s) = self.states().find(|&s| s >= n_states) {
            return invalid(format!("state {s} out of range (n_states = {n_states})"));
        }
        let last = self.steps.len() - 1;
        if self.steps[..last].iter().any(|s| s.reward != 0.0) {
            return invalid("reward before the final step in an episodic trajectory");
        }
        Ok(())
    }
}

/// Cluster label per point, with the exemplar (center) of each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centers: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, centers: Vec<usize>) -> Result<Self> {
        let a = Self { labels, centers };
        a.validate()?;
        Ok(a)
    }

    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn n_points(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.len();
        if k == 0 {
            return invalid("assignment has no clusters");
        }
        let mut sizes = vec![0usize; k];
        for &l in &self.labels {
            if l >= k {
                return invalid(format!("label {l} out of range for {k} clusters"));
            }
            sizes[l] += 1;
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return invalid(format!("cluster {c} is empty"));
        }
        for (c, &center) in self.centers.iter().enumerate() {
            if self.labels.get(center) != Some(&c) {
                return invalid(format!("center {center} is not a member of cluster {c}"));
            }
        }
        Ok(())
    }

    /// Members of cluster `c` in ascending index order.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect()
    }

    /// Lifts an assignment over keys to an assignment over a larger point set,
    /// where `key_of(point)` gives the key each point is labelled by.
    pub fn expand(&self, n_points: usize, key_of: impl Fn(usize) -> usize) -> Result<Self> {
        let mut labels = Vec::with_capacity(n_points);
        for p in 0..n_points {
            let key = key_of(p);
            match self.labels.get(key) {
                Some(&l) => labels.push(l),
                None => return invalid(format!("point {p} maps to unknown key {key}")),
            }
        }
        let centers = self
            .centers
            .iter()
            .map(|&c| {
                (0..n_points)
                    .find(|&p| key_of(p) == c)
                    .ok_or_else(|| crate::Error::InvalidInput(format!("no point for center key {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, centers)
    }
}

/// Maps cluster indices to single uppercase letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventAlphabet {
    n_events: usize,
}

impl EventAlphabet {
    pub const MAX_EVENTS: usize = 26;

    pub fn new(n_events: usize) -> Result<Self> {
        if n_events == 0 || n_events > Self::MAX_EVENTS {
            return invalid(format!(
                "alphabet size {n_events} not in 1..={}",
                Self::MAX_EVENTS
            ));
        }
        Ok(Self { n_events })
    }

    pub fn len(&self) -> usize {
        self.n_events
    }

    pub fn is_empty(&self) -> bool {
        self.n_events == 0
    }

    pub fn letter(&self, event: usize) -> char {
        assert!(event < self.n_events, "event {event} outside alphabet");
        (b'A' + event as u8) as char
    }

    pub fn index(&self, letter: char) -> Option<usize> {
        let c = letter.to_ascii_uppercase();
        if !c.is_ascii_uppercase() {
            return None;
        }
        let i = (c as u8 - b'A') as usize;
        (i < self.n_events).then_some(i)
    }

    pub fn encode(&self, events: &[usize]) -> String {
        events.iter().map(|&e| self.letter(e)).collect()
    }
}

/// A trajectory rewritten as discrete events, with the return it earned.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub name: String,
    pub events: Vec<usize>,
    pub source_return: f64,
}

impl EventSequence {
    pub fn new(name: impl Into<String>, events: Vec<usize>, source_return: f64) -> Self {
        Self {
            name: name.into(),
            events,
            source_return,
        }
    }

    /// Parses a letter string such as `"ABCA"` (letters map to 0, 1, 2, ...).
    pub fn from_letters(name: impl Into<String>, letters: &str, source_return: f64) -> Result<Self> {
        let events = letters
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                u @ 'A'..='Z' => Ok((u as u8 - b'A') as usize),
                _ => invalid(format!("not an event letter: {c:?}")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(name, events, source_return))
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn letters(&self) -> String {
        self.events.iter().map(|&e| (b'A' + e as u8) as char).collect()
    }

    pub fn max_event(&self) -> Option<usize> {
        self.events.iter().copied().max()
    }
}

/// Event sequence together with the state index at which each event run
/// starts (index into `Trajectory::states()`).
#[derive(Debug, Clone, PartialEq)]
pub struct EventRuns {
    pub sequence: EventSequence,
    pub run_starts: Vec<usize>,
}

/// Maps each visited state to its cluster letter, collapsing runs of the
/// same event into one occurrence.
pub fn map_to_events(
    trajectory: &Trajectory,
    assignment: &ClusterAssignment,
    alphabet: &EventAlphabet,
) -> Result<EventSequence> {
    map_to_event_runs(trajectory, assignment, alphabet).map(|r| r.sequence)
}

/// Same as [`map_to_events`] but also reports where each run begins.
pub fn map_to_event_runs(
    trajectory: &Trajectory,
    assignment: &ClusterAssignment,
    alphabet: &EventAlphabet,
) -> Result<EventRuns> {
    if trajectory.is_empty() {
        return invalid("empty trajectory");
    }
    let mut events: Vec<usize> = Vec::new();
    let mut run_starts = Vec::new();
    for (idx, state) in trajectory.states().enumerate() {
        let Some(&label) = assignment.labels.get(state) else {
            return invalid(format!("state {state} has no cluster label"));
        };
        if label >= alphabet.len() {
            return invalid(format!("cluster {label} exceeds alphabet of {}", alphabet.len()));
        }
        if events.last() != Some(&label) {
            events.push(label);
            run_starts.push(idx);
        }
    }
    Ok(EventRuns {
        sequence: EventSequence::new("", events, trajectory.terminal_return()),
        run_starts,
    })
}

/// Relative frequency of each event over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBackground {
    p: Vec<f64>,
}

impl EventBackground {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return invalid("empty background");
        }
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return invalid("background probabilities must be finite and positive");
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("background sums to {total}, expected 1"));
        }
        Ok(Self { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("empty background");
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Event frequencies over `sequences`. If any event of the alphabet is never
/// observed, every count receives a pseudocount of one so all entries stay
/// strictly positive.
pub fn event_frequencies(sequences: &[EventSequence], alphabet_size: usize) -> Result<EventBackground> {
    if alphabet_size == 0 {
        return invalid("alphabet size must be positive");
    }
    if sequences.iter().all(EventSequence::is_empty) {
        return invalid("no events to count");
    }
    let mut counts = vec![0.0f64; alphabet_size];
    for seq in sequences {
        for &e in &seq.events {
            if e >= alphabet_size {
                return invalid(format!("event {e} outside alphabet of {alphabet_size}"));
            }
            counts[e] += 1.0;
        }
    }
    if counts.contains(&0.0) {
        counts.iter_mut().for_each(|c| *c += 1.0);
    }
    let total: f64 = counts.iter().sum();
    EventBackground::new(counts.into_iter().map(|c| c / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: &[usize], final_state: usize) -> Trajectory {
        let steps = states
            .iter()
            .map(|&s| Step { state: s, action: 0, reward: 0.0 })
            .collect();
        Trajectory::new(steps, final_state).unwrap()
    }

    #[test]
    fn collapses_runs_of_one_cluster() {
        let a = ClusterAssignment::new(vec![0, 0, 0, 0], vec![0]).unwrap();
        let seq = map_to_events(&traj(&[3, 3, 3], 3), &a, &EventAlphabet::new(1).unwrap()).unwrap();
        assert_eq!(seq.letters(), "A");
    }

    #[test]
    fn crossing_clusters_keeps_order() {
        // states 0,1 in A; 2 in B
        let a = ClusterAssignment::new(vec![0, 0, 1], vec![0, 2]).unwrap();
        let alphabet = EventAlphabet::new(2).unwrap();
        let runs = map_to_event_runs(&traj(&[0, 2, 2, 1], 0), &a, &alphabet).unwrap();
        assert_eq!(runs.sequence.letters(), "ABA");
        assert_eq!(runs.run_starts, vec![0, 1, 3]);
    }

    #[test]
    fn mixed_trajectory_matches_lookup() {
        let labels = vec![2, 0, 1, 1, 0, 2];
        let a = ClusterAssignment::new(labels.clone(), vec![1, 2, 0]).unwrap();
        let alphabet = EventAlphabet::new(3).unwrap();
        let states = [5, 0, 3, 2, 4, 1, 1, 5];
        let seq = map_to_events(&traj(&states[..7], states[7]), &a, &alphabet).unwrap();
        // lookup oracle with explicit collapse
        let mut expected: Vec<usize> = Vec::new();
        for &s in &states {
            if expected.last() != Some(&labels[s]) {
                expected.push(labels[s]);
            }
        }
        assert_eq!(seq.events, expected);
        assert!(seq.events.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn unlabeled_state_is_rejected() {
        let a = ClusterAssignment::new(vec![0, 0], vec![0]).unwrap();
        let err = map_to_events(&traj(&[0, 5], 0), &a, &EventAlphabet::new(1).unwrap());
        assert!(matches!(err, Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn frequencies_direct_count() {
        let s = EventSequence::from_letters("x", "AABB", 1.0).unwrap();
        let bg = event_frequencies(&[s], 2).unwrap();
        assert_eq!(bg.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn frequencies_pseudocount_for_unseen() {
        let s = EventSequence::from_letters("x", "AAA", 1.0).unwrap();
        let bg = event_frequencies(&[s], 2).unwrap();
        assert!((bg.get(0) - 0.8).abs() < 1e-15);
        assert!((bg.get(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn frequencies_match_counter() {
        let corpus: Vec<EventSequence> = ["ABCA", "CCB", "ADDA", "B"]
            .iter()
            .map(|l| EventSequence::from_letters("", l, 0.0).unwrap())
            .collect();
        let bg = event_frequencies(&corpus, 4).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for c in corpus.iter().flat_map(|s| s.letters().chars().collect::<Vec<_>>()) {
            *counts.entry(c).or_insert(0usize) += 1;
        }
        let total: usize = counts.values().sum();
        for (i, c) in ['A', 'B', 'C', 'D'].iter().enumerate() {
            assert!((bg.get(i) - counts[c] as f64 / total as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn frequencies_reject_empty() {
        assert!(event_frequencies(&[], 3).is_err());
        let empty = EventSequence::new("", vec![], 0.0);
        assert!(event_frequencies(&[empty], 3).is_err());
    }

    #[test]
    fn episodic_reward_constraint() {
        let mut t = traj(&[0, 1], 2);
        t.steps[0].reward = 1.0;
        assert!(t.validate(3).is_err());
        t.steps[0].reward = 0.0;
        t.steps[1].reward = 1.0;
        assert!(t.validate(3).is_ok());
        assert!(t.validate(2).is_err());
    }

    #[test]
    fn alphabet_bounds() {
        assert!(EventAlphabet::new(27).is_err());
        let a = EventAlphabet::new(26).unwrap();
        assert_eq!(a.letter(25), 'Z');
        assert_eq!(a.index('c'), Some(2));
        assert_eq!(a.index('-'), None);
    }
}
