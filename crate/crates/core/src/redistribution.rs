//! Reward redistribution from profile prefix scores.
//!
//! Each event receives the score gain of its prefix times a scale `C`
//! fitted so that demonstrations keep their mean return. A final
//! correction term restores the exact episode return.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::events::{EventAlphabet, EventRuns, EventSequence};
use crate::profile::{prefix_columns, prefix_scores, Pssm};
use crate::util::mean;

#[derive(Debug, Clone, PartialEq)]
pub struct RedistributionModel {
    pub pssm: Pssm,
    pub scale: f64,
    pub mean_return: f64,
    pub mean_score_gain: f64,
}

/// Per-event rewards of one sequence. `rewards[t]` belongs to event `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RedistributedEpisode {
    pub prefix_scores: Vec<f64>,
    pub rewards: Vec<f64>,
    pub correction: f64,
    pub original_return: f64,
}

impl RedistributedEpisode {
    pub fn total(&self) -> f64 {
        self.rewards.iter().sum::<f64>() + self.correction
    }

    /// CSV rows `t,event_letter,S_prefix,R` and a final correction row.
    pub fn to_csv(&self, seq: &EventSequence, alphabet: &EventAlphabet) -> String {
        let mut out = String::from("t,event,S_prefix,R\n");
        for (t, ((e, s), r)) in seq.events.iter().zip(&self.prefix_scores).zip(&self.rewards).enumerate() {
            let _ = writeln!(out, "{t},{},{s},{r}", alphabet.letter(*e));
        }
        let _ = writeln!(out, "correction,,,{}", self.correction);
        out
    }
}

/// Sub-goal columns and the threshold that selected them.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGoalSet {
    pub positions: Vec<usize>,
    pub threshold: f64,
}

/// Fits `C = mean demo return / mean demo score gain`. The score gain of
/// a demo telescopes to its full profile score.
pub fn fit_redistribution(demos: &[EventSequence], pssm: &Pssm) -> Result<RedistributionModel> {
    if demos.is_empty() {
        return invalid("no demonstrations");
    }
    let gains = demos
        .iter()
        .map(|d| prefix_scores(d, pssm).map(|s| *s.last().expect("non-empty prefix scores")))
        .collect::<Result<Vec<_>>>()?;
    let returns: Vec<f64> = demos.iter().map(|d| d.source_return).collect();
    let mean_score_gain = mean(&gains);
    let mean_return = mean(&returns);
    if mean_score_gain == 0.0 || !mean_score_gain.is_finite() {
        return Err(Error::Degenerate(format!(
            "mean demonstration score gain is {mean_score_gain}; the alignment carries no signal"
        )));
    }
    let scale = mean_return / mean_score_gain;
    if !scale.is_finite() {
        return Err(Error::Degenerate(format!("scale {scale} is not finite")));
    }
    Ok(RedistributionModel {
        pssm: pssm.clone(),
        scale,
        mean_return,
        mean_score_gain,
    })
}

/// `R_{t+1} = (S(e_0..=t) - S(e_0..t)) * C` with `S` of the empty prefix 0,
/// and a correction closing the sum to `original_return`.
pub fn redistribute(seq: &EventSequence, model: &RedistributionModel, original_return: f64) -> Result<RedistributedEpisode> {
    let prefix = prefix_scores(seq, &model.pssm)?;
    let mut prev = 0.0;
    let rewards: Vec<f64> = prefix
        .iter()
        .map(|&s| {
            let r = (s - prev) * model.scale;
            prev = s;
            r
        })
        .collect();
    let correction = original_return - rewards.iter().sum::<f64>();
    Ok(RedistributedEpisode {
        prefix_scores: prefix,
        rewards,
        correction,
        original_return,
    })
}

/// Mean correction over `demos`, each using its own source return. Zero
/// up to rounding on the demos the model was fitted on.
pub fn mean_correction(demos: &[EventSequence], model: &RedistributionModel) -> Result<f64> {
    if demos.is_empty() {
        return invalid("no demonstrations");
    }
    let corrections = demos
        .iter()
        .map(|d| redistribute(d, model, d.source_return).map(|e| e.correction))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&corrections))
}

/// Spreads per-event rewards over trajectory steps. An event run that
/// starts at state index `k` was entered by action `k - 1`, which gets the
/// reward; the initial event is credited to step 0. The correction goes to
/// the last step.
pub fn step_rewards(runs: &EventRuns, episode: &RedistributedEpisode, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return invalid("trajectory has no steps");
    }
    if runs.run_starts.len() != episode.rewards.len() {
        return invalid("event runs and rewards differ in length");
    }
    let mut out = vec![0.0; n_steps];
    for (&start, &r) in runs.run_starts.iter().zip(&episode.rewards) {
        let step = start.saturating_sub(1);
        if step >= n_steps {
            return invalid(format!("run start {start} beyond {n_steps} steps"));
        }
        out[step] += r;
    }
    out[n_steps - 1] += episode.correction;
    Ok(out)
}

/// Monte-Carlo estimate of the expected future reward
/// `mean over episodes of sum_{tau=0..=m} r[t + 1 + tau]`, where `r[k]` is
/// the reward for step `k`.
pub fn estimate_kappa(episodes: &[Vec<f64>], m: usize, t: usize) -> Result<f64> {
    if episodes.is_empty() {
        return invalid("no episodes");
    }
    let horizon = episodes[0].len();
    if episodes.iter().any(|e| e.len() != horizon) {
        return invalid("episodes do not share a horizon");
    }
    let end = t + 1 + m;
    if end >= horizon {
        return invalid(format!("window t={t}, m={m} exceeds horizon {horizon}"));
    }
    let sums: Vec<f64> = episodes.iter().map(|e| e[t + 1..=end].iter().sum()).collect();
    Ok(mean(&sums))
}

/// Mean of the positive per-event rewards over `demos`; the default
/// sub-goal threshold.
pub fn default_subgoal_threshold(demos: &[EventSequence], model: &RedistributionModel) -> Result<f64> {
    let mut positive = Vec::new();
    for d in demos {
        let ep = redistribute(d, model, d.source_return)?;
        positive.extend(ep.rewards.into_iter().filter(|&r| r > 0.0));
    }
    if positive.is_empty() {
        return Err(Error::Degenerate("no demonstration step has positive reward".into()));
    }
    Ok(mean(&positive))
}

/// Per-column mean (over demos) of the reward attributed to that column.
/// A step's reward goes to the column its event matched in the best
/// alignment of its prefix, or to the last matched column when the event
/// is an insertion. Rewards before any match are dropped.
pub fn column_rewards(demos: &[EventSequence], model: &RedistributionModel) -> Result<Vec<f64>> {
    if demos.is_empty() {
        return invalid("no demonstrations");
    }
    let mut totals = vec![0.0; model.pssm.len()];
    for d in demos {
        let ep = redistribute(d, model, d.source_return)?;
        let cols = prefix_columns(d, &model.pssm)?;
        let mut last = None;
        for (r, c) in ep.rewards.iter().zip(cols) {
            if c.is_some() {
                last = c;
            }
            if let Some(col) = last {
                totals[col] += r;
            }
        }
    }
    let n = demos.len() as f64;
    Ok(totals.into_iter().map(|v| v / n).collect())
}

pub fn extract_subgoals(demos: &[EventSequence], model: &RedistributionModel, threshold: f64) -> Result<SubGoalSet> {
    if !(threshold > 0.0) {
        return invalid(format!("threshold must be > 0, got {threshold}"));
    }
    let positions = column_rewards(demos, model)?
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(SubGoalSet { positions, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    /// PSSM whose column `t` rewards only event `t` with score `w[t]`.
    fn staircase(w: &[f64], n_events: usize) -> Pssm {
        let len = w.len();
        Pssm {
            s: Matrix::from_fn(len, n_events, |t, e| if e == t { w[t] } else { -1.0 }),
            lambda: vec![Some(1.0); len],
            gap_penalty: vec![0.0; len],
            consensus: (0..len).collect(),
        }
    }

    fn seq(s: &str, ret: f64) -> EventSequence {
        EventSequence::from_letters("d", s, ret).unwrap()
    }

    #[test]
    fn scale_from_single_and_pair() {
        let pssm = staircase(&[5.0], 2);
        let m = fit_redistribution(&[seq("A", 1.0)], &pssm).unwrap();
        assert!((m.scale - 0.2).abs() < 1e-15);
        let pssm = staircase(&[4.0, 2.0], 2);
        let m = fit_redistribution(&[seq("A", 1.0), seq("AB", 1.0)], &pssm).unwrap();
        assert!((m.scale - 0.2).abs() < 1e-15);
        let c = mean_correction(&[seq("A", 1.0), seq("AB", 1.0)], &m).unwrap();
        assert!(c.abs() < 1e-12);
        let e = redistribute(&seq("A", 1.0), &m, 1.0).unwrap();
        assert!((e.correction - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_gain_is_degenerate() {
        let pssm = staircase(&[0.0, 0.0], 2);
        assert!(matches!(
            fit_redistribution(&[seq("AB", 1.0)], &pssm),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn staircase_rewards_at_jumps() {
        // matches only at the 3rd and 6th events
        let pssm = staircase(&[0.0, 0.0, 2.0, 0.0, 0.0, 2.0], 6);
        let model = RedistributionModel {
            pssm,
            scale: 0.5,
            mean_return: 2.0,
            mean_score_gain: 4.0,
        };
        let e = redistribute(&seq("ABCDEF", 3.0), &model, 3.0).unwrap();
        let nonzero: Vec<usize> = (0..6).filter(|&t| e.rewards[t] != 0.0).collect();
        assert_eq!(nonzero, vec![2, 5]);
        assert_eq!(e.rewards[2], 1.0);
        assert_eq!(e.correction, 1.0);
        assert!((e.total() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_match_keeps_delayed_reward() {
        let model = RedistributionModel {
            pssm: staircase(&[3.0], 3),
            scale: 1.0,
            mean_return: 1.0,
            mean_score_gain: 1.0,
        };
        let e = redistribute(&seq("CC", 1.0), &model, 1.0).unwrap();
        assert!(e.rewards.iter().all(|&r| r == 0.0));
        assert_eq!(e.correction, 1.0);
    }

    #[test]
    fn kappa_examples() {
        let early = vec![vec![1.0, 0.0, 0.0, 0.0]; 3];
        for t in 1..3 {
            assert_eq!(estimate_kappa(&early, 3 - t - 1, t).unwrap(), 0.0);
        }
        let late = vec![vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.5]];
        for t in 0..3 {
            assert_eq!(estimate_kappa(&late, 3 - t - 1, t).unwrap(), 0.75);
        }
        assert!(estimate_kappa(&late, 3, 0).is_err());
        assert!(estimate_kappa(&[vec![0.0; 3], vec![0.0; 4]], 0, 0).is_err());
    }

    #[test]
    fn subgoals_at_jump_columns() {
        let pssm = staircase(&[0.5, 3.0, 0.5, 3.0], 4);
        let demos = [seq("ABCD", 1.0), seq("ABCD", 1.0)];
        let model = fit_redistribution(&demos, &pssm).unwrap();
        let jump = 3.0 * model.scale;
        let sg = extract_subgoals(&demos, &model, jump * 0.9).unwrap();
        assert_eq!(sg.positions, vec![1, 3]);
        assert!(extract_subgoals(&demos, &model, jump * 1.1).unwrap().positions.is_empty());
        assert!(extract_subgoals(&demos, &model, 0.0).is_err());
    }

    #[test]
    fn step_crediting() {
        use crate::events::EventRuns;
        let runs = EventRuns {
            sequence: seq("AB", 1.0),
            run_starts: vec![0, 3],
        };
        let ep = RedistributedEpisode {
            prefix_scores: vec![1.0, 2.0],
            rewards: vec![0.25, 0.5],
            correction: 0.25,
            original_return: 1.0,
        };
        assert_eq!(step_rewards(&runs, &ep, 4).unwrap(), vec![0.25, 0.0, 0.5, 0.25]);
    }
}
