use crate::error::{invalid, Result};
use crate::events::{map_to_event_runs, Trajectory};
use crate::learning::{LearningCurve, RudderContext};
use crate::redistribution::{redistribute, step_rewards};

/// Episodes needed to reach `threshold`, or `budget + 1` when the curve
/// never gets there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdResult {
    pub episodes: usize,
    pub censored: bool,
}

/// Smallest recorded episode whose evaluation return is at least
/// `threshold`.
pub fn episodes_to_threshold(curve: &[(usize, f64)], threshold: f64, budget: usize) -> Result<ThresholdResult> {
    if curve.is_empty() {
        return invalid("empty learning curve");
    }
    Ok(curve
        .iter()
        .find(|&&(_, r)| r >= threshold)
        .map_or(
            ThresholdResult {
                episodes: budget + 1,
                censored: true,
            },
            |&(e, _)| ThresholdResult {
                episodes: e,
                censored: false,
            },
        ))
}

pub fn curve_episodes_to_threshold(curve: &LearningCurve, threshold: f64, budget: usize) -> Result<ThresholdResult> {
    episodes_to_threshold(&curve.points, threshold, budget)
}

/// Fraction of key steps whose reward is strictly above the mean reward of
/// their episode. `rewards[i]` holds one value per step of episode `i`.
pub fn detection_rate(rewards: &[Vec<f64>], key_steps: &[Vec<usize>]) -> Result<f64> {
    if rewards.len() != key_steps.len() {
        return invalid("one key-step set per episode required");
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (r, keys) in rewards.iter().zip(key_steps) {
        if r.is_empty() {
            return invalid("episode without steps");
        }
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        for &k in keys {
            let Some(&v) = r.get(k) else {
                return invalid(format!("key step {k} beyond {} steps", r.len()));
            };
            total += 1;
            hits += usize::from(v > mean);
        }
    }
    if total == 0 {
        return invalid("no key steps");
    }
    Ok(hits as f64 / total as f64)
}

/// Per-step redistributed rewards without the final correction.
pub fn uncorrected_step_rewards(context: &RudderContext, traj: &Trajectory) -> Result<Vec<f64>> {
    let runs = map_to_event_runs(traj, &context.assignment, &context.alphabet)?;
    let mut ep = redistribute(&runs.sequence, &context.model, traj.terminal_return())?;
    ep.correction = 0.0;
    step_rewards(&runs, &ep, traj.len())
}

pub fn key_event_detection_rate(
    context: &RudderContext,
    episodes: &[Trajectory],
    key_steps: &[Vec<usize>],
) -> Result<f64> {
    let rewards = episodes
        .iter()
        .map(|t| uncorrected_step_rewards(context, t))
        .collect::<Result<Vec<_>>>()?;
    detection_rate(&rewards, key_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let above = [(0, 0.9), (10, 1.0)];
        assert_eq!(episodes_to_threshold(&above, 0.8, 100).unwrap().episodes, 0);
        let crossing: Vec<(usize, f64)> = (0..10).map(|i| (10 * i, i as f64 * 0.1)).collect();
        assert_eq!(episodes_to_threshold(&crossing, 0.4, 100).unwrap().episodes, 40);
        let never = [(0, 0.0), (5000, 0.5)];
        assert_eq!(
            episodes_to_threshold(&never, 0.8, 5000).unwrap(),
            ThresholdResult {
                episodes: 5001,
                censored: true
            }
        );
        assert!(episodes_to_threshold(&[], 0.8, 10).is_err());
    }

    #[test]
    fn detection_examples() {
        let peaked = vec![vec![0.0, 1.0, 0.0, 2.0]];
        assert_eq!(detection_rate(&peaked, &[vec![1, 3]]).unwrap(), 1.0);
        let flat = vec![vec![0.25; 4]];
        assert_eq!(detection_rate(&flat, &[vec![0, 2]]).unwrap(), 0.0);
        assert!(detection_rate(&flat, &[vec![4]]).is_err());
    }
}
