use super::ClusterAssignment;
use crate::error::{invalid, Result};
use crate::matrix::{euclidean, Matrix};

/// Self-similarity used on the diagonal of the similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApConfig {
    /// Damping factor in [0.5, 1).
    pub damping: f64,
    pub max_iterations: usize,
    /// Iterations with an unchanged exemplar set before stopping early.
    pub convergence_iterations: usize,
    pub preference: Preference,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 1000,
            convergence_iterations: 15,
            preference: Preference::Median,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Affinity propagation over a square similarity matrix.
///
/// Responsibilities and availabilities are updated with damping until the
/// exemplar set is stable for `convergence_iterations` iterations or
/// `max_iterations` is reached. Exact ties are broken by a tiny fixed
/// bias towards lower indices, so results depend only on the input.
pub fn affinity_propagation(similarity: &Matrix, config: &ApConfig) -> Result<ClusterAssignment> {
    if !similarity.is_square() {
        return invalid(format!(
            "similarity matrix is {}x{}, expected square",
            similarity.rows(),
            similarity.cols()
        ));
    }
    if !(0.5..1.0).contains(&config.damping) {
        return invalid(format!("damping {} not in [0.5, 1)", config.damping));
    }
    if !similarity.is_finite() {
        return invalid("similarity matrix contains non-finite values");
    }
    let n = similarity.rows();
    if n == 0 {
        return invalid("empty similarity matrix");
    }
    if n == 1 {
        return ClusterAssignment::new(vec![0], vec![0]);
    }

    let off_diag: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
        .map(|(i, k)| similarity[(i, k)])
        .collect();
    let preference = match config.preference {
        Preference::Median => median(off_diag.clone()),
        Preference::Value(v) => v,
    };

    // All similarities and preferences equal: message passing has no
    // preferred solution, resolve directly.
    if off_diag.iter().all(|&v| v == off_diag[0]) {
        return if preference >= off_diag[0] {
            ClusterAssignment::new((0..n).collect(), (0..n).collect())
        } else {
            ClusterAssignment::new(vec![0; n], vec![0])
        };
    }

    let mut s = similarity.clone();
    for i in 0..n {
        s[(i, i)] = preference;
    }
    // Symmetric pairs otherwise oscillate forever; a small bias towards
    // lower-index exemplars settles them the same way every run.
    let scale = s.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for k in 0..n {
            s[(i, k)] -= 1e-12 * scale * k as f64 / n as f64;
        }
    }

    let damp = config.damping;
    let mut r = Matrix::zeros(n, n);
    let mut a = Matrix::zeros(n, n);
    let mut history: Vec<Vec<bool>> = Vec::with_capacity(config.convergence_iterations);
    let mut col_pos = vec![0.0; n];

    for _ in 0..config.max_iterations {
        for i in 0..n {
            let (mut best, mut second, mut best_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = a[(i, k)] + s[(i, k)];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let fresh = s[(i, k)] - competitor;
                r[(i, k)] = damp * r[(i, k)] + (1.0 - damp) * fresh;
            }
        }

        for (k, pos) in col_pos.iter_mut().enumerate() {
            *pos = (0..n).filter(|&i| i != k).map(|i| r[(i, k)].max(0.0)).sum();
        }
        for i in 0..n {
            for k in 0..n {
                let fresh = if i == k {
                    col_pos[k]
                } else {
                    (r[(k, k)] + col_pos[k] - r[(i, k)].max(0.0)).min(0.0)
                };
                a[(i, k)] = damp * a[(i, k)] + (1.0 - damp) * fresh;
            }
        }

        let exemplars: Vec<bool> = (0..n).map(|k| a[(k, k)] + r[(k, k)] > 0.0).collect();
        if history.len() == config.convergence_iterations {
            history.remove(0);
        }
        history.push(exemplars);
        if history.len() == config.convergence_iterations
            && history.windows(2).all(|w| w[0] == w[1])
            && history[0].iter().any(|&e| e)
        {
            break;
        }
    }

    let mut centers: Vec<usize> = (0..n).filter(|&k| a[(k, k)] + r[(k, k)] > 0.0).collect();
    if centers.is_empty() {
        let best = (0..n)
            .max_by(|&x, &y| (a[(x, x)] + r[(x, x)]).total_cmp(&(a[(y, y)] + r[(y, y)])).then(y.cmp(&x)))
            .unwrap_or(0);
        centers.push(best);
    }
    let labels = (0..n)
        .map(|i| match centers.iter().position(|&c| c == i) {
            Some(c) => c,
            None => {
                let mut best = 0;
                for (c, &k) in centers.iter().enumerate() {
                    if similarity[(i, k)] > similarity[(i, centers[best])] {
                        best = c;
                    }
                }
                best
            }
        })
        .collect();
    ClusterAssignment::new(labels, centers)
}

/// Greedily merges the two clusters with the closest center embeddings until
/// at most `max_clusters` remain. A merged cluster's center is the member
/// closest to the mean embedding of its members.
pub fn merge_clusters(
    assignment: &ClusterAssignment,
    embedding: &Matrix,
    max_clusters: usize,
) -> Result<ClusterAssignment> {
    if max_clusters == 0 {
        return invalid("max_clusters must be at least 1");
    }
    if embedding.rows() != assignment.n_points() {
        return invalid(format!(
            "embedding has {} rows for {} points",
            embedding.rows(),
            assignment.n_points()
        ));
    }
    let mut labels = assignment.labels.clone();
    let mut centers = assignment.centers.clone();
    while centers.len() > max_clusters {
        let mut best = (0, 1, f64::INFINITY);
        for x in 0..centers.len() {
            for y in x + 1..centers.len() {
                let d = euclidean(embedding.row(centers[x]), embedding.row(centers[y]));
                if d < best.2 {
                    best = (x, y, d);
                }
            }
        }
        let (keep, drop, _) = best;
        for l in labels.iter_mut() {
            if *l == drop {
                *l = keep;
            } else if *l > drop {
                *l -= 1;
            }
        }
        centers.remove(drop);

        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == keep).collect();
        let dim = embedding.cols();
        let mut mean = vec![0.0; dim];
        for &m in &members {
            for (acc, v) in mean.iter_mut().zip(embedding.row(m)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= members.len() as f64);
        let mut center = members[0];
        let mut center_d = euclidean(embedding.row(center), &mean);
        for &m in &members[1..] {
            let d = euclidean(embedding.row(m), &mean);
            if d < center_d {
                center = m;
                center_d = d;
            }
        }
        centers[keep] = center;
    }
    ClusterAssignment::new(labels, centers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points_similarity(points: &[Vec<f64>]) -> Matrix {
        Matrix::from_fn(points.len(), points.len(), |i, j| -euclidean(&points[i], &points[j]))
    }

    /// Best net similarity over all exemplar subsets, each point joined to its
    /// most similar exemplar.
    fn exhaustive_best(sim: &Matrix, pref: f64) -> Vec<usize> {
        let n = sim.rows();
        let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, vec![]);
        for mask in 1u32..(1 << n) {
            let ex: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
            let mut total = pref * ex.len() as f64;
            for i in 0..n {
                if !ex.contains(&i) {
                    total += ex.iter().map(|&k| sim[(i, k)]).fold(f64::NEG_INFINITY, f64::max);
                }
            }
            if total > best.0 {
                best = (total, ex);
            }
        }
        best.1
    }

    #[test]
    fn two_separated_pairs() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![10.0, 10.0], vec![10.0, 10.0]];
        let sim = points_similarity(&pts);
        let a = affinity_propagation(&sim, &ApConfig::default()).unwrap();
        assert_eq!(a.n_clusters(), 2);
        assert_eq!(a.labels[0], a.labels[1]);
        assert_eq!(a.labels[2], a.labels[3]);
        assert_ne!(a.labels[0], a.labels[2]);
        let off: Vec<f64> = (0..4)
            .flat_map(|i| (0..4).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| sim[(i, k)])
            .collect();
        assert_eq!(exhaustive_best(&sim, median(off)).len(), a.n_clusters());
    }

    #[test]
    fn single_point() {
        let a = affinity_propagation(&Matrix::zeros(1, 1), &ApConfig::default()).unwrap();
        assert_eq!(a.labels, vec![0]);
        assert_eq!(a.n_clusters(), 1);
    }

    #[test]
    fn equal_similarities_with_max_preference() {
        let sim = Matrix::filled(4, 4, -1.0);
        let cfg = ApConfig {
            preference: Preference::Value(-1.0),
            ..ApConfig::default()
        };
        let a = affinity_propagation(&sim, &cfg).unwrap();
        assert_eq!(a.n_clusters(), 4);
        assert_eq!(a.labels, vec![0, 1, 2, 3]);
        let lower = ApConfig {
            preference: Preference::Value(-2.0),
            ..ApConfig::default()
        };
        assert_eq!(affinity_propagation(&sim, &lower).unwrap().n_clusters(), 1);
    }

    #[test]
    fn three_blobs_match_exhaustive_optimum() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.3, 0.1],
            vec![0.1, 0.4],
            vec![5.0, 5.0],
            vec![5.2, 4.9],
            vec![-4.0, 6.0],
            vec![-4.3, 6.1],
            vec![-3.9, 5.8],
        ];
        let sim = points_similarity(&pts);
        let cfg = ApConfig {
            preference: Preference::Value(-3.0),
            ..ApConfig::default()
        };
        let a = affinity_propagation(&sim, &cfg).unwrap();
        assert_eq!(a.n_clusters(), exhaustive_best(&sim, -3.0).len());
        assert_eq!(a.n_clusters(), 3);
        assert_eq!(a.labels[0], a.labels[2]);
        assert_eq!(a.labels[3], a.labels[4]);
        assert_eq!(a.labels[5], a.labels[7]);
    }

    #[test]
    fn deterministic() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![(i * 7 % 11) as f64, (i % 5) as f64]).collect();
        let sim = points_similarity(&pts);
        let a = affinity_propagation(&sim, &ApConfig::default()).unwrap();
        let b = affinity_propagation(&sim, &ApConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_square_and_bad_damping() {
        assert!(affinity_propagation(&Matrix::zeros(2, 3), &ApConfig::default()).is_err());
        let cfg = ApConfig {
            damping: 0.3,
            ..ApConfig::default()
        };
        assert!(affinity_propagation(&Matrix::zeros(2, 2), &cfg).is_err());
    }

    fn line_assignment() -> (ClusterAssignment, Matrix) {
        // four singleton-ish clusters on a line, centers 0 and 1 almost coincide
        let emb = Matrix::from_rows(&[
            vec![0.0],
            vec![0.01],
            vec![5.0],
            vec![9.0],
            vec![5.5],
        ])
        .unwrap();
        let a = ClusterAssignment::new(vec![0, 1, 2, 3, 2], vec![0, 1, 2, 3]).unwrap();
        (a, emb)
    }

    #[test]
    fn merge_noop_when_within_limit() {
        let (a, emb) = line_assignment();
        assert_eq!(merge_clusters(&a, &emb, 4).unwrap(), a);
    }

    #[test]
    fn merge_joins_nearest_centers() {
        let (a, emb) = line_assignment();
        let m = merge_clusters(&a, &emb, 3).unwrap();
        assert_eq!(m.n_clusters(), 3);
        assert_eq!(m.labels[0], m.labels[1]);
        assert_eq!(m.labels, vec![0, 0, 1, 2, 1]);
        // brute-force nearest pair among the original centers
        let mut pairs = vec![];
        for x in 0..4 {
            for y in x + 1..4 {
                pairs.push((euclidean(emb.row(a.centers[x]), emb.row(a.centers[y])), x, y));
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        assert_eq!((pairs[0].1, pairs[0].2), (0, 1));
    }

    #[test]
    fn merge_to_one() {
        let (a, emb) = line_assignment();
        let m = merge_clusters(&a, &emb, 1).unwrap();
        assert_eq!(m.n_clusters(), 1);
        assert!(m.labels.iter().all(|&l| l == 0));
        // mean is 3.902, closest member is 5.0 (index 2)
        assert_eq!(m.centers, vec![2]);
    }
}
