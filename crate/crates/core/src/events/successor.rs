use crate::error::{invalid, Result};
use crate::matrix::{euclidean, Matrix};

/// Tabular successor representation: row `s` estimates the discounted
/// expected future occupancy of every state when starting in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorMatrix {
    pub matrix: Matrix,
    pub learning_rate: f64,
    pub discount: f64,
}

impl SuccessorMatrix {
    pub fn n_states(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.matrix.row(s)
    }
}

/// Learns the successor representation by TD updates
/// `M(s,·) += lr * (1_s + discount * M(s',·) - M(s,·))`, applied to every
/// transition in order, `sweeps` times over. Rows start at zero.
pub fn build_successor_representation(
    n_states: usize,
    transitions: &[(usize, usize)],
    learning_rate: f64,
    discount: f64,
    sweeps: usize,
) -> Result<SuccessorMatrix> {
    if transitions.is_empty() {
        return invalid("no transitions");
    }
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return invalid(format!("learning rate {learning_rate} not in (0, 1]"));
    }
    if !(0.0..1.0).contains(&discount) {
        return invalid(format!("discount {discount} not in [0, 1)"));
    }
    if let Some(&(s, t)) = transitions.iter().find(|&&(s, t)| s >= n_states || t >= n_states) {
        return invalid(format!("transition ({s}, {t}) out of range for {n_states} states"));
    }

    let mut m = Matrix::zeros(n_states, n_states);
    let mut target = vec![0.0; n_states];
    for _ in 0..sweeps {
        for &(s, next) in transitions {
            for (k, t) in target.iter_mut().enumerate() {
                *t = discount * m[(next, k)];
            }
            target[s] += 1.0;
            let row = m.row_mut(s);
            for (v, t) in row.iter_mut().zip(&target) {
                *v += learning_rate * (t - *v);
            }
        }
    }
    Ok(SuccessorMatrix {
        matrix: m,
        learning_rate,
        discount,
    })
}

/// Negative Euclidean distance between successor rows.
pub fn successor_similarity(m: &SuccessorMatrix) -> Matrix {
    let n = m.n_states();
    let mut sim = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = -euclidean(m.row(i), m.row(j));
            sim[(i, j)] = d;
            sim[(j, i)] = d;
        }
    }
    sim
}

#[cfg(test)]
mod tests {
    use super::*;

    /// (I - discount * P)^-1 by Gauss-Jordan elimination.
    fn closed_form(p: &Matrix, discount: f64) -> Matrix {
        let n = p.rows();
        let mut a = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - discount * p[(i, j)]);
        let mut inv = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)));
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            for k in 0..n {
                let (t1, t2) = (a[(col, k)], a[(pivot, k)]);
                a[(col, k)] = t2;
                a[(pivot, k)] = t1;
                let (t1, t2) = (inv[(col, k)], inv[(pivot, k)]);
                inv[(col, k)] = t2;
                inv[(pivot, k)] = t1;
            }
            let d = a[(col, col)];
            for k in 0..n {
                a[(col, k)] /= d;
                inv[(col, k)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    for k in 0..n {
                        a[(r, k)] -= f * a[(col, k)];
                        inv[(r, k)] -= f * inv[(col, k)];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn identity_update_without_discount() {
        let m = build_successor_representation(2, &[(0, 0)], 1.0, 0.0, 1).unwrap();
        assert_eq!(m.matrix.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn two_cycle_converges_to_inverse() {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let oracle = closed_form(&p, 0.99);
        // the slowest error mode shrinks by roughly 0.1% per sweep here,
        // so getting within 0.05 of the fixed point takes about 7000 sweeps
        let m = build_successor_representation(2, &[(0, 1), (1, 0)], 0.1, 0.99, 10_000).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.matrix[(i, j)] - oracle[(i, j)]).abs() < 0.05, "{i},{j}");
            }
        }
    }

    #[test]
    fn chain_converges_and_keeps_invariants() {
        // 0 -> 1 -> 2 -> 2 chain
        let transitions = [(0, 1), (1, 2), (2, 2)];
        let p = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let oracle = closed_form(&p, 0.9);
        let m = build_successor_representation(3, &transitions, 0.2, 0.9, 3000).unwrap();
        for i in 0..3 {
            // rows approach their fixed point from below, so the diagonal
            // only reaches 1 up to rounding
            assert!(m.matrix[(i, i)] >= 1.0 - 1e-9);
            for j in 0..3 {
                assert!(m.matrix[(i, j)] >= 0.0);
                assert!((m.matrix[(i, j)] - oracle[(i, j)]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_successor_representation(2, &[], 0.1, 0.9, 1).is_err());
        assert!(build_successor_representation(2, &[(0, 2)], 0.1, 0.9, 1).is_err());
        assert!(build_successor_representation(2, &[(0, 1)], 0.0, 0.9, 1).is_err());
        assert!(build_successor_representation(2, &[(0, 1)], 0.1, 1.0, 1).is_err());
    }

    fn sr_from_rows(rows: &[Vec<f64>]) -> SuccessorMatrix {
        SuccessorMatrix {
            matrix: Matrix::from_rows(rows).unwrap(),
            learning_rate: 0.1,
            discount: 0.9,
        }
    }

    #[test]
    fn similarity_of_identical_and_orthogonal_rows() {
        let m = sr_from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = successor_similarity(&m);
        assert_eq!(s[(0, 2)], 0.0);
        assert!((s[(0, 1)] + 2f64.sqrt()).abs() < 1e-15);
        assert!(s.is_symmetric());
        for i in 0..3 {
            assert_eq!(s[(i, i)], 0.0);
            assert!((0..3).all(|j| s[(i, j)] <= s[(i, i)]));
        }
    }

    #[test]
    fn chain_similarity_orders_by_distance() {
        let transitions: Vec<(usize, usize)> = vec![(0, 1), (1, 2), (2, 1), (1, 0)];
        let m = build_successor_representation(3, &transitions, 0.1, 0.9, 500).unwrap();
        let s = successor_similarity(&m);
        // brute-force pairwise distances
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3)
                    .map(|k| (m.matrix[(i, k)] - m.matrix[(j, k)]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((s[(i, j)] + d).abs() < 1e-12);
            }
        }
        assert!(s[(0, 1)] > s[(0, 2)]);
        assert!(s[(2, 1)] > s[(2, 0)]);
    }
}
