use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// Internal node of a guide tree. Children are node ids: ids below
/// `n_leaves` are leaves, id `n_leaves + k` is the k-th merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuideTree {
    pub n_leaves: usize,
    /// Merges in the order they happened.
    pub nodes: Vec<TreeNode>,
}

impl GuideTree {
    pub fn root(&self) -> usize {
        if self.nodes.is_empty() {
            0
        } else {
            self.n_leaves + self.nodes.len() - 1
        }
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        id < self.n_leaves
    }

    /// Leaves under `id`, left subtree first.
    pub fn leaves(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(x);
            } else {
                let node = self.nodes[x - self.n_leaves];
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        out
    }
}

/// UPGMA on distances `max_score - score(i, j)`, where `max_score` is the
/// best off-diagonal score. Ties go to the pair with the lowest ids.
pub fn build_guide_tree(scores: &Matrix) -> Result<GuideTree> {
    if !scores.is_square() {
        return invalid("pairwise score matrix must be square");
    }
    if !scores.is_finite() {
        return invalid("pairwise score matrix contains non-finite values");
    }
    if !scores.is_symmetric() {
        return invalid("pairwise score matrix must be symmetric");
    }
    let n = scores.rows();
    if n == 0 {
        return invalid("no sequences");
    }
    let max = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| scores[(i, j)])
        .fold(f64::NEG_INFINITY, f64::max);

    // active clusters: (id, size); distances keyed by position in `active`
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| max - scores[(i, j)]).collect())
        .collect();
    let mut nodes = Vec::with_capacity(n.saturating_sub(1));
    let mut last_height = 0.0f64;
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                if dist[a][b] < best.0 {
                    best = (dist[a][b], a, b);
                }
            }
        }
        let (d, a, b) = best;
        let (ida, na) = active[a];
        let (idb, nb) = active[b];
        // UPGMA is monotone; the max guards rounding only
        last_height = last_height.max(d);
        nodes.push(TreeNode {
            left: ida,
            right: idb,
            height: last_height,
        });
        let merged: Vec<f64> = (0..active.len())
            .map(|k| (na as f64 * dist[a][k] + nb as f64 * dist[b][k]) / (na + nb) as f64)
            .collect();
        // keep `active` sorted by id: a < b, new id is the largest
        for (k, row) in dist.iter_mut().enumerate() {
            row.push(merged[k]);
        }
        let mut new_row = merged;
        new_row.push(0.0);
        dist.push(new_row);
        active.push((n + nodes.len() - 1, na + nb));
        for idx in [b, a] {
            active.remove(idx);
            dist.remove(idx);
            for row in &mut dist {
                row.remove(idx);
            }
        }
    }
    Ok(GuideTree { n_leaves: n, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaves() {
        let t = build_guide_tree(&Matrix::from_rows(&[vec![5.0, 2.0], vec![2.0, 5.0]]).unwrap()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!((t.nodes[0].left, t.nodes[0].right), (0, 1));
        assert_eq!(t.root(), 2);
    }

    #[test]
    fn joins_best_pair_first() {
        let s = Matrix::from_rows(&[vec![0.0, 1.0, 10.0], vec![1.0, 0.0, 2.0], vec![10.0, 2.0, 0.0]]).unwrap();
        let t = build_guide_tree(&s).unwrap();
        assert_eq!((t.nodes[0].left, t.nodes[0].right), (0, 2));
        assert_eq!(t.nodes[0].height, 0.0);
        // d(1,{0,2}) = mean(9, 8)
        assert_eq!((t.nodes[1].left, t.nodes[1].right), (1, 3));
        assert_eq!(t.nodes[1].height, 8.5);
        assert_eq!(t.leaves(t.root()), vec![1, 0, 2]);
    }

    #[test]
    fn ties_take_lowest_indices() {
        let s = Matrix::filled(4, 4, 3.0);
        let t = build_guide_tree(&s).unwrap();
        assert_eq!((t.nodes[0].left, t.nodes[0].right), (0, 1));
        assert_eq!((t.nodes[1].left, t.nodes[1].right), (2, 3));
        assert_eq!((t.nodes[2].left, t.nodes[2].right), (4, 5));
        assert!(t.nodes.windows(2).all(|w| w[0].height <= w[1].height));
    }
}
