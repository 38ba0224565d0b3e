//! Scoring systems, pairwise global alignment, UPGMA guide trees and
//! progressive multiple alignment of event sequences.

mod msa;
mod pairwise;
mod scoring;
mod tree;

pub use msa::{pairwise_score_matrix, progressive_msa, progressive_msa_with_tree, sum_of_pairs_score, GappedRow, Msa};
pub use pairwise::{pairwise_align, score_gapped_pair, PairwiseAlignment};
pub use scoring::{build_scoring_matrix_karlin, build_scoring_matrix_simple, solve_lambda, ScoringMatrix};
pub use tree::{build_guide_tree, GuideTree, TreeNode};

pub(crate) use scoring::karlin_root;
