use rayon::prelude::*;

use super::pairwise::{affine_dp, score_gapped_pair, Op};
use super::{build_guide_tree, pairwise_align, GuideTree, ScoringMatrix};
use crate::error::{invalid, Error, Result};
use crate::events::io::{read_fasta, write_fasta, Record};
use crate::events::EventSequence;
use crate::matrix::Matrix;

pub type GappedRow = Vec<Option<usize>>;

/// Multiple sequence alignment. Rows are in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Msa {
    pub names: Vec<String>,
    pub source_returns: Vec<f64>,
    pub rows: Vec<GappedRow>,
    /// Sum-of-pairs score recorded at construction.
    pub score: f64,
}

impl Msa {
    /// Builds an MSA from gapped rows, checking they share one length.
    pub fn from_rows(names: Vec<String>, source_returns: Vec<f64>, rows: Vec<GappedRow>) -> Result<Self> {
        if rows.is_empty() {
            return invalid("alignment has no rows");
        }
        if names.len() != rows.len() || source_returns.len() != rows.len() {
            return invalid("names, returns and rows differ in count");
        }
        let len = rows[0].len();
        if rows.iter().any(|r| r.len() != len) {
            return invalid("alignment rows differ in length");
        }
        Ok(Self {
            names,
            source_returns,
            rows,
            score: f64::NAN,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Alignment length `L`.
    pub fn len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn degap(&self, row: usize) -> Vec<usize> {
        self.rows[row].iter().flatten().copied().collect()
    }

    pub fn to_fasta(&self) -> String {
        let records: Vec<Record> = self
            .rows
            .iter()
            .zip(&self.names)
            .zip(&self.source_returns)
            .map(|((r, n), &ret)| Record {
                name: n.clone(),
                source_return: Some(ret),
                symbols: r.clone(),
            })
            .collect();
        write_fasta(&records)
    }

    /// Parses gapped FASTA and rescores it under `scoring`.
    pub fn from_fasta(text: &str, scoring: &ScoringMatrix) -> Result<Self> {
        let records = read_fasta(text)?;
        let mut names = Vec::new();
        let mut returns = Vec::new();
        let mut rows = Vec::new();
        for r in records {
            returns.push(r.source_return.ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("row {:?} has no return", r.name),
            })?);
            names.push(r.name);
            rows.push(r.symbols);
        }
        let mut msa = Self::from_rows(names, returns, rows)?;
        for r in &msa.rows {
            scoring.check_events(&r.iter().flatten().copied().collect::<Vec<_>>())?;
        }
        msa.score = sum_of_pairs_score(&msa, scoring);
        Ok(msa)
    }
}

/// Sum over unordered row pairs of the pairwise score of the two rows,
/// with gap-gap columns dropped and gap runs charged like in
/// [`pairwise_align`].
pub fn sum_of_pairs_score(msa: &Msa, scoring: &ScoringMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..msa.rows.len() {
        for j in i + 1..msa.rows.len() {
            total += score_gapped_pair(&msa.rows[i], &msa.rows[j], scoring);
        }
    }
    total
}

/// All-pairs global alignment scores; the diagonal holds self scores.
pub fn pairwise_score_matrix(sequences: &[EventSequence], scoring: &ScoringMatrix) -> Result<Matrix> {
    let n = sequences.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let scores = pairs
        .par_iter()
        .map(|&(i, j)| pairwise_align(&sequences[i], &sequences[j], scoring).map(|a| a.score))
        .collect::<Result<Vec<_>>>()?;
    let mut m = Matrix::zeros(n, n);
    for (&(i, j), s) in pairs.iter().zip(scores) {
        m[(i, j)] = s;
        m[(j, i)] = s;
    }
    Ok(m)
}

/// A group of aligned rows with their source indices.
struct Group {
    members: Vec<usize>,
    rows: Vec<GappedRow>,
}

impl Group {
    fn len(&self) -> usize {
        self.rows[0].len()
    }

    /// Per-column event frequencies; gaps count toward the row total only.
    fn frequencies(&self, n_events: usize) -> Vec<Vec<f64>> {
        let k = self.rows.len() as f64;
        (0..self.len())
            .map(|c| {
                let mut f = vec![0.0; n_events];
                for r in &self.rows {
                    if let Some(e) = r[c] {
                        f[e] += 1.0;
                    }
                }
                f.iter_mut().for_each(|v| *v /= k);
                f
            })
            .collect()
    }
}

/// Aligns two groups with columns scored by the expected pairwise score
/// under their column frequency vectors.
fn align_groups(a: Group, b: Group, scoring: &ScoringMatrix) -> Group {
    let n = scoring.n_events();
    let fa = a.frequencies(n);
    // pre-multiply b's columns by the score matrix
    let wb: Vec<Vec<f64>> = b
        .frequencies(n)
        .iter()
        .map(|f| {
            (0..n)
                .map(|x| f.iter().enumerate().map(|(y, &p)| p * scoring.score(x, y)).sum())
                .collect()
        })
        .collect();
    let (_, ops) = affine_dp(
        a.len(),
        b.len(),
        |i, j| fa[i].iter().zip(&wb[j]).map(|(p, w)| p * w).sum(),
        scoring.gap_open,
        scoring.gap_extend,
    );
    let mut rows: Vec<GappedRow> = vec![Vec::with_capacity(ops.len()); a.rows.len() + b.rows.len()];
    let (mut i, mut j) = (0, 0);
    let split = a.rows.len();
    for op in ops {
        let (take_a, take_b) = match op {
            Op::Diag => (true, true),
            Op::Up => (true, false),
            Op::Left => (false, true),
        };
        for (r, out) in a.rows.iter().zip(&mut rows[..split]) {
            out.push(if take_a { r[i] } else { None });
        }
        for (r, out) in b.rows.iter().zip(&mut rows[split..]) {
            out.push(if take_b { r[j] } else { None });
        }
        i += usize::from(take_a);
        j += usize::from(take_b);
    }
    let mut members = a.members;
    members.extend(b.members);
    Group { members, rows }
}

/// Progressive alignment: all-pairs scores, a UPGMA guide tree, then
/// groups merged in tree order.
pub fn progressive_msa(sequences: &[EventSequence], scoring: &ScoringMatrix) -> Result<Msa> {
    Ok(progressive_msa_with_tree(sequences, scoring)?.0)
}

pub fn progressive_msa_with_tree(sequences: &[EventSequence], scoring: &ScoringMatrix) -> Result<(Msa, GuideTree)> {
    if sequences.len() < 2 {
        return invalid(format!("need at least 2 sequences, got {}", sequences.len()));
    }
    if let Some(s) = sequences.iter().find(|s| s.is_empty()) {
        return invalid(format!("sequence {:?} is empty", s.name));
    }
    for s in sequences {
        scoring.check_events(&s.events)?;
    }
    let scores = pairwise_score_matrix(sequences, scoring)?;
    let tree = build_guide_tree(&scores)?;
    let n = sequences.len();
    let mut groups: Vec<Option<Group>> = sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Some(Group {
                members: vec![i],
                rows: vec![s.events.iter().map(|&e| Some(e)).collect()],
            })
        })
        .collect();
    for node in &tree.nodes {
        let a = groups[node.left].take().expect("guide tree reuses a node");
        let b = groups[node.right].take().expect("guide tree reuses a node");
        groups.push(Some(align_groups(a, b, scoring)));
    }
    let root = groups[tree.root()].take().expect("guide tree has no root");
    let mut rows = vec![Vec::new(); n];
    for (m, r) in root.members.into_iter().zip(root.rows) {
        rows[m] = r;
    }
    let mut msa = Msa::from_rows(
        sequences.iter().map(|s| s.name.clone()).collect(),
        sequences.iter().map(|s| s.source_return).collect(),
        rows,
    )?;
    msa.score = sum_of_pairs_score(&msa, scoring);
    Ok((msa, tree))
}
