use super::ScoringMatrix;
use crate::error::{invalid, Result};
use crate::events::EventSequence;

/// One DP move. `Up` consumes from the first input only (gap in the
/// second), `Left` consumes from the second only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    Diag,
    Up,
    Left,
}

const NEG: f64 = f64::NEG_INFINITY;

/// Picks the best of three candidates, preferring earlier ones on ties.
#[inline]
fn best3(a: f64, b: f64, c: f64) -> (f64, usize) {
    let mut v = a;
    let mut k = 0;
    if b > v {
        v = b;
        k = 1;
    }
    if c > v {
        v = c;
        k = 2;
    }
    (v, k)
}

/// Global affine-gap DP (Gotoh) over an `n x m` grid. `col(i, j)` scores
/// aligning item `i` of the first input with item `j` of the second.
/// Returns the optimal score and the moves in forward order. Ties prefer
/// diagonal, then up, then left.
pub(crate) fn affine_dp(
    n: usize,
    m: usize,
    col: impl Fn(usize, usize) -> f64,
    gap_open: f64,
    gap_extend: f64,
) -> (f64, Vec<Op>) {
    let w = m + 1;
    // mm: ends in a diagonal move, xx: ends in up, yy: ends in left
    let mut mm = vec![NEG; (n + 1) * w];
    let mut xx = vec![NEG; (n + 1) * w];
    let mut yy = vec![NEG; (n + 1) * w];
    // back pointers: which state the predecessor cell was in
    let mut bm = vec![0u8; (n + 1) * w];
    let mut bx = vec![0u8; (n + 1) * w];
    let mut by = vec![0u8; (n + 1) * w];
    mm[0] = 0.0;
    for i in 1..=n {
        let at = i * w;
        let (v, k) = best3(mm[at - w] - gap_open - gap_extend, xx[at - w] - gap_extend, yy[at - w] - gap_open - gap_extend);
        xx[at] = v;
        bx[at] = k as u8;
    }
    for j in 1..=m {
        let (v, k) = best3(mm[j - 1] - gap_open - gap_extend, xx[j - 1] - gap_open - gap_extend, yy[j - 1] - gap_extend);
        yy[j] = v;
        by[j] = k as u8;
    }
    for i in 1..=n {
        for j in 1..=m {
            let at = i * w + j;
            let d = at - w - 1;
            let (v, k) = best3(mm[d], xx[d], yy[d]);
            mm[at] = v + col(i - 1, j - 1);
            bm[at] = k as u8;
            let u = at - w;
            let (v, k) = best3(mm[u] - gap_open - gap_extend, xx[u] - gap_extend, yy[u] - gap_open - gap_extend);
            xx[at] = v;
            bx[at] = k as u8;
            let l = at - 1;
            let (v, k) = best3(mm[l] - gap_open - gap_extend, xx[l] - gap_open - gap_extend, yy[l] - gap_extend);
            yy[at] = v;
            by[at] = k as u8;
        }
    }
    let end = n * w + m;
    let (score, mut state) = best3(mm[end], xx[end], yy[end]);
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let at = i * w + j;
        match state {
            0 => {
                ops.push(Op::Diag);
                state = bm[at] as usize;
                i -= 1;
                j -= 1;
            }
            1 => {
                ops.push(Op::Up);
                state = bx[at] as usize;
                i -= 1;
            }
            _ => {
                ops.push(Op::Left);
                state = by[at] as usize;
                j -= 1;
            }
        }
    }
    ops.reverse();
    (score, ops)
}

/// A global alignment of two event sequences. `None` marks a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseAlignment {
    pub aligned_a: Vec<Option<usize>>,
    pub aligned_b: Vec<Option<usize>>,
    pub score: f64,
}

impl PairwiseAlignment {
    pub fn len(&self) -> usize {
        self.aligned_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aligned_a.is_empty()
    }
}

/// Scores two gapped rows the way the DP does: column scores for matched
/// pairs, affine penalties for gap runs, and gap-gap columns skipped.
pub fn score_gapped_pair(a: &[Option<usize>], b: &[Option<usize>], scoring: &ScoringMatrix) -> f64 {
    #[derive(PartialEq)]
    enum Last {
        Match,
        GapB,
        GapA,
    }
    let mut last = Last::Match;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (Some(x), Some(y)) => {
                total += scoring.score(*x, *y);
                last = Last::Match;
            }
            (Some(_), None) => {
                total = if last == Last::GapB {
                    total - scoring.gap_extend
                } else {
                    total - scoring.gap_open - scoring.gap_extend
                };
                last = Last::GapB;
            }
            (None, Some(_)) => {
                total = if last == Last::GapA {
                    total - scoring.gap_extend
                } else {
                    total - scoring.gap_open - scoring.gap_extend
                };
                last = Last::GapA;
            }
            (None, None) => {}
        }
    }
    total
}

/// Needleman-Wunsch global alignment with affine gaps.
pub fn pairwise_align(a: &EventSequence, b: &EventSequence, scoring: &ScoringMatrix) -> Result<PairwiseAlignment> {
    if a.is_empty() || b.is_empty() {
        return invalid("cannot align an empty sequence");
    }
    scoring.check_events(&a.events)?;
    scoring.check_events(&b.events)?;
    let (x, y) = (&a.events, &b.events);
    let (score, ops) = affine_dp(
        x.len(),
        y.len(),
        |i, j| scoring.score(x[i], y[j]),
        scoring.gap_open,
        scoring.gap_extend,
    );
    let mut aligned_a = Vec::with_capacity(ops.len());
    let mut aligned_b = Vec::with_capacity(ops.len());
    let (mut i, mut j) = (0, 0);
    for op in ops {
        match op {
            Op::Diag => {
                aligned_a.push(Some(x[i]));
                aligned_b.push(Some(y[j]));
                i += 1;
                j += 1;
            }
            Op::Up => {
                aligned_a.push(Some(x[i]));
                aligned_b.push(None);
                i += 1;
            }
            Op::Left => {
                aligned_a.push(None);
                aligned_b.push(Some(y[j]));
                j += 1;
            }
        }
    }
    Ok(PairwiseAlignment {
        aligned_a,
        aligned_b,
        score,
    })
}
