//! Profile models and position-specific scoring matrices built from an
//! alignment, and alignment of (prefixes of) event sequences to them.

use std::fmt::Write as _;

use crate::alignment::{karlin_root, Msa};
use crate::error::{invalid, Error, Result};
use crate::events::{EventAlphabet, EventBackground, EventSequence};
use crate::matrix::Matrix;

/// Floor for log-odds scores of events that never occur in a column.
pub const SCORE_FLOOR: f64 = -10.0;

/// Column-wise event frequencies of an alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileModel {
    /// `L x n`: row `t` holds the event frequencies of column `t`.
    pub q: Matrix,
    pub gap: Vec<f64>,
    pub pseudocount: f64,
    pub n_rows: usize,
}

impl ProfileModel {
    pub fn len(&self) -> usize {
        self.q.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.rows() == 0
    }

    pub fn n_events(&self) -> usize {
        self.q.cols()
    }
}

/// Default pseudocount: 0.01 per alignment row.
pub fn default_pseudocount(n_rows: usize) -> f64 {
    0.01 * n_rows as f64
}

/// `q_it = (count_it + pc) / (rows + pc * n)`; gaps get `gaps / (rows + pc * n)`
/// so each column sums to one.
pub fn column_frequencies(msa: &Msa, alphabet_size: usize, pseudocount: f64) -> Result<ProfileModel> {
    if !(pseudocount >= 0.0 && pseudocount.is_finite()) {
        return invalid(format!("pseudocount must be finite and >= 0, got {pseudocount}"));
    }
    if alphabet_size == 0 {
        return invalid("empty alphabet");
    }
    let rows = msa.n_rows();
    let len = msa.len();
    let denom = rows as f64 + pseudocount * alphabet_size as f64;
    let mut q = Matrix::zeros(len, alphabet_size);
    let mut gap = vec![0.0; len];
    for t in 0..len {
        let mut counts = vec![0usize; alphabet_size];
        let mut gaps = 0usize;
        for r in &msa.rows {
            match r[t] {
                Some(e) if e < alphabet_size => counts[e] += 1,
                Some(e) => return invalid(format!("event {e} outside a {alphabet_size}-event alphabet")),
                None => gaps += 1,
            }
        }
        for (v, &c) in q.row_mut(t).iter_mut().zip(&counts) {
            *v = (c as f64 + pseudocount) / denom;
        }
        gap[t] = gaps as f64 / denom;
    }
    Ok(ProfileModel {
        q,
        gap,
        pseudocount,
        n_rows: rows,
    })
}

/// Position-specific scores `ln(q_it / p_i)`, floored at [`SCORE_FLOOR`].
///
/// `lambda[t]` is the positive root of `sum_i p_i exp(lambda s_it) = 1` for
/// the stored scores: 1 for gap-free columns, above 1 when gaps take mass
/// from the events, and `None` when the column has no root (every event is
/// at or below background). A column equal to the background gets 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Pssm {
    /// `L x n` scores.
    pub s: Matrix,
    pub lambda: Vec<Option<f64>>,
    pub gap_penalty: Vec<f64>,
    pub consensus: Vec<usize>,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Pssm {
    pub fn len(&self) -> usize {
        self.s.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.s.rows() == 0
    }

    pub fn n_events(&self) -> usize {
        self.s.cols()
    }

    #[inline]
    pub fn score(&self, column: usize, event: usize) -> f64 {
        self.s[(column, event)]
    }

    pub fn with_gap_penalty(mut self, penalty: f64) -> Result<Self> {
        if !(penalty >= 0.0 && penalty.is_finite()) {
            return invalid(format!("gap penalty must be finite and >= 0, got {penalty}"));
        }
        self.gap_penalty = vec![penalty; self.len()];
        Ok(self)
    }

    /// CSV with one row per event letter and one column per position,
    /// followed by `consensus`, `lambda` and `gap` rows.
    pub fn to_csv(&self) -> String {
        let alphabet = EventAlphabet::new(self.n_events()).expect("PSSM wider than the letter alphabet");
        let mut out = String::from("event");
        for t in 0..self.len() {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        for e in 0..self.n_events() {
            out.push(alphabet.letter(e));
            for t in 0..self.len() {
                let _ = write!(out, ",{}", self.score(t, e));
            }
            out.push('\n');
        }
        out.push_str("consensus");
        for &c in &self.consensus {
            let _ = write!(out, ",{}", alphabet.letter(c));
        }
        out.push_str("\nlambda");
        for l in &self.lambda {
            match l {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push_str(",none"),
            }
        }
        out.push_str("\ngap");
        for g in &self.gap_penalty {
            let _ = write!(out, ",{g}");
        }
        out.push('\n');
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty PSSM file".into(),
        })?;
        let len = header.split(',').count() - 1;
        let mut event_rows: Vec<Vec<f64>> = Vec::new();
        let mut consensus = None;
        let mut lambda = None;
        let mut gap = None;
        for (i, line) in lines {
            let ln = i + 1;
            let mut fields = line.trim().split(',');
            let key = fields.next().unwrap_or("");
            let vals: Vec<&str> = fields.collect();
            if vals.len() != len {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {len} values, got {}", vals.len()),
                });
            }
            let num = |v: &str| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    line: ln,
                    msg: format!("bad number {v:?}: {e}"),
                })
            };
            match key {
                "consensus" => {
                    consensus = Some(
                        vals.iter()
                            .map(|v| match v.chars().next() {
                                Some(c @ 'A'..='Z') if v.len() == 1 => Ok((c as u8 - b'A') as usize),
                                _ => Err(Error::Parse {
                                    line: ln,
                                    msg: format!("bad consensus letter {v:?}"),
                                }),
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "lambda" => {
                    lambda = Some(
                        vals.iter()
                            .map(|&v| if v == "none" { Ok(None) } else { num(v).map(Some) })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "gap" => gap = Some(vals.iter().map(|&v| num(v)).collect::<Result<Vec<_>>>()?),
                _ => event_rows.push(vals.iter().map(|&v| num(v)).collect::<Result<Vec<_>>>()?),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            msg: format!("missing {what} row"),
        };
        let n = event_rows.len();
        let s = Matrix::from_fn(len, n, |t, e| event_rows[e][t]);
        let pssm = Pssm {
            s,
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            gap_penalty: gap.ok_or_else(|| missing("gap"))?,
            consensus: consensus.ok_or_else(|| missing("consensus"))?,
        };
        if pssm.consensus.iter().any(|&c| c >= n) {
            return invalid("consensus letter outside the event rows");
        }
        Ok(pssm)
    }
}

pub fn build_pssm(profile: &ProfileModel, background: &EventBackground) -> Result<Pssm> {
    let n = profile.n_events();
    if background.len() != n {
        return invalid(format!(
            "profile has {n} events but background has {}",
            background.len()
        ));
    }
    let p = background.probs();
    let len = profile.len();
    let mut s = Matrix::zeros(len, n);
    let mut lambda = Vec::with_capacity(len);
    for t in 0..len {
        let q = profile.q.row(t);
        if q.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(format!("column {t} has no event mass")));
        }
        for e in 0..n {
            s[(t, e)] = if q[e] > 0.0 {
                (q[e] / p[e]).ln().max(SCORE_FLOOR)
            } else {
                SCORE_FLOOR
            };
        }
        let row = s.row(t);
        lambda.push(if row.iter().all(|&v| v == 0.0) {
            Some(1.0)
        } else {
            let terms: Vec<(f64, f64)> = p.iter().copied().zip(row.iter().copied()).collect();
            karlin_root(&terms)
        });
    }
    let consensus = (0..len).map(|t| argmax(s.row(t))).collect();
    Ok(Pssm {
        s,
        lambda,
        gap_penalty: vec![0.0; len],
        consensus,
    })
}

/// Result of aligning a sequence to a profile: `columns[t]` is the sequence
/// position matched to column `t`, or `None` when the column is gapped.
/// Sequence positions not matched to any column are free insertions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAlignment {
    pub score: f64,
    pub columns: Vec<Option<usize>>,
}

/// Full DP table for a sequence against a profile. Row `j` covers the
/// prefix of length `j`, so every prefix alignment is read off one table.
struct ProfileDp<'a> {
    pssm: &'a Pssm,
    score: Vec<f64>,
    /// 0: match, 1: column gapped, 2: event skipped
    back: Vec<u8>,
}

impl<'a> ProfileDp<'a> {
    fn new(events: &'a [usize], pssm: &'a Pssm) -> Result<Self> {
        if let Some(&e) = events.iter().find(|&&e| e >= pssm.n_events()) {
            return invalid(format!("event {e} outside a {}-event profile", pssm.n_events()));
        }
        let (t_len, l_len) = (events.len(), pssm.len());
        let w = l_len + 1;
        let mut score = vec![0.0; (t_len + 1) * w];
        let mut back = vec![0u8; (t_len + 1) * w];
        for l in 1..=l_len {
            score[l] = score[l - 1] - pssm.gap_penalty[l - 1];
            back[l] = 1;
        }
        for j in 1..=t_len {
            let e = events[j - 1];
            let at = j * w;
            score[at] = score[at - w];
            back[at] = 2;
            for l in 1..=l_len {
                let at = j * w + l;
                let diag = score[at - w - 1] + pssm.score(l - 1, e);
                let gap = score[at - 1] - pssm.gap_penalty[l - 1];
                let skip = score[at - w];
                let (mut v, mut k) = (diag, 0u8);
                if gap > v {
                    v = gap;
                    k = 1;
                }
                if skip > v {
                    v = skip;
                    k = 2;
                }
                score[at] = v;
                back[at] = k;
            }
        }
        Ok(Self {
            pssm,
            score,
            back,
        })
    }

    fn width(&self) -> usize {
        self.pssm.len() + 1
    }

    /// Score of the prefix of length `j` against the whole profile.
    fn prefix_score(&self, j: usize) -> f64 {
        self.score[j * self.width() + self.pssm.len()]
    }

    fn traceback(&self, j: usize) -> ProfileAlignment {
        let w = self.width();
        let mut columns = vec![None; self.pssm.len()];
        let (mut j_, mut l) = (j, self.pssm.len());
        while j_ > 0 || l > 0 {
            match self.back[j_ * w + l] {
                0 => {
                    columns[l - 1] = Some(j_ - 1);
                    j_ -= 1;
                    l -= 1;
                }
                1 => l -= 1,
                _ => j_ -= 1,
            }
        }
        ProfileAlignment {
            score: self.prefix_score(j),
            columns,
        }
    }
}

/// Global alignment of a whole sequence against the profile.
pub fn align_to_profile(seq: &EventSequence, pssm: &Pssm) -> Result<ProfileAlignment> {
    let dp = ProfileDp::new(&seq.events, pssm)?;
    Ok(dp.traceback(seq.len()))
}

/// `S(e_0..=t)` for every `t`, read from a single DP table.
pub fn prefix_scores(seq: &EventSequence, pssm: &Pssm) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return invalid("cannot score an empty sequence");
    }
    let dp = ProfileDp::new(&seq.events, pssm)?;
    Ok((1..=seq.len()).map(|j| dp.prefix_score(j)).collect())
}

/// For every `t`, the column matched to event `t` in the best alignment of
/// the prefix `e_0..=t`, or `None` when that event is an insertion.
pub fn prefix_columns(seq: &EventSequence, pssm: &Pssm) -> Result<Vec<Option<usize>>> {
    let dp = ProfileDp::new(&seq.events, pssm)?;
    Ok((1..=seq.len())
        .map(|j| {
            let al = dp.traceback(j);
            al.columns.iter().position(|&c| c == Some(j - 1))
        })
        .collect())
}

/// Recomputes an alignment's score from its column assignment.
pub fn score_profile_alignment(seq: &EventSequence, pssm: &Pssm, columns: &[Option<usize>]) -> f64 {
    let mut total = 0.0;
    for (l, c) in columns.iter().enumerate() {
        total = match c {
            Some(j) => total + pssm.score(l, seq.events[*j]),
            None => total - pssm.gap_penalty[l],
        };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msa(rows: &[&str]) -> Msa {
        let rows: Vec<Vec<Option<usize>>> = rows
            .iter()
            .map(|r| r.chars().map(|c| (c != '-').then(|| (c as u8 - b'A') as usize)).collect())
            .collect();
        Msa::from_rows(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            vec![1.0; rows.len()],
            rows,
        )
        .unwrap()
    }

    fn seq(s: &str) -> EventSequence {
        EventSequence::from_letters("s", s, 1.0).unwrap()
    }

    #[test]
    fn frequencies_examples() {
        let p = column_frequencies(&msa(&["A", "A", "A"]), 3, 0.0).unwrap();
        assert_eq!(p.q.row(0), &[1.0, 0.0, 0.0]);
        let p = column_frequencies(&msa(&["A", "A", "B"]), 3, 0.0).unwrap();
        assert!((p.q[(0, 0)] - 2.0 / 3.0).abs() < 1e-15 && (p.q[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let p = column_frequencies(&msa(&["A", "A"]), 2, 1.0).unwrap();
        assert_eq!(p.q.row(0), &[0.75, 0.25]);
    }

    #[test]
    fn columns_sum_to_one_with_gaps() {
        let p = column_frequencies(&msa(&["AB-", "A-C", "-BC"]), 3, 0.03).unwrap();
        for t in 0..3 {
            let total: f64 = p.q.row(t).iter().sum::<f64>() + p.gap[t];
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn background_column_scores_zero() {
        let bg = EventBackground::new(vec![0.5, 0.5]).unwrap();
        let p = column_frequencies(&msa(&["A", "B"]), 2, 0.0).unwrap();
        let pssm = build_pssm(&p, &bg).unwrap();
        assert_eq!(pssm.s.row(0), &[0.0, 0.0]);
        assert_eq!(pssm.lambda[0], Some(1.0));
    }

    #[test]
    fn peaked_column_has_unit_lambda() {
        let bg = EventBackground::uniform(4).unwrap();
        let mut p = column_frequencies(&msa(&["A"]), 4, 0.0).unwrap();
        p.q = Matrix::from_rows(&[vec![0.97, 0.01, 0.01, 0.01]]).unwrap();
        let pssm = build_pssm(&p, &bg).unwrap();
        assert!((pssm.score(0, 0) - (0.97f64 / 0.25).ln()).abs() < 1e-12);
        let lam = pssm.lambda[0].unwrap();
        assert!((lam - 1.0).abs() < 1e-6);
        let r: f64 = (0..4).map(|e| 0.25 * (lam * pssm.score(0, e)).exp()).sum();
        assert!((r - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gappy_column_root_satisfies_identity() {
        let bg = EventBackground::uniform(3).unwrap();
        let p = column_frequencies(&msa(&["A", "-", "-", "B"]), 3, 0.04).unwrap();
        let pssm = build_pssm(&p, &bg).unwrap();
        match pssm.lambda[0] {
            Some(lam) => {
                let r: f64 = (0..3).map(|e| bg.get(e) * (lam * pssm.score(0, e)).exp()).sum();
                assert!((r - 1.0).abs() < 1e-8);
            }
            None => assert!(pssm.s.row(0).iter().all(|&v| v <= 0.0)),
        }
    }

    #[test]
    fn empty_column_is_degenerate() {
        let bg = EventBackground::uniform(2).unwrap();
        let mut p = column_frequencies(&msa(&["A", "B"]), 2, 0.0).unwrap();
        p.q = Matrix::zeros(1, 2);
        assert!(matches!(build_pssm(&p, &bg), Err(Error::Degenerate(_))));
    }

    fn sharp_pssm() -> Pssm {
        let bg = EventBackground::uniform(3).unwrap();
        let p = column_frequencies(&msa(&["ABC", "ABC", "ABC"]), 3, 0.03).unwrap();
        build_pssm(&p, &bg).unwrap()
    }

    #[test]
    fn consensus_matches_every_column() {
        let pssm = sharp_pssm();
        assert_eq!(pssm.consensus, vec![0, 1, 2]);
        let al = align_to_profile(&seq("ABC"), &pssm).unwrap();
        let best: f64 = (0..3).map(|t| pssm.score(t, pssm.consensus[t])).sum();
        assert!((al.score - best).abs() < 1e-12);
        assert_eq!(al.columns, vec![Some(0), Some(1), Some(2)]);
        let pre = prefix_scores(&seq("ABC"), &pssm).unwrap();
        assert!(pre.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*pre.last().unwrap(), al.score);
    }

    #[test]
    fn insertion_is_free() {
        let pssm = sharp_pssm();
        let a = align_to_profile(&seq("ABC"), &pssm).unwrap();
        let b = align_to_profile(&seq("ABBC"), &pssm).unwrap();
        assert_eq!(a.score, b.score);
        assert_eq!(score_profile_alignment(&seq("ABBC"), &pssm, &b.columns), b.score);
    }

    #[test]
    fn single_event_picks_its_column() {
        let pssm = sharp_pssm();
        let al = align_to_profile(&seq("C"), &pssm).unwrap();
        assert_eq!(al.columns, vec![None, None, Some(0)]);
        assert_eq!(al.score, pssm.score(2, 2));
    }

    #[test]
    fn csv_round_trip() {
        let pssm = sharp_pssm().with_gap_penalty(0.5).unwrap();
        let back = Pssm::from_csv(&pssm.to_csv()).unwrap();
        assert_eq!(back, pssm);
    }
}
