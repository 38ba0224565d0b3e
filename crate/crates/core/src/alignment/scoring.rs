use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::events::{EventAlphabet, EventBackground};
use crate::matrix::Matrix;

/// Pairwise event scores plus the background they were derived from and
/// affine gap penalties. Penalties are non-negative and subtracted: a run
/// of `k` gap columns costs `gap_open + k * gap_extend`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringMatrix {
    pub s: Matrix,
    pub background: EventBackground,
    pub gap_open: f64,
    pub gap_extend: f64,
}

impl ScoringMatrix {
    pub fn new(s: Matrix, background: EventBackground, gap_open: f64, gap_extend: f64) -> Result<Self> {
        if !s.is_square() || s.rows() != background.len() {
            return invalid(format!(
                "scoring matrix is {}x{} but background has {} events",
                s.rows(),
                s.cols(),
                background.len()
            ));
        }
        if !s.is_finite() {
            return invalid("scoring matrix contains non-finite entries");
        }
        if !s.is_symmetric() {
            return invalid("scoring matrix is not symmetric");
        }
        if !(gap_open >= 0.0 && gap_extend >= 0.0 && gap_open.is_finite() && gap_extend.is_finite()) {
            return invalid(format!("gap penalties must be finite and >= 0, got {gap_open}/{gap_extend}"));
        }
        Ok(Self {
            s,
            background,
            gap_open,
            gap_extend,
        })
    }

    pub fn n_events(&self) -> usize {
        self.s.rows()
    }

    #[inline]
    pub fn score(&self, a: usize, b: usize) -> f64 {
        self.s[(a, b)]
    }

    pub fn with_gaps(mut self, gap_open: f64, gap_extend: f64) -> Result<Self> {
        if !(gap_open >= 0.0 && gap_extend >= 0.0) {
            return invalid(format!("gap penalties must be >= 0, got {gap_open}/{gap_extend}"));
        }
        self.gap_open = gap_open;
        self.gap_extend = gap_extend;
        Ok(self)
    }

    pub(crate) fn check_events(&self, events: &[usize]) -> Result<()> {
        match events.iter().find(|&&e| e >= self.n_events()) {
            Some(e) => invalid(format!("event {e} outside a {}-event scoring matrix", self.n_events())),
            None => Ok(()),
        }
    }

    /// CSV with a header of event letters, one row per event, then
    /// `#`-prefixed lines for the background and gap penalties.
    pub fn to_csv(&self) -> String {
        let n = self.n_events();
        let alphabet = EventAlphabet::new(n).expect("scoring matrix larger than the letter alphabet");
        let mut out = String::from("event");
        for i in 0..n {
            let _ = write!(out, ",{}", alphabet.letter(i));
        }
        out.push('\n');
        for i in 0..n {
            out.push(alphabet.letter(i));
            for v in self.s.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        let bg: Vec<String> = self.background.probs().iter().map(f64::to_string).collect();
        let _ = writeln!(out, "# background={}", bg.join(","));
        let _ = writeln!(out, "# gap_open={}", self.gap_open);
        let _ = writeln!(out, "# gap_extend={}", self.gap_extend);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let num = |line: usize, v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| perr(line, format!("bad number {v:?}: {e}")))
        };
        let mut rows = Vec::new();
        let mut background = None;
        let (mut gap_open, mut gap_extend) = (0.0, 0.0);
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (key, val) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| perr(ln, "expected key=value comment".into()))?;
                match key.trim() {
                    "background" => {
                        background = Some(val.split(',').map(|v| num(ln, v)).collect::<Result<Vec<_>>>()?)
                    }
                    "gap_open" => gap_open = num(ln, val)?,
                    "gap_extend" => gap_extend = num(ln, val)?,
                    other => return Err(perr(ln, format!("unknown key {other:?}"))),
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let row = line
                .split(',')
                .skip(1)
                .map(|v| num(ln, v))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let background = background.ok_or_else(|| perr(0, "missing background line".into()))?;
        Self::new(
            Matrix::from_rows(&rows)?,
            EventBackground::new(background)?,
            gap_open,
            gap_extend,
        )
    }
}

/// Main-text scheme: `1/p_i` on the diagonal, `alpha` everywhere else.
pub fn build_scoring_matrix_simple(background: &EventBackground, alpha: f64) -> Result<ScoringMatrix> {
    if !(alpha <= 0.0) {
        return invalid(format!("alpha must be <= 0, got {alpha}"));
    }
    let n = background.len();
    let s = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 / background.get(i) } else { alpha });
    ScoringMatrix::new(s, background.clone(), 0.0, 0.0)
}

/// Log-odds scheme `ln(q_ij / (p_i p_j))` with target `q_ii = p_i - epsilon`
/// and `q_ij = epsilon / (n - 1)`.
///
/// The target is normalized before taking logs, so the scores are already
/// in units where the Karlin root is 1. With `epsilon = 0` the off-diagonal
/// log-odds are `-inf`; they are replaced by the constant `off_diagonal`.
pub fn build_scoring_matrix_karlin(
    background: &EventBackground,
    epsilon: f64,
    off_diagonal: f64,
) -> Result<ScoringMatrix> {
    let n = background.len();
    if !(epsilon >= 0.0) {
        return invalid(format!("epsilon must be >= 0, got {epsilon}"));
    }
    if epsilon >= background.min() {
        return invalid(format!(
            "epsilon {epsilon} must be below the smallest background probability {}",
            background.min()
        ));
    }
    if epsilon == 0.0 && !(off_diagonal <= 0.0) {
        return invalid(format!("off-diagonal constant must be <= 0, got {off_diagonal}"));
    }
    let off_q = if n > 1 { epsilon / (n - 1) as f64 } else { 0.0 };
    let q = Matrix::from_fn(n, n, |i, j| if i == j { background.get(i) - epsilon } else { off_q });
    let total: f64 = q.as_slice().iter().sum();
    let s = Matrix::from_fn(n, n, |i, j| {
        if i != j && epsilon == 0.0 {
            off_diagonal
        } else {
            (q[(i, j)] / total / (background.get(i) * background.get(j))).ln()
        }
    });
    ScoringMatrix::new(s, background.clone(), 0.0, 0.0)
}

/// Positive root of `sum_k w_k exp(lambda x_k) = 1`, or `None` when the
/// bracket scan over `2^-20 ..= 2^10` finds no sign change.
pub(crate) fn karlin_root(terms: &[(f64, f64)]) -> Option<f64> {
    let f = |lam: f64| terms.iter().map(|&(w, x)| w * (lam * x).exp()).sum::<f64>() - 1.0;
    let mut lo = None;
    let mut hi = None;
    for k in -20..=10 {
        let lam = 2f64.powi(k);
        let v = f(lam);
        if v < 0.0 {
            lo = Some(lam);
        } else if lo.is_some() && v > 0.0 {
            hi = Some(lam);
            break;
        } else if v == 0.0 && lo.is_some() {
            return Some(lam);
        }
    }
    let (mut lo, mut hi) = (lo?, hi?);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < 1e-12 || mid == lo || mid == hi {
            return Some(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Karlin-Altschul parameter: the positive root of
/// `sum_ij p_i p_j exp(lambda s_ij) = 1`.
pub fn solve_lambda(scoring: &ScoringMatrix) -> Result<f64> {
    let p = scoring.background.probs();
    let n = scoring.n_events();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            terms.push((p[i] * p[j], scoring.score(i, j)));
        }
    }
    let expected: f64 = terms.iter().map(|&(w, x)| w * x).sum();
    if !terms.iter().any(|&(_, x)| x > 0.0) {
        return Err(Error::NoRoot("scoring matrix has no positive entry".into()));
    }
    if !(expected < 0.0) {
        return Err(Error::NoRoot(format!("expected score {expected} is not negative")));
    }
    karlin_root(&terms).ok_or_else(|| Error::NoRoot("no sign change in the lambda bracket".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(s: &ScoringMatrix, lam: f64) -> f64 {
        let p = s.background.probs();
        let mut acc = 0.0;
        for i in 0..s.n_events() {
            for j in 0..s.n_events() {
                acc += p[i] * p[j] * (lam * s.score(i, j)).exp();
            }
        }
        acc - 1.0
    }

    #[test]
    fn simple_scheme() {
        let s = build_scoring_matrix_simple(&EventBackground::uniform(4).unwrap(), -1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s.score(i, j), if i == j { 4.0 } else { -1.0 });
            }
        }
        let bg = EventBackground::new(vec![0.5, 0.25, 0.25]).unwrap();
        let s = build_scoring_matrix_simple(&bg, -1.0).unwrap();
        assert_eq!((0..3).map(|i| s.score(i, i)).collect::<Vec<_>>(), vec![2.0, 4.0, 4.0]);
        assert!(build_scoring_matrix_simple(&bg, 0.5).is_err());
    }

    #[test]
    fn karlin_epsilon_zero() {
        let s = build_scoring_matrix_karlin(&EventBackground::uniform(5).unwrap(), 0.0, -1.0).unwrap();
        for i in 0..5 {
            assert!((s.score(i, i) - 5f64.ln()).abs() < 1e-12);
            for j in (0..5).filter(|&j| j != i) {
                assert_eq!(s.score(i, j), -1.0);
            }
        }
        let s = build_scoring_matrix_karlin(&EventBackground::uniform(2).unwrap(), 0.0, -1.0).unwrap();
        assert!((s.score(0, 0) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn karlin_root_is_one_for_normalized_target() {
        let bg = EventBackground::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for eps in [0.01, 0.05, 0.09] {
            let s = build_scoring_matrix_karlin(&bg, eps, -1.0).unwrap();
            let lam = solve_lambda(&s).unwrap();
            assert!((lam - 1.0).abs() < 1e-6, "eps {eps}: {lam}");
            assert!(residual(&s, lam).abs() < 1e-10);
        }
        assert!(build_scoring_matrix_karlin(&bg, 0.1, -1.0).is_err());
    }

    #[test]
    fn hand_matrix_root_matches_grid_scan() {
        let bg = EventBackground::uniform(2).unwrap();
        let s = ScoringMatrix::new(
            Matrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap(),
            bg,
            0.0,
            0.0,
        )
        .unwrap();
        let lam = solve_lambda(&s).unwrap();
        assert!(residual(&s, lam).abs() < 1e-10);
        // grid scan for the sign change
        let grid = (1..200_000)
            .map(|k| k as f64 * 1e-4)
            .find(|&l| residual(&s, l) > 0.0)
            .unwrap();
        assert!((lam - grid).abs() <= 1e-4, "{lam} vs {grid}");
    }

    #[test]
    fn no_root_cases() {
        let bg = EventBackground::uniform(2).unwrap();
        let neg = ScoringMatrix::new(Matrix::filled(2, 2, -1.0), bg.clone(), 0.0, 0.0).unwrap();
        assert!(matches!(solve_lambda(&neg), Err(Error::NoRoot(_))));
        let pos = build_scoring_matrix_simple(&bg, 0.0).unwrap();
        assert!(matches!(solve_lambda(&pos), Err(Error::NoRoot(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let bg = EventBackground::new(vec![0.1, 0.2, 0.7]).unwrap();
        let s = build_scoring_matrix_karlin(&bg, 0.03, -1.0)
            .unwrap()
            .with_gaps(0.25, 1.0 / 3.0)
            .unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("event,A,B,C\n"));
        let back = ScoringMatrix::from_csv(&text).unwrap();
        assert_eq!(back, s);
    }
}
