//! Mann–Whitney U (Wilcoxon rank-sum) test.

use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U of the first sample: pairs `(a, b)` with `a > b`, ties counting 1/2.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// `P(U <= u)` under the null, i.e. evidence that `a` is smaller.
    pub p_less: f64,
    pub exact: bool,
}

/// Largest `n * m` for which the null distribution is enumerated.
pub const EXACT_LIMIT: usize = 400;

/// Midranks (1-based) of the pooled samples and the tie-group sizes.
fn midranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for p in &pooled[i..=j] {
            ranks[p.1] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return invalid("both samples must be non-empty");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return invalid("samples contain NaN");
    }
    Ok(())
}

fn u_statistic(a: &[f64], ranks: &[f64]) -> f64 {
    let n = a.len() as f64;
    ranks[..a.len()].iter().sum::<f64>() - n * (n + 1.0) / 2.0
}

/// Exact null distribution of U given the observed midranks, enumerated
/// by dynamic programming over the doubled rank sums.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (ranks, _) = midranks(a, b);
    let (n, m) = (a.len(), b.len());
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=n).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            for s in (d..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - d];
            }
        }
    }
    let offset = n * (n + 1);
    let observed = doubled[..n].iter().sum::<usize>() as f64 - offset as f64;
    let center = (n * m) as f64;
    let dev = (observed - center).abs();
    let total: f64 = counts[n].iter().sum();
    let (mut two, mut less) = (0.0, 0.0);
    for (s, &c) in counts[n].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let u2 = s as f64 - offset as f64;
        if (u2 - center).abs() >= dev - 1e-9 {
            two += c;
        }
        if u2 <= observed + 1e-9 {
            less += c;
        }
    }
    Ok(MannWhitney {
        u: observed / 2.0,
        p: (two / total).min(1.0),
        p_less: (less / total).min(1.0),
        exact: true,
    })
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (ranks, ties) = midranks(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let total = n + m;
    let u = u_statistic(a, &ranks);
    let mean = n * m / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = if total > 1.0 {
        n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return Ok(MannWhitney {
            u,
            p: 1.0,
            p_less: 1.0,
            exact: false,
        });
    }
    let sd = var.sqrt();
    let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    // P(U <= u): upper tail of (mean - u - 0.5) / sd
    let z_less = (mean - u - 0.5) / sd;
    let p_less = (0.5 * erfc(z_less / std::f64::consts::SQRT_2)).min(1.0);
    Ok(MannWhitney {
        u,
        p,
        p_less,
        exact: false,
    })
}

/// Two-sided test; exact when `n * m <= EXACT_LIMIT`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    if a.len() * b.len() <= EXACT_LIMIT {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// `(U, two-sided p)`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    mann_whitney(a, b).map(|r| (r.u, r.p))
}

/// Same test under its other name.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    mann_whitney_u(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p_less - 0.05).abs() < 1e-12);
        assert!((r.p - 0.1).abs() < 1e-12);
        assert!(r.exact);
    }

    #[test]
    fn identical_samples_give_no_evidence() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let (u, p) = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(u, 8.0);
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(mann_whitney_normal(&a, &a).unwrap().p, 1.0);
    }

    #[test]
    fn all_tied_is_uninformative() {
        let r = mann_whitney_normal(&[5.0; 30], &[5.0; 30]).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(mann_whitney_exact(&[5.0; 3], &[5.0; 2]).unwrap().p, 1.0);
    }

    #[test]
    fn u_counts_pairs_with_half_ties() {
        let a = [1.0, 3.0, 3.0];
        let b = [2.0, 3.0];
        let brute: f64 = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
            .sum();
        assert_eq!(mann_whitney(&a, &b).unwrap().u, brute);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }
}
