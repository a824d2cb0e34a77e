//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are discarded, tied magnitudes get average ranks and the
//! reported statistic is `W+`, the rank sum of positive differences. Small
//! samples use the exact null distribution of `W+` given the observed rank
//! pattern; larger ones the tie-corrected normal approximation with a 0.5
//! continuity correction.

use crate::error::{Error, Result};

/// Largest effective sample size handled by exact enumeration in
/// [`wilcoxon_signed_rank`].
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    Exact,
    Normal,
    /// Exact up to [`EXACT_MAX_N`] nonzero differences, normal beyond.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `W+`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub n_effective: usize,
    pub method: PValueMethod,
}

/// Average ranks (1-based) of `|d|` for the nonzero differences.
pub fn signed_rank_abs(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // Positions i..j share the mean of ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Two-sided exact p-value of `w_plus` under the sign-flip null for the
/// given ranks. Ranks must be multiples of 1/2, as average ranks are.
pub fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    // Doubled ranks are integers; count subsets by doubled rank sum.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w2.min(total)].iter().sum();
    let upper: f64 = counts[w2.min(total + 1)..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Two-sided normal-approximation p-value with tie correction and a 0.5
/// continuity correction.
pub fn normal_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, PValueMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InsufficientData("no paired observations".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    if diffs.is_empty() {
        return Err(Error::InsufficientData("all paired differences are zero".into()));
    }
    let ranks = signed_rank_abs(&diffs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let method = match method {
        PValueMethod::Auto if diffs.len() <= EXACT_MAX_N => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::Normal,
        m => m,
    };
    let p_value = match method {
        PValueMethod::Exact => exact_p_value(&ranks, w_plus),
        _ => normal_p_value(&ranks, w_plus),
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value,
        n_effective: diffs.len(),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force over all 2ⁿ sign assignments.
    fn brute_p(ranks: &[f64], w: f64) -> f64 {
        let n = ranks.len();
        let (mut lo, mut hi) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                lo += 1;
            }
            if s >= w - 1e-9 {
                hi += 1;
            }
        }
        (2.0 * lo.min(hi) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn all_positive_three() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert_eq!(r.n_effective, 3);
        assert!((r.p_value - 0.25).abs() < 1e-15);
        assert_eq!(r.method, PValueMethod::Exact);
    }

    #[test]
    fn equal_samples_are_insufficient() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &a),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn zeros_discarded_and_ties_averaged() {
        let r = wilcoxon_signed_rank(&[1.0, 5.0, -2.0, 4.0], &[1.0, 3.0, 0.0, 3.0]).unwrap();
        // diffs [2, -2, 1] → ranks [2.5, 2.5, 1]
        assert_eq!(r.n_effective, 3);
        assert_eq!(r.statistic, 3.5);
        assert_eq!(signed_rank_abs(&[2.0, -2.0, 1.0]), vec![2.5, 2.5, 1.0]);
    }

    #[test]
    fn every_sign_pattern_up_to_three() {
        for n in 1..=3usize {
            for mask in 0..(1u32 << n) {
                let diffs: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { (i + 1) as f64 } else { -((i + 1) as f64) })
                    .collect();
                let r = wilcoxon_signed_rank(&diffs, &vec![0.0; n]).unwrap();
                let ranks: Vec<f64> = (1..=n).map(|v| v as f64).collect();
                assert_eq!(r.p_value, brute_p(&ranks, r.statistic));
            }
        }
    }

    #[test]
    fn tied_exact_matches_brute_force() {
        let diffs = [1.0, -1.0, 2.0, 2.0, -3.0, 3.0, 3.0, 0.5, -4.0, 5.0];
        let ranks = signed_rank_abs(&diffs);
        let r = wilcoxon_signed_rank(&diffs, &[0.0; 10]).unwrap();
        assert!((r.p_value - brute_p(&ranks, r.statistic)).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(v in prop::collection::vec(-5i32..=5, 1..12)) {
            let diffs: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            prop_assume!(diffs.iter().any(|d| *d != 0.0));
            let r = wilcoxon_signed_rank(&diffs, &vec![0.0; diffs.len()]).unwrap();
            let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
            prop_assert!((r.p_value - brute_p(&signed_rank_abs(&nz), r.statistic)).abs() < 1e-12);
            let n = r.n_effective as f64;
            prop_assert!(r.statistic >= 0.0 && r.statistic <= n * (n + 1.0) / 2.0);
        }

        #[test]
        fn swapping_samples_mirrors_statistic(
            a in prop::collection::vec(-50.0f64..50.0, 1..40),
            shift in -3.0f64..3.0,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.5 + shift + i as f64 * 0.01).collect();
            if let (Ok(ab), Ok(ba)) = (wilcoxon_signed_rank(&a, &b), wilcoxon_signed_rank(&b, &a)) {
                let n = ab.n_effective as f64;
                prop_assert!((ab.statistic + ba.statistic - n * (n + 1.0) / 2.0).abs() < 1e-9);
                prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            }
        }

        #[test]
        fn positive_scaling_is_invariant(
            a in prop::collection::vec(-50.0f64..50.0, 2..40),
            b in prop::collection::vec(-50.0f64..50.0, 2..40),
            c in 0.01f64..1000.0,
        ) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            if let (Ok(x), Ok(y)) = (wilcoxon_signed_rank(a, b), wilcoxon_signed_rank(&sa, &sb)) {
                prop_assert_eq!(x.statistic, y.statistic);
                prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            }
        }
    }
}
