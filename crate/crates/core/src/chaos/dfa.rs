//! First-order detrended fluctuation analysis.

use crate::stats::{linear_fit, mean, pop_std};
use crate::{Error, Result};

const MIN_LENGTH: usize = 64;
const MIN_WINDOW: usize = 4;
const TARGET_SIZES: usize = 20;
const MIN_SIZES: usize = 12;

/// Cumulative sum of the mean-removed series.
pub fn integrated_profile(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v - m;
            Some(*acc)
        })
        .collect()
}

/// Log-spaced window sizes in `[4, len / 4]`, at least 12 of them.
pub fn dfa_window_sizes(len: usize) -> Vec<usize> {
    let hi = len / 4;
    if hi < MIN_WINDOW {
        return Vec::new();
    }
    let (lo_f, hi_f) = ((MIN_WINDOW as f64).ln(), (hi as f64).ln());
    let mut sizes: Vec<usize> = (0..TARGET_SIZES)
        .map(|i| (lo_f + (hi_f - lo_f) * i as f64 / (TARGET_SIZES - 1) as f64).exp().round() as usize)
        .collect();
    sizes.dedup();
    if sizes.len() < MIN_SIZES {
        // Narrow ranges: every integer size.
        sizes = (MIN_WINDOW..=hi).collect();
    }
    sizes
}

/// RMS of linearly detrended residuals over non-overlapping windows of
/// size `n` of an integrated profile.
pub fn fluctuation(profile: &[f64], n: usize) -> f64 {
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut total = 0.0;
    let mut windows = 0usize;
    for w in profile.chunks_exact(n) {
        let (slope, icept) = linear_fit(&t, w);
        total += w
            .iter()
            .zip(&t)
            .map(|(y, x)| {
                let r = y - (slope * x + icept);
                r * r
            })
            .sum::<f64>()
            / n as f64;
        windows += 1;
    }
    (total / windows as f64).sqrt()
}

/// DFA-1 scaling exponent: slope of `ln F(n)` against `ln n`.
pub fn dfa_exponent(x: &[f64]) -> Result<f64> {
    if x.len() < MIN_LENGTH {
        return Err(Error::input(format!("DFA needs at least {MIN_LENGTH} samples, got {}", x.len())));
    }
    // Variation at round-off level counts as no fluctuation.
    let max_abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if pop_std(x) <= 1e-12 * max_abs {
        return Err(Error::numeric("zero fluctuation at all DFA scales"));
    }
    let profile = integrated_profile(x);
    let (mut ln_n, mut ln_f) = (Vec::new(), Vec::new());
    for n in dfa_window_sizes(x.len()) {
        let f = fluctuation(&profile, n);
        if f > 0.0 {
            ln_n.push((n as f64).ln());
            ln_f.push(f.ln());
        }
    }
    if ln_n.len() < 2 {
        return Err(Error::numeric("zero fluctuation at all DFA scales"));
    }
    Ok(linear_fit(&ln_n, &ln_f).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_sizes_cover_range() {
        for len in [64, 100, 4096, 100_000] {
            let s = dfa_window_sizes(len);
            assert!(s.len() >= MIN_SIZES, "{len}: {s:?}");
            assert_eq!(s[0], 4);
            assert_eq!(*s.last().unwrap(), len / 4);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let x: Vec<f64> = (0..1024).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(dfa_exponent(&x).unwrap() < 0.5);
    }

    #[test]
    fn short_and_constant_inputs() {
        assert!(matches!(dfa_exponent(&[0.0; 10]), Err(Error::Input(_))));
        assert!(matches!(dfa_exponent(&[3.0; 128]), Err(Error::Numeric(_))));
    }

    #[test]
    fn affine_invariance() {
        let x: Vec<f64> = (0..512).map(|i| ((i * 7919) % 113) as f64 + (i as f64 * 0.1).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| -3.5 * v + 12.0).collect();
        assert!((dfa_exponent(&x).unwrap() - dfa_exponent(&y).unwrap()).abs() < 1e-6);
    }
}
