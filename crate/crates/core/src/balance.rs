//! Regime-distribution balance scores and balance-aware subset curation.
//!
//! Two homogeneity measures are combined with granularity
//! `G = n / reference` (distinct regimes relative to the richest
//! distribution under comparison):
//!
//! - entropy variant: `alpha * H / ln(n) + (1 - alpha) * G`, `alpha = 0.6`
//! - CV variant: `alpha * min(1, 1 / CV) + (1 - alpha) * G`, `alpha = 0.5`

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_ALPHA_ENTROPY: f64 = 0.6;
pub const DEFAULT_ALPHA_CV: f64 = 0.5;
pub const DEFAULT_CURATION_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceParams {
    pub alpha_entropy: f64,
    pub alpha_cv: f64,
}

impl Default for BalanceParams {
    fn default() -> Self {
        Self { alpha_entropy: DEFAULT_ALPHA_ENTROPY, alpha_cv: DEFAULT_ALPHA_CV }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMetric {
    Entropy,
    Cv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Probabilities of the non-empty regimes, in input order.
    pub regime_probs: Vec<f64>,
    pub n_regimes: usize,
    pub reference_regimes: usize,
    pub h_nats: f64,
    pub h_norm: f64,
    pub granularity: f64,
    pub cv: f64,
    pub b_entropy: f64,
    pub b_cv: f64,
    pub alpha_entropy: f64,
    pub alpha_cv: f64,
}

impl BalanceReport {
    pub fn score(&self, metric: BalanceMetric) -> f64 {
        match metric {
            BalanceMetric::Entropy => self.b_entropy,
            BalanceMetric::Cv => self.b_cv,
        }
    }
}

/// Both balance scores for a regime histogram.
pub fn balance_report(counts: &[f64], reference_regimes: usize, params: BalanceParams) -> Result<BalanceReport> {
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::input("regime counts must be finite and non-negative"));
    }
    let nonzero: Vec<f64> = counts.iter().copied().filter(|c| *c > 0.0).collect();
    let total: f64 = nonzero.iter().sum();
    if nonzero.is_empty() || total <= 0.0 {
        return Err(Error::input("regime counts sum to zero"));
    }
    let n = nonzero.len();
    if reference_regimes < n {
        return Err(Error::input(format!(
            "reference granularity {reference_regimes} is below the {n} observed regimes"
        )));
    }
    for a in [params.alpha_entropy, params.alpha_cv] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::input(format!("alpha {a} outside [0, 1]")));
        }
    }
    let p: Vec<f64> = nonzero.iter().map(|c| c / total).collect();
    let h_nats = -p.iter().map(|q| q * q.ln()).sum::<f64>();
    // 0/0 for a single regime is defined as 0.
    let h_norm = if n > 1 { (h_nats / (n as f64).ln()).clamp(0.0, 1.0) } else { 0.0 };
    let granularity = n as f64 / reference_regimes as f64;
    let cv = coefficient_of_variation(&p);
    let homogeneity = if cv > 0.0 { (1.0 / cv).min(1.0) } else { 1.0 };
    Ok(BalanceReport {
        regime_probs: p,
        n_regimes: n,
        reference_regimes,
        h_nats,
        h_norm,
        granularity,
        cv,
        b_entropy: params.alpha_entropy * h_norm + (1.0 - params.alpha_entropy) * granularity,
        b_cv: params.alpha_cv * homogeneity + (1.0 - params.alpha_cv) * granularity,
        alpha_entropy: params.alpha_entropy,
        alpha_cv: params.alpha_cv,
    })
}

fn coefficient_of_variation(p: &[f64]) -> f64 {
    let mu = p.iter().sum::<f64>() / p.len() as f64;
    let var = p.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / p.len() as f64;
    var.sqrt() / mu
}

/// Entropy-and-granularity report with weight `alpha` on the entropy term.
pub fn shannon_balance(counts: &[f64], reference_regimes: usize, alpha: f64) -> Result<BalanceReport> {
    balance_report(counts, reference_regimes, BalanceParams { alpha_entropy: alpha, ..Default::default() })
}

/// CV-and-granularity score with weight `alpha` on the homogeneity term.
pub fn cv_balance(counts: &[f64], reference_regimes: usize, alpha: f64) -> Result<f64> {
    Ok(balance_report(counts, reference_regimes, BalanceParams { alpha_cv: alpha, ..Default::default() })?.b_cv)
}

/// Histogram of regime labels in first-seen order.
pub fn regime_counts<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
    let mut order: Vec<&str> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for l in labels {
        match order.iter().position(|o| *o == l) {
            Some(i) => counts[i] += 1.0,
            None => {
                order.push(l);
                counts.push(1.0);
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceOrder {
    /// The first dataset is more balanced.
    First,
    Second,
    Tie,
}

fn order(a: f64, b: f64) -> BalanceOrder {
    if (a - b).abs() <= 1e-12 {
        BalanceOrder::Tie
    } else if a > b {
        BalanceOrder::First
    } else {
        BalanceOrder::Second
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceComparison {
    pub reference_regimes: usize,
    pub first: BalanceReport,
    pub second: BalanceReport,
    pub entropy_order: BalanceOrder,
    pub cv_order: BalanceOrder,
}

/// Score two regime histograms under a shared granularity reference (the
/// larger regime count of the two).
pub fn compare_balance(first: &[f64], second: &[f64], params: BalanceParams) -> Result<BalanceComparison> {
    let distinct = |c: &[f64]| c.iter().filter(|v| **v > 0.0).count();
    let reference_regimes = distinct(first).max(distinct(second));
    let a = balance_report(first, reference_regimes, params)?;
    let b = balance_report(second, reference_regimes, params)?;
    Ok(BalanceComparison {
        reference_regimes,
        entropy_order: order(a.b_entropy, b.b_entropy),
        cv_order: order(a.b_cv, b.b_cv),
        first: a,
        second: b,
    })
}

/// One labelled sample offered to curation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationSample {
    pub id: String,
    pub source: String,
    pub regime: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationResult {
    /// Accepted sample ids in acceptance order.
    pub selected: Vec<String>,
    pub accepted_per_source: BTreeMap<String, usize>,
    /// Score of the selected set after every candidate evaluation.
    pub trajectory: Vec<f64>,
    pub evaluations: usize,
    pub target_size: usize,
    pub report: BalanceReport,
}

/// Greedy round-robin curation over sources.
///
/// Each source is shuffled with its own seeded stream. Sources are visited
/// in id order; each visit draws one candidate, accepts it when it strictly
/// raises the score of the selected set (the first candidate seeds the
/// set), and discards it either way. Stops once the selected set reaches
/// `ceil(fraction * |D|)` or every source is exhausted. Granularity is
/// measured against the number of regimes in the whole dataset.
pub fn curate_subset(
    samples: &[CurationSample],
    metric: BalanceMetric,
    params: BalanceParams,
    fraction: f64,
    seed: u64,
) -> Result<CurationResult> {
    if samples.is_empty() {
        return Err(Error::input("no samples to curate"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::input(format!("curation fraction {fraction} outside (0, 1]")));
    }
    let reference = samples.iter().map(|s| s.regime.as_str()).collect::<BTreeSet<_>>().len();
    let target = (fraction * samples.len() as f64).ceil() as usize;

    let mut queues: BTreeMap<&str, Vec<&CurationSample>> = BTreeMap::new();
    for s in samples {
        queues.entry(s.source.as_str()).or_default().push(s);
    }
    for (source, q) in queues.iter_mut() {
        q.shuffle(&mut rng::fork(seed, &format!("source:{source}")));
        // Draw from the back.
        q.reverse();
    }

    let mut selected: Vec<&CurationSample> = Vec::new();
    let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
    let mut current = f64::NEG_INFINITY;
    let mut trajectory = Vec::new();
    let mut evaluations = 0usize;
    let mut accepted_per_source: BTreeMap<String, usize> = queues.keys().map(|k| (k.to_string(), 0)).collect();

    let score_of = |counts: &BTreeMap<&str, f64>| -> Result<f64> {
        let c: Vec<f64> = counts.values().copied().collect();
        Ok(balance_report(&c, reference, params)?.score(metric))
    };

    'outer: while selected.len() < target {
        let mut drew = false;
        for (source, q) in queues.iter_mut() {
            if selected.len() >= target {
                break 'outer;
            }
            let Some(cand) = q.pop() else { continue };
            drew = true;
            evaluations += 1;
            *counts.entry(cand.regime.as_str()).or_insert(0.0) += 1.0;
            let proposed = score_of(&counts)?;
            if selected.is_empty() || proposed > current {
                selected.push(cand);
                current = proposed;
                *accepted_per_source.get_mut(*source).expect("known source") += 1;
            } else {
                let c = counts.get_mut(cand.regime.as_str()).expect("just inserted");
                *c -= 1.0;
                if *c == 0.0 {
                    counts.remove(cand.regime.as_str());
                }
            }
            trajectory.push(current);
        }
        if !drew {
            break;
        }
    }

    let final_counts: Vec<f64> = counts.values().copied().collect();
    Ok(CurationResult {
        selected: selected.iter().map(|s| s.id.clone()).collect(),
        accepted_per_source,
        trajectory,
        evaluations,
        target_size: target,
        report: balance_report(&final_counts, reference, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(id: usize, source: &str, regime: &str) -> CurationSample {
        CurationSample { id: format!("{source}{id}"), source: source.into(), regime: regime.into() }
    }

    #[test]
    fn uniform_full_granularity_is_one() {
        let r = shannon_balance(&[3.0, 3.0, 3.0, 3.0], 4, 0.6).unwrap();
        assert!((r.h_norm - 1.0).abs() < 1e-12);
        assert_eq!(r.granularity, 1.0);
        assert!((r.b_entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_case() {
        let r = shannon_balance(&[2.0, 1.0, 1.0], 4, 0.6).unwrap();
        assert!((r.h_nats - 1.0397207708399179).abs() < 1e-12);
        assert!((r.h_norm - 0.9463946303571862).abs() < 1e-12);
        assert_eq!(r.granularity, 0.75);
        assert!((r.b_entropy - 0.8678367782143117).abs() < 1e-12);
    }

    #[test]
    fn single_regime_entropy_is_zero() {
        let r = shannon_balance(&[10.0], 3, 0.6).unwrap();
        assert_eq!(r.h_norm, 0.0);
        assert!((r.b_entropy - 0.4 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cv_variant() {
        assert!((cv_balance(&[1.0, 1.0, 1.0], 6, 0.5).unwrap() - 0.75).abs() < 1e-12);
        let r = balance_report(&[3.0, 1.0], 2, BalanceParams::default()).unwrap();
        assert!((r.cv - 0.5).abs() < 1e-12);
        assert!((r.b_cv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(shannon_balance(&[0.0, 0.0], 2, 0.6).is_err());
        assert!(shannon_balance(&[1.0, 1.0, 1.0], 2, 0.6).is_err());
        assert!(shannon_balance(&[-1.0, 2.0], 2, 0.6).is_err());
    }

    #[test]
    fn comparison_extremes() {
        let c = compare_balance(&[5.0, 5.0, 5.0, 5.0], &[20.0], BalanceParams::default()).unwrap();
        assert_eq!(c.reference_regimes, 4);
        assert_eq!(c.entropy_order, BalanceOrder::First);
        assert_eq!(c.cv_order, BalanceOrder::First);
        let same = compare_balance(&[1.0, 2.0], &[1.0, 2.0], BalanceParams::default()).unwrap();
        assert_eq!(same.entropy_order, BalanceOrder::Tie);
        assert_eq!(same.cv_order, BalanceOrder::Tie);
    }

    #[test]
    fn single_regime_source_keeps_first_only() {
        let samples: Vec<_> = (0..10).map(|i| sample(i, "A", "X")).collect();
        let r = curate_subset(&samples, BalanceMetric::Entropy, BalanceParams::default(), 0.5, 1).unwrap();
        assert_eq!(r.selected.len(), 1);
        assert_eq!(r.evaluations, 10);
    }

    #[test]
    fn two_sources_improve_on_concatenation() {
        let mut samples: Vec<_> = (0..100).map(|i| sample(i, "A", "X")).collect();
        samples.extend((0..10).map(|i| sample(i, "B", "Y")));
        let r = curate_subset(&samples, BalanceMetric::Entropy, BalanceParams::default(), 0.5, 4).unwrap();
        let whole = shannon_balance(&[100.0, 10.0], 2, 0.6).unwrap();
        assert!(r.report.b_entropy > whole.b_entropy);
        assert!(r.evaluations <= samples.len());
    }

    #[test]
    fn curation_is_reproducible() {
        let samples: Vec<_> =
            (0..60).map(|i| sample(i, ["A", "B", "C"][i % 3], ["X", "Y", "Z", "W"][(i * 7) % 4])).collect();
        let a = curate_subset(&samples, BalanceMetric::Cv, BalanceParams::default(), 0.5, 3).unwrap();
        let b = curate_subset(&samples, BalanceMetric::Cv, BalanceParams::default(), 0.5, 3).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    proptest! {
        #[test]
        fn permutation_and_scale_invariant(
            counts in prop::collection::vec(1u32..50, 1..8), c in 0.1f64..20.0, rot in 0usize..8
        ) {
            let base: Vec<f64> = counts.iter().map(|&v| f64::from(v)).collect();
            let reference = base.len() + 1;
            let r0 = shannon_balance(&base, reference, 0.6).unwrap();
            let mut perm = base.clone();
            let len = perm.len();
            perm.rotate_left(rot % len);
            let scaled: Vec<f64> = base.iter().map(|v| v * c).collect();
            for other in [perm, scaled] {
                let r = shannon_balance(&other, reference, 0.6).unwrap();
                prop_assert!((r.b_entropy - r0.b_entropy).abs() < 1e-12);
                prop_assert!((r.b_cv - r0.b_cv).abs() < 1e-12);
            }
        }

        #[test]
        fn moving_mass_to_smallest_helps(counts in prop::collection::vec(1u32..40, 2..7)) {
            let c: Vec<f64> = counts.iter().map(|&v| f64::from(v)).collect();
            let (imax, &max) = c.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let (imin, &min) = c.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            prop_assume!(max - min >= 2.0);
            let mut moved = c.clone();
            moved[imax] -= 1.0;
            moved[imin] += 1.0;
            let before = shannon_balance(&c, c.len(), 0.6).unwrap().b_entropy;
            let after = shannon_balance(&moved, c.len(), 0.6).unwrap().b_entropy;
            prop_assert!(after > before);
        }

        #[test]
        fn curation_bounds(
            regimes in prop::collection::vec((0usize..3, 0usize..4), 1..80), seed in 0u64..100
        ) {
            let samples: Vec<_> = regimes.iter().enumerate()
                .map(|(i, &(s, r))| sample(i, ["A", "B", "C"][s], ["X", "Y", "Z", "W"][r]))
                .collect();
            let res = curate_subset(&samples, BalanceMetric::Entropy, BalanceParams::default(), 0.5, seed).unwrap();
            prop_assert!(res.selected.len() <= samples.len().div_ceil(2));
            prop_assert!(res.evaluations <= samples.len());
            for w in res.trajectory.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }
}
