//! K-means on chaos-metric vectors, elbow selection of the cluster count,
//! and semantic dynamical-regime labels.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosProfile;
use crate::rng;
use crate::stats::{mean, pop_std, sq_euclidean};
use crate::{Error, Result};

pub const DEFAULT_K_MAX: usize = 16;
pub const DEFAULT_K_STAR_FACTOR: usize = 3;
const RESTARTS: usize = 10;
const MAX_ITERS: usize = 200;
const SHIFT_TOL: f64 = 1e-6;
const EXACT_LIMIT: usize = 65_536;

/// Per-dimension z-scoring. Dimensions with no spread keep unit scale so
/// the transform stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut means = Vec::with_capacity(dim);
        let mut stds = Vec::with_capacity(dim);
        for d in 0..dim {
            let col: Vec<f64> = points.iter().map(|p| p[d]).collect();
            means.push(mean(&col));
            let s = pop_std(&col);
            stds.push(if s > 1e-12 { s } else { 1.0 });
        }
        Self { means, stds }
    }

    pub fn transform(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Result of one k-means fit. Centroids live in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub standardizer: Standardizer,
}

impl KMeansFit {
    /// Centroids mapped back to the input units.
    pub fn centroids_original(&self) -> Vec<Vec<f64>> {
        self.centroids.iter().map(|c| self.standardizer.inverse(c)).collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Nearest centroid, lowest index on ties.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_euclidean(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, a) in points.iter().zip(out.iter_mut()) {
        let (j, d) = nearest(p, centroids);
        *a = j;
        inertia += d;
    }
    inertia
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            0
        };
        centroids.push(points[idx].clone());
    }
    centroids
}

fn means_of(points: &[Vec<f64>], assignments: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// Lloyd iterations from the given centroids until the largest centroid
/// shift falls below tolerance. Appends the inertia of every assignment.
fn lloyd_from(
    points: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    assignments: &mut [usize],
    trace: &mut Vec<f64>,
) -> Vec<Vec<f64>> {
    let k = centroids.len();
    for _ in 0..MAX_ITERS {
        trace.push(assign(points, &centroids, assignments));
        let (mut next, mut counts) = means_of(points, assignments, k);
        // Empty clusters take the point farthest from its own centroid.
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let far = (0..points.len()).filter(|&i| counts[assignments[i]] > 1).max_by(|&a, &b| {
                let da = sq_euclidean(&points[a], &next[assignments[a]]);
                let db = sq_euclidean(&points[b], &next[assignments[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            });
            let Some(far) = far else { break };
            assignments[far] = empty;
            (next, counts) = means_of(points, assignments, k);
        }
        let shift = centroids.iter().zip(&next).map(|(a, b)| sq_euclidean(a, b).sqrt()).fold(0.0, f64::max);
        centroids = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    centroids
}

/// Single-point moves that lower the inertia (Hartigan's criterion, with
/// the size factors `n/(n-1)` and `n/(n+1)`). Returns whether any point
/// moved.
fn hartigan_pass(points: &[Vec<f64>], k: usize, assignments: &mut [usize]) -> bool {
    let (mut cent, mut counts) = means_of(points, assignments, k);
    let mut moved_any = false;
    for _ in 0..MAX_ITERS {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] <= 1 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * sq_euclidean(p, &cent[a]);
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq_euclidean(p, &cent[b]) - removal;
                if delta < best.1 - 1e-12 {
                    best = (b, delta);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            let nb = counts[b] as f64;
            for d in 0..p.len() {
                cent[a][d] = (cent[a][d] * na - p[d]) / (na - 1.0);
                cent[b][d] = (cent[b][d] * nb + p[d]) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            assignments[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}

/// k-means++ seeding, Lloyd iterations, then alternating Hartigan passes
/// and Lloyd until neither changes the partition.
fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut rng::Rng) -> (Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>) {
    let mut assignments = vec![0; points.len()];
    let mut trace = Vec::new();
    let mut centroids = lloyd_from(points, plus_plus_init(points, k, rng), &mut assignments, &mut trace);
    for _ in 0..MAX_ITERS {
        assign(points, &centroids, &mut assignments);
        if !hartigan_pass(points, k, &mut assignments) {
            break;
        }
        let (restart, _) = means_of(points, &assignments, k);
        centroids = lloyd_from(points, restart, &mut assignments, &mut trace);
    }
    let inertia = assign(points, &centroids, &mut assignments);
    trace.push(inertia);
    (centroids, assignments, inertia, trace)
}

/// Optimal partition by enumerating restricted growth strings, used only
/// when the number of labelings stays below `EXACT_LIMIT`.
fn exact_partition(points: &[Vec<f64>], k: usize) -> Option<(Vec<usize>, f64)> {
    let n = points.len();
    if (k as f64).powi(n as i32) > EXACT_LIMIT as f64 {
        return None;
    }
    fn walk(points: &[Vec<f64>], k: usize, labels: &mut Vec<usize>, used: usize, best: &mut Option<(Vec<usize>, f64)>) {
        let i = labels.len();
        if i == points.len() {
            if used == k {
                let (cent, _) = means_of(points, labels, k);
                let cost: f64 = points.iter().zip(labels.iter()).map(|(p, &l)| sq_euclidean(p, &cent[l])).sum();
                if best.as_ref().is_none_or(|b| cost < b.1) {
                    *best = Some((labels.clone(), cost));
                }
            }
            return;
        }
        // Every remaining point must be able to open the groups still unused.
        if k - used > points.len() - i {
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels.push(l);
            walk(points, k, labels, used.max(l + 1), best);
            labels.pop();
        }
    }
    let mut best = None;
    walk(points, k, &mut Vec::with_capacity(n), 0, &mut best);
    best
}

/// Standardize, then run k-means++/Lloyd with 10 seeded restarts and keep
/// the lowest inertia (earliest restart on ties).
pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::input("k-means needs at least one point"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::input(format!("k = {k} outside 1..={}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::input("points must share one dimension and be finite"));
    }
    let standardizer = Standardizer::fit(points);
    let scaled: Vec<Vec<f64>> = points.iter().map(|p| standardizer.transform(p)).collect();
    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>)> = None;
    for r in 0..RESTARTS {
        let mut g = rng::fork(seed, &format!("kmeans-restart-{r}"));
        let run = lloyd(&scaled, k, &mut g);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (mut centroids, mut assignments, mut inertia, mut inertia_trace) = best.expect("at least one restart");
    if let Some((labels, exact)) = exact_partition(&scaled, k) {
        if exact < inertia - 1e-12 {
            centroids = means_of(&scaled, &labels, k).0;
            assignments = labels;
            inertia = exact;
            inertia_trace.push(inertia);
        }
    }
    Ok(KMeansFit { centroids, assignments, inertia, inertia_trace, standardizer })
}

/// Elbow of an inertia curve indexed `k = 1..=K`: the point farthest from
/// the chord joining the first and last points, both axes scaled to [0, 1].
/// Ties go to the smallest `k`.
pub fn elbow_k(inertias: &[f64]) -> Result<usize> {
    if inertias.len() < 3 {
        return Err(Error::input("elbow rule needs at least 3 inertia values"));
    }
    // Enforce a non-increasing curve.
    let cleaned: Vec<f64> = inertias
        .iter()
        .scan(f64::INFINITY, |m, &v| {
            *m = m.min(v);
            Some(*m)
        })
        .collect();
    let (hi, lo) = (cleaned[0], *cleaned.last().unwrap());
    if !(hi - lo > 0.0) {
        return Ok(1);
    }
    let last = (cleaned.len() - 1) as f64;
    let mut best = (1, 0.0);
    for (i, v) in cleaned.iter().enumerate() {
        let x = i as f64 / last;
        let y = (v - lo) / (hi - lo);
        // Chord from (0, 1) to (1, 0).
        let d = (1.0 - x - y) / std::f64::consts::SQRT_2;
        if d > best.1 + 1e-12 {
            best = (i + 1, d);
        }
    }
    Ok(best.0)
}

/// Over-segmenting cluster count: `min(k_max, factor * k_optimal)`.
pub fn select_k_star(k_optimal: usize, k_max: usize, factor: usize) -> usize {
    (factor * k_optimal.max(1)).min(k_max).max(1)
}

/// Index of each feature in a metric vector.
pub const DFA: usize = 0;
pub const LYAPUNOV: usize = 1;
pub const PE_H0: usize = 2;
pub const PE_H1: usize = 3;

/// Semantic type of each centroid (original metric units). Lyapunov and
/// persistent-entropy terms are relative to the unweighted centroid mean.
pub fn label_centroids(centroids: &[[f64; 4]]) -> Vec<String> {
    let n = centroids.len().max(1) as f64;
    let avg = |d: usize| centroids.iter().map(|c| c[d]).sum::<f64>() / n;
    let (mu_l, mu_h0, mu_h1) = (avg(LYAPUNOV), avg(PE_H0), avg(PE_H1));
    centroids
        .iter()
        .map(|c| {
            let corr = if c[DFA] < 0.5 {
                "Anti-corr"
            } else if c[DFA] < 1.0 {
                "Positive-corr"
            } else {
                "Non-station"
            };
            let chaos = if c[LYAPUNOV] < 0.0 {
                "Stable"
            } else if c[LYAPUNOV] < mu_l {
                "Rel Chaos"
            } else {
                "Rel Very Chaos"
            };
            let connect = if c[PE_H0] < mu_h0 { "Low Connect Complex" } else { "High Connect Complex" };
            let loops = if c[PE_H1] < mu_h1 { "Low Loop Complex" } else { "High Loop Complex" };
            format!("{corr}|{chaos}|{connect}|{loops}")
        })
        .collect()
}

/// Histogram of samples per distinct label.
pub fn merge_regimes(labels: &[String], assignments: &[usize]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for &a in assignments {
        *out.entry(labels[a].clone()).or_insert(0) += 1;
    }
    out
}

/// Sample-level chaos features (mean over channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub sample_id: String,
    pub source_id: String,
    pub dfa: f64,
    pub lyapunov: f64,
    pub pe_h0: f64,
    pub pe_h1: f64,
}

impl MetricVector {
    pub fn from_channels(sample_id: &str, source_id: &str, channels: &[ChaosProfile]) -> Option<Self> {
        let m = ChaosProfile::mean(channels)?;
        Some(Self {
            sample_id: sample_id.to_string(),
            source_id: source_id.to_string(),
            dfa: m.dfa,
            lyapunov: m.lyapunov,
            pe_h0: m.pe_h0,
            pe_h1: m.pe_h1,
        })
    }

    pub fn features(&self) -> [f64; 4] {
        [self.dfa, self.lyapunov, self.pe_h0, self.pe_h1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClustering {
    pub k_optimal: usize,
    pub k_star: usize,
    /// Inertia for `k = 1..` used by the elbow rule.
    pub inertias: Vec<f64>,
    /// Centroids in standardized units.
    pub centroids_standardized: Vec<Vec<f64>>,
    /// Centroids in original metric units.
    pub centroids: Vec<[f64; 4]>,
    pub labels: Vec<String>,
    pub assignments: Vec<usize>,
    pub regimes: BTreeMap<String, usize>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub seed: u64,
}

impl RegimeClustering {
    /// Regime label of every input sample.
    pub fn sample_labels(&self) -> Vec<&str> {
        self.assignments.iter().map(|&a| self.labels[a].as_str()).collect()
    }
}

/// Elbow sweep, over-segmented fit, labelling and merging.
pub fn cluster_regimes(vectors: &[MetricVector], k_max: usize, factor: usize, seed: u64) -> Result<RegimeClustering> {
    if vectors.is_empty() {
        return Err(Error::input("no metric vectors to cluster"));
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.features().to_vec()).collect();
    let k_cap = k_max.max(1).min(points.len());
    let inertias = (1..=k_cap)
        .map(|k| fit_kmeans(&points, k, rng::derive_seed(seed, &format!("sweep-{k}"))).map(|f| f.inertia))
        .collect::<Result<Vec<_>>>()?;
    let k_optimal = if inertias.len() >= 3 { elbow_k(&inertias)? } else { 1 };
    let k_star = select_k_star(k_optimal, k_cap, factor);
    let fit = fit_kmeans(&points, k_star, rng::derive_seed(seed, "final"))?;
    let centroids: Vec<[f64; 4]> = fit.centroids_original().into_iter().map(|c| [c[0], c[1], c[2], c[3]]).collect();
    let labels = label_centroids(&centroids);
    let regimes = merge_regimes(&labels, &fit.assignments);
    Ok(RegimeClustering {
        k_optimal,
        k_star,
        inertias,
        centroids_standardized: fit.centroids.clone(),
        centroids,
        labels,
        assignments: fit.assignments.clone(),
        regimes,
        feature_means: fit.standardizer.means.clone(),
        feature_stds: fit.standardizer.stds.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points_single_cluster() {
        let pts = vec![vec![2.0, 3.0]; 5];
        let f = fit_kmeans(&pts, 1, 0).unwrap();
        assert_eq!(f.inertia, 0.0);
        assert_eq!(f.centroids_original()[0], vec![2.0, 3.0]);
    }

    #[test]
    fn separated_groups() {
        let pts: Vec<Vec<f64>> = [0.0, 10.0].iter().flat_map(|&x| [0.0, 1.0, 2.0].map(|y| vec![x, y])).collect();
        let f = fit_kmeans(&pts, 2, 5).unwrap();
        assert!(f.assignments[..3].iter().all(|&a| a == f.assignments[0]));
        assert!(f.assignments[3..].iter().all(|&a| a == f.assignments[3]));
        assert_ne!(f.assignments[0], f.assignments[3]);
        // Standardized y takes the values 0 and +-sqrt(1.5) in each group.
        assert!((f.inertia - 6.0).abs() < 1e-12, "{}", f.inertia);
    }

    #[test]
    fn k_out_of_range() {
        assert!(fit_kmeans(&[vec![1.0]], 2, 0).is_err());
        assert!(fit_kmeans(&[vec![1.0]], 0, 0).is_err());
    }

    #[test]
    fn elbow_examples() {
        assert_eq!(elbow_k(&[100.0, 20.0, 10.0, 9.0, 8.5]).unwrap(), 2);
        assert_eq!(elbow_k(&[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), 1);
        assert!(elbow_k(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn k_star_rule() {
        assert_eq!(select_k_star(2, 16, 3), 6);
        assert_eq!(select_k_star(6, 16, 3), 16);
    }

    #[test]
    fn labels_follow_thresholds() {
        let cents = [[0.3, -0.1, 0.1, 0.1], [1.2, 0.5, 2.0, 2.0], [0.7, 0.2, 1.0, 1.0]];
        let l = label_centroids(&cents);
        assert_eq!(l[0], "Anti-corr|Stable|Low Connect Complex|Low Loop Complex");
        assert_eq!(l[1], "Non-station|Rel Very Chaos|High Connect Complex|High Loop Complex");
        assert_eq!(l[2], "Positive-corr|Rel Chaos|Low Connect Complex|Low Loop Complex");
    }

    #[test]
    fn merge_sums_counts() {
        let labels = vec!["A".to_string(), "A".to_string(), "B".to_string()];
        let assignments: Vec<usize> = [0; 5].into_iter().chain([1; 3]).chain([2; 2]).collect();
        let h = merge_regimes(&labels, &assignments);
        assert_eq!(h.get("A"), Some(&8));
        assert_eq!(h.get("B"), Some(&2));
    }

    #[test]
    fn three_blobs_elbow() {
        let mut g = rng::from_seed(11);
        let centers = [[0.0, 0.0, 0.0, 0.0], [6.0, 6.0, 0.0, 0.0], [0.0, 6.0, 6.0, 6.0]];
        let pts: Vec<Vec<f64>> =
            (0..90).map(|i| centers[i % 3].iter().map(|c| c + g.random_range(-0.5..0.5)).collect()).collect();
        let inertias: Vec<f64> = (1..=8).map(|k| fit_kmeans(&pts, k, 1).unwrap().inertia).collect();
        assert_eq!(elbow_k(&inertias).unwrap(), 3);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let mut g = rng::from_seed(2);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![g.random(), g.random()]).collect();
        let a = fit_kmeans(&pts, 4, 9).unwrap();
        let b = fit_kmeans(&pts, 4, 9).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..500, k in 1usize..5) {
            let mut g = rng::from_seed(seed);
            let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![g.random(), g.random(), g.random()]).collect();
            let f = fit_kmeans(&pts, k, seed).unwrap();
            for w in f.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn standardizer_round_trip(pts in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..20)) {
            let s = Standardizer::fit(&pts);
            for p in &pts {
                let back = s.inverse(&s.transform(p));
                for (a, b) in back.iter().zip(p) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn labels_stable_when_means_unchanged(
            cents in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 1..8)
        ) {
            let cents: Vec<[f64; 4]> = cents.iter().map(|c| [c[0], c[1], c[2], c[3]]).collect();
            let base = label_centroids(&cents);
            let n = cents.len() as f64;
            let m = |d: usize| cents.iter().map(|c| c[d]).sum::<f64>() / n;
            let mut extended = cents.clone();
            extended.push([0.7, m(LYAPUNOV), m(PE_H0), m(PE_H1)]);
            let ext = label_centroids(&extended);
            // The added centroid sits at the means; rounding may nudge them by an ulp.
            for (i, c) in cents.iter().enumerate() {
                let near = |d: usize| (c[d] - m(d)).abs() < 1e-12;
                if !(near(LYAPUNOV) || near(PE_H0) || near(PE_H1)) {
                    prop_assert_eq!(&base[i], &ext[i]);
                }
            }
            let doubled: Vec<[f64; 4]> = cents.iter().chain(cents.iter()).copied().collect();
            let dbl = label_centroids(&doubled);
            for (i, c) in cents.iter().enumerate() {
                let near = |d: usize| (c[d] - m(d)).abs() < 1e-12;
                if !(near(LYAPUNOV) || near(PE_H0) || near(PE_H1)) {
                    prop_assert_eq!(&base[i], &dbl[i]);
                }
            }
        }

        #[test]
        fn merge_conserves(assign in prop::collection::vec(0usize..5, 0..60)) {
            let labels: Vec<String> = ["A", "B", "A", "C", "B"].iter().map(|s| s.to_string()).collect();
            let h = merge_regimes(&labels, &assign);
            prop_assert_eq!(h.values().sum::<usize>(), assign.len());
        }
    }
}
