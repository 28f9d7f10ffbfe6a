//! Independent reference implementations used as test oracles. Each one
//! favours directness over speed and shares no code with the library
//! beyond the input types.

#![allow(dead_code)]

use std::collections::HashMap;

use chaosforge::systems::{rk4_step, OdeSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut g = rng(seed);
    (0..n).map(|_| g.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Finite `(birth, death)` pairs per dimension plus the essential H0 class,
/// by Gaussian elimination of the full boundary matrix of the 2-skeleton.
pub struct OracleDiagram {
    pub h0: Vec<(f64, f64)>,
    pub h1: Vec<(f64, f64)>,
}

pub fn boundary_reduction(points: &[Vec<f64>]) -> OracleDiagram {
    let n = points.len();
    // Simplices as sorted vertex lists with their filtration value.
    let mut simplices: Vec<(f64, Vec<usize>)> = (0..n).map(|v| (0.0, vec![v])).collect();
    let mut max_d = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            let d = dist(&points[a], &points[b]);
            max_d = max_d.max(d);
            simplices.push((d, vec![a, b]));
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let d =
                    dist(&points[a], &points[b]).max(dist(&points[a], &points[c])).max(dist(&points[b], &points[c]));
                simplices.push((d, vec![a, b, c]));
            }
        }
    }
    simplices.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.len().cmp(&y.1.len())).then(x.1.cmp(&y.1)));
    let index: HashMap<Vec<usize>, usize> = simplices.iter().enumerate().map(|(i, s)| (s.1.clone(), i)).collect();
    let m = simplices.len();
    let mut cols: Vec<Vec<bool>> = simplices
        .iter()
        .map(|(_, s)| {
            let mut col = vec![false; m];
            if s.len() > 1 {
                for skip in 0..s.len() {
                    let face: Vec<usize> = s.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
                    col[index[&face]] = true;
                }
            }
            col
        })
        .collect();
    let low = |c: &Vec<bool>| c.iter().rposition(|&b| b);
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    let mut paired = vec![false; m];
    for j in 0..m {
        while let Some(l) = low(&cols[j]) {
            match owner.get(&l) {
                Some(&k) => {
                    let other = cols[k].clone();
                    for (x, y) in cols[j].iter_mut().zip(other) {
                        *x ^= y;
                    }
                }
                None => break,
            }
        }
        if let Some(l) = low(&cols[j]) {
            owner.insert(l, j);
            paired[l] = true;
            paired[j] = true;
            let (birth, death) = (simplices[l].0, simplices[j].0);
            match simplices[l].1.len() {
                1 => h0.push((birth, death)),
                2 if death > birth => {
                    h1.push((birth, death));
                }
                _ => {}
            }
        }
    }
    for (i, (b, s)) in simplices.iter().enumerate() {
        if s.len() == 1 && !paired[i] {
            h0.push((*b, max_d));
        }
    }
    OracleDiagram { h0, h1 }
}

/// Classic DTW by enumerating every monotone alignment path.
pub fn dtw_by_paths(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let d = a[i] - b[j];
        let acc = acc + d * d;
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// `|X_k|` for `k = 0..=n/2` by the defining sum.
pub fn naive_dft_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Globally optimal k-means inertia of standardized points by enumerating
/// every assignment to `k` non-empty groups.
pub fn kmeans_brute_force(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut scaled = points.to_vec();
    for c in 0..d {
        let mean = points.iter().map(|p| p[c]).sum::<f64>() / n as f64;
        let var = points.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        for p in scaled.iter_mut() {
            p[c] = (p[c] - mean) / sd;
        }
    }
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let used: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        if used.len() == k {
            let mut inertia = 0.0;
            for g in 0..k {
                let members: Vec<&Vec<f64>> =
                    scaled.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(p, _)| p).collect();
                let centroid: Vec<f64> =
                    (0..d).map(|c| members.iter().map(|p| p[c]).sum::<f64>() / members.len() as f64).collect();
                inertia += members.iter().map(|p| dist(p, &centroid).powi(2)).sum::<f64>();
            }
            best = best.min(inertia);
        }
        // Next assignment in base-k counting order.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Transition counts by a single pass with a hash map.
pub fn count_transitions(states: &[usize]) -> HashMap<(usize, usize), u64> {
    let mut out = HashMap::new();
    for t in 1..states.len() {
        *out.entry((states[t - 1], states[t])).or_insert(0) += 1;
    }
    out
}

/// Largest Lyapunov exponent (per unit time) from the renormalised
/// separation of two trajectories integrated with the same stepper.
pub fn benettin(system: &OdeSystem, initial: &[f64], dt: f64, transient: usize, steps: usize) -> f64 {
    let mut y = initial.to_vec();
    for i in 0..transient {
        rk4_step(system, i as f64 * dt, &mut y, dt);
    }
    let d0 = 1e-8;
    let mut z = y.clone();
    z[0] += d0;
    let mut sum = 0.0;
    for i in 0..steps {
        let t = (transient + i) as f64 * dt;
        rk4_step(system, t, &mut y, dt);
        rk4_step(system, t, &mut z, dt);
        let d = dist(&y, &z);
        sum += (d / d0).ln();
        for (zi, yi) in z.iter_mut().zip(&y) {
            *zi = yi + (*zi - yi) * d0 / d;
        }
    }
    sum / (steps as f64 * dt)
}

/// Sorts pairs for multiset comparison.
pub fn sorted_pairs(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}
