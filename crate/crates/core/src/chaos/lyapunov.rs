//! Largest Lyapunov exponent by nearest-neighbour divergence (Rosenstein).

use serde::{Deserialize, Serialize};

use super::takens::takens_embed;
use crate::stats::{linear_fit, sq_euclidean};
use crate::{Error, Result};

/// Longest divergence horizon tracked, in steps.
const MAX_HORIZON: usize = 50;
/// Fraction of the total rise of the divergence curve treated as the end of
/// the exponential-growth region.
const SATURATION_FRACTION: f64 = 0.3;
/// Minimum rise (nats) before the curve is considered to saturate at all.
const SATURATION_MIN_RISE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub embdim: usize,
    pub tau: usize,
    /// Minimum temporal separation between a point and its neighbour.
    pub minsep: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        Self { embdim: 10, tau: 1, minsep: 10 }
    }
}

/// Mean log-distance between each embedded point and its nearest
/// temporally separated neighbour, followed for `k = 0..=K` steps with
/// `K = min(50, points / 10)`.
///
/// Zero distances are replaced by the smallest positive distance observed,
/// so exact recurrences do not produce `-inf`.
pub fn rosenstein_divergence(x: &[f64], params: LyapunovParams) -> Result<Vec<f64>> {
    let LyapunovParams { embdim, tau, minsep } = params;
    if embdim == 0 || tau == 0 {
        return Err(Error::input("embdim and tau must be positive"));
    }
    let needed = (embdim - 1) * tau + 2 * minsep + 20;
    if x.len() <= needed {
        return Err(Error::input(format!("Lyapunov estimate needs more than {needed} samples, got {}", x.len())));
    }
    let cloud = takens_embed(x, tau, embdim)?;
    let pts = &cloud.points;
    let horizon = MAX_HORIZON.min(pts.len() / 10);
    let usable = pts.len() - horizon;

    let mut pairs = Vec::with_capacity(usable);
    for i in 0..usable {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..usable {
            if i.abs_diff(j) < minsep {
                continue;
            }
            let d = sq_euclidean(&pts[i], &pts[j]);
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, j));
            }
        }
        if let Some((_, j)) = best {
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(Error::input("no neighbour satisfies the minimum separation"));
    }

    let dists: Vec<Vec<f64>> = (0..=horizon)
        .map(|k| pairs.iter().map(|&(i, j)| sq_euclidean(&pts[i + k], &pts[j + k]).sqrt()).collect())
        .collect();
    let floor = dists.iter().flatten().copied().filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::numeric("all neighbour distances are zero"));
    }
    Ok(dists.iter().map(|row| row.iter().map(|d| d.max(floor).ln()).sum::<f64>() / row.len() as f64).collect())
}

/// Last step of the fitting window for a divergence curve.
///
/// The fit spans `k = 0..=K/2`, cut short at the first step where the curve
/// has covered [`SATURATION_FRACTION`] of its total rise when that rise
/// exceeds one nat (divergence saturating at the attractor size).
pub(crate) fn fit_end(curve: &[f64]) -> usize {
    let half = (curve.len() - 1) / 2;
    let start = curve[0];
    let rise = curve.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - start;
    if rise < SATURATION_MIN_RISE {
        return half;
    }
    let threshold = start + SATURATION_FRACTION * rise;
    let k = curve.iter().position(|&v| v >= threshold).unwrap_or(half);
    k.clamp(2, half.max(2))
}

/// Largest Lyapunov exponent in nats per sample.
pub fn lyapunov_exponent(x: &[f64], params: LyapunovParams) -> Result<f64> {
    let curve = rosenstein_divergence(x, params)?;
    let end = fit_end(&curve);
    let k: Vec<f64> = (0..=end).map(|v| v as f64).collect();
    let slope = linear_fit(&k, &curve[..=end]).0;
    if !slope.is_finite() {
        return Err(Error::numeric("non-finite Lyapunov slope"));
    }
    Ok(slope)
}
