//! Forecast quality metrics, the combined final score and the two
//! reference baselines.
//!
//! Series are passed as observation channels, `series[channel][t]`.
//! [`evaluate`] z-normalises truth and forecast with the context statistics
//! before scoring.

use serde::{Deserialize, Serialize};

use crate::series::{patchify, ChannelStats, EmbeddingProvider, MultivariateSeries, SpectralPatchEmbedder};
use crate::spectrum::magnitude_spectrum;
use crate::stats::{cosine, euclidean, mean};
use crate::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 1.0;

fn check_pair(pred: &[Vec<f64>], truth: &[Vec<f64>], min_len: usize) -> Result<()> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::input(format!("channel count mismatch: prediction {}, truth {}", pred.len(), truth.len())));
    }
    for (c, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(Error::input(format!("channel {c}: prediction has {} samples, truth {}", p.len(), t.len())));
        }
        if p.len() < min_len {
            return Err(Error::input(format!("channel {c}: need at least {min_len} samples, got {}", p.len())));
        }
    }
    Ok(())
}

/// Mean absolute error, averaged over channels.
pub fn mae(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let per: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
        .collect();
    Ok(mean(&per))
}

/// `-gamma * ln(sum exp(-x / gamma))`, or the plain minimum for `gamma = 0`.
fn soft_min(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    let m = a.min(b).min(c);
    if gamma == 0.0 || m == f64::INFINITY {
        return m;
    }
    let s = [a, b, c].iter().map(|v| (-(v - m) / gamma).exp()).sum::<f64>();
    m - gamma * s.ln()
}

/// Soft-DTW between two univariate sequences with squared-difference cost.
pub fn soft_dtw_1d(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("soft-DTW needs non-empty sequences"));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::input(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let d = x - b[j - 1];
            cur[j] = d * d + soft_min(prev[j - 1], prev[j], cur[j - 1], gamma);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Soft-DTW per channel, averaged. `gamma = 0` is classic DTW.
pub fn soft_dtw(pred: &[Vec<f64>], truth: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::input("soft-DTW needs matching, non-zero channel counts"));
    }
    let per = pred.iter().zip(truth).map(|(p, t)| soft_dtw_1d(p, t, gamma)).collect::<Result<Vec<_>>>()?;
    Ok(mean(&per))
}

/// Cosine similarity and Euclidean distance between DFT magnitude spectra,
/// averaged over channels.
pub fn freq_metrics(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<(f64, f64)> {
    check_pair(pred, truth, 2)?;
    let mut cos = Vec::with_capacity(pred.len());
    let mut eucl = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(truth) {
        let (sp, st) = (magnitude_spectrum(p), magnitude_spectrum(t));
        cos.push(cosine(&sp, &st));
        eucl.push(euclidean(&sp, &st));
    }
    Ok((mean(&cos), mean(&eucl)))
}

/// Cosine similarity, Euclidean distance and width of the mean-pooled patch
/// embeddings.
pub fn latent_metrics(
    pred: &[Vec<f64>],
    truth: &[Vec<f64>],
    provider: &dyn EmbeddingProvider,
    patch_length: usize,
) -> Result<(f64, f64, usize)> {
    check_pair(pred, truth, 1)?;
    let pooled = |x: &[Vec<f64>]| -> Result<(Vec<f64>, usize)> {
        let s = MultivariateSeries::from_observations(x.to_vec())?;
        let e = provider.embed(&patchify(&s, patch_length)?);
        Ok((e.mean_pool(), e.dim))
    };
    let (a, dim) = pooled(pred)?;
    let (b, _) = pooled(truth)?;
    Ok((cosine(&a, &b), euclidean(&a, &b), dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub soft_dtw: f64,
    pub freq_cos_sim: f64,
    pub freq_eucl: f64,
    pub latent_cos_sim: f64,
    pub latent_eucl: f64,
    pub final_score: f64,
    pub pred_length: usize,
    pub embed_size: usize,
    pub gamma: f64,
}

/// Equal-weight combination of the six metrics, each brought to a
/// comparable scale. Lower is better.
#[allow(clippy::too_many_arguments)]
pub fn final_score(
    mae: f64,
    soft_dtw: f64,
    freq_cos_sim: f64,
    freq_eucl: f64,
    latent_cos_sim: f64,
    latent_eucl: f64,
    pred_length: usize,
    embed_size: usize,
) -> Result<f64> {
    if pred_length == 0 || embed_size == 0 {
        return Err(Error::input("pred_length and embed_size must be positive"));
    }
    let n = pred_length as f64;
    Ok((mae
        + soft_dtw / n
        + (1.0 - freq_cos_sim)
        + freq_eucl / (0.5 * n)
        + (1.0 - latent_cos_sim)
        + latent_eucl / embed_size as f64)
        / 6.0)
}

impl EvalReport {
    /// Final score recomputed from the stored metrics.
    pub fn recompose(&self) -> Result<f64> {
        final_score(
            self.mae,
            self.soft_dtw,
            self.freq_cos_sim,
            self.freq_eucl,
            self.latent_cos_sim,
            self.latent_eucl,
            self.pred_length,
            self.embed_size,
        )
    }
}

/// Score already-normalised prediction and truth.
pub fn score(pred: &[Vec<f64>], truth: &[Vec<f64>], gamma: f64, patch_length: usize) -> Result<EvalReport> {
    let mae = mae(pred, truth)?;
    let soft_dtw = soft_dtw(pred, truth, gamma)?;
    let (freq_cos_sim, freq_eucl) = freq_metrics(pred, truth)?;
    let (latent_cos_sim, latent_eucl, embed_size) = latent_metrics(pred, truth, &SpectralPatchEmbedder, patch_length)?;
    let pred_length = pred[0].len();
    let final_score =
        final_score(mae, soft_dtw, freq_cos_sim, freq_eucl, latent_cos_sim, latent_eucl, pred_length, embed_size)?;
    if !final_score.is_finite() {
        return Err(Error::numeric("final score is not finite"));
    }
    Ok(EvalReport {
        mae,
        soft_dtw,
        freq_cos_sim,
        freq_eucl,
        latent_cos_sim,
        latent_eucl,
        final_score,
        pred_length,
        embed_size,
        gamma,
    })
}

/// Normalise truth and forecast with the context statistics of each
/// channel, then score.
pub fn evaluate(
    context: &[Vec<f64>],
    truth: &[Vec<f64>],
    forecast: &[Vec<f64>],
    gamma: f64,
    patch_length: usize,
) -> Result<EvalReport> {
    if context.len() != truth.len() {
        return Err(Error::input(format!("context has {} channels, truth {}", context.len(), truth.len())));
    }
    if context.iter().any(Vec::is_empty) {
        return Err(Error::input("context channels must be non-empty"));
    }
    let stats: Vec<ChannelStats> = context.iter().map(|c| ChannelStats::of(c)).collect();
    let norm = |x: &[Vec<f64>]| -> Vec<Vec<f64>> { x.iter().zip(&stats).map(|(c, s)| s.normalize_all(c)).collect() };
    check_pair(forecast, truth, 1)?;
    score(&norm(forecast), &norm(truth), gamma, patch_length)
}

/// Per-channel context mean repeated `horizon` times.
pub fn naive_forecast(context: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    if context.is_empty() || context.iter().any(Vec::is_empty) {
        return Err(Error::input("naive forecast needs a non-empty context"));
    }
    Ok(context.iter().map(|c| vec![mean(c); horizon]).collect())
}

/// Biased sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    (0..=max_lag.min(x.len().saturating_sub(1)))
        .map(|l| {
            if denom == 0.0 {
                return 0.0;
            }
            d[..x.len() - l].iter().zip(&d[l..]).map(|(a, b)| a * b).sum::<f64>() / denom
        })
        .collect()
}

/// Dominant period of `x` over lags `2..=len/2`: the highest local maximum
/// of the autocorrelation, or the highest value overall when no interior
/// peak exists. Ties go to the smallest lag.
pub fn dominant_period(x: &[f64]) -> Result<usize> {
    if x.len() < 4 {
        return Err(Error::input(format!("period detection needs at least 4 samples, got {}", x.len())));
    }
    let hi = x.len() / 2;
    let r = autocorrelation(x, hi + 1);
    let pick = |candidates: &mut dyn Iterator<Item = usize>| -> Option<usize> {
        let mut best: Option<usize> = None;
        for l in candidates {
            if best.is_none_or(|b| r[l] > r[b]) {
                best = Some(l);
            }
        }
        best
    };
    let peaks = pick(&mut (2..=hi).filter(|&l| l + 1 < r.len() && r[l] > r[l - 1] && r[l] >= r[l + 1]));
    Ok(peaks.or_else(|| pick(&mut (2..=hi))).unwrap_or(2))
}

/// Tile the last dominant period of each channel over `horizon` samples.
pub fn seasonal_naive_forecast(context: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    if context.is_empty() {
        return Err(Error::input("seasonal naive forecast needs a context"));
    }
    context
        .iter()
        .map(|c| {
            let p = dominant_period(c)?;
            let tail = &c[c.len() - p..];
            Ok((0..horizon).map(|h| tail[h % p]).collect())
        })
        .collect()
}
