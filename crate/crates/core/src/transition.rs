//! Discrete latent-state transition model fitted on a context window.
//!
//! Patch embeddings are clustered into states; the empirical transition
//! matrix between consecutive states drives forecasting. Each forecast step
//! emits a latent vector (the state centroid, or a diagonal Gaussian draw
//! around it) and decodes to the raw medoid patch of that state. Action
//! channels, when present, condition the next-state distribution through a
//! nearest-neighbour table of `(state centroid ‖ beta * action, next state)`
//! records.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::{elbow_k, fit_kmeans};
use crate::rng;
use crate::series::{
    embed_patches, patchify, ChannelStats, EmbeddingMatrix, MultivariateSeries, PatchGrid, SpectralPatchEmbedder,
};
use crate::stats::{euclidean, sq_euclidean};
use crate::{Error, Result};

/// Additive smoothing on transition counts.
pub const SMOOTHING: f64 = 1e-6;
pub const MAX_STATES: usize = 16;
pub const DEFAULT_ACTION_SCALE: f64 = 1.0;

/// Upper end of the state-count sweep for `rows` latent rows:
/// `min(16, max(2, round(2 ln rows)))`.
pub fn state_count_cap(rows: usize) -> usize {
    let by_log = (2.0 * (rows.max(1) as f64).ln()).round() as usize;
    MAX_STATES.min(by_log.max(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    /// Row index of each state's medoid.
    pub medoids: Vec<usize>,
    /// Inertia for `k = 1..` over the sweep (empty when degenerate).
    pub inertias: Vec<f64>,
}

/// Cluster latent rows into discrete states.
///
/// `k` is the elbow of the inertia curve over `k = 1..=cap`, never below 2
/// unless every row is identical. Centroids and spreads are taken in the
/// original latent space.
pub fn fit_states(latents: &EmbeddingMatrix, seed: u64) -> Result<StateFit> {
    let rows = &latents.rows;
    if rows.len() < 2 {
        return Err(Error::input(format!("state fitting needs at least 2 latent rows, got {}", rows.len())));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for r in rows {
        if !distinct.contains(&r) {
            distinct.push(r);
            if distinct.len() > MAX_STATES {
                break;
            }
        }
    }
    let (k, assignments, inertias) = if distinct.len() == 1 {
        (1, vec![0; rows.len()], Vec::new())
    } else {
        let cap = state_count_cap(rows.len()).min(distinct.len());
        let mut inertias = Vec::with_capacity(cap);
        let mut fits = Vec::with_capacity(cap);
        for k in 1..=cap {
            let fit = fit_kmeans(rows, k, rng::derive_seed(seed, &format!("states-{k}")))?;
            inertias.push(fit.inertia);
            fits.push(fit);
        }
        let k = if cap >= 3 { elbow_k(&inertias)?.max(2) } else { cap };
        (k, fits.swap_remove(k - 1).assignments, inertias)
    };

    let dim = latents.dim;
    let mut mu = vec![vec![0.0; dim]; k];
    let mut sizes = vec![0usize; k];
    for (r, &a) in rows.iter().zip(&assignments) {
        sizes[a] += 1;
        for (m, v) in mu[a].iter_mut().zip(r) {
            *m += v;
        }
    }
    for (m, &n) in mu.iter_mut().zip(&sizes) {
        m.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let mut sigma = vec![vec![0.0; dim]; k];
    for (r, &a) in rows.iter().zip(&assignments) {
        for ((s, v), m) in sigma[a].iter_mut().zip(r).zip(&mu[a]) {
            *s += (v - m) * (v - m);
        }
    }
    for (s, &n) in sigma.iter_mut().zip(&sizes) {
        s.iter_mut().for_each(|v| *v = (*v / n.max(1) as f64).sqrt());
    }
    let mut medoids = vec![usize::MAX; k];
    let mut best = vec![f64::INFINITY; k];
    for (i, (r, &a)) in rows.iter().zip(&assignments).enumerate() {
        let d = sq_euclidean(r, &mu[a]);
        if d < best[a] {
            best[a] = d;
            medoids[a] = i;
        }
    }
    if medoids.contains(&usize::MAX) {
        return Err(Error::numeric("a latent state has no members"));
    }
    Ok(StateFit { k, assignments, mu, sigma, medoids, inertias })
}

/// Transition counts between consecutive states.
pub fn transition_counts(states: &[usize], k: usize) -> Result<Vec<Vec<u64>>> {
    if let Some(&bad) = states.iter().find(|&&s| s >= k) {
        return Err(Error::input(format!("state {bad} outside 0..{k}")));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    Ok(counts)
}

/// Row-stochastic matrix from counts with additive smoothing; rows never
/// visited as a source come out uniform.
pub fn smoothed_probs(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    let k = counts.len() as f64;
    counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(|&c| c as f64).sum();
            row.iter().map(|&c| (c as f64 + SMOOTHING) / (total + k * SMOOTHING)).collect()
        })
        .collect()
}

/// Counts and smoothed probabilities over `k = max(state) + 1` states.
pub fn transition_matrix(states: &[usize]) -> Result<(Vec<Vec<u64>>, Vec<Vec<f64>>)> {
    if states.len() < 2 {
        return Err(Error::input("a transition matrix needs at least 2 states"));
    }
    let k = states.iter().max().expect("non-empty") + 1;
    let counts = transition_counts(states, k)?;
    let probs = smoothed_probs(&counts);
    Ok((counts, probs))
}

/// `P(j | i) = sum_a P(j | a, i) P(a | i)` from counts indexed
/// `[source][action][target]`, unsmoothed. Unvisited sources give zero rows.
pub fn marginalize_actions(counts: &[Vec<Vec<u64>>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|by_action| {
            let k = by_action.first().map_or(0, Vec::len);
            let total: u64 = by_action.iter().flatten().sum();
            let mut row = vec![0.0; k];
            if total == 0 {
                return row;
            }
            for targets in by_action {
                let c_a: u64 = targets.iter().sum();
                if c_a == 0 {
                    continue;
                }
                let p_a = c_a as f64 / total as f64;
                for (r, &c) in row.iter_mut().zip(targets) {
                    *r += c as f64 / c_a as f64 * p_a;
                }
            }
            row
        })
        .collect()
}

/// One neighbourhood-retrieval record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    /// State centroid followed by the scaled mean action of the next patch.
    pub key: Vec<f64>,
    pub state: usize,
    pub next_state: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    Argmax,
    Sample,
}

impl std::str::FromStr for ForecastMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(Self::Argmax),
            "sample" => Ok(Self::Sample),
            other => Err(Error::input(format!("unknown forecast mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredModel {
    k: usize,
    mu: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    medoids: Vec<Vec<Vec<f64>>>,
    counts: Vec<Vec<u64>>,
    beta: f64,
    seed: u64,
    provider_id: String,
    patch_length: usize,
    last_state: usize,
    action_stats: Vec<ChannelStats>,
    action_table: Option<Vec<ActionRecord>>,
}

/// A fitted transition model. Serialised without the probability matrix,
/// which is recomputed from the counts on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StoredModel", into = "StoredModel")]
pub struct TransitionModel {
    pub k: usize,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    /// `medoids[state][observation channel]` raw patch values.
    pub medoids: Vec<Vec<Vec<f64>>>,
    pub counts: Vec<Vec<u64>>,
    pub probs: Vec<Vec<f64>>,
    pub beta: f64,
    pub seed: u64,
    pub provider_id: String,
    pub patch_length: usize,
    /// State of the final context patch.
    pub last_state: usize,
    /// Context statistics of each action channel.
    pub action_stats: Vec<ChannelStats>,
    pub action_table: Option<Vec<ActionRecord>>,
}

impl From<StoredModel> for TransitionModel {
    fn from(s: StoredModel) -> Self {
        Self {
            probs: smoothed_probs(&s.counts),
            k: s.k,
            mu: s.mu,
            sigma: s.sigma,
            medoids: s.medoids,
            counts: s.counts,
            beta: s.beta,
            seed: s.seed,
            provider_id: s.provider_id,
            patch_length: s.patch_length,
            last_state: s.last_state,
            action_stats: s.action_stats,
            action_table: s.action_table,
        }
    }
}

impl From<TransitionModel> for StoredModel {
    fn from(m: TransitionModel) -> Self {
        Self {
            k: m.k,
            mu: m.mu,
            sigma: m.sigma,
            medoids: m.medoids,
            counts: m.counts,
            beta: m.beta,
            seed: m.seed,
            provider_id: m.provider_id,
            patch_length: m.patch_length,
            last_state: m.last_state,
            action_stats: m.action_stats,
            action_table: m.action_table,
        }
    }
}

fn patch_means(grid: &PatchGrid, channels: &[usize], stats: &[ChannelStats]) -> Vec<Vec<f64>> {
    (0..grid.n_patches())
        .map(|l| {
            channels
                .iter()
                .zip(stats)
                .map(|(&c, s)| s.normalize_all(&grid.patches[c][l]).iter().sum::<f64>() / grid.patch_length as f64)
                .collect()
        })
        .collect()
}

impl TransitionModel {
    /// Fit on a context series. Action channels are z-normalised on the
    /// context and scaled by `beta` before entering the action table.
    pub fn fit(context: &MultivariateSeries, patch_length: usize, beta: f64, seed: u64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::input(format!("action scale must be finite and non-negative, got {beta}")));
        }
        let grid = patchify(context, patch_length)?;
        let latents = embed_patches(&grid);
        let states = fit_states(&latents, seed)?;
        let counts = transition_counts(&states.assignments, states.k)?;
        let obs = grid.observation_indices();
        let medoids =
            states.medoids.iter().map(|&row| obs.iter().map(|&c| grid.patches[c][row].clone()).collect()).collect();

        let actions = context.action_indices();
        let action_stats: Vec<ChannelStats> = actions.iter().map(|&c| ChannelStats::of(context.channel(c))).collect();
        let action_table = if actions.is_empty() {
            None
        } else {
            let means = patch_means(&grid, &actions, &action_stats);
            let table = states
                .assignments
                .windows(2)
                .enumerate()
                .map(|(t, w)| {
                    let mut key = states.mu[w[0]].clone();
                    key.extend(means[t + 1].iter().map(|a| beta * a));
                    ActionRecord { key, state: w[0], next_state: w[1] }
                })
                .collect();
            Some(table)
        };

        Ok(Self {
            k: states.k,
            probs: smoothed_probs(&counts),
            mu: states.mu,
            sigma: states.sigma,
            medoids,
            counts,
            beta,
            seed,
            provider_id: SpectralPatchEmbedder::ID.to_string(),
            patch_length,
            last_state: *states.assignments.last().expect("at least 2 rows"),
            action_stats,
            action_table,
        })
    }

    /// `-ln P(j | i)`.
    pub fn energy(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.k || j >= self.k {
            return Err(Error::input(format!("state pair ({i}, {j}) outside 0..{}", self.k)));
        }
        Ok(-self.probs[i][j].ln())
    }

    fn check_start(&self, start: usize, horizon: usize) -> Result<()> {
        if start >= self.k {
            return Err(Error::input(format!("start state {start} outside 0..{}", self.k)));
        }
        if horizon == 0 {
            return Err(Error::input("horizon must be at least 1 patch"));
        }
        Ok(())
    }

    /// Next-state distribution from state `i` given the context-normalised
    /// mean action of the next patch.
    pub fn conditioned_probs(&self, i: usize, action: &[f64]) -> Result<Vec<f64>> {
        if i >= self.k {
            return Err(Error::input(format!("state {i} outside 0..{}", self.k)));
        }
        if action.len() != self.action_stats.len() {
            return Err(Error::input(format!(
                "expected {} action values, got {}",
                self.action_stats.len(),
                action.len()
            )));
        }
        match &self.action_table {
            Some(t) if !t.is_empty() => Ok(self.conditioned_row(t, i, action)),
            _ => Ok(self.probs[i].clone()),
        }
    }

    /// Next-state distribution from `i` restricted to the successors of the
    /// retrieved records; the retrieval frequencies stand in when `i` never
    /// reached any of them.
    fn conditioned_row(&self, table: &[ActionRecord], i: usize, action: &[f64]) -> Vec<f64> {
        let mut query = self.mu[i].clone();
        query.extend(action.iter().map(|a| self.beta * a));
        let dists: Vec<f64> = table.iter().map(|r| euclidean(&r.key, &query)).collect();
        let m = ((table.len() as f64).sqrt().round() as usize).max(1);
        let mut sorted = dists.clone();
        sorted.sort_by(f64::total_cmp);
        // Records tied with the m-th nearest are all retrieved.
        let radius = sorted[m - 1];
        let mut allowed = vec![false; self.k];
        let mut freq = vec![0.0; self.k];
        for (r, d) in table.iter().zip(&dists) {
            if *d <= radius {
                allowed[r.next_state] = true;
                freq[r.next_state] += 1.0;
            }
        }
        let masked: Vec<f64> =
            self.counts[i].iter().zip(&allowed).map(|(&c, &a)| if a { c as f64 } else { 0.0 }).collect();
        let base = if masked.iter().sum::<f64>() > 0.0 { masked } else { freq };
        let total: f64 = base.iter().sum();
        let k = self.k as f64;
        base.iter().map(|c| (c + SMOOTHING) / (total + k * SMOOTHING)).collect()
    }

    /// Roll the chain forward `horizon` patches from `start`.
    pub fn forecast(&self, start: usize, horizon: usize, mode: ForecastMode, seed: u64) -> Result<LatentForecast> {
        self.check_start(start, horizon)?;
        self.roll(start, horizon, mode, seed, |i| self.probs[i].clone(), false, None)
    }

    /// Forecast with the next-state distribution conditioned on the mean
    /// future action of each patch. `future_actions[channel]` holds raw
    /// per-sample values covering at least `horizon * patch_length` samples.
    pub fn forecast_with_actions(
        &self,
        start: usize,
        future_actions: &[Vec<f64>],
        horizon: usize,
        mode: ForecastMode,
        seed: u64,
    ) -> Result<LatentForecast> {
        self.check_start(start, horizon)?;
        let table = match &self.action_table {
            Some(t) if !t.is_empty() => t,
            _ => {
                let warning = "no action table; forecast is unconditioned".to_string();
                return self.roll(start, horizon, mode, seed, |i| self.probs[i].clone(), false, Some(warning));
            }
        };
        if future_actions.len() != self.action_stats.len() {
            return Err(Error::input(format!(
                "expected {} future action channels, got {}",
                self.action_stats.len(),
                future_actions.len()
            )));
        }
        let p = self.patch_length;
        if let Some(short) = future_actions.iter().find(|a| a.len() < horizon * p) {
            return Err(Error::input(format!(
                "future actions cover {} samples, horizon needs {}",
                short.len(),
                horizon * p
            )));
        }
        let step_actions: Vec<Vec<f64>> = (0..horizon)
            .map(|h| {
                future_actions
                    .iter()
                    .zip(&self.action_stats)
                    .map(|(a, s)| s.normalize_all(&a[h * p..(h + 1) * p]).iter().sum::<f64>() / p as f64)
                    .collect()
            })
            .collect();
        let mut step = 0usize;
        self.roll(
            start,
            horizon,
            mode,
            seed,
            |i| {
                let row = self.conditioned_row(table, i, &step_actions[step]);
                step += 1;
                row
            },
            true,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn roll(
        &self,
        start: usize,
        horizon: usize,
        mode: ForecastMode,
        seed: u64,
        mut row_of: impl FnMut(usize) -> Vec<f64>,
        conditioned: bool,
        warning: Option<String>,
    ) -> Result<LatentForecast> {
        let mut state_rng = rng::fork(seed, "forecast-states");
        let mut emit_rng = rng::fork(seed, "forecast-emission");
        let mut state = start;
        let mut state_path = Vec::with_capacity(horizon);
        let mut latents = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let row = row_of(state);
            state = match mode {
                ForecastMode::Argmax => argmax_lowest(&row),
                ForecastMode::Sample => sample_categorical(&row, state_rng.random::<f64>()),
            };
            state_path.push(state);
            latents.push(match mode {
                ForecastMode::Argmax => self.mu[state].clone(),
                ForecastMode::Sample => self.mu[state]
                    .iter()
                    .zip(&self.sigma[state])
                    .map(|(&m, &s)| {
                        let z: f64 = emit_rng.sample(StandardNormal);
                        if s == 0.0 {
                            m
                        } else {
                            m + s * z
                        }
                    })
                    .collect(),
            });
        }
        let channels = self.medoids.first().map_or(0, Vec::len);
        let decoded = (0..channels)
            .map(|c| state_path.iter().flat_map(|&s| self.medoids[s][c].iter().copied()).collect())
            .collect();
        Ok(LatentForecast { state_path, latents, decoded, mode, conditioned, warning })
    }
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn sample_categorical(row: &[f64], u: f64) -> usize {
    let total: f64 = row.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (j, &v) in row.iter().enumerate() {
        acc += v;
        if target < acc {
            return j;
        }
    }
    row.len() - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentForecast {
    pub state_path: Vec<usize>,
    pub latents: Vec<Vec<f64>>,
    /// Observation channels, `horizon * patch_length` samples each.
    pub decoded: Vec<Vec<f64>>,
    pub mode: ForecastMode,
    pub conditioned: bool,
    pub warning: Option<String>,
}

/// Fit on `context` and forecast `horizon_samples` observation samples from
/// the final context state, conditioned on `future_actions` when given.
/// The output is trimmed to the requested length.
pub fn insight_forecast(
    context: &MultivariateSeries,
    future_actions: Option<&[Vec<f64>]>,
    horizon_samples: usize,
    patch_length: usize,
    beta: f64,
    mode: ForecastMode,
    seed: u64,
) -> Result<(TransitionModel, LatentForecast)> {
    let model = TransitionModel::fit(context, patch_length, beta, rng::derive_seed(seed, "fit"))?;
    let horizon = horizon_samples.div_ceil(patch_length).max(1);
    let forecast_seed = rng::derive_seed(seed, "forecast");
    let mut fc = match future_actions {
        Some(a) => model.forecast_with_actions(model.last_state, a, horizon, mode, forecast_seed)?,
        None => model.forecast(model.last_state, horizon, mode, forecast_seed)?,
    };
    for ch in &mut fc.decoded {
        ch.truncate(horizon_samples);
    }
    Ok((model, fc))
}
