//! Multivariate series model, context normalisation, patching and the
//! deterministic patch embedding.

use serde::{Deserialize, Serialize};

use crate::spectrum::magnitude_spectrum;
use crate::stats::{mean, pop_std};
use crate::{Error, Result};

/// Floor applied to standard deviations before dividing.
pub const STD_FLOOR: f64 = 1e-8;

/// Default patch length.
pub const DEFAULT_PATCH_LENGTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Observation,
    Action,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Observation => "obs",
            Role::Action => "act",
        }
    }
}

/// Channels × timesteps, each channel tagged as an observation or an action.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    channel_names: Vec<String>,
    roles: Vec<Role>,
    values: Vec<Vec<f64>>,
    dt: f64,
}

impl MultivariateSeries {
    pub fn new(channel_names: Vec<String>, roles: Vec<Role>, values: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if channel_names.len() != values.len() || roles.len() != values.len() {
            return Err(Error::input(format!(
                "{} names, {} roles and {} channels do not line up",
                channel_names.len(),
                roles.len(),
                values.len()
            )));
        }
        if !roles.contains(&Role::Observation) {
            return Err(Error::input("series needs at least one observation channel"));
        }
        let t = values[0].len();
        if t == 0 {
            return Err(Error::input("series is empty"));
        }
        for (name, ch) in channel_names.iter().zip(&values) {
            if ch.len() != t {
                return Err(Error::input(format!("channel {name} has {} samples, expected {t}", ch.len())));
            }
            if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!("channel {name} has a non-finite value at {i}")));
            }
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::input(format!("invalid sampling interval {dt}")));
        }
        Ok(Self { channel_names, roles, values, dt })
    }

    /// Series made only of observation channels named `c0`, `c1`, ...
    pub fn from_observations(values: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..values.len()).map(|i| format!("c{i}")).collect();
        let roles = vec![Role::Observation; values.len()];
        Self::new(names, roles, values, 1.0)
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn observation_indices(&self) -> Vec<usize> {
        self.indices_with(Role::Observation)
    }

    pub fn action_indices(&self) -> Vec<usize> {
        self.indices_with(Role::Action)
    }

    fn indices_with(&self, role: Role) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| **r == role).map(|(i, _)| i).collect()
    }

    /// Observation channels only, in channel order.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.observation_indices().into_iter().map(|i| self.values[i].clone()).collect()
    }

    /// Action channels only, in channel order.
    pub fn actions(&self) -> Vec<Vec<f64>> {
        self.action_indices().into_iter().map(|i| self.values[i].clone()).collect()
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::input(format!("slice {start}..{end} out of range for length {}", self.len())));
        }
        let values = self.values.iter().map(|c| c[start..end].to_vec()).collect();
        Self::new(self.channel_names.clone(), self.roles.clone(), values, self.dt)
    }
}

/// Per-channel location and scale taken from a context window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), std: pop_std(xs) }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std.max(STD_FLOOR)
    }

    pub fn normalize_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.normalize(x)).collect()
    }
}

/// Z-normalise every channel with statistics from its first `context_len`
/// samples. The returned stats normalise any later segment consistently.
pub fn znorm_context(
    series: &MultivariateSeries,
    context_len: usize,
) -> Result<(MultivariateSeries, Vec<ChannelStats>)> {
    if context_len == 0 || context_len > series.len() {
        return Err(Error::input(format!("context length {context_len} outside 1..={}", series.len())));
    }
    let stats: Vec<ChannelStats> = series.values.iter().map(|c| ChannelStats::of(&c[..context_len])).collect();
    let values = series.values.iter().zip(&stats).map(|(c, s)| s.normalize_all(c)).collect();
    let out = MultivariateSeries { values, ..series.clone() };
    Ok((out, stats))
}

/// Non-overlapping patches of every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_length: usize,
    pub origin_offset: usize,
    /// `patches[channel][patch][sample]`.
    pub patches: Vec<Vec<Vec<f64>>>,
    pub roles: Vec<Role>,
}

impl PatchGrid {
    /// Number of patches per channel.
    pub fn n_patches(&self) -> usize {
        self.patches.first().map_or(0, Vec::len)
    }

    pub fn observation_indices(&self) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| **r == Role::Observation).map(|(i, _)| i).collect()
    }

    /// Concatenate patches back into per-channel sequences.
    pub fn unpatchify(&self) -> Vec<Vec<f64>> {
        self.patches.iter().map(|ch| ch.concat()).collect()
    }
}

/// Split into patches of length `p`, dropping the `T mod p` oldest samples.
pub fn patchify(series: &MultivariateSeries, p: usize) -> Result<PatchGrid> {
    if p < 2 {
        return Err(Error::input(format!("patch length must be at least 2, got {p}")));
    }
    let t = series.len();
    if t < p {
        return Err(Error::input(format!("series of length {t} is shorter than patch length {p}")));
    }
    let origin_offset = t % p;
    let patches =
        series.values.iter().map(|c| c[origin_offset..].chunks_exact(p).map(<[f64]>::to_vec).collect()).collect();
    Ok(PatchGrid { patch_length: p, origin_offset, patches, roles: series.roles.clone() })
}

/// One latent row per temporal patch index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub provider_id: String,
}

impl EmbeddingMatrix {
    /// Column-wise mean of the rows.
    pub fn mean_pool(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for row in &self.rows {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let n = self.rows.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Maps a patch grid to latent rows.
pub trait EmbeddingProvider {
    fn id(&self) -> &str;
    fn embed(&self, grid: &PatchGrid) -> EmbeddingMatrix;
}

/// Default provider: each observation patch becomes its z-normalised values
/// followed by their DFT magnitude spectrum.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectralPatchEmbedder;

impl SpectralPatchEmbedder {
    pub const ID: &'static str = "zvalue-spectrum-v1";

    /// Latent width for `channels` observation channels and patch length `p`.
    pub fn dim(channels: usize, p: usize) -> usize {
        channels * (p + p / 2 + 1)
    }

    fn embed_block(patch: &[f64], out: &mut Vec<f64>) {
        let stats = ChannelStats::of(patch);
        let z = stats.normalize_all(patch);
        let spec = magnitude_spectrum(&z);
        out.extend_from_slice(&z);
        out.extend_from_slice(&spec);
    }
}

impl EmbeddingProvider for SpectralPatchEmbedder {
    fn id(&self) -> &str {
        Self::ID
    }

    fn embed(&self, grid: &PatchGrid) -> EmbeddingMatrix {
        let obs = grid.observation_indices();
        let dim = Self::dim(obs.len(), grid.patch_length);
        let rows = (0..grid.n_patches())
            .map(|l| {
                let mut row = Vec::with_capacity(dim);
                for &c in &obs {
                    Self::embed_block(&grid.patches[c][l], &mut row);
                }
                row
            })
            .collect();
        EmbeddingMatrix { dim, rows, provider_id: Self::ID.to_string() }
    }
}

/// Embed with the default provider.
pub fn embed_patches(grid: &PatchGrid) -> EmbeddingMatrix {
    SpectralPatchEmbedder.embed(grid)
}

/// A dosing-style event: `magnitude` held for `duration` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start_index: usize,
    pub duration: usize,
    pub magnitude: f64,
}

/// Render events as a step-function action channel. Overlaps add up.
pub fn events_to_step(events: &[EventRecord], len: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; len];
    for (n, e) in events.iter().enumerate() {
        if e.duration == 0 || e.start_index + e.duration > len {
            return Err(Error::input(format!(
                "event {n} ({}+{}) does not fit in length {len}",
                e.start_index, e.duration
            )));
        }
        for v in &mut out[e.start_index..e.start_index + e.duration] {
            *v += e.magnitude;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(values: Vec<f64>) -> MultivariateSeries {
        MultivariateSeries::from_observations(vec![values]).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(MultivariateSeries::from_observations(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(MultivariateSeries::from_observations(vec![vec![1.0, f64::NAN]]).is_err());
        let only_action = MultivariateSeries::new(vec!["u".into()], vec![Role::Action], vec![vec![0.0]], 1.0);
        assert!(only_action.is_err());
    }

    #[test]
    fn znorm_constant_channel_is_zero() {
        let (z, stats) = znorm_context(&single(vec![5.0; 4]), 4).unwrap();
        assert!(z.channel(0).iter().all(|&v| v == 0.0));
        assert_eq!(stats[0].std, 0.0);
    }

    #[test]
    fn znorm_uses_population_std() {
        let (z, stats) = znorm_context(&single(vec![1.0, 2.0, 3.0]), 3).unwrap();
        assert!((stats[0].mean - 2.0).abs() < 1e-15);
        assert!((stats[0].std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in z.channel(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn znorm_tail_uses_context_stats() {
        let (z, _) = znorm_context(&single(vec![0.0, 2.0, 4.0]), 2).unwrap();
        assert!((z.channel(0)[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn znorm_context_bounds() {
        let s = single(vec![1.0, 2.0]);
        assert!(matches!(znorm_context(&s, 0), Err(Error::Input(_))));
        assert!(matches!(znorm_context(&s, 3), Err(Error::Input(_))));
    }

    #[test]
    fn patchify_shapes() {
        let g = patchify(&single((0..32).map(f64::from).collect()), 16).unwrap();
        assert_eq!((g.n_patches(), g.origin_offset), (2, 0));
        let g = patchify(&single((0..35).map(f64::from).collect()), 16).unwrap();
        assert_eq!((g.n_patches(), g.origin_offset), (2, 3));
        assert_eq!(g.patches[0][0][0], 3.0);
        assert!(patchify(&single(vec![0.0; 8]), 16).is_err());
        assert!(patchify(&single(vec![0.0; 8]), 1).is_err());
    }

    #[test]
    fn embedding_dimension_and_zero_block() {
        let s = MultivariateSeries::from_observations(vec![vec![0.0; 32], vec![0.0; 32]]).unwrap();
        let e = embed_patches(&patchify(&s, 16).unwrap());
        assert_eq!(e.dim, 50);
        assert_eq!(e.rows.len(), 2);
        assert!(e.rows.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_skips_action_channels() {
        let s = MultivariateSeries::new(
            vec!["x".into(), "u".into()],
            vec![Role::Observation, Role::Action],
            vec![(0..32).map(f64::from).collect(), vec![1.0; 32]],
            1.0,
        )
        .unwrap();
        let e = embed_patches(&patchify(&s, 16).unwrap());
        assert_eq!(e.dim, 25);
    }

    #[test]
    fn embedding_is_deterministic() {
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let g = patchify(&single(vals), 16).unwrap();
        let a = embed_patches(&g);
        let b = embed_patches(&g);
        let bits = |m: &EmbeddingMatrix| m.rows.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn events_render_as_steps() {
        assert_eq!(events_to_step(&[], 4).unwrap(), vec![0.0; 4]);
        let e = EventRecord { start_index: 2, duration: 3, magnitude: 5.0 };
        assert_eq!(events_to_step(&[e], 8).unwrap(), vec![0.0, 0.0, 5.0, 5.0, 5.0, 0.0, 0.0, 0.0]);
        let a = EventRecord { start_index: 0, duration: 2, magnitude: 1.0 };
        let b = EventRecord { start_index: 1, duration: 1, magnitude: 2.0 };
        assert_eq!(events_to_step(&[a, b], 3).unwrap()[1], 3.0);
        let oob = EventRecord { start_index: 6, duration: 3, magnitude: 1.0 };
        assert!(matches!(events_to_step(&[oob], 8), Err(Error::Input(_))));
    }

    proptest! {
        #[test]
        fn unpatchify_restores_tail(vals in prop::collection::vec(-1e3f64..1e3, 16..200), p in 2usize..17) {
            prop_assume!(vals.len() >= p);
            let g = patchify(&single(vals.clone()), p).unwrap();
            prop_assert_eq!(&g.unpatchify()[0], &vals[g.origin_offset..].to_vec());
            prop_assert_eq!(g.n_patches(), (vals.len() - g.origin_offset) / p);
        }

        #[test]
        fn znorm_twice_is_standard(vals in prop::collection::vec(-1e3f64..1e3, 8..100), frac in 0.2f64..1.0) {
            let ctx = ((vals.len() as f64 * frac) as usize).max(2);
            prop_assume!(pop_std(&vals[..ctx]) > 1e-6);
            let s = single(vals);
            let (once, _) = znorm_context(&s, ctx).unwrap();
            let (twice, _) = znorm_context(&once, ctx).unwrap();
            let head = &twice.channel(0)[..ctx];
            prop_assert!(mean(head).abs() < 1e-9);
            prop_assert!((pop_std(head) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn step_support_is_event_union(
            evs in prop::collection::vec((0usize..40, 1usize..10, 0.1f64..5.0), 0..6)
        ) {
            let events: Vec<EventRecord> = evs.iter()
                .map(|&(s, d, m)| EventRecord { start_index: s, duration: d, magnitude: m })
                .collect();
            let out = events_to_step(&events, 50).unwrap();
            for (i, v) in out.iter().enumerate() {
                let covered = events.iter().any(|e| i >= e.start_index && i < e.start_index + e.duration);
                prop_assert_eq!(*v != 0.0, covered);
            }
        }
    }
}
