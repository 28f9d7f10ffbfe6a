//! Chaos-theoretic channel profile: DFA scaling exponent, largest Lyapunov
//! exponent, and persistent entropy of the H0/H1 Vietoris-Rips diagrams of
//! a delay embedding.

mod dfa;
mod lyapunov;
mod persistence;
mod takens;

pub use dfa::{dfa_exponent, dfa_window_sizes, fluctuation, integrated_profile};
pub use lyapunov::{lyapunov_exponent, rosenstein_divergence, LyapunovParams};
pub use persistence::{
    entropy_of_lifetimes, persistent_entropy, vr_persistence, vr_persistence_points, Bar, PersistenceDiagram,
    DEFAULT_MAX_POINTS,
};
pub use takens::{takens_embed, TakensCloud};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Delay and dimension of the embedding used for persistence.
pub const PERSISTENCE_DELAY: usize = 1;
pub const PERSISTENCE_DIM: usize = 5;

/// Shortest channel accepted by [`chaos_profile`].
pub const MIN_PROFILE_LENGTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosProfile {
    pub dfa: f64,
    pub lyapunov: f64,
    pub pe_h0: f64,
    pub pe_h1: f64,
}

impl ChaosProfile {
    pub fn as_array(&self) -> [f64; 4] {
        [self.dfa, self.lyapunov, self.pe_h0, self.pe_h1]
    }

    /// Element-wise mean of several profiles.
    pub fn mean(profiles: &[ChaosProfile]) -> Option<ChaosProfile> {
        if profiles.is_empty() {
            return None;
        }
        let n = profiles.len() as f64;
        let mut acc = [0.0; 4];
        for p in profiles {
            for (a, v) in acc.iter_mut().zip(p.as_array()) {
                *a += v;
            }
        }
        Some(ChaosProfile { dfa: acc[0] / n, lyapunov: acc[1] / n, pe_h0: acc[2] / n, pe_h1: acc[3] / n })
    }
}

/// Profile one channel with the default parameters.
pub fn chaos_profile(x: &[f64]) -> Result<ChaosProfile> {
    if x.len() < MIN_PROFILE_LENGTH {
        return Err(Error::input(format!(
            "chaos profile needs at least {MIN_PROFILE_LENGTH} samples, got {}",
            x.len()
        )));
    }
    let dfa = dfa_exponent(x)?;
    let lyapunov = lyapunov_exponent(x, LyapunovParams::default())?;
    let cloud = takens_embed(x, PERSISTENCE_DELAY, PERSISTENCE_DIM)?;
    let diagram = vr_persistence(&cloud, DEFAULT_MAX_POINTS)?;
    let profile =
        ChaosProfile { dfa, lyapunov, pe_h0: persistent_entropy(&diagram, 0), pe_h1: persistent_entropy(&diagram, 1) };
    if !profile.as_array().iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("chaos profile produced a non-finite value"));
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::logistic_map;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_profile() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..2048).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = chaos_profile(&x).unwrap();
        assert!((p.dfa - 0.5).abs() < 0.1, "{p:?}");
        assert!(p.lyapunov > -0.05, "{p:?}");
        assert!(p.pe_h0 > 0.0 && p.pe_h1 >= 0.0);
    }

    #[test]
    fn logistic_profile() {
        let x = logistic_map(4.0, 0.4, 4096).unwrap();
        let p = chaos_profile(&x).unwrap();
        assert!((p.lyapunov - std::f64::consts::LN_2).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn constant_channel_is_numeric_error() {
        assert!(matches!(chaos_profile(&[1.0; 256]), Err(Error::Numeric(_))));
        assert!(matches!(chaos_profile(&[1.0; 64]), Err(Error::Input(_))));
    }
}
