//! Chaos-theoretic profiling and latent transition forecasting for
//! multivariate time series.
//!
//! The crate is organised bottom-up:
//!
//! - [`series`]: the series data model, context normalisation, patching,
//!   event encoding and the deterministic patch embedding provider.
//! - [`chaos`]: DFA, Rosenstein Lyapunov, Takens embedding and
//!   Vietoris-Rips persistence with persistent entropy.
//! - [`clustering`]: k-means, elbow selection and dynamical-regime labels.
//! - [`balance`]: regime balance scores and balance-aware curation.
//! - [`transition`]: latent states, empirical transitions, forecasting.
//! - [`eval`]: forecast metrics, the combined final score and baselines.
//! - [`systems`]: Van der Pol, Lorenz and logistic-map generators.

pub mod balance;
pub mod chaos;
pub mod clustering;
mod error;
pub mod eval;
pub mod io;
pub mod rng;
pub mod series;
pub mod spectrum;
pub mod stats;
pub mod systems;
pub mod transition;

pub use error::{Error, Result};
