//! Browser bindings for three interactive views:
//!
//! - `oscillator`: simulate the forced Van der Pol oscillator and profile it;
//! - `balance`: score a regime histogram with both balance variants;
//! - `forecast`: insight forecast of the oscillator against the naive mean.
//!
//! Every export returns a JSON string. The logic lives in the `*_json`
//! functions, which also run natively.

use chaosforge::balance::{balance_report, BalanceParams, BalanceReport};
use chaosforge::chaos::{chaos_profile, ChaosProfile};
use chaosforge::eval::{evaluate, naive_forecast, EvalReport};
use chaosforge::systems::{integrate_vdp, OdeSpec};
use chaosforge::transition::{insight_forecast, ForecastMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_PLOT_POINTS: usize = 1024;
const MAX_SAMPLES: usize = 16_384;
const PATCH_LENGTH: usize = 16;

/// Every `stride`-th sample so a plot never exceeds `MAX_PLOT_POINTS`.
fn thin(x: &[f64]) -> (usize, Vec<f64>) {
    let stride = x.len().div_ceil(MAX_PLOT_POINTS).max(1);
    (stride, x.iter().step_by(stride).copied().collect())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_len(name: &str, n: usize, min: usize) -> Result<(), String> {
    if n < min || n > MAX_SAMPLES {
        return Err(format!("{name} must lie in {min}..={MAX_SAMPLES}, got {n}"));
    }
    Ok(())
}

#[derive(Serialize)]
struct OscillatorView {
    a: f64,
    dt: f64,
    stride: usize,
    x: Vec<f64>,
    xdot: Vec<f64>,
    profile: ChaosProfile,
}

pub fn oscillator_json(a: f64, steps: usize) -> Result<String, String> {
    check_len("steps", steps, 256)?;
    let mut spec = OdeSpec::van_der_pol(a);
    spec.steps = steps;
    let s = integrate_vdp(&spec).map_err(err)?;
    let profile = chaos_profile(s.channel(0)).map_err(err)?;
    let (stride, x) = thin(s.channel(0));
    let (_, xdot) = thin(s.channel(1));
    serde_json::to_string(&OscillatorView { a, dt: s.dt(), stride, x, xdot, profile }).map_err(err)
}

#[derive(Serialize)]
struct BalanceView {
    counts: Vec<f64>,
    report: BalanceReport,
}

/// `counts_json` is a JSON array of regime counts. A `reference` of 0 uses
/// the number of non-empty regimes.
pub fn balance_json(counts_json: &str, reference: usize, alpha_entropy: f64, alpha_cv: f64) -> Result<String, String> {
    let counts: Vec<f64> = serde_json::from_str(counts_json).map_err(|e| format!("counts: {e}"))?;
    let present = counts.iter().filter(|c| **c > 0.0).count();
    let reference = if reference == 0 { present } else { reference };
    let report = balance_report(&counts, reference, BalanceParams { alpha_entropy, alpha_cv }).map_err(err)?;
    serde_json::to_string(&BalanceView { counts, report }).map_err(err)
}

#[derive(Serialize)]
struct ForecastView {
    stride: usize,
    context_tail: Vec<f64>,
    truth: Vec<f64>,
    insight: Vec<f64>,
    naive: Vec<f64>,
    states: usize,
    state_path: Vec<usize>,
    insight_report: EvalReport,
    naive_report: EvalReport,
}

/// Simulate `context + horizon` samples, fit on the context and forecast
/// the rest, conditioned on the known forcing.
pub fn forecast_json(a: f64, context: usize, horizon: usize, seed: u32) -> Result<String, String> {
    check_len("context", context, 4 * PATCH_LENGTH)?;
    check_len("horizon", horizon, PATCH_LENGTH)?;
    let mut spec = OdeSpec::van_der_pol(a);
    spec.steps = context + horizon;
    let full = integrate_vdp(&spec).map_err(err)?;
    let ctx = full.slice(0, context).map_err(err)?;
    let truth = full.slice(context, context + horizon).map_err(err)?;
    let actions = truth.actions();
    let (model, fc) =
        insight_forecast(&ctx, Some(&actions), horizon, PATCH_LENGTH, 1.0, ForecastMode::Sample, u64::from(seed))
            .map_err(err)?;
    let ctx_obs = ctx.observations();
    let truth_obs = truth.observations();
    let naive = naive_forecast(&ctx_obs, horizon).map_err(err)?;
    let insight_report = evaluate(&ctx_obs, &truth_obs, &fc.decoded, 1.0, PATCH_LENGTH).map_err(err)?;
    let naive_report = evaluate(&ctx_obs, &truth_obs, &naive, 1.0, PATCH_LENGTH).map_err(err)?;
    let tail = &ctx_obs[0][context.saturating_sub(horizon)..];
    let (stride, context_tail) = thin(tail);
    serde_json::to_string(&ForecastView {
        stride,
        context_tail,
        truth: thin(&truth_obs[0]).1,
        insight: thin(&fc.decoded[0]).1,
        naive: thin(&naive[0]).1,
        states: model.k,
        state_path: fc.state_path,
        insight_report,
        naive_report,
    })
    .map_err(err)
}

#[wasm_bindgen]
pub fn oscillator(a: f64, steps: usize) -> Result<String, JsError> {
    oscillator_json(a, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn balance(counts_json: &str, reference: usize, alpha_entropy: f64, alpha_cv: f64) -> Result<String, JsError> {
    balance_json(counts_json, reference, alpha_entropy, alpha_cv).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn forecast(a: f64, context: usize, horizon: usize, seed: u32) -> Result<String, JsError> {
    forecast_json(a, context, horizon, seed).map_err(|e| JsError::new(&e))
}
