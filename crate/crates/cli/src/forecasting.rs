//! `simulate`, `forecast` and `evaluate`.

use std::path::{Path, PathBuf};

use chaosforge::eval::{evaluate, naive_forecast, seasonal_naive_forecast, EvalReport};
use chaosforge::io::write_series;
use chaosforge::series::{MultivariateSeries, Role};
use chaosforge::systems::{integrate_lorenz, integrate_vdp, logistic_map, OdeSpec, OdeSystem, VDP_MU, VDP_OMEGA};
use chaosforge::transition::{insight_forecast, ForecastMode, LatentForecast, TransitionModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{csv_reader, load_series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SystemKind {
    Vdp,
    Lorenz,
    Logistic,
}

fn take(params: &mut Vec<(String, f64)>, key: &str, default: f64) -> f64 {
    match params.iter().position(|(k, _)| k == key) {
        Some(i) => params.remove(i).1,
        None => default,
    }
}

fn reject_unknown(kind: SystemKind, rest: &[(String, f64)]) -> CliResult<()> {
    match rest.first() {
        Some((k, _)) => Err(CliError::input(format!("unknown parameter {k:?} for {kind:?}"))),
        None => Ok(()),
    }
}

/// Integrate a generator. `params` are `name=value` pairs; unknown names
/// are an input error.
pub fn simulate(
    kind: SystemKind,
    params: &[(String, f64)],
    steps: Option<usize>,
    dt: Option<f64>,
) -> CliResult<MultivariateSeries> {
    let mut p = params.to_vec();
    let finish_ode = |mut spec: OdeSpec, p: &mut Vec<(String, f64)>| {
        spec.steps = steps.unwrap_or(spec.steps);
        spec.dt = dt.unwrap_or(spec.dt);
        reject_unknown(kind, p).map(|_| spec)
    };
    let out = match kind {
        SystemKind::Vdp => {
            let a = take(&mut p, "a", 0.2);
            let mut spec = OdeSpec::van_der_pol(a);
            spec.system =
                OdeSystem::VanDerPol { mu: take(&mut p, "mu", VDP_MU), a, omega: take(&mut p, "omega", VDP_OMEGA) };
            spec.initial = vec![take(&mut p, "x0", 0.1), take(&mut p, "v0", 0.0)];
            integrate_vdp(&finish_ode(spec, &mut p)?)?
        }
        SystemKind::Lorenz => {
            let mut spec = OdeSpec::lorenz();
            spec.system = OdeSystem::Lorenz {
                sigma: take(&mut p, "sigma", 10.0),
                rho: take(&mut p, "rho", 28.0),
                beta: take(&mut p, "beta", 8.0 / 3.0),
            };
            spec.initial = vec![take(&mut p, "x0", 1.0), take(&mut p, "y0", 1.0), take(&mut p, "z0", 1.0)];
            integrate_lorenz(&finish_ode(spec, &mut p)?)?
        }
        SystemKind::Logistic => {
            let r = take(&mut p, "r", 4.0);
            let x0 = take(&mut p, "x0", 0.4);
            reject_unknown(kind, &p)?;
            let values = logistic_map(r, x0, steps.unwrap_or(4096))?;
            MultivariateSeries::new(vec!["x".into()], vec![Role::Observation], vec![values], dt.unwrap_or(1.0))?
        }
    };
    Ok(out)
}

pub fn series_csv(series: &MultivariateSeries, start_time: f64, prov: &Provenance) -> CliResult<Vec<u8>> {
    let mut out = prov.csv_comment().into_bytes();
    write_series(&mut out, series, start_time)?;
    Ok(out)
}

pub struct InsightRun {
    pub model: TransitionModel,
    pub forecast: LatentForecast,
    pub series: MultivariateSeries,
}

/// Fit on the context and forecast `horizon` samples of every observation
/// channel, conditioned on the action channels of `actions` when given.
pub fn run_insight(
    context: &MultivariateSeries,
    actions: Option<&MultivariateSeries>,
    horizon: usize,
    cfg: &RunConfig,
) -> CliResult<InsightRun> {
    if horizon == 0 {
        return Err(CliError::input("horizon must be at least 1"));
    }
    let future = match actions {
        Some(a) if a.action_indices().is_empty() => {
            return Err(CliError::input("actions file has no :act columns"));
        }
        Some(a) => Some(a.actions()),
        None => None,
    };
    let (model, forecast) = insight_forecast(
        context,
        future.as_deref(),
        horizon,
        cfg.patch_length,
        cfg.action_scale,
        cfg.forecast_mode,
        cfg.seed,
    )
    .context("forecast")?;
    let obs = context.observation_indices();
    let names = obs.iter().map(|&i| context.names()[i].clone()).collect();
    let series =
        MultivariateSeries::new(names, vec![Role::Observation; obs.len()], forecast.decoded.clone(), context.dt())?;
    Ok(InsightRun { model, forecast, series })
}

#[derive(Debug, Serialize)]
pub struct ModelDoc<'a> {
    pub model: &'a TransitionModel,
    pub mode: ForecastMode,
    pub state_path: &'a [usize],
    pub conditioned: bool,
    pub warning: &'a Option<String>,
}

impl<'a> ModelDoc<'a> {
    pub fn new(run: &'a InsightRun) -> Self {
        Self {
            model: &run.model,
            mode: run.forecast.mode,
            state_path: &run.forecast.state_path,
            conditioned: run.forecast.conditioned,
            warning: &run.forecast.warning,
        }
    }
}

pub fn evaluate_files(context: &Path, truth: &Path, pred: &Path, cfg: &RunConfig) -> CliResult<EvalReport> {
    let (c, t, p) = (load_series(context)?, load_series(truth)?, load_series(pred)?);
    evaluate_series(&c, &t, &p, cfg)
}

pub fn evaluate_series(
    context: &MultivariateSeries,
    truth: &MultivariateSeries,
    pred: &MultivariateSeries,
    cfg: &RunConfig,
) -> CliResult<EvalReport> {
    Ok(evaluate(
        &context.observations(),
        &truth.observations(),
        &pred.observations(),
        cfg.softdtw_gamma,
        cfg.patch_length,
    )?)
}

#[derive(Debug, Deserialize)]
struct EvalManifestRow {
    sample_id: String,
    context: String,
    truth: String,
    pred: String,
}

pub struct EvalJob {
    pub sample_id: String,
    pub context: PathBuf,
    pub truth: PathBuf,
    pub pred: PathBuf,
}

pub fn read_eval_manifest(path: &Path) -> CliResult<Vec<EvalJob>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<EvalManifestRow>().enumerate() {
        let r = row.context(format!("{} row {}", path.display(), i + 2))?;
        out.push(EvalJob {
            sample_id: r.sample_id,
            context: base.join(r.context),
            truth: base.join(r.truth),
            pred: base.join(r.pred),
        });
    }
    if out.is_empty() {
        return Err(CliError::input(format!("{}: manifest lists no samples", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub sample_id: String,
    pub status: &'static str,
    #[serde(flatten)]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean of every metric over the successful rows.
#[derive(Debug, Clone, Serialize)]
pub struct EvalAggregate {
    pub sample_id: &'static str,
    pub status: &'static str,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mae: f64,
    pub soft_dtw: f64,
    pub freq_cos_sim: f64,
    pub freq_eucl: f64,
    pub latent_cos_sim: f64,
    pub latent_eucl: f64,
    pub final_score: f64,
}

/// Rows in manifest order. Unreadable files abort the batch; scoring
/// failures are flagged per row.
pub fn evaluate_batch(
    jobs: &[EvalJob],
    cfg: &RunConfig,
    pool: &rayon::ThreadPool,
) -> CliResult<(Vec<EvalRow>, EvalAggregate)> {
    type Loaded = (MultivariateSeries, MultivariateSeries, MultivariateSeries);
    let loaded: Vec<CliResult<Loaded>> = pool.install(|| {
        jobs.par_iter().map(|j| Ok((load_series(&j.context)?, load_series(&j.truth)?, load_series(&j.pred)?))).collect()
    });
    let loaded = loaded.into_iter().collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<EvalRow> = pool.install(|| {
        jobs.par_iter()
            .zip(&loaded)
            .map(|(j, (c, t, p))| match evaluate_series(c, t, p, cfg) {
                Ok(r) => EvalRow { sample_id: j.sample_id.clone(), status: "ok", report: Some(r), error: None },
                Err(e) => EvalRow {
                    sample_id: j.sample_id.clone(),
                    status: "failed",
                    report: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    let ok: Vec<&EvalReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
    let mean = |f: fn(&EvalReport) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let agg = EvalAggregate {
        sample_id: "aggregate",
        status: "aggregate",
        n_ok: ok.len(),
        n_failed: rows.len() - ok.len(),
        mae: mean(|r| r.mae),
        soft_dtw: mean(|r| r.soft_dtw),
        freq_cos_sim: mean(|r| r.freq_cos_sim),
        freq_eucl: mean(|r| r.freq_eucl),
        latent_cos_sim: mean(|r| r.latent_cos_sim),
        latent_eucl: mean(|r| r.latent_eucl),
        final_score: mean(|r| r.final_score),
    };
    Ok((rows, agg))
}

/// Insight forecast and both baselines scored against the same truth.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub horizon: usize,
    pub mode: ForecastMode,
    pub conditioned: bool,
    pub warning: Option<String>,
    pub insight: EvalReport,
    pub naive: EvalReport,
    pub seasonal_naive: EvalReport,
}

pub fn forecast_and_compare(
    context: &MultivariateSeries,
    truth: &MultivariateSeries,
    actions: Option<&MultivariateSeries>,
    cfg: &RunConfig,
) -> CliResult<(InsightRun, Comparison)> {
    let horizon = truth.len();
    let run = run_insight(context, actions, horizon, cfg)?;
    let ctx = context.observations();
    let t = truth.observations();
    let score = |pred: &[Vec<f64>]| -> CliResult<EvalReport> {
        evaluate(&ctx, &t, pred, cfg.softdtw_gamma, cfg.patch_length).context("evaluation")
    };
    let comparison = Comparison {
        horizon,
        mode: run.forecast.mode,
        conditioned: run.forecast.conditioned,
        warning: run.forecast.warning.clone(),
        insight: score(&run.forecast.decoded)?,
        naive: score(&naive_forecast(&ctx, horizon)?)?,
        seasonal_naive: score(&seasonal_naive_forecast(&ctx, horizon)?)?,
    };
    Ok((run, comparison))
}
