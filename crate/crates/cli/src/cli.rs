//! Argument parsing and command dispatch.

use std::path::{Path, PathBuf};

use chaosforge::balance::BalanceMetric;
use chaosforge::transition::ForecastMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::artifact::{write_all_atomic, write_atomic, Provenance};
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};
use crate::forecasting::{
    evaluate_batch, evaluate_files, forecast_and_compare, read_eval_manifest, run_insight, series_csv, simulate,
    ModelDoc, SystemKind,
};
use crate::manifest::{discover, load_series, read_manifest};
use crate::profile::{all_failed, metric_vectors, profile_rows, read_profiles, render_rows};
use crate::regimes::{
    cluster, curate, label_rows, labels_csv, read_labels, score_labels, selected_csv, trajectory_csv, ClusteringDoc,
};

#[derive(Debug, Parser)]
#[command(name = "chaosforge", version, about = "Chaos profiling, regime balancing and latent forecasting")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Entropy,
    Cv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Argmax,
    Sample,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; every sub-task forks its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for batch commands.
    #[arg(long, global = true, env = "CHAOSFORGE_WORKERS")]
    pub workers: Option<usize>,
    /// Patch length used to embed series into latent states
    #[arg(long = "patch-size", global = true)]
    pub patch_size: Option<usize>,
    /// Soft-DTW smoothing.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Curation target as a fraction of the corpus.
    #[arg(long, global = true)]
    pub frac: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub metric: Option<MetricArg>,
    /// Action scale used when pairing states with actions.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chaos profile of every observation channel, one JSONL row each.
    Profile {
        /// Series files or directories (walked recursively, sorted).
        inputs: Vec<PathBuf>,
        /// Manifest CSV with columns path[,sample_id,source_id].
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Regime clustering of profiled series.
    Cluster {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Per-sample regime labels CSV.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Balance scoring and curation of a labelled corpus.
    #[command(subcommand)]
    Balance(BalanceCommand),
    /// Same as `balance curate`.
    Curate(CurateArgs),
    /// Integrate a synthetic system into a series CSV.
    Simulate {
        #[arg(long, value_enum)]
        system: SystemKind,
        /// Parameter override, `name=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Insight forecast from a context series.
    Forecast {
        #[arg(long)]
        context: PathBuf,
        /// Forecast length in samples.
        #[arg(long)]
        horizon: usize,
        /// Series CSV whose :act columns hold the future actions.
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Fitted model, state path and conditioning status as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Score forecasts against ground truth.
    Evaluate {
        #[arg(long, conflicts_with = "manifest")]
        context: Option<PathBuf>,
        #[arg(long, conflicts_with = "manifest")]
        truth: Option<PathBuf>,
        #[arg(long, conflicts_with = "manifest")]
        pred: Option<PathBuf>,
        /// Batch CSV with columns sample_id,context,truth,pred.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// End-to-end chains.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Debug, Subcommand)]
pub enum BalanceCommand {
    /// Balance report of a labels CSV.
    Score {
        #[arg(long)]
        labels: PathBuf,
        /// Reference regime count; defaults to the regimes present.
        #[arg(long = "ref")]
        reference: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Balance-aware subset selection.
    Curate(CurateArgs),
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Selected samples CSV, in acceptance order.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Score after every candidate evaluation.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Curated vs concatenated balance summary.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Profiles to clustering, labels, balance and optional curation.
    Balance {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        curate: bool,
    },
    /// Context to insight forecast, scored with both baselines.
    Forecast {
        #[arg(long)]
        context: PathBuf,
        /// Ground truth; its length sets the horizon.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("bad number in {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value in {s:?}"));
    }
    Ok((k.trim().to_string(), v))
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            patch_length: self.patch_size,
            gamma: self.gamma,
            fraction: self.frac,
            metric: self.metric.map(|m| match m {
                MetricArg::Entropy => BalanceMetric::Entropy,
                MetricArg::Cv => BalanceMetric::Cv,
            }),
            beta: self.beta,
            mode: self.mode.map(|m| match m {
                ModeArg::Argmax => ForecastMode::Argmax,
                ModeArg::Sample => ForecastMode::Sample,
            }),
        }
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let n = match self.workers {
            Some(0) => return Err(CliError::input("--workers must be at least 1")),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };
        rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::input(format!("worker pool: {e}")))
    }
}

fn out_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    let prov = Provenance::of(&cfg);
    match cli.command {
        Command::Profile { inputs, manifest, out } => {
            let entries = match (manifest, inputs.is_empty()) {
                (Some(m), true) => read_manifest(&m)?,
                (None, false) => discover(&inputs)?,
                (Some(_), false) => return Err(CliError::input("give either input paths or --manifest, not both")),
                (None, true) => return Err(CliError::input("no inputs given")),
            };
            let rows = profile_rows(&entries, &cli.global.pool()?)?;
            let verdict = all_failed(&rows);
            if let Some(e @ CliError::Input(_)) = verdict {
                return Err(e);
            }
            write_atomic(&out, render_rows(&rows, &prov)?)?;
            verdict.map_or(Ok(()), Err)
        }
        Command::Cluster { profiles, out, labels_out } => {
            let vectors = metric_vectors(&read_profiles(&profiles)?);
            let clustering = cluster(&vectors, &cfg)?;
            let mut files = vec![(out, prov.json_document("regime_clustering", &ClusteringDoc::new(&clustering))?)];
            if let Some(path) = labels_out {
                files.push((path, labels_csv(&label_rows(&vectors, &clustering), &prov)?));
            }
            write_all_atomic(&files)
        }
        Command::Balance(BalanceCommand::Score { labels, reference, out }) => {
            let summary = score_labels(&read_labels(&labels)?, reference, &cfg)?;
            write_atomic(&out, prov.json_document("balance_report", &summary)?)
        }
        Command::Balance(BalanceCommand::Curate(args)) | Command::Curate(args) => {
            let c = curate(&read_labels(&args.labels)?, &cfg)?;
            let mut files = vec![(args.out, selected_csv(&c, &prov)?), (args.trajectory, trajectory_csv(&c, &prov)?)];
            if let Some(path) = args.report {
                files.push((path, prov.json_document("curation", &c.summary)?));
            }
            write_all_atomic(&files)
        }
        Command::Simulate { system, params, steps, dt, out } => {
            let series = simulate(system, &params, steps, dt)?;
            write_atomic(&out, series_csv(&series, 0.0, &prov)?)
        }
        Command::Forecast { context, horizon, actions, out, model_out } => {
            let ctx = load_series(&context)?;
            let acts = actions.as_deref().map(load_series).transpose()?;
            let run = run_insight(&ctx, acts.as_ref(), horizon, &cfg)?;
            if let Some(w) = &run.forecast.warning {
                eprintln!("warning: {w}");
            }
            let start = ctx.len() as f64 * ctx.dt();
            let mut files = vec![(out, series_csv(&run.series, start, &prov)?)];
            if let Some(path) = model_out {
                files.push((path, prov.json_document("transition_model", &ModelDoc::new(&run))?));
            }
            write_all_atomic(&files)
        }
        Command::Evaluate { context, truth, pred, manifest, out } => match (manifest, context, truth, pred) {
            (Some(m), ..) => {
                let jobs = read_eval_manifest(&m)?;
                let (rows, agg) = evaluate_batch(&jobs, &cfg, &cli.global.pool()?)?;
                let mut text = String::new();
                for r in &rows {
                    text.push_str(&prov.jsonl_line("evaluation", r)?);
                }
                text.push_str(&prov.jsonl_line("evaluation_aggregate", &agg)?);
                write_atomic(&out, text.into_bytes())?;
                if agg.n_ok == 0 {
                    return Err(CliError::Numeric(format!("all {} evaluations failed", rows.len())));
                }
                Ok(())
            }
            (None, Some(c), Some(t), Some(p)) => {
                let report = evaluate_files(&c, &t, &p, &cfg)?;
                write_atomic(&out, prov.json_document("evaluation", &report)?)
            }
            _ => Err(CliError::input("evaluate needs --manifest or all of --context, --truth, --pred")),
        },
        Command::Pipeline(PipelineCommand::Balance { profiles, out_dir, curate: do_curate }) => {
            let vectors = metric_vectors(&read_profiles(&profiles)?);
            let clustering = cluster(&vectors, &cfg)?;
            let labels = label_rows(&vectors, &clustering);
            let summary = score_labels(&labels, None, &cfg)?;
            let mut files = vec![
                (
                    out_in(&out_dir, "clustering.json"),
                    prov.json_document("regime_clustering", &ClusteringDoc::new(&clustering))?,
                ),
                (out_in(&out_dir, "labels.csv"), labels_csv(&labels, &prov)?),
                (out_in(&out_dir, "balance.json"), prov.json_document("balance_report", &summary)?),
            ];
            if do_curate {
                let c = curate(&labels, &cfg)?;
                files.push((out_in(&out_dir, "curated.csv"), selected_csv(&c, &prov)?));
                files.push((out_in(&out_dir, "trajectory.csv"), trajectory_csv(&c, &prov)?));
                files.push((out_in(&out_dir, "curation.json"), prov.json_document("curation", &c.summary)?));
            }
            write_all_atomic(&files)
        }
        Command::Pipeline(PipelineCommand::Forecast { context, truth, actions, out_dir }) => {
            let ctx = load_series(&context)?;
            let t = load_series(&truth)?;
            let acts = actions.as_deref().map(load_series).transpose()?;
            let (run, cmp) = forecast_and_compare(&ctx, &t, acts.as_ref(), &cfg)?;
            let start = ctx.len() as f64 * ctx.dt();
            write_all_atomic(&[
                (out_in(&out_dir, "forecast.csv"), series_csv(&run.series, start, &prov)?),
                (out_in(&out_dir, "model.json"), prov.json_document("transition_model", &ModelDoc::new(&run))?),
                (out_in(&out_dir, "evaluation.json"), prov.json_document("forecast_comparison", &cmp)?),
            ])
        }
    }
}
