//! `cluster`, `balance` and `curate`: regime labels and their balance.

use std::collections::BTreeMap;
use std::path::Path;

use chaosforge::balance::{
    balance_report, curate_subset, regime_counts, BalanceMetric, BalanceReport, CurationResult, CurationSample,
};
use chaosforge::clustering::{cluster_regimes, MetricVector, RegimeClustering};
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::manifest::csv_reader;

/// One labelled sample, the row format of the labels CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub sample_id: String,
    #[serde(default = "default_source")]
    pub source_id: String,
    pub regime_label: String,
}

fn default_source() -> String {
    "default".into()
}

pub const LABEL_HEADER: [&str; 3] = ["sample_id", "source_id", "regime_label"];

pub fn cluster(vectors: &[MetricVector], cfg: &RunConfig) -> CliResult<RegimeClustering> {
    if vectors.is_empty() {
        return Err(CliError::Numeric("no series has a usable chaos profile".into()));
    }
    cluster_regimes(vectors, cfg.kmeans_kmax, cfg.k_star_factor, cfg.seed).context("clustering")
}

pub fn label_rows(vectors: &[MetricVector], clustering: &RegimeClustering) -> Vec<LabelRow> {
    vectors
        .iter()
        .zip(clustering.sample_labels())
        .map(|(v, l)| LabelRow {
            sample_id: v.sample_id.clone(),
            source_id: v.source_id.clone(),
            regime_label: l.to_string(),
        })
        .collect()
}

fn label_table(rows: &[LabelRow]) -> Vec<Vec<String>> {
    rows.iter().map(|r| vec![r.sample_id.clone(), r.source_id.clone(), r.regime_label.clone()]).collect()
}

pub fn labels_csv(rows: &[LabelRow], prov: &Provenance) -> CliResult<Vec<u8>> {
    prov.csv_document(&LABEL_HEADER, &label_table(rows))
}

/// Clustering artifact: centroids in original units plus the merged
/// regime histogram.
#[derive(Debug, Serialize)]
pub struct ClusteringDoc<'a> {
    pub k_optimal: usize,
    pub k_star: usize,
    pub inertias: &'a [f64],
    pub centroids: &'a [[f64; 4]],
    pub labels: &'a [String],
    pub regimes: &'a BTreeMap<String, usize>,
    pub feature_means: &'a [f64],
    pub feature_stds: &'a [f64],
    pub n_samples: usize,
}

impl<'a> ClusteringDoc<'a> {
    pub fn new(c: &'a RegimeClustering) -> Self {
        Self {
            k_optimal: c.k_optimal,
            k_star: c.k_star,
            inertias: &c.inertias,
            centroids: &c.centroids,
            labels: &c.labels,
            regimes: &c.regimes,
            feature_means: &c.feature_means,
            feature_stds: &c.feature_stds,
            n_samples: c.assignments.len(),
        }
    }
}

pub fn read_labels(path: &Path) -> CliResult<Vec<LabelRow>> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for (i, r) in rdr.deserialize::<LabelRow>().enumerate() {
        rows.push(r.context(format!("{} row {}", path.display(), i + 2))?);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no labelled samples", path.display())));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeCount {
    pub regime_label: String,
    pub count: usize,
}

/// Balance of a labelled set.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceSummary {
    pub metric: BalanceMetric,
    pub score: f64,
    pub n_samples: usize,
    pub regimes: Vec<RegimeCount>,
    pub report: BalanceReport,
}

fn regime_histogram(rows: &[LabelRow]) -> Vec<RegimeCount> {
    let mut out: Vec<RegimeCount> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|c| c.regime_label == r.regime_label) {
            Some(c) => c.count += 1,
            None => out.push(RegimeCount { regime_label: r.regime_label.clone(), count: 1 }),
        }
    }
    out
}

/// `reference` defaults to the number of distinct regimes present.
pub fn score_labels(rows: &[LabelRow], reference: Option<usize>, cfg: &RunConfig) -> CliResult<BalanceSummary> {
    let counts = regime_counts(rows.iter().map(|r| r.regime_label.as_str()));
    let reference = reference.unwrap_or(counts.len());
    let report = balance_report(&counts, reference, cfg.balance_params()).context("balance")?;
    Ok(BalanceSummary {
        metric: cfg.balance_metric,
        score: report.score(cfg.balance_metric),
        n_samples: rows.len(),
        regimes: regime_histogram(rows),
        report,
    })
}

/// Curation artifact summary; the selected ids and the score trajectory go
/// to their own CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct CurationSummary {
    pub metric: BalanceMetric,
    pub fraction: f64,
    pub target_size: usize,
    pub selected_size: usize,
    pub evaluations: usize,
    pub accepted_per_source: BTreeMap<String, usize>,
    pub curated_score: f64,
    pub concatenated_score: f64,
    pub curated: BalanceReport,
    pub concatenated: BalanceReport,
}

pub struct Curated {
    pub result: CurationResult,
    pub selected: Vec<LabelRow>,
    pub summary: CurationSummary,
}

pub fn curate(rows: &[LabelRow], cfg: &RunConfig) -> CliResult<Curated> {
    let samples: Vec<CurationSample> = rows
        .iter()
        .map(|r| CurationSample {
            id: r.sample_id.clone(),
            source: r.source_id.clone(),
            regime: r.regime_label.clone(),
        })
        .collect();
    let result = curate_subset(&samples, cfg.balance_metric, cfg.balance_params(), cfg.curation_fraction, cfg.seed)
        .context("curation")?;
    let by_id: BTreeMap<&str, &LabelRow> = rows.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let selected: Vec<LabelRow> = result.selected.iter().map(|id| by_id[id.as_str()].clone()).collect();
    let concatenated = score_labels(rows, None, cfg)?.report;
    let summary = CurationSummary {
        metric: cfg.balance_metric,
        fraction: cfg.curation_fraction,
        target_size: result.target_size,
        selected_size: selected.len(),
        evaluations: result.evaluations,
        accepted_per_source: result.accepted_per_source.clone(),
        curated_score: result.report.score(cfg.balance_metric),
        concatenated_score: concatenated.score(cfg.balance_metric),
        curated: result.report.clone(),
        concatenated,
    };
    Ok(Curated { result, selected, summary })
}

pub fn selected_csv(c: &Curated, prov: &Provenance) -> CliResult<Vec<u8>> {
    labels_csv(&c.selected, prov)
}

pub fn trajectory_csv(c: &Curated, prov: &Provenance) -> CliResult<Vec<u8>> {
    let rows: Vec<Vec<String>> =
        c.result.trajectory.iter().enumerate().map(|(i, s)| vec![(i + 1).to_string(), s.to_string()]).collect();
    prov.csv_document(&["evaluation", "score"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(entries: &[(&str, &str)]) -> Vec<LabelRow> {
        entries
            .iter()
            .enumerate()
            .map(|(i, (src, reg))| LabelRow {
                sample_id: format!("s{i}"),
                source_id: src.to_string(),
                regime_label: reg.to_string(),
            })
            .collect()
    }

    #[test]
    fn single_regime_scores_below_half_against_richer_reference() {
        let r = rows(&[("a", "R"), ("a", "R"), ("b", "R")]);
        let s = score_labels(&r, Some(2), &RunConfig::default()).unwrap();
        assert!(s.score < 0.5, "{}", s.score);
        assert_eq!(s.regimes.len(), 1);
    }

    #[test]
    fn two_source_curation_beats_concatenation() {
        let mut spec = vec![("big", "A"); 12];
        spec.extend([("big", "B"), ("small", "B"), ("small", "C"), ("small", "C")]);
        let c = curate(&rows(&spec), &RunConfig::default()).unwrap();
        assert!(c.summary.curated_score > c.summary.concatenated_score);
        assert!(c.summary.evaluations <= spec.len());
        assert_eq!(c.selected.len(), c.summary.selected_size);
    }

    #[test]
    fn labels_round_trip_through_csv() {
        let r = rows(&[("a", "X|Y"), ("b", "Z")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        std::fs::write(&path, labels_csv(&r, &Provenance::of(&RunConfig::default())).unwrap()).unwrap();
        assert_eq!(read_labels(&path).unwrap(), r);
    }
}
