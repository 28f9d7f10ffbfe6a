//! `profile`: chaos metrics for every observation channel of every series.

use std::path::Path;

use chaosforge::chaos::{chaos_profile, ChaosProfile};
use chaosforge::clustering::MetricVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{sig9, Provenance};
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{load_series, SeriesEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One JSONL row per (series, channel). Metrics are null on failed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub series_id: String,
    pub source_id: String,
    pub channel: String,
    pub status: RowStatus,
    pub dfa: Option<f64>,
    pub lyapunov: Option<f64>,
    pub pe_h0: Option<f64>,
    pub pe_h1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProfileRow {
    fn new(entry: &SeriesEntry, channel: &str, result: chaosforge::Result<ChaosProfile>) -> Self {
        let (status, m, error) = match result {
            Ok(p) => (RowStatus::Ok, Some(p.as_array().map(sig9)), None),
            Err(e) => (RowStatus::Failed, None, Some(e.to_string())),
        };
        Self {
            series_id: entry.sample_id.clone(),
            source_id: entry.source_id.clone(),
            channel: channel.to_string(),
            status,
            dfa: m.map(|m| m[0]),
            lyapunov: m.map(|m| m[1]),
            pe_h0: m.map(|m| m[2]),
            pe_h1: m.map(|m| m[3]),
            error,
        }
    }

    pub fn profile(&self) -> Option<ChaosProfile> {
        Some(ChaosProfile { dfa: self.dfa?, lyapunov: self.lyapunov?, pe_h0: self.pe_h0?, pe_h1: self.pe_h1? })
    }
}

/// Profile rows in manifest order, then channel order. Any unreadable
/// series aborts the run (the first one in manifest order is reported).
pub fn profile_rows(entries: &[SeriesEntry], pool: &rayon::ThreadPool) -> CliResult<Vec<ProfileRow>> {
    let loaded: Vec<CliResult<_>> = pool.install(|| entries.par_iter().map(|e| load_series(&e.path)).collect());
    let series = loaded.into_iter().collect::<CliResult<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> =
        series.iter().enumerate().flat_map(|(i, s)| s.observation_indices().into_iter().map(move |c| (i, c))).collect();
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, c)| ProfileRow::new(&entries[i], &series[i].names()[c], chaos_profile(series[i].channel(c))))
            .collect()
    }))
}

pub fn render_rows(rows: &[ProfileRow], prov: &Provenance) -> CliResult<Vec<u8>> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&prov.jsonl_line("chaos_profile", r)?);
    }
    Ok(out.into_bytes())
}

/// Error for a run whose every row failed; `None` when something worked.
pub fn all_failed(rows: &[ProfileRow]) -> Option<CliError> {
    if rows.is_empty() {
        return Some(CliError::input("no observation channels to profile"));
    }
    let failed = rows.iter().filter(|r| r.status == RowStatus::Failed).count();
    (failed == rows.len()).then(|| CliError::Numeric(format!("all {failed} profile rows failed")))
}

pub fn read_profiles(path: &Path) -> CliResult<Vec<ProfileRow>> {
    let text = std::fs::read_to_string(path).context(path.display().to_string())?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(line).context(format!("{} line {}", path.display(), i + 1))?);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no profile rows", path.display())));
    }
    Ok(rows)
}

/// Sample-level vectors: successful channels averaged per series, series
/// in first-seen order. Series without a successful channel are dropped.
pub fn metric_vectors(rows: &[ProfileRow]) -> Vec<MetricVector> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: Vec<Vec<ChaosProfile>> = Vec::new();
    for r in rows {
        let idx = match order.iter().position(|(id, _)| *id == r.series_id) {
            Some(i) => i,
            None => {
                order.push((&r.series_id, &r.source_id));
                groups.push(Vec::new());
                order.len() - 1
            }
        };
        if let Some(p) = r.profile() {
            groups[idx].push(p);
        }
    }
    order.iter().zip(&groups).filter_map(|((id, src), g)| MetricVector::from_channels(id, src, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, ch: &str, dfa: Option<f64>) -> ProfileRow {
        ProfileRow {
            series_id: id.into(),
            source_id: "s".into(),
            channel: ch.into(),
            status: if dfa.is_some() { RowStatus::Ok } else { RowStatus::Failed },
            dfa,
            lyapunov: dfa,
            pe_h0: dfa,
            pe_h1: dfa,
            error: None,
        }
    }

    #[test]
    fn vectors_average_ok_channels_in_first_seen_order() {
        let rows =
            vec![row("b", "x", Some(1.0)), row("a", "x", Some(2.0)), row("b", "y", Some(3.0)), row("c", "x", None)];
        let v = metric_vectors(&rows);
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].sample_id.as_str(), v[0].dfa), ("b", 2.0));
        assert_eq!((v[1].sample_id.as_str(), v[1].dfa), ("a", 2.0));
    }

    #[test]
    fn failure_detection() {
        assert!(all_failed(&[row("a", "x", None)]).is_some_and(|e| e.exit_code() == 3));
        assert!(all_failed(&[row("a", "x", None), row("a", "y", Some(1.0))]).is_none());
    }
}
