//! Report rendering. Everything is rendered to strings first and written in a
//! fixed order so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::ImageId;
use crate::failpred::Metrics;
use crate::imgfeat::{feature_names, FeatureVector};
use crate::lineup::{summarize_outcomes, LineupResult, OutcomeTable, RankChangeEntry, RankChangeReport};

/// Rank-change comparison split by the lineup's state before restoration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rank_changes: RankChangeReport,
    pub overall: OutcomeTable,
    /// Lineups that failed (probe rank > 0) before restoration.
    pub failed_before: OutcomeTable,
    /// Lineups that succeeded before restoration.
    pub success_before: OutcomeTable,
}

impl ComparisonReport {
    pub fn from_report(rank_changes: RankChangeReport) -> Self {
        let subset = |keep: fn(&RankChangeEntry) -> bool| {
            let entries = rank_changes.per_lineup.iter().filter(|e| keep(e)).cloned().collect();
            summarize_outcomes(&RankChangeReport::from_entries(entries))
        };
        ComparisonReport {
            overall: summarize_outcomes(&rank_changes),
            failed_before: subset(|e| e.rank_before > 0),
            success_before: subset(|e| e.rank_before == 0),
            rank_changes,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn lineups_jsonl(results: &[LineupResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(&r.lineup).expect("lineup serializes"));
        out.push('\n');
    }
    out
}

pub fn results_csv(results: &[LineupResult]) -> String {
    let mut out = String::from("source_id,probe_id,probe_rank,success\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.lineup.source, r.lineup.probe, r.probe_rank, r.success as u8
        );
    }
    out
}

/// Rank-change histogram: `change,count,percentage` with one decimal.
pub fn rank_changes_csv(report: &RankChangeReport) -> String {
    let mut out = String::from("change,count,percentage\n");
    for b in &report.histogram {
        let _ = writeln!(out, "{},{},{:.1}", b.change, b.count, b.percentage);
    }
    out
}

/// Outcome categories in table layout, e.g. `Rank Improvements,877,27.6`.
pub fn outcome_csv(table: &OutcomeTable) -> String {
    let mut out = String::from("category,count,percentage\n");
    for (name, c) in [
        ("Rank Improvements", &table.improvements),
        ("Rank Degradations", &table.degradations),
        ("Rank Unchanged", &table.unchanged),
        ("Success Conversions (Rank 0)", &table.success_conversions),
        ("Failed Restoration", &table.failed_restorations),
    ] {
        let _ = writeln!(out, "{name},{},{:.1}", c.count, c.percentage);
    }
    let total_pct = if table.total == 0 { 0.0 } else { 100.0 };
    let _ = writeln!(out, "Total Analyzed,{},{total_pct:.1}", table.total);
    out
}

/// `image_id,label,<feature names>`; label 1 marks a lineup failure.
pub fn features_csv(vectors: &[FeatureVector], labels: &[bool], embedding_dim: usize) -> String {
    let mut out = String::from("image_id,label");
    for name in feature_names(embedding_dim) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (v, &l) in vectors.iter().zip(labels) {
        let _ = write!(out, "{},{}", v.image_id, l as u8);
        for x in &v.values {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// Parses a table written by [`features_csv`].
pub fn parse_features_csv(path: &Path) -> Result<(Vec<FeatureVector>, Vec<bool>), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let columns = match lines.next() {
        Some((_, h)) if h.starts_with("image_id,label") => h.split(',').count(),
        _ => return Err(crate::Error::malformed(path, 1, "missing image_id,label header").into()),
    };
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| PipelineError::from(crate::Error::malformed(path, i + 1, msg));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(bad(format!("{} fields, header has {columns}", fields.len())));
        }
        let id = ImageId::new(fields[0]).map_err(|e| bad(e.to_string()))?;
        let label = match fields[1] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label {other:?} is not 0 or 1"))),
        };
        let values = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        vectors.push(FeatureVector { image_id: id, values });
        labels.push(label);
    }
    Ok((vectors, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub source: ImageId,
    pub probability: f64,
    pub predicted_failure: bool,
    pub actual_failure: bool,
}

pub fn predictions_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("source_id,probability,predicted_failure,actual_failure\n");
    for p in predictions {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.source, p.probability, p.predicted_failure as u8, p.actual_failure as u8
        );
    }
    out
}

/// Precision/recall of the predictions against observed lineup outcomes.
pub fn prediction_metrics(predictions: &[Prediction]) -> Metrics {
    let predicted: Vec<bool> = predictions.iter().map(|p| p.predicted_failure).collect();
    let actual: Vec<bool> = predictions.iter().map(|p| p.actual_failure).collect();
    crate::failpred::Confusion::from_predictions(&predicted, &actual).metrics()
}

/// Files staged in memory and committed together. If any write fails, the
/// files already written by this commit are removed.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            if let Err(e) = fs::write(&path, contents) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(crate::Error::io(&path, e).into());
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// Rank-change histogram, the two outcome tables and full per-lineup JSON.
pub fn emit_reports(report: &ComparisonReport, out: &mut OutputSet) {
    out.add("rank_changes.csv", rank_changes_csv(&report.rank_changes));
    out.add("outcomes_failed_before.csv", outcome_csv(&report.failed_before));
    out.add("outcomes_success_before.csv", outcome_csv(&report.success_before));
    out.add("outcomes_overall.csv", outcome_csv(&report.overall));
    out.add("comparison.json", to_json(report));
}
