use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{rank_members, LineupResult};
use crate::corpus::{CorpusHandle, ImageId};

/// Ranks run 0..=5, so a change is bounded by 5 in either direction.
pub const MAX_RANK_CHANGE: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComparisonStatus {
    /// change = rank_before - rank_after; positive is an improvement.
    Compared {
        rank_after: usize,
        change: i32,
    },
    FailedRestoration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankChangeEntry {
    pub source: ImageId,
    pub rank_before: usize,
    #[serde(flatten)]
    pub status: ComparisonStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub change: i32,
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankChangeReport {
    pub per_lineup: Vec<RankChangeEntry>,
    /// One bin per change in -5..=5; percentages are over compared lineups.
    pub histogram: Vec<HistogramBin>,
}

impl RankChangeReport {
    pub fn from_entries(per_lineup: Vec<RankChangeEntry>) -> Self {
        let mut counts = [0usize; (2 * MAX_RANK_CHANGE + 1) as usize];
        for e in &per_lineup {
            if let ComparisonStatus::Compared { change, .. } = e.status {
                counts[(change + MAX_RANK_CHANGE) as usize] += 1;
            }
        }
        let compared: usize = counts.iter().sum();
        let histogram = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBin {
                change: i as i32 - MAX_RANK_CHANGE,
                count,
                percentage: percent(count, compared),
            })
            .collect();
        RankChangeReport { per_lineup, histogram }
    }

    pub fn compared(&self) -> usize {
        self.histogram.iter().map(|b| b.count).sum()
    }
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Re-ranks each lineup with fixed membership: the source vector always comes
/// from `original`, member vectors from `restored`. A member missing from
/// `restored` marks that lineup as a failed restoration.
pub fn compare_variants(
    results_before: &[LineupResult],
    original: &CorpusHandle,
    restored: &CorpusHandle,
) -> RankChangeReport {
    compare_variants_with_failures(results_before, original, restored, &HashSet::new())
}

/// As [`compare_variants`], additionally treating lineups whose source is in
/// `failed` (e.g. a restoration hook error) as failed restorations.
pub fn compare_variants_with_failures(
    results_before: &[LineupResult],
    original: &CorpusHandle,
    restored: &CorpusHandle,
    failed: &HashSet<ImageId>,
) -> RankChangeReport {
    let entries = results_before
        .iter()
        .map(|before| {
            let status = if failed.contains(&before.lineup.source) {
                ComparisonStatus::FailedRestoration
            } else {
                match rank_members(&before.lineup, original, restored) {
                    Ok(after) => ComparisonStatus::Compared {
                        rank_after: after.probe_rank,
                        change: before.probe_rank as i32 - after.probe_rank as i32,
                    },
                    Err(_) => ComparisonStatus::FailedRestoration,
                }
            };
            RankChangeEntry {
                source: before.lineup.source.clone(),
                rank_before: before.probe_rank,
                status,
            }
        })
        .collect();
    RankChangeReport::from_entries(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub count: usize,
    pub percentage: f64,
}

/// Restoration outcome accounting. Percentages are over `total`, which counts
/// failed restorations alongside compared lineups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub improvements: Category,
    pub degradations: Category,
    pub unchanged: Category,
    pub success_conversions: Category,
    pub failed_restorations: Category,
    pub total: usize,
    /// Mean positive change over improved lineups (0 when none).
    pub mean_improvement: f64,
    /// Mean magnitude of change over degraded lineups (0 when none).
    pub mean_degradation: f64,
    pub mean_rank_before: f64,
    pub mean_rank_after: f64,
}

impl OutcomeTable {
    pub fn from_counts(
        improvements: usize,
        degradations: usize,
        unchanged: usize,
        success_conversions: usize,
        failed_restorations: usize,
    ) -> Self {
        let total = improvements + degradations + unchanged + failed_restorations;
        let cat = |count| Category {
            count,
            percentage: percent(count, total),
        };
        OutcomeTable {
            improvements: cat(improvements),
            degradations: cat(degradations),
            unchanged: cat(unchanged),
            success_conversions: cat(success_conversions),
            failed_restorations: cat(failed_restorations),
            total,
            mean_improvement: 0.0,
            mean_degradation: 0.0,
            mean_rank_before: 0.0,
            mean_rank_after: 0.0,
        }
    }
}

pub fn summarize_outcomes(report: &RankChangeReport) -> OutcomeTable {
    let (mut imp, mut deg, mut same, mut conv, mut failed) = (0, 0, 0, 0, 0);
    let (mut imp_sum, mut deg_sum) = (0i64, 0i64);
    let (mut before_sum, mut after_sum) = (0usize, 0usize);
    for e in &report.per_lineup {
        match e.status {
            ComparisonStatus::FailedRestoration => failed += 1,
            ComparisonStatus::Compared { rank_after, change } => {
                before_sum += e.rank_before;
                after_sum += rank_after;
                match change.signum() {
                    1 => {
                        imp += 1;
                        imp_sum += change as i64;
                    }
                    -1 => {
                        deg += 1;
                        deg_sum -= change as i64;
                    }
                    _ => same += 1,
                }
                if e.rank_before > 0 && rank_after == 0 {
                    conv += 1;
                }
            }
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { sum / n as f64 };
    let compared = imp + deg + same;
    OutcomeTable {
        mean_improvement: mean(imp_sum as f64, imp),
        mean_degradation: mean(deg_sum as f64, deg),
        mean_rank_before: mean(before_sum as f64, compared),
        mean_rank_after: mean(after_sum as f64, compared),
        ..OutcomeTable::from_counts(imp, deg, same, conv, failed)
    }
}
