//! Six-image lineups: construction, probe ranking and corpus-level accuracy.

mod compare;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusHandle, ImageId};
use crate::error::{Error, Result};
use crate::rng;
use crate::simindex::{self, ExclusionRule, Query, SearchIndex, DEFAULT_BATCH_SIZE};

pub use compare::{
    compare_variants, compare_variants_with_failures, summarize_outcomes, ComparisonStatus, HistogramBin, OutcomeTable,
    RankChangeEntry, RankChangeReport, MAX_RANK_CHANGE,
};

pub const FILLER_COUNT: usize = 5;
pub const LINEUP_SIZE: usize = FILLER_COUNT + 1;
pub const NO_ELIGIBLE_SOURCES: &str = "no eligible sources";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineup {
    pub source: ImageId,
    pub fillers: Vec<ImageId>,
    pub probe: ImageId,
    pub seed: u64,
}

impl Lineup {
    /// Fillers followed by the probe.
    pub fn members(&self) -> impl Iterator<Item = &ImageId> {
        self.fillers.iter().chain(std::iter::once(&self.probe))
    }

    /// Checks every structural invariant against the corpus labels.
    pub fn validate(&self, corpus: &CorpusHandle) -> Result<()> {
        let identity = |id: &ImageId| {
            corpus
                .get(id)
                .map(|r| r.identity_id.as_str())
                .ok_or_else(|| Error::UnknownId(id.to_string()))
        };
        let source_identity = identity(&self.source)?;
        let bad = |msg: String| Err(Error::InvalidArgument(format!("lineup {}: {msg}", self.source)));
        if self.fillers.len() != FILLER_COUNT {
            return bad(format!("{} fillers", self.fillers.len()));
        }
        if self.probe == self.source {
            return bad("probe equals source".into());
        }
        if identity(&self.probe)? != source_identity {
            return bad("probe identity differs from source".into());
        }
        let mut seen = HashSet::new();
        for f in &self.fillers {
            if identity(f)? == source_identity {
                return bad(format!("filler {f} shares the source identity"));
            }
            if f == &self.probe || !seen.insert(f) {
                return bad(format!("filler {f} repeated"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineupResult {
    pub lineup: Lineup,
    /// 0-based position of the probe among the six members.
    pub probe_rank: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineupConfig {
    /// Require the five fillers to come from five different identities.
    pub distinct_filler_identities: bool,
    pub batch_size: usize,
}

impl Default for LineupConfig {
    fn default() -> Self {
        LineupConfig {
            distinct_filler_identities: false,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

/// Uniform draw over the other images of the source identity, ordered by id.
pub fn draw_probe(corpus: &CorpusHandle, source: &ImageId, seed: u64) -> Result<ImageId> {
    let rec = corpus.get(source).ok_or_else(|| Error::UnknownId(source.to_string()))?;
    let mut others: Vec<&ImageId> = corpus
        .identity_images(&rec.identity_id)
        .iter()
        .filter(|id| *id != source)
        .collect();
    if others.is_empty() {
        return Err(Error::NoProbe(source.to_string()));
    }
    others.sort();
    Ok(others[rng::keyed_index(seed, source.as_str(), others.len())].clone())
}

fn check_source(index: &SearchIndex, corpus: &CorpusHandle, source: &ImageId, cfg: &LineupConfig) -> Result<usize> {
    let rec = corpus.get(source).ok_or_else(|| Error::UnknownId(source.to_string()))?;
    let row = index
        .row_of(source)
        .ok_or_else(|| Error::UnknownId(source.to_string()))?;
    let own = corpus.identity_images(&rec.identity_id).len();
    if own < 2 {
        return Err(Error::NoProbe(source.to_string()));
    }
    let available = if cfg.distinct_filler_identities {
        corpus.identity_index().len() - 1
    } else {
        corpus.len() - own
    };
    if available < FILLER_COUNT {
        return Err(Error::InsufficientFillers {
            source_id: source.to_string(),
            available,
        });
    }
    Ok(row)
}

/// Builds one lineup: the five most similar images outside the source identity
/// plus a seeded probe draw from the source identity.
pub fn build_lineup(
    index: &SearchIndex,
    corpus: &CorpusHandle,
    source: &ImageId,
    seed: u64,
    cfg: &LineupConfig,
) -> Result<Lineup> {
    let mut built = build_lineups(index, corpus, std::slice::from_ref(source), seed, cfg);
    built.pop().expect("one result per source")
}

/// Batched construction; one result per source, in input order.
pub fn build_lineups(
    index: &SearchIndex,
    corpus: &CorpusHandle,
    sources: &[ImageId],
    seed: u64,
    cfg: &LineupConfig,
) -> Vec<Result<Lineup>> {
    let mut out: Vec<Option<Result<Lineup>>> = (0..sources.len()).map(|_| None).collect();
    let mut pending = Vec::new();
    let mut queries = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        match check_source(index, corpus, src, cfg) {
            Ok(row) => {
                pending.push(i);
                queries.push(index.query_for_row(row));
            }
            Err(e) => out[i] = Some(Err(e)),
        }
    }

    let fillers = if cfg.distinct_filler_identities {
        queries
            .par_iter()
            .map(|q| distinct_fillers(index, q))
            .collect::<Vec<_>>()
    } else {
        match simindex::search_batch(index, &queries, FILLER_COUNT, ExclusionRule::Identity, cfg.batch_size) {
            Ok(results) => results
                .into_iter()
                .map(|r| Ok(r.hits.into_iter().map(|h| h.image_id).collect()))
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                queries
                    .iter()
                    .map(|_| Err(Error::InvalidArgument(msg.clone())))
                    .collect()
            }
        }
    };

    for (slot, fill) in pending.into_iter().zip(fillers) {
        let source = &sources[slot];
        out[slot] = Some(fill.and_then(|fillers| {
            Ok(Lineup {
                source: source.clone(),
                fillers,
                probe: draw_probe(corpus, source, seed)?,
                seed,
            })
        }));
    }
    out.into_iter().map(|r| r.expect("every slot filled")).collect()
}

// Widens k until five distinct filler identities appear in the ranked list.
fn distinct_fillers(index: &SearchIndex, q: &Query) -> Result<Vec<ImageId>> {
    let eligible = (0..index.len())
        .filter(|&r| Some(index.row_identity(r)) != q.identity.as_deref())
        .count();
    let mut k = (FILLER_COUNT * 4).min(eligible);
    loop {
        let res = simindex::brute_force_topk(index, q, k, ExclusionRule::Identity)?;
        let mut seen = HashSet::new();
        let picked: Vec<ImageId> = res
            .hits
            .iter()
            .filter(|h| {
                let row = index.row_of(&h.image_id).expect("hit is indexed");
                seen.insert(index.row_identity(row).to_string())
            })
            .take(FILLER_COUNT)
            .map(|h| h.image_id.clone())
            .collect();
        if picked.len() == FILLER_COUNT {
            return Ok(picked);
        }
        if k == eligible {
            return Err(Error::InsufficientFillers {
                source_id: q.id.to_string(),
                available: picked.len(),
            });
        }
        k = (k * 2).min(eligible);
    }
}

/// Ranks the lineup members against the source. The source vector comes from
/// `source_embeddings`, members from `member_embeddings` (the same corpus for a
/// plain evaluation, the restored corpus for a comparison).
pub fn rank_members(
    lineup: &Lineup,
    source_embeddings: &CorpusHandle,
    member_embeddings: &CorpusHandle,
) -> Result<LineupResult> {
    let unit = |corpus: &CorpusHandle, id: &ImageId| -> Result<simindex::UnitVector> {
        let rec = corpus.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
        simindex::l2_normalize(&rec.vector).map_err(|e| match e {
            Error::ZeroVector(_) => Error::ZeroVector(Some(id.to_string())),
            other => other,
        })
    };
    let source = unit(source_embeddings, &lineup.source)?;
    let mut scored = lineup
        .members()
        .map(|id| {
            let v = unit(member_embeddings, id)?;
            if v.dim() != source.dim() {
                return Err(Error::DimensionMismatch {
                    id: id.to_string(),
                    expected: source.dim(),
                    found: v.dim(),
                });
            }
            Ok((simindex::dot(source.as_slice(), v.as_slice()), id))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let probe_rank = scored
        .iter()
        .position(|(_, id)| **id == lineup.probe)
        .expect("probe is a member");
    Ok(LineupResult {
        lineup: lineup.clone(),
        probe_rank,
        success: probe_rank == 0,
    })
}

pub fn rank_probe(lineup: &Lineup, embeddings: &CorpusHandle) -> Result<LineupResult> {
    rank_members(lineup, embeddings, embeddings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSource {
    pub source: ImageId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub evaluated: usize,
    pub successes: usize,
    pub skipped: Vec<SkippedSource>,
    /// Sorted by source id.
    pub results: Vec<LineupResult>,
}

/// Builds and scores a lineup for every eligible source. Ineligible sources are
/// skipped and listed; an empty eligible set is an error.
pub fn evaluate_corpus(
    corpus: &CorpusHandle,
    index: &SearchIndex,
    sources: &[ImageId],
    seed: u64,
    cfg: &LineupConfig,
) -> Result<AccuracyReport> {
    let mut sources: Vec<ImageId> = sources.to_vec();
    sources.sort();
    sources.dedup();
    let built = build_lineups(index, corpus, &sources, seed, cfg);
    let mut skipped = Vec::new();
    let mut lineups = Vec::new();
    for (src, b) in sources.iter().zip(built) {
        match b {
            Ok(l) => lineups.push(l),
            Err(e) => skipped.push(SkippedSource {
                source: src.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if lineups.is_empty() {
        return Err(Error::Empty(NO_ELIGIBLE_SOURCES.into()));
    }
    let results = lineups
        .par_iter()
        .map(|l| rank_probe(l, corpus))
        .collect::<Result<Vec<_>>>()?;
    let successes = results.iter().filter(|r| r.success).count();
    Ok(AccuracyReport {
        accuracy: successes as f64 / results.len() as f64,
        evaluated: results.len(),
        successes,
        skipped,
        results,
    })
}
