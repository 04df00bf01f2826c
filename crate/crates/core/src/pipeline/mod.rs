//! End-to-end runs over a configuration: evaluation, feature extraction,
//! training, prediction, restoration and comparison, with report emission.
//!
//! Every command stages its outputs in memory and writes them at the end, so a
//! failed run leaves no partial report set behind.

mod config;
mod hook;
pub mod reports;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    curate, ingest_embeddings, ingest_landmarks, load_grayscale_image, write_binary, CorpusHandle, CurationReport,
    ImageId, LandmarkTable,
};
use crate::error::Error;
use crate::failpred::{
    cross_validate, evaluate_classifier, stratified_split, train_ensemble, EnsembleConfig, EnsembleModel,
    LabeledDataset, Metrics, StabilityReport, TrainingReport,
};
use crate::imgfeat::{assemble_feature_vector, FeatureVector};
use crate::lineup::{
    build_lineups, compare_variants_with_failures, evaluate_corpus, AccuracyReport, LineupConfig, LineupResult,
    SkippedSource,
};
use crate::simindex::SearchIndex;

pub use config::{
    apply_override, FeatureSettings, LineupSettings, Paths, PipelineConfig, RestorationSettings, TrainingSettings,
};
pub use hook::{HookRecord, HookStatus, RestorationHook};
pub use reports::{
    emit_reports, features_csv, lineups_jsonl, outcome_csv, parse_features_csv, prediction_metrics, predictions_csv,
    rank_changes_csv, results_csv, to_json, ComparisonReport, OutputSet, Prediction,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
    #[error("{failed} of {invoked} restoration hook runs failed (limit {limit})")]
    HookFailures { failed: usize, invoked: usize, limit: f64 },
}

impl PipelineError {
    /// Process exit code: 1 usage/config, 2 data, 3 too many hook failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::HookFailures { .. } => 3,
        }
    }
}

pub type PipelineResult<T> = std::result::Result<T, PipelineError>;

pub use crate::lineup::NO_ELIGIBLE_SOURCES;

fn load_corpus(cfg: &PipelineConfig) -> PipelineResult<CorpusHandle> {
    let path = cfg.require(&cfg.paths.embeddings, "paths.embeddings")?;
    Ok(ingest_embeddings(path, cfg.embedding_dim)?)
}

fn load_landmarks(cfg: &PipelineConfig) -> PipelineResult<LandmarkTable> {
    Ok(match &cfg.paths.landmarks {
        Some(p) => ingest_landmarks(p)?,
        None => LandmarkTable::default(),
    })
}

fn lineup_config(cfg: &PipelineConfig) -> LineupConfig {
    LineupConfig {
        distinct_filler_identities: cfg.lineup.distinct_filler_identities,
        batch_size: cfg.lineup.batch_size,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub status: String,
    /// None when no lineup could be formed.
    pub accuracy: Option<f64>,
    pub evaluated: usize,
    pub successes: usize,
    pub seed: u64,
    pub skipped: Vec<SkippedSource>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: AccuracySummary,
    pub results: Vec<LineupResult>,
}

/// Builds and ranks a lineup for every image of the corpus.
pub fn evaluate(cfg: &PipelineConfig, corpus: &CorpusHandle) -> PipelineResult<Evaluation> {
    let index = SearchIndex::build(corpus)?;
    let sources: Vec<ImageId> = corpus.records().iter().map(|r| r.image_id.clone()).collect();
    let lcfg = lineup_config(cfg);
    match evaluate_corpus(corpus, &index, &sources, cfg.lineup.seed, &lcfg) {
        Ok(AccuracyReport {
            accuracy,
            evaluated,
            successes,
            skipped,
            results,
        }) => Ok(Evaluation {
            summary: AccuracySummary {
                status: "ok".into(),
                accuracy: Some(accuracy),
                evaluated,
                successes,
                seed: cfg.lineup.seed,
                skipped,
            },
            results,
        }),
        Err(Error::Empty(msg)) if msg == crate::lineup::NO_ELIGIBLE_SOURCES => {
            let mut sorted = sources.clone();
            sorted.sort();
            let skipped = sorted
                .iter()
                .zip(build_lineups(&index, corpus, &sorted, cfg.lineup.seed, &lcfg))
                .filter_map(|(s, r)| {
                    r.err().map(|e| SkippedSource {
                        source: s.clone(),
                        reason: e.to_string(),
                    })
                })
                .collect();
            Ok(Evaluation {
                summary: AccuracySummary {
                    status: NO_ELIGIBLE_SOURCES.into(),
                    accuracy: None,
                    evaluated: 0,
                    successes: 0,
                    seed: cfg.lineup.seed,
                    skipped,
                },
                results: Vec::new(),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Writes the lineup manifest, per-lineup results and accuracy summary.
pub fn run_evaluate(cfg: &PipelineConfig) -> PipelineResult<Evaluation> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let mut out = OutputSet::new();
    out.add("lineups.jsonl", lineups_jsonl(&eval.results));
    out.add("results.csv", results_csv(&eval.results));
    out.add("accuracy.json", to_json(&eval.summary));
    out.commit(out_dir)?;
    Ok(eval)
}

/// Lineup manifest only.
pub fn run_lineups(cfg: &PipelineConfig) -> PipelineResult<Evaluation> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let mut out = OutputSet::new();
    out.add("lineups.jsonl", lineups_jsonl(&eval.results));
    out.commit(out_dir)?;
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub dim: usize,
    pub count: usize,
    pub identities: usize,
    pub multi_image_identities: usize,
}

/// Validates the embeddings and writes a binary copy plus a summary.
pub fn run_ingest(cfg: &PipelineConfig) -> PipelineResult<IngestSummary> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let summary = IngestSummary {
        dim: corpus.dim(),
        count: corpus.len(),
        identities: corpus.identity_index().len(),
        multi_image_identities: corpus.identity_index().values().filter(|v| v.len() > 1).count(),
    };
    let mut out = OutputSet::new();
    out.add("ingest.json", to_json(&summary));
    out.commit(out_dir)?;
    write_binary(out_dir.join("embeddings.lnup"), corpus.dim(), false, corpus.records())?;
    Ok(summary)
}

/// Builds the normalized index and persists it.
pub fn run_index(cfg: &PipelineConfig) -> PipelineResult<usize> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let index = SearchIndex::build(&corpus)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    index.save(out_dir.join("index.lnup"))?;
    Ok(index.len())
}

/// Applies the curation rules and writes the retained embeddings.
pub fn run_curate(cfg: &PipelineConfig) -> PipelineResult<CurationReport> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let images = cfg.require(&cfg.paths.images, "paths.images")?;
    let landmarks = cfg.require(&cfg.paths.landmarks, "paths.landmarks")?;
    let landmarks = ingest_landmarks(landmarks)?;
    let (report, kept) = curate(&corpus, &landmarks, images, &cfg.curation);
    let mut out = OutputSet::new();
    out.add("curation.json", to_json(&report));
    let mut jsonl = String::new();
    for r in kept.records() {
        jsonl.push_str(
            &serde_json::to_string(&serde_json::json!({
                "image_id": r.image_id,
                "identity_id": r.identity_id,
                "vector": r.vector,
            }))
            .expect("record serializes"),
        );
        jsonl.push('\n');
    }
    out.add("curated.jsonl", jsonl);
    out.commit(out_dir)?;
    Ok(report)
}

/// One feature vector per lineup, keyed by the source id. Computed from the
/// source image unless `features.from_probe` is set.
pub fn lineup_features(cfg: &PipelineConfig, results: &[LineupResult]) -> PipelineResult<(Vec<FeatureVector>, usize)> {
    let images = cfg.require(&cfg.paths.images, "paths.images")?;
    let fe_path = match &cfg.paths.feature_embeddings {
        Some(p) => p.as_path(),
        None => cfg.require(&cfg.paths.embeddings, "paths.embeddings")?,
    };
    let embeddings = ingest_embeddings(fe_path, None)?;
    let landmarks = load_landmarks(cfg)?;
    let dim = embeddings.dim();
    let vectors = results
        .par_iter()
        .map(|r| {
            let id = if cfg.features.from_probe {
                &r.lineup.probe
            } else {
                &r.lineup.source
            };
            let rec = embeddings
                .get(id)
                .ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
            let img = load_grayscale_image(images.join(format!("{id}.pgm")))?;
            let mut v = assemble_feature_vector(rec, dim, &img, landmarks.get(id))?;
            v.image_id = r.lineup.source.clone();
            Ok(v)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok((vectors, dim))
}

/// Writes `features.csv` labeled by lineup outcome (1 = failure).
pub fn run_features(cfg: &PipelineConfig) -> PipelineResult<LabeledDataset> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let (vectors, dim) = lineup_features(cfg, &eval.results)?;
    let labels: Vec<bool> = eval.results.iter().map(|r| !r.success).collect();
    let mut out = OutputSet::new();
    out.add("features.csv", features_csv(&vectors, &labels, dim));
    out.commit(out_dir)?;
    Ok(LabeledDataset::new(vectors, labels)?)
}

fn labeled_features(cfg: &PipelineConfig) -> PipelineResult<LabeledDataset> {
    if let Some(p) = &cfg.paths.features {
        let (vectors, labels) = parse_features_csv(p)?;
        return Ok(LabeledDataset::new(vectors, labels)?);
    }
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let (vectors, _) = lineup_features(cfg, &eval.results)?;
    let labels = eval.results.iter().map(|r| !r.success).collect();
    Ok(LabeledDataset::new(vectors, labels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub failures: usize,
    pub training: TrainingReport,
    pub test: Metrics,
    pub cross_validation: Option<StabilityReport>,
}

fn ensemble_config(cfg: &PipelineConfig) -> EnsembleConfig {
    EnsembleConfig {
        seed: cfg.training.seed,
        models_per_cohort: cfg.training.models_per_cohort,
        threshold_override: cfg.training.threshold_override,
    }
}

/// Splits, trains the ensemble, evaluates on the test split and writes
/// `model.json` and `training_report.json`.
pub fn run_train(cfg: &PipelineConfig) -> PipelineResult<(EnsembleModel, TrainSummary)> {
    let out_dir = cfg.output_dir()?;
    let data = labeled_features(cfg)?;
    let ecfg = ensemble_config(cfg);
    let (train, val, test) = stratified_split(&data, cfg.training.split, cfg.training.seed)?;
    let (model, training) = train_ensemble(&train, &val, &ecfg)?;
    let test_metrics = evaluate_classifier(&model, &test)?;
    let cross_validation = match cfg.training.folds {
        0 => None,
        k => Some(cross_validate(&data, &ecfg, k)?),
    };
    let summary = TrainSummary {
        samples: data.len(),
        failures: data.failures(),
        training,
        test: test_metrics,
        cross_validation,
    };
    let mut out = OutputSet::new();
    out.add("model.json", serde_json::to_string(&model).map_err(Error::from)? + "\n");
    out.add("training_report.json", to_json(&summary));
    out.commit(out_dir)?;
    Ok((model, summary))
}

fn load_model(cfg: &PipelineConfig) -> PipelineResult<EnsembleModel> {
    let path = cfg.require(&cfg.paths.model, "paths.model")?;
    Ok(EnsembleModel::load(path)?)
}

fn predict(cfg: &PipelineConfig, model: &EnsembleModel, results: &[LineupResult]) -> PipelineResult<Vec<Prediction>> {
    let (vectors, _) = lineup_features(cfg, results)?;
    let probs = model.predict_many(&vectors)?;
    Ok(results
        .iter()
        .zip(probs)
        .map(|(r, p)| Prediction {
            source: r.lineup.source.clone(),
            probability: p,
            predicted_failure: p >= model.threshold,
            actual_failure: !r.success,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub threshold: f64,
    pub lineups: usize,
    pub predicted_failures: usize,
    pub metrics: Metrics,
}

fn prediction_outputs(model: &EnsembleModel, predictions: &[Prediction], out: &mut OutputSet) -> PredictionSummary {
    let summary = PredictionSummary {
        threshold: model.threshold,
        lineups: predictions.len(),
        predicted_failures: predictions.iter().filter(|p| p.predicted_failure).count(),
        metrics: prediction_metrics(predictions),
    };
    out.add("predictions.csv", predictions_csv(predictions));
    out.add("prediction_summary.json", to_json(&summary));
    summary
}

/// Classifies every lineup's source with the trained model.
pub fn run_predict(cfg: &PipelineConfig) -> PipelineResult<Vec<Prediction>> {
    let out_dir = cfg.output_dir()?;
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let predictions = predict(cfg, &model, &eval.results)?;
    let mut out = OutputSet::new();
    prediction_outputs(&model, &predictions, &mut out);
    out.commit(out_dir)?;
    Ok(predictions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestoreReport {
    pub lineups_restored: usize,
    pub invoked: usize,
    pub failed: usize,
    pub records: Vec<HookRecord>,
}

/// Runs the hook on every member image of the given lineups (never the
/// source), writing restored images to `<output>/restored/<id>.pgm`.
fn run_hook(cfg: &PipelineConfig, results: &[LineupResult], out_dir: &Path) -> PipelineResult<RestoreReport> {
    let command = cfg
        .restoration
        .command
        .clone()
        .ok_or_else(|| PipelineError::Usage("restoration.command is required for this command".into()))?;
    let hook = RestorationHook::new(command, cfg.restoration.timeout_secs)?;
    let images = cfg.require(&cfg.paths.images, "paths.images")?;
    let restored_dir = out_dir.join("restored");
    fs::create_dir_all(&restored_dir).map_err(|e| Error::io(&restored_dir, e))?;
    let members: BTreeSet<&ImageId> = results.iter().flat_map(|r| r.lineup.members()).collect();
    let members: Vec<&ImageId> = members.into_iter().collect();
    let records: Vec<HookRecord> = members
        .par_iter()
        .map(|id| HookRecord {
            image_id: (*id).clone(),
            status: hook.run(
                &images.join(format!("{id}.pgm")),
                &restored_dir.join(format!("{id}.pgm")),
            ),
        })
        .collect();
    Ok(RestoreReport {
        lineups_restored: results.len(),
        invoked: records.len(),
        failed: records.iter().filter(|r| !r.status.is_ok()).count(),
        records,
    })
}

#[derive(Debug, Clone)]
pub struct PredictRestoreOutcome {
    pub predictions: Vec<Prediction>,
    pub restore: Option<RestoreReport>,
    pub comparison: Option<ComparisonReport>,
}

/// Predicts failures, restores the members of predicted-failure lineups
/// (hook and/or externally re-embedded images) and compares ranks with fixed
/// lineup membership. Source vectors always come from the original corpus.
pub fn run_predict_and_restore(cfg: &PipelineConfig) -> PipelineResult<PredictRestoreOutcome> {
    let out_dir = cfg.output_dir()?;
    if cfg.restoration.command.is_none() && cfg.paths.restored_embeddings.is_none() {
        return Err(PipelineError::Usage(
            "restore needs restoration.command or paths.restored_embeddings".into(),
        ));
    }
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg)?;
    let eval = evaluate(cfg, &corpus)?;
    let predictions = predict(cfg, &model, &eval.results)?;
    let selected: Vec<LineupResult> = eval
        .results
        .iter()
        .zip(&predictions)
        .filter(|(_, p)| p.predicted_failure)
        .map(|(r, _)| r.clone())
        .collect();

    let mut out = OutputSet::new();
    prediction_outputs(&model, &predictions, &mut out);

    let restore = match cfg.restoration.command {
        Some(_) => Some(run_hook(cfg, &selected, out_dir)?),
        None => None,
    };
    let failed_images: HashSet<&ImageId> = restore
        .iter()
        .flat_map(|r| r.records.iter().filter(|h| !h.status.is_ok()).map(|h| &h.image_id))
        .collect();
    let failed_sources: HashSet<ImageId> = selected
        .iter()
        .filter(|r| r.lineup.members().any(|m| failed_images.contains(m)))
        .map(|r| r.lineup.source.clone())
        .collect();

    let comparison = match &cfg.paths.restored_embeddings {
        Some(p) => {
            let restored = ingest_embeddings(p, Some(corpus.dim()))?;
            let report = compare_variants_with_failures(&selected, &corpus, &restored, &failed_sources);
            Some(ComparisonReport::from_report(report))
        }
        None => None,
    };
    if let Some(r) = &restore {
        out.add("restore_report.json", to_json(r));
    }
    if let Some(c) = &comparison {
        emit_reports(c, &mut out);
    }
    out.commit(out_dir)?;

    if let Some(r) = &restore {
        if r.invoked > 0 && r.failed as f64 / r.invoked as f64 > cfg.restoration.max_failure_fraction {
            return Err(PipelineError::HookFailures {
                failed: r.failed,
                invoked: r.invoked,
                limit: cfg.restoration.max_failure_fraction,
            });
        }
    }
    Ok(PredictRestoreOutcome {
        predictions,
        restore,
        comparison,
    })
}

/// Compares every evaluated lineup against the restored embeddings, without
/// failure prediction.
pub fn run_compare(cfg: &PipelineConfig) -> PipelineResult<ComparisonReport> {
    let out_dir = cfg.output_dir()?;
    let corpus = load_corpus(cfg)?;
    let restored_path = cfg.require(&cfg.paths.restored_embeddings, "paths.restored_embeddings")?;
    let restored = ingest_embeddings(restored_path, Some(corpus.dim()))?;
    let eval = evaluate(cfg, &corpus)?;
    let report = ComparisonReport::from_report(compare_variants_with_failures(
        &eval.results,
        &corpus,
        &restored,
        &HashSet::new(),
    ));
    let mut out = OutputSet::new();
    emit_reports(&report, &mut out);
    out.commit(out_dir)?;
    Ok(report)
}

/// Re-renders the CSV tables from an existing `comparison.json`.
pub fn run_report(cfg: &PipelineConfig) -> PipelineResult<ComparisonReport> {
    let out_dir = cfg.output_dir()?;
    let path = out_dir.join("comparison.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let stored: ComparisonReport = serde_json::from_str(&text).map_err(Error::from)?;
    let report = ComparisonReport::from_report(stored.rank_changes);
    let mut out = OutputSet::new();
    emit_reports(&report, &mut out);
    out.commit(out_dir)?;
    Ok(report)
}
