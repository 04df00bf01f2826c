//! Python bindings: corpora, exact search, lineup evaluation, classical image
//! features and the failure-prediction ensemble.

use std::path::PathBuf;

use lineup_core::corpus::{self, CorpusHandle, EmbeddingRecord, ImageGray, ImageId, LandmarkSet};
use lineup_core::failpred::{self, EnsembleConfig, LabeledDataset};
use lineup_core::imgfeat::{self, FeatureVector};
use lineup_core::lineup::{self as lineups, LineupConfig};
use lineup_core::simindex::{self, ExclusionRule};
use lineup_core::Error;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_rule(rule: &str) -> PyResult<ExclusionRule> {
    match rule {
        "none" => Ok(ExclusionRule::None),
        "self" => Ok(ExclusionRule::SelfId),
        "identity" => Ok(ExclusionRule::Identity),
        other => Err(PyValueError::new_err(format!(
            "unknown exclusion rule {other:?}; expected none, self or identity"
        ))),
    }
}

fn image_id(s: &str) -> PyResult<ImageId> {
    ImageId::new(s).map_err(to_py)
}

/// Validated embedding records keyed by image id.
#[pyclass(name = "Corpus", frozen)]
struct PyCorpus {
    inner: CorpusHandle,
}

#[pymethods]
impl PyCorpus {
    #[new]
    fn new(image_ids: Vec<String>, identities: Vec<String>, vectors: Vec<Vec<f32>>) -> PyResult<Self> {
        if image_ids.len() != identities.len() || image_ids.len() != vectors.len() {
            return Err(PyValueError::new_err(
                "image_ids, identities and vectors differ in length",
            ));
        }
        let records = image_ids
            .iter()
            .zip(identities)
            .zip(vectors)
            .map(|((id, identity), v)| Ok(EmbeddingRecord::new(image_id(id)?, identity, v)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = CorpusHandle::from_records(records, None, vec![]).map_err(to_py)?;
        Ok(PyCorpus { inner })
    }

    /// Reads a JSONL or binary embedding file.
    #[staticmethod]
    #[pyo3(signature = (path, dim=None))]
    fn load(path: PathBuf, dim: Option<usize>) -> PyResult<Self> {
        let inner = corpus::ingest_embeddings(path, dim).map_err(to_py)?;
        Ok(PyCorpus { inner })
    }

    fn save_binary(&self, path: PathBuf) -> PyResult<()> {
        let m = self.inner.manifest();
        corpus::write_binary(path, m.dim, m.normalized, self.inner.records()).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn image_ids(&self) -> Vec<String> {
        self.inner.records().iter().map(|r| r.image_id.to_string()).collect()
    }

    fn identity_of(&self, image_id: &str) -> PyResult<String> {
        let id = self::image_id(image_id)?;
        self.inner
            .get(&id)
            .map(|r| r.identity_id.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown image id {image_id}")))
    }

    fn vector(&self, image_id: &str) -> PyResult<Vec<f32>> {
        let id = self::image_id(image_id)?;
        self.inner
            .get(&id)
            .map(|r| r.vector.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown image id {image_id}")))
    }
}

/// Flat index of L2-normalized vectors with exact top-k search.
#[pyclass(name = "SearchIndex", frozen)]
struct PySearchIndex {
    inner: simindex::SearchIndex,
}

#[pymethods]
impl PySearchIndex {
    #[new]
    fn new(corpus: &PyCorpus) -> PyResult<Self> {
        let inner = simindex::SearchIndex::build(&corpus.inner).map_err(to_py)?;
        Ok(PySearchIndex { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Top-k `(image_id, score)` lists for arbitrary query vectors. `identities`
    /// is needed for the `identity` exclusion rule, `query_ids` for `self`.
    #[pyo3(signature = (vectors, k, exclude="none", query_ids=None, identities=None, batch_size=256))]
    fn search(
        &self,
        py: Python<'_>,
        vectors: Vec<Vec<f32>>,
        k: usize,
        exclude: &str,
        query_ids: Option<Vec<String>>,
        identities: Option<Vec<String>>,
        batch_size: usize,
    ) -> PyResult<Vec<Vec<(String, f64)>>> {
        let rule = parse_rule(exclude)?;
        let queries = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let id = match &query_ids {
                    Some(ids) => ids
                        .get(i)
                        .cloned()
                        .ok_or_else(|| PyValueError::new_err("too few query_ids"))?,
                    None => format!("query{i}"),
                };
                Ok(simindex::Query {
                    id: image_id(&id)?,
                    identity: identities.as_ref().and_then(|ids| ids.get(i).cloned()),
                    vector: simindex::l2_normalize(v).map_err(to_py)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let results = py
            .detach(|| simindex::search_batch(&self.inner, &queries, k, rule, batch_size))
            .map_err(to_py)?;
        Ok(results
            .into_iter()
            .map(|r| r.hits.into_iter().map(|h| (h.image_id.to_string(), h.score)).collect())
            .collect())
    }

    /// Top-k for every indexed row, keyed by the row's own id and identity.
    #[pyo3(signature = (k, exclude="identity", batch_size=256))]
    fn search_all(
        &self,
        py: Python<'_>,
        k: usize,
        exclude: &str,
        batch_size: usize,
    ) -> PyResult<Vec<(String, Vec<(String, f64)>)>> {
        let rule = parse_rule(exclude)?;
        let queries: Vec<_> = (0..self.inner.len()).map(|i| self.inner.query_for_row(i)).collect();
        let results = py
            .detach(|| simindex::search_batch(&self.inner, &queries, k, rule, batch_size))
            .map_err(to_py)?;
        Ok(results
            .into_iter()
            .map(|r| {
                let hits = r.hits.into_iter().map(|h| (h.image_id.to_string(), h.score)).collect();
                (r.query_id.to_string(), hits)
            })
            .collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }
}

/// One scored lineup.
#[pyclass(name = "LineupResult", frozen, get_all)]
struct PyLineupResult {
    source: String,
    fillers: Vec<String>,
    probe: String,
    probe_rank: usize,
    success: bool,
}

#[pymethods]
impl PyLineupResult {
    fn __repr__(&self) -> String {
        format!(
            "LineupResult(source={:?}, probe={:?}, probe_rank={})",
            self.source, self.probe, self.probe_rank
        )
    }
}

#[pyclass(name = "AccuracyReport", frozen, get_all)]
struct PyAccuracyReport {
    accuracy: f64,
    evaluated: usize,
    successes: usize,
    skipped: Vec<(String, String)>,
    results: Vec<Py<PyLineupResult>>,
}

/// Builds and scores a lineup for every eligible image in the corpus.
#[pyfunction]
#[pyo3(signature = (corpus, seed=0, distinct_filler_identities=false))]
fn evaluate_lineups(
    py: Python<'_>,
    corpus: &PyCorpus,
    seed: u64,
    distinct_filler_identities: bool,
) -> PyResult<PyAccuracyReport> {
    let cfg = LineupConfig {
        distinct_filler_identities,
        ..LineupConfig::default()
    };
    let report = py
        .detach(|| {
            let index = simindex::SearchIndex::build(&corpus.inner)?;
            let sources: Vec<ImageId> = corpus.inner.records().iter().map(|r| r.image_id.clone()).collect();
            lineups::evaluate_corpus(&corpus.inner, &index, &sources, seed, &cfg)
        })
        .map_err(to_py)?;
    let results = report
        .results
        .into_iter()
        .map(|r| {
            Py::new(
                py,
                PyLineupResult {
                    source: r.lineup.source.to_string(),
                    fillers: r.lineup.fillers.iter().map(|f| f.to_string()).collect(),
                    probe: r.lineup.probe.to_string(),
                    probe_rank: r.probe_rank,
                    success: r.success,
                },
            )
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PyAccuracyReport {
        accuracy: report.accuracy,
        evaluated: report.evaluated,
        successes: report.successes,
        skipped: report
            .skipped
            .into_iter()
            .map(|s| (s.source.to_string(), s.reason))
            .collect(),
        results,
    })
}

/// The 42 classical features of a row-major 8-bit grayscale image, with
/// optional 68-point landmarks.
#[pyfunction]
#[pyo3(signature = (pixels, width, height, landmarks=None, face_count=1))]
fn classical_features(
    pixels: Vec<u8>,
    width: usize,
    height: usize,
    landmarks: Option<Vec<[f64; 2]>>,
    face_count: u32,
) -> PyResult<Vec<f64>> {
    let img = ImageGray::new(width, height, pixels).map_err(to_py)?;
    let lm = landmarks
        .map(|pts| LandmarkSet::new(ImageId::from("image"), pts, face_count))
        .transpose()
        .map_err(to_py)?;
    Ok(imgfeat::classical_features(&img, lm.as_ref()).to_vec())
}

#[pyfunction]
fn classical_feature_names() -> Vec<&'static str> {
    imgfeat::CLASSICAL_FEATURE_NAMES.to_vec()
}

#[pyfunction]
fn f1_score(precision: f64, recall: f64) -> f64 {
    failpred::f1_score(precision, recall)
}

fn feature_vectors(rows: Vec<Vec<f64>>) -> Vec<FeatureVector> {
    rows.into_iter()
        .enumerate()
        .map(|(i, values)| FeatureVector {
            image_id: ImageId::from(format!("row{i}").as_str()),
            values,
        })
        .collect()
}

/// Trained failure-prediction ensemble.
#[pyclass(name = "EnsembleModel", frozen)]
struct PyEnsembleModel {
    inner: failpred::EnsembleModel,
}

#[pymethods]
impl PyEnsembleModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = failpred::EnsembleModel::load(path).map_err(to_py)?;
        Ok(PyEnsembleModel { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim
    }

    /// Failure probabilities for raw feature rows.
    fn predict_proba(&self, py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let vectors = feature_vectors(rows);
        py.detach(|| self.inner.predict_many(&vectors)).map_err(to_py)
    }

    /// Predicted failures: probability at or above the threshold.
    fn predict(&self, py: Python<'_>, rows: Vec<Vec<f64>>) -> PyResult<Vec<bool>> {
        let t = self.inner.threshold;
        Ok(self.predict_proba(py, rows)?.into_iter().map(|p| p >= t).collect())
    }
}

/// Splits `rows` 72/8/20 (stratified), trains the ensemble and returns it with
/// test-set metrics `{precision, recall, f1, accuracy}`.
#[pyfunction]
#[pyo3(signature = (rows, labels, seed=0, models_per_cohort=10))]
fn train_ensemble(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    seed: u64,
    models_per_cohort: usize,
) -> PyResult<(PyEnsembleModel, Vec<(String, f64)>)> {
    let data = LabeledDataset::new(feature_vectors(rows), labels).map_err(to_py)?;
    let cfg = EnsembleConfig {
        seed,
        models_per_cohort,
        threshold_override: None,
    };
    let (model, m) = py
        .detach(|| {
            let (train, val, test) = failpred::stratified_split(&data, failpred::DEFAULT_SPLIT, seed)?;
            let (model, _) = failpred::train_ensemble(&train, &val, &cfg)?;
            let m = failpred::evaluate_classifier(&model, &test)?;
            Ok::<_, Error>((model, m))
        })
        .map_err(to_py)?;
    let metrics = vec![
        ("precision".to_string(), m.precision),
        ("recall".to_string(), m.recall),
        ("f1".to_string(), m.f1),
        ("accuracy".to_string(), m.accuracy),
    ];
    Ok((PyEnsembleModel { inner: model }, metrics))
}

#[pymodule]
fn lineup_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PySearchIndex>()?;
    m.add_class::<PyLineupResult>()?;
    m.add_class::<PyAccuracyReport>()?;
    m.add_class::<PyEnsembleModel>()?;
    m.add_function(wrap_pyfunction!(evaluate_lineups, m)?)?;
    m.add_function(wrap_pyfunction!(classical_features, m)?)?;
    m.add_function(wrap_pyfunction!(classical_feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(train_ensemble, m)?)?;
    Ok(())
}
